//! Line voltage-stability index, reactive loadability sweeps and the
//! VSI-derived placement scores.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{connectivity, BusId, BusKind, Network};
use crate::observability::{coverage, Placement};
use crate::power_flow::{
    line_receiving_q, receiving_end, solve, solve_from, LoadOverride, PowerFlowConfig, PowerFlowSolution,
};

/// `4 z^2 q_n / (v_m^2 x)`.
pub fn vsi(z: f64, x: f64, q_n: f64, v_m: f64) -> Result<f64> {
    if x == 0.0 || v_m == 0.0 {
        return Err(Error::Domain(format!("vsi needs x != 0 and v_m != 0 (x = {x}, v_m = {v_m})")));
    }
    Ok(4.0 * z * z * q_n / (v_m * v_m * x))
}

/// VSI of branch `k` at a converged operating point.
pub fn line_vsi(net: &Network, sol: &PowerFlowSolution, k: usize) -> Result<f64> {
    let br = net.branch(k)?;
    let q_n = line_receiving_q(net, sol, k)?;
    let (send, _) = receiving_end(net, sol, k)?;
    vsi(br.impedance(), br.x, q_n, sol.v_mag[send])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStrategy {
    /// Add `step` until the next point fails.
    Linear,
    /// Doubling then bisection over multiples of `step`; lands on the same grid
    /// point as `Linear` whenever stability is monotone in the extra load.
    #[default]
    Galloping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Extra reactive absorption per step, per-unit.
    pub step: f64,
    pub strategy: SweepStrategy,
    /// Halve the last step once after the first failure.
    pub refine: bool,
    /// Upper bound on the extra absorption explored, per-unit.
    pub max_extra_q: f64,
    /// Start each solve from the last accepted point instead of a flat start.
    pub warm_start: bool,
    pub power_flow: PowerFlowConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            step: 0.005,
            strategy: SweepStrategy::Galloping,
            refine: true,
            max_extra_q: 25.0,
            warm_start: false,
            power_flow: PowerFlowConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn with_step(step: f64) -> Self {
        Self { step, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsiRecord {
    pub load_bus: BusId,
    /// Largest accepted extra reactive absorption, per-unit.
    pub q_max: f64,
    pub vsi_at_limit: f64,
    pub critical_line: (BusId, BusId),
    pub critical_branch: usize,
    /// Largest VSI seen on each incident branch over the accepted points.
    #[serde(skip)]
    pub incident_max: Vec<(usize, f64)>,
    /// `(extra Q, largest incident VSI)` at every accepted point, in order.
    #[serde(skip)]
    pub trace: Vec<(f64, f64)>,
}

struct SweepPoint {
    extra: f64,
    /// (branch, VSI) for every incident branch.
    vsi: Vec<(usize, f64)>,
}

struct Sweeper<'a> {
    net: &'a Network,
    bus: usize,
    incident: Vec<usize>,
    base: LoadOverride,
    cfg: &'a SweepConfig,
    /// Last accepted operating point.
    warm: RefCell<Option<PowerFlowSolution>>,
}

impl Sweeper<'_> {
    /// Evaluates the point with `extra` added absorption; `None` if it diverges
    /// or any incident VSI exceeds 1.
    fn point(&self, extra: f64) -> Result<Option<SweepPoint>> {
        self.evaluate(extra, true)
    }

    /// With `guard` off, a converged point is kept whatever its VSI.
    fn evaluate(&self, extra: f64, guard: bool) -> Result<Option<SweepPoint>> {
        let mut load = self.base.clone();
        load.qd[self.bus] += extra;
        let start = if self.cfg.warm_start { self.warm.borrow().clone() } else { None };
        let sol = solve_from(self.net, Some(&load), &self.cfg.power_flow, start.as_ref())?;
        if !sol.converged {
            return Ok(None);
        }
        let mut vsi = Vec::with_capacity(self.incident.len());
        for &k in &self.incident {
            let v = line_vsi(self.net, &sol, k)?;
            if guard && !(v <= 1.0) {
                return Ok(None);
            }
            vsi.push((k, v));
        }
        *self.warm.borrow_mut() = Some(sol);
        Ok(Some(SweepPoint { extra, vsi }))
    }

    fn run(&self) -> Result<Vec<SweepPoint>> {
        let step = self.cfg.step;
        let max_steps = (self.cfg.max_extra_q / step).floor() as u64;
        let mut accepted: Vec<SweepPoint> = Vec::new();
        let mut last_ok: u64 = 0;
        let mut first_bad: Option<u64> = None;
        match self.cfg.strategy {
            SweepStrategy::Linear => {
                for s in 1..=max_steps {
                    match self.point(s as f64 * step)? {
                        Some(p) => {
                            accepted.push(p);
                            last_ok = s;
                        }
                        None => {
                            first_bad = Some(s);
                            break;
                        }
                    }
                }
            }
            SweepStrategy::Galloping => {
                let mut hi = 1u64;
                let mut best: Option<SweepPoint> = None;
                loop {
                    if last_ok == max_steps {
                        break;
                    }
                    hi = hi.min(max_steps);
                    match self.point(hi as f64 * step)? {
                        Some(p) => {
                            last_ok = hi;
                            best = Some(p);
                            hi *= 2;
                        }
                        None => {
                            first_bad = Some(hi);
                            break;
                        }
                    }
                }
                if let Some(mut bad) = first_bad {
                    while bad - last_ok > 1 {
                        let mid = last_ok + (bad - last_ok) / 2;
                        match self.point(mid as f64 * step)? {
                            Some(p) => {
                                last_ok = mid;
                                best = Some(p);
                            }
                            None => bad = mid,
                        }
                    }
                    first_bad = Some(bad);
                }
                accepted.extend(best);
            }
        }
        if self.cfg.refine && first_bad.is_some() {
            if let Some(p) = self.point((last_ok as f64 + 0.5) * step)? {
                accepted.push(p);
            }
        }
        if accepted.is_empty() {
            // the base point itself, even when it already trips the guard
            if let Some(p) = self.evaluate(0.0, false)? {
                accepted.push(p);
            } else {
                let vsi = Vec::new();
                accepted.push(SweepPoint { extra: 0.0, vsi });
            }
        }
        Ok(accepted)
    }
}

/// Raises reactive absorption at `bus` until the power flow diverges or an
/// incident line's VSI would exceed 1. A PV bus without active generation
/// (synchronous condenser) is held at its base-case reactive output.
pub fn loadability_sweep(net: &Network, bus: BusId, cfg: &SweepConfig) -> Result<VsiRecord> {
    if !(cfg.step > 0.0) {
        return Err(Error::Invalid("sweep step must be positive".into()));
    }
    let i = net.index_of(bus)?;
    if !net.load_buses().contains(&i) {
        return Err(Error::Invalid(format!("bus {bus} is not a load bus")));
    }
    let base_sol = solve(net, None, &cfg.power_flow)?;
    if !base_sol.converged {
        return Err(Error::NotConverged("base case".into()));
    }
    let mut base = LoadOverride::base(net);
    if net.buses()[i].kind == BusKind::Pv {
        base.fixed_q.push((i, base_sol.q_injection[i] + base.qd[i]));
    }
    let incident = net.incident_branches(i);
    let sweeper = Sweeper { net, bus: i, incident, base, cfg, warm: RefCell::new(None) };
    let points = sweeper.run()?;
    let last = points.last().expect("run returns at least one point");
    let mut incident_max: Vec<(usize, f64)> = sweeper.incident.iter().map(|&k| (k, f64::NEG_INFINITY)).collect();
    for p in &points {
        for (slot, &(_, v)) in incident_max.iter_mut().zip(&p.vsi) {
            slot.1 = slot.1.max(v);
        }
    }
    incident_max.retain(|(_, v)| v.is_finite());
    let trace =
        points.iter().map(|p| (p.extra, p.vsi.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max))).collect();
    let (critical_branch, vsi_at_limit) = last
        .vsi
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .ok_or_else(|| Error::Invalid(format!("bus {bus} has no in-service incident line")))?;
    let br = net.branch(critical_branch)?;
    Ok(VsiRecord {
        load_bus: bus,
        q_max: last.extra,
        vsi_at_limit,
        critical_line: (br.from, br.to),
        critical_branch,
        incident_max,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsiRanking {
    /// Ascending by `q_max`, ties to the lower bus id.
    pub records: Vec<VsiRecord>,
    pub critical_buses: Vec<BusId>,
    /// Per branch id: the largest VSI over the base case and every sweep
    /// touching the branch.
    pub vsi_by_line: Vec<f64>,
}

impl VsiRanking {
    pub fn critical_indices(&self, net: &Network) -> Result<Vec<usize>> {
        self.critical_buses.iter().map(|&b| net.index_of(b)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("load_bus,q_max,vsi,critical_line\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.4},{:.4},{}-{}\n",
                r.load_bus, r.q_max, r.vsi_at_limit, r.critical_line.0, r.critical_line.1
            ));
        }
        out
    }
}

/// Sweeps every load bus, ranks by ascending loadability and keeps the first `k`.
pub fn rank_critical(net: &Network, cfg: &SweepConfig, k: usize) -> Result<VsiRanking> {
    let buses = net.load_buses();
    if k > buses.len() {
        return Err(Error::Invalid(format!("k = {k} exceeds the {} load buses", buses.len())));
    }
    let base_sol = solve(net, None, &cfg.power_flow)?;
    if !base_sol.converged {
        return Err(Error::NotConverged("base case".into()));
    }
    let results = crate::par_map(&buses, |&i| loadability_sweep(net, net.bus_id(i), cfg));
    let mut records = results.into_iter().collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.q_max.total_cmp(&b.q_max).then(a.load_bus.cmp(&b.load_bus)));

    let mut vsi_by_line = vec![0.0; net.branches().len()];
    for (k, slot) in vsi_by_line.iter_mut().enumerate() {
        if net.branches()[k].in_service() {
            *slot = line_vsi(net, &base_sol, k)?;
        }
    }
    for r in &records {
        for &(k, v) in &r.incident_max {
            vsi_by_line[k] = vsi_by_line[k].max(v);
        }
    }
    let critical_buses = records.iter().take(k).map(|r| r.load_bus).collect();
    Ok(VsiRanking { records, critical_buses, vsi_by_line })
}

/// Sum of incident-line VSI per bus (each line credited to both endpoints).
pub fn per_bus_vsi(net: &Network, vsi_by_line: &[f64]) -> Result<Vec<f64>> {
    if vsi_by_line.len() != net.branches().len() {
        return Err(Error::Dimension { expected: net.branches().len(), got: vsi_by_line.len() });
    }
    let mut out = vec![0.0; net.bus_count()];
    for (k, br) in net.branches().iter().enumerate() {
        if br.in_service() {
            let (f, t) = net.endpoints(k);
            out[f] += vsi_by_line[k];
            out[t] += vsi_by_line[k];
        }
    }
    Ok(out)
}

/// `sum over PMU buses j of sum over lines incident to j of VSI`.
pub fn of3_score(net: &Network, p: &Placement, vsi_by_line: &[f64]) -> Result<f64> {
    if p.len() != net.bus_count() {
        return Err(Error::Dimension { expected: net.bus_count(), got: p.len() });
    }
    let per_bus = per_bus_vsi(net, vsi_by_line)?;
    Ok(p.indices().into_iter().map(|j| per_bus[j]).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsoiEntry {
    pub bus: BusId,
    pub vsoi: u32,
    /// Outside `2 ..= degree + 1`.
    pub violated: bool,
}

/// VSOI of each critical bus (its direct coverage count) and
/// `WSOI = sum_i f_i + sum_critical VSOI`. `critical` holds internal indices.
pub fn vsoi_wsoi(net: &Network, p: &Placement, critical: &[usize]) -> Result<(Vec<VsoiEntry>, u64)> {
    let f = coverage(&connectivity(net), p)?;
    let degrees = net.branch_degrees();
    let mut entries = Vec::with_capacity(critical.len());
    let mut wsoi = f.total();
    for &c in critical {
        if c >= net.bus_count() {
            return Err(Error::UnknownBus(c));
        }
        let v = f.0[c];
        wsoi += u64::from(v);
        entries.push(VsoiEntry { bus: net.bus_id(c), vsoi: v, violated: v < 2 || v as usize > degrees[c] + 1 });
    }
    Ok((entries, wsoi))
}
