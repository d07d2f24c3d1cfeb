//! Newton-Raphson AC power flow in polar coordinates (dense, per-unit).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BusKind, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowConfig {
    /// Largest accepted absolute P/Q mismatch, per-unit.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Start from 1.0 pu / 0 rad (regulated buses at their setpoint) instead of the case voltages.
    pub flat_start: bool,
    /// Convert PV buses to PQ when their reactive output leaves `[qmin, qmax]`.
    pub enforce_q_limits: bool,
}

impl Default for PowerFlowConfig {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 30, flat_start: true, enforce_q_limits: false }
    }
}

impl PowerFlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Invalid("power flow tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Replacement demand (per-unit, indexed by internal bus) plus PV buses forced
/// to behave as PQ buses with a fixed generator reactive output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadOverride {
    pub pd: Vec<f64>,
    pub qd: Vec<f64>,
    /// `(bus index, generator Q in pu)`
    pub fixed_q: Vec<(usize, f64)>,
}

impl LoadOverride {
    /// The case demand, unchanged.
    pub fn base(net: &Network) -> Self {
        let n = net.bus_count();
        Self {
            pd: (0..n).map(|i| net.load_p(i)).collect(),
            qd: (0..n).map(|i| net.load_q(i)).collect(),
            fixed_q: Vec::new(),
        }
    }
}

/// Power injected into a branch at each end, per-unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFlow {
    pub p_from: f64,
    pub q_from: f64,
    pub p_to: f64,
    pub q_to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
    pub p_injection: Vec<f64>,
    pub q_injection: Vec<f64>,
    /// Indexed by branch id; out-of-service branches carry zero flow.
    pub line_flows: Vec<LineFlow>,
    pub converged: bool,
    pub iterations: usize,
    /// Infinity-norm mismatch before each Newton step and at exit.
    pub mismatch_history: Vec<f64>,
}

impl PowerFlowSolution {
    pub fn max_mismatch(&self) -> f64 {
        self.mismatch_history.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Series and shunt losses over all branches, per-unit.
    pub fn branch_losses(&self) -> f64 {
        self.line_flows.iter().map(|f| f.p_from + f.p_to).sum()
    }

    /// Bus table and branch-flow table as CSV (bus numbers external).
    pub fn to_csv(&self, net: &Network) -> String {
        let mut out = String::from("bus,v_mag,v_ang_rad,p_inj,q_inj\n");
        for i in 0..net.bus_count() {
            out.push_str(&format!(
                "{},{:.8},{:.8},{:.8},{:.8}\n",
                net.bus_id(i),
                self.v_mag[i],
                self.v_ang[i],
                self.p_injection[i],
                self.q_injection[i]
            ));
        }
        out.push_str("\nbranch,from,to,p_from,q_from,p_to,q_to\n");
        for (k, br) in net.branches().iter().enumerate() {
            let f = self.line_flows[k];
            out.push_str(&format!(
                "{},{},{},{:.8},{:.8},{:.8},{:.8}\n",
                k + 1,
                br.from,
                br.to,
                f.p_from,
                f.q_from,
                f.p_to,
                f.q_to
            ));
        }
        out
    }
}

/// Per-branch two-port admittances `(y_ff, y_ft, y_tf, y_tt)`.
fn branch_admittance(net: &Network, k: usize) -> [Complex64; 4] {
    let br = &net.branches()[k];
    let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
    let bc = Complex64::new(0.0, br.b / 2.0);
    let ratio = if br.ratio == 0.0 { 1.0 } else { br.ratio };
    let tap = Complex64::from_polar(ratio, br.angle.to_radians());
    let ytt = ys + bc;
    let yff = ytt / (tap * tap.conj());
    let yft = -ys / tap.conj();
    let ytf = -ys / tap;
    [yff, yft, ytf, ytt]
}

/// Bus admittance matrix in per-unit.
pub fn ybus(net: &Network) -> DMatrix<Complex64> {
    let n = net.bus_count();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for k in 0..net.branches().len() {
        if !net.branches()[k].in_service() {
            continue;
        }
        let (f, t) = net.endpoints(k);
        let [yff, yft, ytf, ytt] = branch_admittance(net, k);
        y[(f, f)] += yff;
        y[(f, t)] += yft;
        y[(t, f)] += ytf;
        y[(t, t)] += ytt;
    }
    for (i, bus) in net.buses().iter().enumerate() {
        y[(i, i)] += Complex64::new(bus.gs, bus.bs) / net.base_mva();
    }
    y
}

fn complex_voltages(vm: &[f64], va: &[f64]) -> DVector<Complex64> {
    DVector::from_iterator(vm.len(), vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)))
}

/// Solves the case demand (or `load_override`). Divergence is reported through
/// `converged = false`, never as an error.
pub fn solve(net: &Network, load_override: Option<&LoadOverride>, cfg: &PowerFlowConfig) -> Result<PowerFlowSolution> {
    solve_from(net, load_override, cfg, None)
}

/// Like [`solve`], starting Newton from a previous solution's voltages
/// (regulated magnitudes stay at their setpoints).
pub fn solve_from(
    net: &Network,
    load_override: Option<&LoadOverride>,
    cfg: &PowerFlowConfig,
    start: Option<&PowerFlowSolution>,
) -> Result<PowerFlowSolution> {
    cfg.validate()?;
    let n = net.bus_count();
    let base = LoadOverride::base(net);
    let load = load_override.unwrap_or(&base);
    if load.pd.len() != n || load.qd.len() != n {
        return Err(Error::Dimension { expected: n, got: load.pd.len().min(load.qd.len()) });
    }
    let mut kind: Vec<BusKind> = net.buses().iter().map(|b| b.kind).collect();
    let mut qgen: Vec<f64> = (0..n).map(|i| net.gen_q(i)).collect();
    for &(i, q) in &load.fixed_q {
        if i >= n {
            return Err(Error::UnknownBus(i));
        }
        if kind[i] == BusKind::Slack {
            return Err(Error::Invalid("the slack bus cannot be fixed as PQ".into()));
        }
        kind[i] = BusKind::Pq;
        qgen[i] = q;
    }
    let y = ybus(net);
    if let Some(st) = start {
        if st.v_mag.len() != n || st.v_ang.len() != n {
            return Err(Error::Dimension { expected: n, got: st.v_mag.len().min(st.v_ang.len()) });
        }
    }
    let mut vm: Vec<f64> = (0..n)
        .map(|i| match (kind[i], start) {
            (BusKind::Pq, Some(st)) => st.v_mag[i],
            (BusKind::Pq, None) if cfg.flat_start => 1.0,
            (BusKind::Pq, None) => net.buses()[i].vm,
            _ => net.voltage_setpoint(i),
        })
        .collect();
    let mut va: Vec<f64> = match start {
        Some(st) => st.v_ang.clone(),
        None if cfg.flat_start => vec![0.0; n],
        None => net.buses().iter().map(|b| b.va.to_radians()).collect(),
    };
    let slack_angle = va[net.slack_index()];
    va.iter_mut().for_each(|a| *a -= slack_angle);

    let mut total_iterations = 0;
    let mut history = Vec::new();
    let mut converged;
    loop {
        let p_spec: Vec<f64> = (0..n).map(|i| net.gen_p(i) - load.pd[i]).collect();
        let q_spec: Vec<f64> = (0..n).map(|i| qgen[i] - load.qd[i]).collect();
        let (ok, iters) = newton(&y, &kind, &p_spec, &q_spec, &mut vm, &mut va, cfg, &mut history);
        total_iterations += iters;
        converged = ok;
        if !ok || !cfg.enforce_q_limits {
            break;
        }
        // PV -> PQ switching at the violated limit
        let v = complex_voltages(&vm, &va);
        let s = v.component_mul(&(&y * &v).map(|c| c.conj()));
        let mut switched = false;
        for i in 0..n {
            if kind[i] != BusKind::Pv {
                continue;
            }
            let Some(g) = net.buses()[i].generator.as_ref() else { continue };
            let q = s[i].im + load.qd[i];
            let (qmax, qmin) = (g.qmax / net.base_mva(), g.qmin / net.base_mva());
            if q > qmax + cfg.tolerance || q < qmin - cfg.tolerance {
                kind[i] = BusKind::Pq;
                qgen[i] = q.clamp(qmin, qmax);
                switched = true;
            }
        }
        if !switched {
            break;
        }
    }

    let v = complex_voltages(&vm, &va);
    let s = v.component_mul(&(&y * &v).map(|c| c.conj()));
    let line_flows = (0..net.branches().len())
        .map(|k| {
            if !net.branches()[k].in_service() {
                return LineFlow { p_from: 0.0, q_from: 0.0, p_to: 0.0, q_to: 0.0 };
            }
            let (f, t) = net.endpoints(k);
            let [yff, yft, ytf, ytt] = branch_admittance(net, k);
            let sf = v[f] * (yff * v[f] + yft * v[t]).conj();
            let st = v[t] * (ytf * v[f] + ytt * v[t]).conj();
            LineFlow { p_from: sf.re, q_from: sf.im, p_to: st.re, q_to: st.im }
        })
        .collect();
    Ok(PowerFlowSolution {
        v_mag: vm,
        v_ang: va,
        p_injection: s.iter().map(|c| c.re).collect(),
        q_injection: s.iter().map(|c| c.im).collect(),
        line_flows,
        converged,
        iterations: total_iterations,
        mismatch_history: history,
    })
}

#[allow(clippy::too_many_arguments)]
fn newton(
    y: &DMatrix<Complex64>,
    kind: &[BusKind],
    p_spec: &[f64],
    q_spec: &[f64],
    vm: &mut [f64],
    va: &mut [f64],
    cfg: &PowerFlowConfig,
    history: &mut Vec<f64>,
) -> (bool, usize) {
    let n = kind.len();
    let pvpq: Vec<usize> = (0..n).filter(|&i| kind[i] != BusKind::Slack).collect();
    let pq: Vec<usize> = (0..n).filter(|&i| kind[i] == BusKind::Pq).collect();
    let (npv, npq) = (pvpq.len(), pq.len());
    for it in 0..=cfg.max_iterations {
        let v = complex_voltages(vm, va);
        let ibus = y * &v;
        let s = v.component_mul(&ibus.map(|c| c.conj()));
        let mut mis = DVector::zeros(npv + npq);
        for (r, &i) in pvpq.iter().enumerate() {
            mis[r] = s[i].re - p_spec[i];
        }
        for (r, &i) in pq.iter().enumerate() {
            mis[npv + r] = s[i].im - q_spec[i];
        }
        let norm = mis.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        history.push(norm);
        if !norm.is_finite() {
            return (false, it);
        }
        if norm <= cfg.tolerance {
            return (true, it);
        }
        if it == cfg.max_iterations {
            return (false, it);
        }
        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)); dS/dVm = diag(V) conj(Y diag(V/|V|)) + diag(conj(I) V/|V|)
        let unit: Vec<Complex64> = v.iter().map(|c| c / c.norm()).collect();
        let j_unit = Complex64::new(0.0, 1.0);
        let ds_dva = |i: usize, k: usize| -> Complex64 {
            let mut term = -y[(i, k)] * v[k];
            if i == k {
                term += ibus[i];
            }
            j_unit * v[i] * term.conj()
        };
        let ds_dvm = |i: usize, k: usize| -> Complex64 {
            let mut val = v[i] * (y[(i, k)] * unit[k]).conj();
            if i == k {
                val += ibus[i].conj() * unit[i];
            }
            val
        };
        let dim = npv + npq;
        let mut jac = DMatrix::zeros(dim, dim);
        for (r, &i) in pvpq.iter().enumerate() {
            for (c, &k) in pvpq.iter().enumerate() {
                jac[(r, c)] = ds_dva(i, k).re;
            }
            for (c, &k) in pq.iter().enumerate() {
                jac[(r, npv + c)] = ds_dvm(i, k).re;
            }
        }
        for (r, &i) in pq.iter().enumerate() {
            for (c, &k) in pvpq.iter().enumerate() {
                jac[(npv + r, c)] = ds_dva(i, k).im;
            }
            for (c, &k) in pq.iter().enumerate() {
                jac[(npv + r, npv + c)] = ds_dvm(i, k).im;
            }
        }
        let Some(dx) = jac.lu().solve(&(-mis)) else {
            return (false, it);
        };
        for (r, &i) in pvpq.iter().enumerate() {
            va[i] += dx[r];
        }
        for (r, &i) in pq.iter().enumerate() {
            vm[i] += dx[npv + r];
        }
    }
    (false, cfg.max_iterations)
}

/// `(sending, receiving)` internal bus indices of branch `k`: the receiving end
/// imports active power; a tie goes to the higher-numbered bus.
pub fn receiving_end(net: &Network, sol: &PowerFlowSolution, k: usize) -> Result<(usize, usize)> {
    let br = net.branch(k)?;
    let (f, t) = net.endpoints(k);
    let flow = sol.line_flows[k];
    let to_receives =
        if (flow.p_to - flow.p_from).abs() <= 1e-12 { br.to.0 > br.from.0 } else { flow.p_to < flow.p_from };
    Ok(if to_receives { (f, t) } else { (t, f) })
}

/// Reactive power delivered into the receiving bus of branch `k`, per-unit.
pub fn line_receiving_q(net: &Network, sol: &PowerFlowSolution, k: usize) -> Result<f64> {
    if !sol.converged {
        return Err(Error::NotConverged("line_receiving_q needs a converged solution".into()));
    }
    let (_, recv) = receiving_end(net, sol, k)?;
    let (f, _) = net.endpoints(k);
    let flow = sol.line_flows[k];
    Ok(if recv == f { -flow.q_from } else { -flow.q_to })
}
