//! Placement evaluation: coverage vectors, zero-injection inference,
//! redundancy and the N-1 resilience predicates.
//!
//! Zero-injection inference is the Kirchhoff rule applied to a fixpoint: when
//! every member of a ZIB's closed neighbourhood but one is observed, the last
//! one becomes observed. The closure is monotone, so the result does not
//! depend on the order in which ZIBs are visited.

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{connectivity, contingency_connectivity, BusId, ConnectivityMatrix, Network};

/// Binary PMU placement over internal bus indices, optionally carrying
/// per-bus installation costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    buses: FixedBitSet,
    cost_weights: Option<Vec<f64>>,
}

impl Placement {
    pub fn empty(n: usize) -> Self {
        Self { buses: FixedBitSet::with_capacity(n), cost_weights: None }
    }

    pub fn all(n: usize) -> Self {
        let mut buses = FixedBitSet::with_capacity(n);
        buses.insert_range(..);
        Self { buses, cost_weights: None }
    }

    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Self::empty(n);
        for i in indices {
            p.buses.insert(i);
        }
        p
    }

    pub fn from_bits(x: &[bool]) -> Self {
        Self::from_indices(x.len(), x.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i))
    }

    pub fn from_bitset(buses: FixedBitSet) -> Self {
        Self { buses, cost_weights: None }
    }

    /// Placement from external bus numbers.
    pub fn from_bus_ids(net: &Network, ids: &[usize]) -> Result<Self> {
        let mut p = Self::empty(net.bus_count());
        for &id in ids {
            p.buses.insert(net.index_of(BusId(id))?);
        }
        Ok(p)
    }

    pub fn with_cost_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: weights.len() });
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::Invalid(format!("cost weight {w} is not strictly positive")));
        }
        self.cost_weights = Some(weights);
        Ok(self)
    }

    pub fn cost_weights(&self) -> Option<&[f64]> {
        self.cost_weights.as_deref()
    }

    /// Number of buses the placement is defined over.
    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_clear()
    }

    /// Number of installed PMUs.
    pub fn count(&self) -> usize {
        self.buses.count_ones(..)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.buses.contains(i)
    }

    pub fn insert(&mut self, i: usize) {
        self.buses.insert(i);
    }

    pub fn remove(&mut self, i: usize) {
        self.buses.set(i, false);
    }

    pub fn indices(&self) -> Vec<usize> {
        self.buses.ones().collect()
    }

    pub fn bus_ids(&self, net: &Network) -> Vec<BusId> {
        self.buses.ones().map(|i| net.bus_id(i)).collect()
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.buses
    }

    pub fn x(&self) -> Vec<u8> {
        (0..self.len()).map(|i| u8::from(self.contains(i))).collect()
    }

    /// Sum of `w_j x_j`, or the PMU count when no weights are attached.
    pub fn cost(&self) -> f64 {
        match &self.cost_weights {
            Some(w) => self.buses.ones().map(|i| w[i]).sum(),
            None => self.count() as f64,
        }
    }
}

/// Per-bus count of PMUs observing the bus directly (`f_i`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageVector(pub Vec<u32>);

impl CoverageVector {
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&f| u64::from(f)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityVerdict {
    pub observed: Vec<bool>,
    pub fully_observable: bool,
    pub fraction: f64,
}

impl ObservabilityVerdict {
    fn from_set(set: &FixedBitSet) -> Self {
        let n = set.len();
        let observed: Vec<bool> = (0..n).map(|i| set.contains(i)).collect();
        let count = set.count_ones(..);
        Self { observed, fully_observable: count == n, fraction: if n == 0 { 1.0 } else { count as f64 / n as f64 } }
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }
}

/// Which line outages the N-1 line predicate enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageConvention {
    /// Every in-service branch, including ones whose loss islands a bus.
    #[default]
    AllLines,
    /// Skip branches whose outage splits the network (pendant lines and other bridges).
    SkipIslanding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResilienceOptions {
    pub use_zib: bool,
    pub n1_pmu_loss: bool,
    pub n1_line_outage: bool,
    #[serde(default)]
    pub outage_convention: OutageConvention,
}

impl ResilienceOptions {
    pub const BASE: Self = Self {
        use_zib: false,
        n1_pmu_loss: false,
        n1_line_outage: false,
        outage_convention: OutageConvention::AllLines,
    };

    pub const ZIB: Self = Self { use_zib: true, ..Self::BASE };

    pub const PMU_LOSS: Self = Self { use_zib: true, n1_pmu_loss: true, ..Self::BASE };

    pub const LINE_OUTAGE: Self = Self { use_zib: true, n1_line_outage: true, ..Self::BASE };

    pub fn with_convention(mut self, convention: OutageConvention) -> Self {
        self.outage_convention = convention;
        self
    }
}

/// Closed neighbourhoods and ZIB closures for one topology (base or a line outage).
#[derive(Debug, Clone)]
pub(crate) struct Topology {
    pub nbhd: Vec<FixedBitSet>,
    pub zib_closures: Vec<(usize, FixedBitSet)>,
}

impl Topology {
    fn new(conn: &ConnectivityMatrix, zibs: &[usize]) -> Self {
        let nbhd = conn.rows().to_vec();
        let zib_closures = zibs.iter().map(|&z| (z, nbhd[z].clone())).collect();
        Self { nbhd, zib_closures }
    }

    /// Direct coverage of `pmus` (minus `lost`), extended by ZIB inference when
    /// `use_zib` holds.
    pub fn observe(&self, pmus: &FixedBitSet, lost: Option<usize>, use_zib: bool) -> FixedBitSet {
        let mut obs = FixedBitSet::with_capacity(self.nbhd.len());
        for p in pmus.ones() {
            if Some(p) != lost {
                obs.union_with(&self.nbhd[p]);
            }
        }
        if use_zib {
            self.infer(&mut obs);
        }
        obs
    }

    pub fn infer(&self, obs: &mut FixedBitSet) {
        loop {
            let mut changed = false;
            for (_, closure) in &self.zib_closures {
                let mut missing = closure.difference(obs);
                let single = match (missing.next(), missing.next()) {
                    (Some(only), None) => Some(only),
                    _ => None,
                };
                if let Some(only) = single {
                    obs.insert(only);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
}

/// A contingency scenario the resilience predicates must survive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scenario {
    Base,
    /// Index into `Evaluator::outages`.
    LineOut(usize),
    /// PMU at this internal bus is lost.
    PmuLoss(usize),
}

/// Precomputed evaluation context for one network and option set.
#[derive(Debug, Clone)]
pub struct Evaluator {
    n: usize,
    opts: ResilienceOptions,
    pub(crate) base: Topology,
    /// (branch id, topology with that branch out of service)
    pub(crate) outages: Vec<(usize, Topology)>,
}

impl Evaluator {
    pub fn new(net: &Network, opts: ResilienceOptions) -> Self {
        let zibs: Vec<usize> = if opts.use_zib {
            net.buses().iter().enumerate().filter(|(_, b)| b.is_zib).map(|(i, _)| i).collect()
        } else {
            Vec::new()
        };
        let base = Topology::new(&connectivity(net), &zibs);
        let mut outages = Vec::new();
        if opts.n1_line_outage {
            for br in net.in_service_branches() {
                if opts.outage_convention == OutageConvention::SkipIslanding && net.is_islanding_outage(br.id) {
                    continue;
                }
                let conn = contingency_connectivity(net, br.id).expect("in-service branch");
                outages.push((br.id, Topology::new(&conn, &zibs)));
            }
        }
        Self { n: net.bus_count(), opts, base, outages }
    }

    pub fn bus_count(&self) -> usize {
        self.n
    }

    pub fn options(&self) -> ResilienceOptions {
        self.opts
    }

    pub(crate) fn topology(&self, s: Scenario) -> &Topology {
        match s {
            Scenario::LineOut(k) => &self.outages[k].1,
            Scenario::Base | Scenario::PmuLoss(_) => &self.base,
        }
    }

    pub(crate) fn observe(&self, s: Scenario, pmus: &FixedBitSet) -> FixedBitSet {
        let lost = match s {
            Scenario::PmuLoss(p) => Some(p),
            _ => None,
        };
        self.topology(s).observe(pmus, lost, self.opts.use_zib)
    }

    /// Scenarios implied by the options for a given PMU set.
    pub(crate) fn scenarios(&self, pmus: &FixedBitSet) -> Vec<Scenario> {
        let mut out = vec![Scenario::Base];
        out.extend((0..self.outages.len()).map(Scenario::LineOut));
        if self.opts.n1_pmu_loss {
            out.extend(pmus.ones().map(Scenario::PmuLoss));
        }
        out
    }

    pub fn observed_base(&self, pmus: &FixedBitSet) -> FixedBitSet {
        self.observe(Scenario::Base, pmus)
    }

    /// Whether the placement satisfies every requirement in the options.
    pub fn is_feasible(&self, pmus: &FixedBitSet) -> bool {
        if self.opts.n1_pmu_loss && pmus.is_clear() {
            return false;
        }
        self.scenarios(pmus).into_iter().all(|s| self.observe(s, pmus).is_full())
    }

    /// Unobserved base-case buses plus failed contingency scenarios.
    pub fn violations(&self, pmus: &FixedBitSet) -> usize {
        let base_missing = self.n - self.observed_base(pmus).count_ones(..);
        let mut failed = 0;
        for s in self.scenarios(pmus).into_iter().skip(1) {
            if !self.observe(s, pmus).is_full() {
                failed += 1;
            }
        }
        if self.opts.n1_pmu_loss && pmus.is_clear() {
            failed += 1;
        }
        base_missing + failed
    }

    /// Direct coverage plus one for every bus observed only through ZIB
    /// inference (base topology).
    pub fn effective_redundancy(&self, pmus: &FixedBitSet) -> u64 {
        let direct: u64 = (0..self.n).map(|i| self.base.nbhd[i].intersection(pmus).count() as u64).sum();
        if !self.opts.use_zib {
            return direct;
        }
        let mut covered = FixedBitSet::with_capacity(self.n);
        for p in pmus.ones() {
            covered.union_with(&self.base.nbhd[p]);
        }
        let observed = self.observed_base(pmus);
        direct + observed.difference(&covered).count() as u64
    }
}

/// `f_i = sum_j x_j a_ij`.
pub fn coverage(conn: &ConnectivityMatrix, p: &Placement) -> Result<CoverageVector> {
    if conn.len() != p.len() {
        return Err(Error::Dimension { expected: conn.len(), got: p.len() });
    }
    Ok(CoverageVector((0..conn.len()).map(|i| conn.row(i).intersection(p.bits()).count() as u32).collect()))
}

/// Base-topology observability, with ZIB inference if `opts.use_zib`.
/// Contingency flags are ignored here.
pub fn observable(net: &Network, p: &Placement, opts: ResilienceOptions) -> ObservabilityVerdict {
    let opts = ResilienceOptions { n1_line_outage: false, ..opts };
    let ev = Evaluator::new(net, opts);
    ObservabilityVerdict::from_set(&ev.observed_base(p.bits()))
}

/// `sum_i f_i` over direct coverage.
pub fn redundancy(conn: &ConnectivityMatrix, p: &Placement) -> Result<u64> {
    Ok(coverage(conn, p)?.total())
}

/// Redundancy where buses observed only by ZIB inference count once, i.e.
/// the ZIB term of the augmented observability constraint contributes to `f_i`.
pub fn effective_redundancy(net: &Network, p: &Placement, opts: ResilienceOptions) -> u64 {
    let opts = ResilienceOptions { n1_line_outage: false, ..opts };
    Evaluator::new(net, opts).effective_redundancy(p.bits())
}

/// N-1 PMU loss by scenario deletion: the placement is observable, and stays
/// observable after removing any single PMU.
pub fn feasible_n1_pmu(net: &Network, p: &Placement, opts: ResilienceOptions) -> bool {
    let opts = ResilienceOptions { n1_pmu_loss: true, n1_line_outage: false, ..opts };
    Evaluator::new(net, opts).is_feasible(p.bits())
}

/// Algebraic surrogate `f_i + s_i >= 2`, where `s_i = 1` for buses inside some
/// ZIB's closed neighbourhood (only when `use_zib`). Kept for cross-checking
/// the scenario predicate; the two agree exactly when ZIBs are ignored.
pub fn feasible_n1_pmu_algebraic(net: &Network, p: &Placement, opts: ResilienceOptions) -> bool {
    let conn = connectivity(net);
    let f = coverage(&conn, p).expect("placement sized to network");
    let near_zib = |i: usize| opts.use_zib && net.buses().iter().enumerate().any(|(z, b)| b.is_zib && conn.get(i, z));
    (0..net.bus_count()).all(|i| f.0[i] + u32::from(near_zib(i)) >= 2)
}

/// N-1 line outage: observable in the base case and under every enumerated
/// single-branch outage, with ZIB inference recomputed per topology.
pub fn feasible_line_outage(net: &Network, p: &Placement, opts: ResilienceOptions) -> bool {
    let opts = ResilienceOptions { n1_line_outage: true, n1_pmu_loss: false, ..opts };
    Evaluator::new(net, opts).is_feasible(p.bits())
}

/// Full predicate for an option set.
pub fn is_feasible(net: &Network, p: &Placement, opts: ResilienceOptions) -> bool {
    Evaluator::new(net, opts).is_feasible(p.bits())
}
