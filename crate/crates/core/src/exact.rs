//! Branch-and-bound oracle for minimum-count and minimum-cost placements.
//!
//! The search branches on a *witness*: an unobserved bus in some scenario
//! (base topology, a line outage, or the loss of an installed PMU). Either one
//! of the buses able to observe it directly receives a PMU (tried one at a
//! time, earlier choices excluded in later branches), or none does and the bus
//! has to be recovered by ZIB inference. Per scenario the lower bound is the
//! larger of a fractional covering bound and a packing bound (buses whose
//! candidate sets are pairwise disjoint), each relaxed by the buses that the
//! ZIBs not yet fired could still infer; the largest value over all scenarios
//! is used.

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Network;
use crate::observability::{Evaluator, Placement, ResilienceOptions, Scenario};

/// Largest network for which `enumerate_optima` runs.
pub const ENUMERATION_GUARD: usize = 30;

pub const DEFAULT_NODE_BUDGET: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinCount,
    MinCost,
}

#[derive(Debug, Clone)]
pub struct SolveRequest<'a> {
    pub net: &'a Network,
    pub opts: ResilienceOptions,
    pub objective: Objective,
    pub cardinality_cap: Option<usize>,
    /// Per-bus costs for `MinCost`; defaults to [`channel_cost_weights`] with unit PMU cost.
    pub cost_weights: Option<Vec<f64>>,
    pub node_budget: u64,
}

impl<'a> SolveRequest<'a> {
    pub fn new(net: &'a Network, opts: ResilienceOptions) -> Self {
        Self {
            net,
            opts,
            objective: Objective::MinCount,
            cardinality_cap: None,
            cost_weights: None,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }

    pub fn min_cost(mut self, weights: Option<Vec<f64>>) -> Self {
        self.objective = Objective::MinCost;
        self.cost_weights = weights;
        self
    }

    pub fn cap(mut self, cap: usize) -> Self {
        self.cardinality_cap = Some(cap);
        self
    }

    pub fn node_budget(mut self, budget: u64) -> Self {
        self.node_budget = budget;
        self
    }

    fn weights(&self) -> Result<Vec<f64>> {
        let n = self.net.bus_count();
        match self.objective {
            Objective::MinCount => Ok(vec![1.0; n]),
            Objective::MinCost => {
                let w = self.cost_weights.clone().unwrap_or_else(|| channel_cost_weights(self.net, 1.0));
                // validates length and positivity
                Placement::empty(n).with_cost_weights(w.clone())?;
                Ok(w)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub best: Placement,
    pub optimum_value: f64,
    pub all_optima: Option<Vec<Placement>>,
    pub nodes_explored: u64,
    pub proven_optimal: bool,
}

/// `w_j = (1 + 0.1 n_j) C` with the channel count `n_j` taken as the number
/// of in-service branches at bus `j`.
pub fn channel_cost_weights(net: &Network, unit_cost: f64) -> Vec<f64> {
    net.branch_degrees().into_iter().map(|n| (1.0 + 0.1 * n as f64) * unit_cost).collect()
}

enum Mode {
    Minimize,
    Enumerate { target: usize, found: BTreeSet<Vec<usize>>, below_target: bool },
}

struct Search<'e> {
    ev: &'e Evaluator,
    n: usize,
    weights: Vec<f64>,
    integral: bool,
    cap: Option<usize>,
    included: FixedBitSet,
    excluded: FixedBitSet,
    incumbent: Option<(FixedBitSet, f64)>,
    mode: Mode,
    nodes: u64,
    budget: u64,
    budget_hit: bool,
}

const EPS: f64 = 1e-9;

impl<'e> Search<'e> {
    fn new(ev: &'e Evaluator, weights: Vec<f64>, integral: bool, cap: Option<usize>, budget: u64, mode: Mode) -> Self {
        let n = ev.bus_count();
        Self {
            ev,
            n,
            weights,
            integral,
            cap,
            included: FixedBitSet::with_capacity(n),
            excluded: FixedBitSet::with_capacity(n),
            incumbent: None,
            mode,
            nodes: 0,
            budget,
            budget_hit: false,
        }
    }

    fn cost_of(&self, set: &FixedBitSet) -> f64 {
        set.ones().map(|i| self.weights[i]).sum()
    }

    fn available(&self) -> FixedBitSet {
        let mut a = FixedBitSet::with_capacity(self.n);
        a.insert_range(..);
        a.difference_with(&self.excluded);
        a.difference_with(&self.included);
        a
    }

    /// Lower bound on the cost still to be added for one scenario, or `None`
    /// when the scenario cannot be repaired with the available buses.
    fn scenario_bound(&self, s: Scenario, observed: &FixedBitSet, avail: &FixedBitSet) -> Option<f64> {
        let topo = self.ev.topology(s);
        let mut unobserved = FixedBitSet::with_capacity(self.n);
        unobserved.insert_range(..);
        unobserved.difference_with(observed);
        if unobserved.is_clear() {
            return Some(0.0);
        }
        let use_zib = self.ev.options().use_zib;
        let open_zibs: Vec<&FixedBitSet> = if use_zib {
            topo.zib_closures.iter().map(|(_, c)| c).filter(|c| !c.is_subset(observed)).collect()
        } else {
            Vec::new()
        };
        let slots = open_zibs.len();
        let inferable = |b: usize| open_zibs.iter().any(|c| c.contains(b));

        let mut forced = 0usize;
        let mut forced_buses = Vec::new();
        let mut fixed = 0.0;
        let mut droppable = Vec::new();
        for b in unobserved.ones() {
            let mut best = f64::INFINITY;
            for c in topo.nbhd[b].intersection(avail) {
                let cov = topo.nbhd[c].intersection(&unobserved).count() as f64;
                best = best.min(self.weights[c] / cov);
            }
            if best.is_infinite() {
                if !inferable(b) {
                    return None;
                }
                forced += 1;
                forced_buses.push(b);
            } else if inferable(b) {
                droppable.push(best);
            } else {
                fixed += best;
            }
        }
        if forced > slots {
            return None;
        }
        droppable.sort_by(|a, b| b.total_cmp(a));
        let skip = slots - forced;
        let rest: f64 = droppable.iter().skip(skip).sum();
        let share = fixed + rest;

        // buses with pairwise disjoint candidate sets each need their own PMU
        let mut order: Vec<(usize, usize)> =
            unobserved.ones().map(|b| (topo.nbhd[b].intersection(avail).count(), b)).filter(|&(k, _)| k > 0).collect();
        order.sort_unstable();
        let mut used = FixedBitSet::with_capacity(self.n);
        let mut packed_fixed = 0.0;
        let mut packed_droppable = Vec::new();
        let mut matched_buses = forced_buses;
        for (_, b) in order {
            let mut cands = topo.nbhd[b].clone();
            cands.intersect_with(avail);
            if !cands.is_disjoint(&used) {
                continue;
            }
            let w = cands.ones().map(|c| self.weights[c]).fold(f64::INFINITY, f64::min);
            used.union_with(&cands);
            if inferable(b) {
                packed_droppable.push(w);
                matched_buses.push(b);
            } else {
                packed_fixed += w;
            }
        }
        // each closure infers at most one bus, so only a matching's worth can be dropped
        let matchable = max_matching(&matched_buses, &open_zibs);
        let skip = skip.min(matchable.saturating_sub(forced));
        packed_droppable.sort_by(|a, b| b.total_cmp(a));
        let packed = packed_fixed + packed_droppable.iter().skip(skip).sum::<f64>();
        Some(share.max(packed))
    }

    fn maximal_superset_feasible(&self) -> bool {
        let mut all = FixedBitSet::with_capacity(self.n);
        all.insert_range(..);
        all.difference_with(&self.excluded);
        self.ev.is_feasible(&all)
    }

    fn record(&mut self, cost: f64) {
        match &mut self.mode {
            Mode::Minimize => {
                if self.incumbent.as_ref().is_none_or(|(_, c)| cost < *c - EPS) {
                    self.incumbent = Some((self.included.clone(), cost));
                }
            }
            Mode::Enumerate { target, found, below_target } => {
                let k = self.included.count_ones(..);
                if k < *target {
                    *below_target = true;
                } else if k == *target {
                    found.insert(self.included.ones().collect());
                }
            }
        }
    }

    fn prune_by_bound(&self, cost: f64, bound: f64) -> bool {
        let bound = if self.integral { (bound - EPS).ceil().max(0.0) } else { bound };
        match &self.mode {
            Mode::Minimize => self.incumbent.as_ref().is_some_and(|(_, best)| cost + bound >= best - EPS),
            Mode::Enumerate { target, .. } => cost + bound > *target as f64 + EPS,
        }
    }

    fn dfs(&mut self, check_superset: bool) {
        if self.budget_hit {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.budget_hit = true;
            return;
        }
        if check_superset && !self.maximal_superset_feasible() {
            return;
        }
        let cost = self.cost_of(&self.included);
        let scenarios = self.ev.scenarios(&self.included);
        let observed: Vec<FixedBitSet> = scenarios.iter().map(|&s| self.ev.observe(s, &self.included)).collect();
        let pmu_loss_empty = self.ev.options().n1_pmu_loss && self.included.is_clear();
        if !pmu_loss_empty && observed.iter().all(|o| o.is_full()) {
            self.record(cost);
            return;
        }
        let count = self.included.count_ones(..);
        if self.cap.is_some_and(|cap| count >= cap) {
            return;
        }

        let avail = self.available();
        let mut bound: f64 = 0.0;
        for (s, o) in scenarios.iter().zip(&observed) {
            match self.scenario_bound(*s, o, &avail) {
                Some(b) => bound = bound.max(b),
                None => return,
            }
        }
        if pmu_loss_empty {
            bound = bound.max(avail.ones().map(|i| self.weights[i]).fold(f64::INFINITY, f64::min));
        }
        if self.prune_by_bound(cost, bound) {
            return;
        }

        // witness: unobserved (scenario, bus) with the fewest available candidates
        let mut witness: Option<(usize, usize, usize)> = None; // (candidates, scenario idx, bus)
        for (si, (&s, o)) in scenarios.iter().zip(&observed).enumerate() {
            let topo = self.ev.topology(s);
            for b in (0..self.n).filter(|&b| !o.contains(b)) {
                let cands = topo.nbhd[b].intersection(&avail).count();
                if cands > 0 && witness.is_none_or(|(wc, _, _)| cands < wc) {
                    witness = Some((cands, si, b));
                }
            }
        }
        let Some((_, si, b)) = witness else {
            if pmu_loss_empty {
                // nothing unobserved but the loss rule needs at least one PMU
                for c in avail.ones().collect::<Vec<_>>() {
                    self.included.insert(c);
                    self.dfs(false);
                    self.included.set(c, false);
                }
            }
            return;
        };
        let s = scenarios[si];
        let topo = self.ev.topology(s);
        let mut cands: Vec<(usize, usize)> = topo.nbhd[b]
            .intersection(&avail)
            .map(|c| {
                let gain = scenarios
                    .iter()
                    .zip(&observed)
                    .map(|(&s2, o2)| self.ev.topology(s2).nbhd[c].difference(o2).count())
                    .sum();
                (gain, c)
            })
            .collect();
        cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

        let inferable = self.ev.options().use_zib
            && topo.zib_closures.iter().any(|(_, c)| c.contains(b) && !c.is_subset(&observed[si]));

        let mut newly_excluded = Vec::with_capacity(cands.len());
        for (i, &(_, c)) in cands.iter().enumerate() {
            self.included.insert(c);
            self.dfs(i > 0);
            self.included.set(c, false);
            self.excluded.insert(c);
            newly_excluded.push(c);
            if self.budget_hit {
                break;
            }
        }
        if inferable && !self.budget_hit {
            self.dfs(true);
        }
        for c in newly_excluded {
            self.excluded.set(c, false);
        }
    }
}

/// Size of a maximum matching between `buses` and the closures containing them.
fn max_matching(buses: &[usize], closures: &[&FixedBitSet]) -> usize {
    fn augment(
        b: usize,
        buses: &[usize],
        closures: &[&FixedBitSet],
        owner: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for (z, closure) in closures.iter().enumerate() {
            if seen[z] || !closure.contains(buses[b]) {
                continue;
            }
            seen[z] = true;
            if owner[z].is_none_or(|o| augment(o, buses, closures, owner, seen)) {
                owner[z] = Some(b);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; closures.len()];
    let mut size = 0;
    for b in 0..buses.len() {
        let mut seen = vec![false; closures.len()];
        if augment(b, buses, closures, &mut owner, &mut seen) {
            size += 1;
        }
    }
    size
}

/// Greedy feasible placement followed by removal of redundant PMUs.
fn greedy(ev: &Evaluator, weights: &[f64]) -> Option<FixedBitSet> {
    let n = ev.bus_count();
    let mut all = FixedBitSet::with_capacity(n);
    all.insert_range(..);
    if !ev.is_feasible(&all) {
        return None;
    }
    let mut set = FixedBitSet::with_capacity(n);
    while !ev.is_feasible(&set) {
        let scenarios = ev.scenarios(&set);
        let observed: Vec<FixedBitSet> = scenarios.iter().map(|&s| ev.observe(s, &set)).collect();
        let mut best: Option<(f64, usize)> = None;
        for c in (0..n).filter(|c| !set.contains(*c)) {
            let gain: usize =
                scenarios.iter().zip(&observed).map(|(&s, o)| ev.topology(s).nbhd[c].difference(o).count()).sum();
            let score = gain as f64 / weights[c];
            if best.is_none_or(|(bs, _)| score > bs + EPS) {
                best = Some((score, c));
            }
        }
        let (score, c) = best?;
        if score <= 0.0 {
            // no direct gain left; inference or loss scenarios need an arbitrary extra PMU
            let c = (0..n).find(|c| !set.contains(*c))?;
            set.insert(c);
        } else {
            set.insert(c);
        }
    }
    let mut order: Vec<usize> = set.ones().collect();
    order.sort_by(|a, b| weights[*b].total_cmp(&weights[*a]).then(b.cmp(a)));
    for c in order {
        set.set(c, false);
        if !ev.is_feasible(&set) {
            set.insert(c);
        }
    }
    Some(set)
}

/// Minimum-count or minimum-cost placement satisfying `req.opts`.
pub fn solve_min(req: &SolveRequest) -> Result<SolveResult> {
    let ev = Evaluator::new(req.net, req.opts);
    let weights = req.weights()?;
    let n = req.net.bus_count();
    let Some(start) = greedy(&ev, &weights) else {
        return Err(Error::Infeasible("even a PMU at every bus violates the requested options".into()));
    };
    let integral = req.objective == Objective::MinCount;
    let mut search = Search::new(&ev, weights.clone(), integral, req.cardinality_cap, req.node_budget, Mode::Minimize);
    if req.cardinality_cap.is_none_or(|cap| start.count_ones(..) <= cap) {
        let c = search.cost_of(&start);
        search.incumbent = Some((start, c));
    }
    search.dfs(false);
    let proven = !search.budget_hit;
    let Some((best, value)) = search.incumbent.take() else {
        return Err(Error::Infeasible(format!(
            "no feasible placement within cardinality cap {}",
            req.cardinality_cap.unwrap_or(n)
        )));
    };
    let mut placement = Placement::from_bitset(best);
    if req.objective == Objective::MinCost {
        placement = placement.with_cost_weights(weights)?;
    }
    Ok(SolveResult {
        best: placement,
        optimum_value: value,
        all_optima: None,
        nodes_explored: search.nodes,
        proven_optimal: proven,
    })
}

/// Every feasible placement with exactly `value` PMUs. `value` must be the
/// proven minimum count.
pub fn enumerate_optima(req: &SolveRequest, value: usize) -> Result<Vec<Placement>> {
    let n = req.net.bus_count();
    if n > ENUMERATION_GUARD {
        return Err(Error::GuardExceeded(format!(
            "{n} buses exceeds the enumeration limit of {ENUMERATION_GUARD}; use the TLBO sampling mode instead"
        )));
    }
    let ev = Evaluator::new(req.net, req.opts);
    let mode = Mode::Enumerate { target: value, found: BTreeSet::new(), below_target: false };
    let mut search = Search::new(&ev, vec![1.0; n], true, None, u64::MAX, mode);
    search.dfs(false);
    let Mode::Enumerate { found, below_target, .. } = search.mode else { unreachable!() };
    if below_target {
        return Err(Error::Invalid(format!("a feasible placement with fewer than {value} PMUs exists")));
    }
    Ok(found.into_iter().map(|v| Placement::from_indices(n, v)).collect())
}

#[derive(Debug, Clone)]
pub struct RedundancyResult {
    pub placement: Placement,
    pub redundancy: u64,
    pub optimum_count: usize,
    /// True when every minimum placement was enumerated.
    pub proven: bool,
}

/// Among minimum-count feasible placements, one with the largest
/// (ZIB-augmented) redundancy. Ties go to the lexicographically smallest set.
/// Networks above the enumeration guard fall back to the TLBO search.
pub fn max_redundancy_at_optimum(req: &SolveRequest) -> Result<RedundancyResult> {
    let count_req = SolveRequest { objective: Objective::MinCount, ..req.clone() };
    let min = solve_min(&count_req)?;
    let k = min.best.count();
    let ev = Evaluator::new(req.net, req.opts);
    if req.net.bus_count() <= ENUMERATION_GUARD && min.proven_optimal {
        let optima = enumerate_optima(&count_req, k)?;
        let mut best: Option<(u64, Placement)> = None;
        for p in optima {
            let r = ev.effective_redundancy(p.bits());
            if best.as_ref().is_none_or(|(br, _)| r > *br) {
                best = Some((r, p));
            }
        }
        let (redundancy, placement) = best.expect("optimum placement exists");
        return Ok(RedundancyResult { placement, redundancy, optimum_count: k, proven: true });
    }
    let cfg = crate::tlbo::TlboConfig { max_iterations: 300, ..crate::tlbo::TlboConfig::default() };
    let sampled = crate::tlbo::max_redundancy_search(req.net, req.opts, k, &cfg)?;
    let start_r = ev.effective_redundancy(min.best.bits());
    let (placement, redundancy) = match sampled {
        Some((p, r)) if r > start_r => (p, r),
        _ => (min.best, start_r),
    };
    Ok(RedundancyResult { placement, redundancy, optimum_count: k, proven: false })
}
