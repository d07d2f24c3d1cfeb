//! Grouped teaching-learning-based optimization for binary placements.
//!
//! Learners carry a real genome in `[0, 1]^N` that decodes to a placement by
//! thresholding at 0.5. Each iteration ranks the class, splits it into
//! contiguous groups of similar fitness and runs, per group:
//!
//! * a teaching phase, `x + r * (teacher - T_F * mean)`, where the teacher is
//!   the group's best learner and `T_F` is either drawn from {1, 2} or
//!   interpolated from the learner's relative standing in the group;
//! * a learning phase, where each learner moves toward (or away from) a random
//!   peer of the same group, followed by an optional single-coordinate
//!   random-reset mutation (self-learning).
//!
//! Every update is kept only if it strictly improves the learner. Candidate
//! genomes are drawn from the seeded generator in a fixed order and only the
//! fitness evaluations run in parallel, so results are reproducible from the
//! seed with or without the `parallel` feature.

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{connectivity, Network};
use crate::observability::{Evaluator, Placement, ResilienceOptions};
use crate::stability::VsoiEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeachingFactorPolicy {
    /// `T_F` uniformly from {1, 2}.
    RandomOneOrTwo,
    /// `T_F = 1 + (f_i - f_best) / (f_worst - f_best)` within the group.
    Adaptive,
}

/// Optimizer settings. Population 40, 4 groups, adaptive `T_F` and a
/// self-learning rate of 1.0 are tuned defaults, not values from a reference
/// formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlboConfig {
    pub population: usize,
    pub groups: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub teaching_factor_policy: TeachingFactorPolicy,
    /// Probability per learner and iteration of one random-reset mutation.
    pub self_learning_rate: f64,
    /// Penalty per violated requirement; `None` uses the bus count, which keeps
    /// every feasible placement ahead of every infeasible one for count objectives.
    pub penalty_per_violation: Option<f64>,
}

impl Default for TlboConfig {
    fn default() -> Self {
        Self {
            population: 40,
            groups: 4,
            max_iterations: 100,
            seed: 1,
            teaching_factor_policy: TeachingFactorPolicy::Adaptive,
            self_learning_rate: 1.0,
            penalty_per_violation: None,
        }
    }
}

impl TlboConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.population < 2 * self.groups {
            return Err(Error::Invalid(format!(
                "population {} must be at least twice the group count {}",
                self.population, self.groups
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Invalid("max_iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.self_learning_rate) {
            return Err(Error::Invalid("self_learning_rate must lie in [0, 1]".into()));
        }
        if self.penalty_per_violation.is_some_and(|p| !(p > 0.0)) {
            return Err(Error::Invalid("penalty_per_violation must be positive".into()));
        }
        Ok(())
    }
}

/// What the learners are scored on, before the constraint penalty.
#[derive(Debug, Clone)]
pub enum ObjectiveKind {
    MinCount,
    MinCost(Vec<f64>),
    /// `count - redundancy / scale`: minimum count first, then maximum
    /// (ZIB-augmented) redundancy.
    CountThenRedundancy {
        scale: f64,
    },
    /// `l1 * count - l2 * OF2 + l3 * OF3` with hard `f_i >= 2` on critical buses.
    Weighted {
        lambdas: [f64; 3],
        per_bus_vsi: Vec<f64>,
        critical: Vec<usize>,
    },
}

/// A placement problem: feasibility from the resilience options plus an objective.
#[derive(Debug, Clone)]
pub struct PlacementProblem {
    evaluator: Evaluator,
    kind: ObjectiveKind,
    nbhd: Vec<FixedBitSet>,
}

impl PlacementProblem {
    pub fn new(net: &Network, opts: ResilienceOptions, kind: ObjectiveKind) -> Self {
        let conn = connectivity(net);
        let nbhd = (0..net.bus_count()).map(|i| conn.row(i).clone()).collect();
        Self { evaluator: Evaluator::new(net, opts), kind, nbhd }
    }

    pub fn min_count(net: &Network, opts: ResilienceOptions) -> Self {
        Self::new(net, opts, ObjectiveKind::MinCount)
    }

    pub fn bus_count(&self) -> usize {
        self.evaluator.bus_count()
    }

    fn coverage(&self, pmus: &FixedBitSet, i: usize) -> usize {
        self.nbhd[i].intersection(pmus).count()
    }

    /// Objective value without penalty.
    pub fn objective(&self, pmus: &FixedBitSet) -> f64 {
        let count = pmus.count_ones(..) as f64;
        match &self.kind {
            ObjectiveKind::MinCount => count,
            ObjectiveKind::MinCost(w) => pmus.ones().map(|i| w[i]).sum(),
            ObjectiveKind::CountThenRedundancy { scale } => {
                count - self.evaluator.effective_redundancy(pmus) as f64 / scale
            }
            ObjectiveKind::Weighted { lambdas, per_bus_vsi, .. } => {
                let of2: usize = (0..self.bus_count()).map(|i| self.coverage(pmus, i)).sum();
                let of3: f64 = pmus.ones().map(|j| per_bus_vsi[j]).sum();
                lambdas[0] * count - lambdas[1] * of2 as f64 + lambdas[2] * of3
            }
        }
    }

    pub fn violations(&self, pmus: &FixedBitSet) -> usize {
        let mut v = self.evaluator.violations(pmus);
        if let ObjectiveKind::Weighted { critical, .. } = &self.kind {
            v += critical.iter().filter(|&&b| self.coverage(pmus, b) < 2).count();
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub genome: Vec<f64>,
    pub binary: Placement,
    pub fitness: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub best_value: f64,
    pub feasible: bool,
    pub millis: u64,
}

/// Best-so-far objective per iteration; iteration 0 is the initial class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceHistory {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceHistory {
    /// First iteration at which a feasible best with value `<= target` was held.
    pub fn first_hit(&self, target: f64) -> Option<usize> {
        self.records.iter().find(|r| r.feasible && r.best_value <= target + 1e-9).map(|r| r.iteration)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,best_value,feasible,millis\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{},{}\n", r.iteration, r.best_value, r.feasible, r.millis));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TlboOutcome {
    pub placement: Placement,
    /// Objective of the best feasible learner (without penalty).
    pub value: f64,
    pub history: ConvergenceHistory,
}

struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn millis(&self) -> u64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_millis() as u64
        }
        #[cfg(target_arch = "wasm32")]
        {
            0
        }
    }
}

fn decode(genome: &[f64]) -> FixedBitSet {
    let mut set = FixedBitSet::with_capacity(genome.len());
    for (i, &g) in genome.iter().enumerate() {
        if g >= 0.5 {
            set.insert(i);
        }
    }
    set
}

/// Stateful optimizer; exposed so the individual phases can be driven and
/// inspected directly.
pub struct Tlbo<'p> {
    problem: &'p PlacementProblem,
    cfg: TlboConfig,
    penalty: f64,
    rng: ChaCha8Rng,
    pub learners: Vec<Learner>,
}

impl<'p> Tlbo<'p> {
    pub fn new(problem: &'p PlacementProblem, cfg: TlboConfig) -> Result<Self> {
        cfg.validate()?;
        let n = problem.bus_count();
        let penalty = cfg.penalty_per_violation.unwrap_or(n.max(1) as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let genomes: Vec<Vec<f64>> = (0..cfg.population).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect();
        let mut t = Self { problem, cfg, penalty, rng, learners: Vec::new() };
        t.learners = t.evaluate_all(genomes);
        Ok(t)
    }

    fn evaluate_all(&self, genomes: Vec<Vec<f64>>) -> Vec<Learner> {
        let problem = self.problem;
        let penalty = self.penalty;
        let scored = crate::par_map(&genomes, |g| {
            let bits = decode(g);
            let violations = problem.violations(&bits);
            let fitness = problem.objective(&bits) + penalty * violations as f64;
            (bits, fitness, violations)
        });
        genomes
            .into_iter()
            .zip(scored)
            .map(|(genome, (bits, fitness, violations))| Learner {
                genome,
                binary: Placement::from_bitset(bits),
                fitness,
                violations,
            })
            .collect()
    }

    /// Strict-improvement replacement of `targets[i]` by `candidates[i]`.
    fn accept(&mut self, targets: &[usize], candidates: Vec<Vec<f64>>) {
        let scored = self.evaluate_all(candidates);
        for (&t, cand) in targets.iter().zip(scored) {
            if cand.fitness < self.learners[t].fitness {
                self.learners[t] = cand;
            }
        }
    }

    /// Learner indices split into rank-ordered groups.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.learners.len()).collect();
        order.sort_by(|&a, &b| self.learners[a].fitness.total_cmp(&self.learners[b].fitness).then(a.cmp(&b)));
        let g = self.cfg.groups;
        let size = order.len() / g;
        let extra = order.len() % g;
        let mut out = Vec::with_capacity(g);
        let mut start = 0;
        for k in 0..g {
            let len = size + usize::from(k < extra);
            out.push(order[start..start + len].to_vec());
            start += len;
        }
        out
    }

    fn best_in(&self, group: &[usize]) -> usize {
        *group
            .iter()
            .min_by(|&&a, &&b| self.learners[a].fitness.total_cmp(&self.learners[b].fitness).then(a.cmp(&b)))
            .expect("non-empty group")
    }

    /// Moves every group member toward the group teacher.
    pub fn teaching_phase(&mut self, group: &[usize]) {
        if group.is_empty() {
            return;
        }
        let n = self.problem.bus_count();
        let teacher = self.learners[self.best_in(group)].genome.clone();
        let mut mean = vec![0.0; n];
        for &i in group {
            for (m, g) in mean.iter_mut().zip(&self.learners[i].genome) {
                *m += g / group.len() as f64;
            }
        }
        let fits: Vec<f64> = group.iter().map(|&i| self.learners[i].fitness).collect();
        let f_best = fits.iter().copied().fold(f64::INFINITY, f64::min);
        let f_worst = fits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut candidates = Vec::with_capacity(group.len());
        for &i in group {
            let tf = match self.cfg.teaching_factor_policy {
                TeachingFactorPolicy::RandomOneOrTwo => {
                    if self.rng.gen_bool(0.5) {
                        1.0
                    } else {
                        2.0
                    }
                }
                TeachingFactorPolicy::Adaptive => {
                    if f_worst > f_best {
                        1.0 + (self.learners[i].fitness - f_best) / (f_worst - f_best)
                    } else {
                        1.0
                    }
                }
            };
            let x = &self.learners[i].genome;
            let cand: Vec<f64> = (0..n)
                .map(|d| {
                    let r: f64 = self.rng.gen();
                    (x[d] + r * (teacher[d] - tf * mean[d])).clamp(0.0, 1.0)
                })
                .collect();
            candidates.push(cand);
        }
        self.accept(group, candidates);
    }

    /// Peer learning inside the group followed by self-learning mutations.
    pub fn learning_phase(&mut self, group: &[usize]) {
        if group.len() < 2 {
            return;
        }
        let n = self.problem.bus_count();
        let mut candidates = Vec::with_capacity(group.len());
        for (pos, &i) in group.iter().enumerate() {
            let mut other = self.rng.gen_range(0..group.len() - 1);
            if other >= pos {
                other += 1;
            }
            let j = group[other];
            let (xi, xj) = (&self.learners[i].genome, &self.learners[j].genome);
            let toward = self.learners[j].fitness < self.learners[i].fitness;
            let cand: Vec<f64> = (0..n)
                .map(|d| {
                    let r: f64 = self.rng.gen();
                    let diff = if toward { xj[d] - xi[d] } else { xi[d] - xj[d] };
                    (xi[d] + r * diff).clamp(0.0, 1.0)
                })
                .collect();
            candidates.push(cand);
        }
        self.accept(group, candidates);

        let mut targets = Vec::new();
        let mut mutants = Vec::new();
        for &i in group {
            if self.cfg.self_learning_rate > 0.0 && self.rng.gen_bool(self.cfg.self_learning_rate) {
                let d = self.rng.gen_range(0..n);
                let mut g = self.learners[i].genome.clone();
                g[d] = self.rng.gen();
                targets.push(i);
                mutants.push(g);
            }
        }
        if !targets.is_empty() {
            self.accept(&targets, mutants);
        }
    }

    /// Index of the best learner (ties to the lowest index).
    pub fn best(&self) -> usize {
        let all: Vec<usize> = (0..self.learners.len()).collect();
        self.best_in(&all)
    }

    pub fn iterate(&mut self) {
        for group in self.groups() {
            self.teaching_phase(&group);
            self.learning_phase(&group);
        }
    }
}

/// Runs the full optimizer. Fails when no learner ever became feasible.
pub fn optimize(problem: &PlacementProblem, cfg: &TlboConfig) -> Result<TlboOutcome> {
    let clock = Clock::start();
    let mut tlbo = Tlbo::new(problem, cfg.clone())?;
    let mut elite: Option<Learner> = None;
    let mut history = ConvergenceHistory::default();
    let mut track = |tlbo: &Tlbo, iteration: usize, history: &mut ConvergenceHistory| {
        let cand = &tlbo.learners[tlbo.best()];
        if elite.as_ref().is_none_or(|e| cand.fitness < e.fitness) {
            elite = Some(cand.clone());
        }
        let e = elite.as_ref().expect("set above");
        history.records.push(IterationRecord {
            iteration,
            best_value: e.fitness,
            feasible: e.violations == 0,
            millis: clock.millis(),
        });
    };
    track(&tlbo, 0, &mut history);
    for it in 1..=cfg.max_iterations {
        tlbo.iterate();
        track(&tlbo, it, &mut history);
    }
    let elite = elite.expect("population is non-empty");
    if elite.violations > 0 {
        return Err(Error::Infeasible(format!(
            "no feasible learner found; best candidate {:?} violates {} requirement(s)",
            elite.binary.indices(),
            elite.violations
        )));
    }
    Ok(TlboOutcome { value: problem.objective(elite.binary.bits()), placement: elite.binary, history })
}

/// Min-count search with a redundancy tie-break; returns the best placement
/// if it reaches `count` PMUs.
pub fn max_redundancy_search(
    net: &Network,
    opts: ResilienceOptions,
    count: usize,
    cfg: &TlboConfig,
) -> Result<Option<(Placement, u64)>> {
    let conn = connectivity(net);
    let scale = (0..net.bus_count()).map(|i| conn.row_sum(i)).sum::<usize>() as f64 + net.bus_count() as f64 + 1.0;
    let problem = PlacementProblem::new(net, opts, ObjectiveKind::CountThenRedundancy { scale });
    let out = optimize(&problem, cfg)?;
    if out.placement.count() != count {
        return Ok(None);
    }
    let r = Evaluator::new(net, opts).effective_redundancy(out.placement.bits());
    Ok(Some((out.placement, r)))
}

/// Scalarization weights `(l1, l2, l3)` for count, redundancy and VSI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub count: f64,
    pub redundancy: f64,
    pub vsi: f64,
}

impl ObjectiveWeights {
    /// `l1 = 1`, `l2 = 1 / sum_i (degree_i + 1)`, `l3 = 1`.
    pub fn defaults_for(net: &Network) -> Self {
        let conn = connectivity(net);
        let total: usize = (0..net.bus_count()).map(|i| conn.row_sum(i)).sum();
        Self { count: 1.0, redundancy: 1.0 / total as f64, vsi: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct MultiObjectiveResult {
    pub placement: Placement,
    pub objective: f64,
    pub wsoi: u64,
    pub vsoi: Vec<VsoiEntry>,
    pub history: ConvergenceHistory,
}

/// Weighted-sum placement with full ZIB observability and `VSOI >= 2` on the
/// critical buses (internal indices). `vsi_by_line` is indexed by branch id.
pub fn multi_objective_solve(
    net: &Network,
    weights: ObjectiveWeights,
    vsi_by_line: &[f64],
    critical_buses: &[usize],
    cfg: &TlboConfig,
) -> Result<MultiObjectiveResult> {
    if [weights.count, weights.redundancy, weights.vsi].iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::Invalid("objective weights must be finite and non-negative".into()));
    }
    let per_bus_vsi = crate::stability::per_bus_vsi(net, vsi_by_line)?;
    let problem = PlacementProblem::new(
        net,
        ResilienceOptions::ZIB,
        ObjectiveKind::Weighted {
            lambdas: [weights.count, weights.redundancy, weights.vsi],
            per_bus_vsi,
            critical: critical_buses.to_vec(),
        },
    );
    let out = optimize(&problem, cfg)?;
    let (vsoi, wsoi) = crate::stability::vsoi_wsoi(net, &out.placement, critical_buses)?;
    Ok(MultiObjectiveResult { placement: out.placement, objective: out.value, wsoi, vsoi, history: out.history })
}

/// One non-dominated feasible placement: fewer PMUs, more redundancy (direct
/// coverage) and a smaller VSI score are each better.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub placement: Placement,
    pub count: usize,
    pub redundancy: u64,
    pub vsi_score: f64,
}

impl ParetoPoint {
    fn dominates(&self, other: &ParetoPoint) -> bool {
        let no_worse =
            self.count <= other.count && self.redundancy >= other.redundancy && self.vsi_score <= other.vsi_score;
        let better = self.count < other.count || self.redundancy > other.redundancy || self.vsi_score < other.vsi_score;
        no_worse && better
    }
}

/// Non-dominated set of every feasible learner seen during a weighted-sum run
/// (same constraints as [`multi_objective_solve`]). Sorted by count, then
/// descending redundancy, then VSI score.
pub fn pareto_archive(
    net: &Network,
    weights: ObjectiveWeights,
    vsi_by_line: &[f64],
    critical_buses: &[usize],
    cfg: &TlboConfig,
) -> Result<Vec<ParetoPoint>> {
    let per_bus_vsi = crate::stability::per_bus_vsi(net, vsi_by_line)?;
    let problem = PlacementProblem::new(
        net,
        ResilienceOptions::ZIB,
        ObjectiveKind::Weighted {
            lambdas: [weights.count, weights.redundancy, weights.vsi],
            per_bus_vsi: per_bus_vsi.clone(),
            critical: critical_buses.to_vec(),
        },
    );
    let mut tlbo = Tlbo::new(&problem, cfg.clone())?;
    let mut archive: Vec<ParetoPoint> = Vec::new();
    let mut absorb = |tlbo: &Tlbo| {
        for l in tlbo.learners.iter().filter(|l| l.violations == 0) {
            if archive.iter().any(|a| a.placement.bits() == l.binary.bits()) {
                continue;
            }
            let bits = l.binary.bits();
            let point = ParetoPoint {
                placement: l.binary.clone(),
                count: bits.count_ones(..),
                redundancy: (0..problem.bus_count()).map(|i| problem.coverage(bits, i) as u64).sum(),
                vsi_score: bits.ones().map(|j| per_bus_vsi[j]).sum(),
            };
            if archive.iter().any(|a| a.dominates(&point)) {
                continue;
            }
            archive.retain(|a| !point.dominates(a));
            archive.push(point);
        }
    };
    absorb(&tlbo);
    for _ in 0..cfg.max_iterations {
        tlbo.iterate();
        absorb(&tlbo);
    }
    if archive.is_empty() {
        return Err(Error::Infeasible("no feasible learner found".into()));
    }
    archive.sort_by(|a, b| {
        a.count
            .cmp(&b.count)
            .then(b.redundancy.cmp(&a.redundancy))
            .then(a.vsi_score.total_cmp(&b.vsi_score))
            .then(a.placement.indices().cmp(&b.placement.indices()))
    });
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    fn cfg(seed: u64) -> TlboConfig {
        TlboConfig { seed, ..TlboConfig::default() }
    }

    #[test]
    fn config_validation() {
        assert!(TlboConfig { population: 7, groups: 4, ..cfg(1) }.validate().is_err());
        assert!(TlboConfig { max_iterations: 0, ..cfg(1) }.validate().is_err());
        assert!(TlboConfig { penalty_per_violation: Some(0.0), ..cfg(1) }.validate().is_err());
        assert!(cfg(1).validate().is_ok());
    }

    #[test]
    fn single_bus_network() {
        let net = crate::grid::parse_case(
            "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0 100 1 1.1 0.9;\n];\nmpc.branch = [\n];\n",
        )
        .unwrap();
        let out = optimize(&PlacementProblem::min_count(&net, ResilienceOptions::BASE), &cfg(3)).unwrap();
        assert_eq!(out.placement.indices(), vec![0]);
        assert_eq!(out.value, 1.0);
    }

    #[test]
    fn identical_learners_at_the_teacher_stay_put() {
        let net = cases::ieee14();
        let problem = PlacementProblem::min_count(&net, ResilienceOptions::BASE);
        let c = TlboConfig { teaching_factor_policy: TeachingFactorPolicy::Adaptive, ..cfg(5) };
        let mut t = Tlbo::new(&problem, c).unwrap();
        let clone = t.learners[0].clone();
        for l in t.learners.iter_mut() {
            *l = clone.clone();
        }
        let group: Vec<usize> = (0..10).collect();
        t.teaching_phase(&group);
        assert!(t.learners[..10].iter().all(|l| *l == clone));
    }

    #[test]
    fn phases_never_worsen_a_learner() {
        let net = cases::ieee14();
        let problem = PlacementProblem::min_count(&net, ResilienceOptions::ZIB);
        let mut t = Tlbo::new(&problem, cfg(11)).unwrap();
        for _ in 0..5 {
            for group in t.groups() {
                let before: Vec<f64> = t.learners.iter().map(|l| l.fitness).collect();
                t.teaching_phase(&group);
                t.learning_phase(&group);
                for (b, l) in before.iter().zip(&t.learners) {
                    assert!(l.fitness <= *b);
                }
            }
        }
    }

    #[test]
    fn zero_self_learning_is_plain_peer_learning() {
        let net = cases::ieee14();
        let problem = PlacementProblem::min_count(&net, ResilienceOptions::BASE);
        let c = TlboConfig { self_learning_rate: 0.0, ..cfg(2) };
        let mut t = Tlbo::new(&problem, c).unwrap();
        let clone = t.learners[3].clone();
        for l in t.learners.iter_mut() {
            *l = clone.clone();
        }
        let group: Vec<usize> = (0..10).collect();
        t.learning_phase(&group);
        // identical peers give a zero step, so nothing moves
        assert!(t.learners.iter().all(|l| *l == clone));
    }

    #[test]
    fn seeded_phases_are_bit_identical() {
        let net = cases::ieee14();
        let problem = PlacementProblem::min_count(&net, ResilienceOptions::ZIB);
        let run = || {
            let mut t = Tlbo::new(&problem, cfg(42)).unwrap();
            let g = t.groups();
            t.teaching_phase(&g[0]);
            t.learning_phase(&g[1]);
            t.learners.iter().map(|l| l.genome.clone()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn history_is_monotone_and_reproducible() {
        let net = cases::ieee14();
        let problem = PlacementProblem::min_count(&net, ResilienceOptions::BASE);
        let a = optimize(&problem, &cfg(9)).unwrap();
        let b = optimize(&problem, &cfg(9)).unwrap();
        let values = |h: &ConvergenceHistory| h.records.iter().map(|r| (r.best_value, r.feasible)).collect::<Vec<_>>();
        assert_eq!(values(&a.history), values(&b.history));
        assert_eq!(a.placement, b.placement);
        for w in a.history.records.windows(2) {
            assert!(w[1].best_value <= w[0].best_value);
        }
        assert_eq!(a.history.records.len(), 101);
    }

    #[test]
    fn negative_weights_are_rejected() {
        let net = cases::ieee14();
        let w = ObjectiveWeights { count: 1.0, redundancy: -0.1, vsi: 0.0 };
        let vsi = vec![0.0; net.branches().len()];
        assert!(multi_objective_solve(&net, w, &vsi, &[], &cfg(1)).is_err());
    }
}
