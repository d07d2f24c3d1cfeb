use std::path::PathBuf;

use serde::Serialize;

use pmu_core::exact::{max_redundancy_at_optimum, solve_min, SolveRequest};
use pmu_core::grid::connectivity;
use pmu_core::observability::{effective_redundancy, is_feasible, redundancy, OutageConvention};
use pmu_core::phasing::{plan, stage_report, PhasingMethod};
use pmu_core::stability::{rank_critical, SweepConfig, SweepStrategy};
use pmu_core::tlbo::{
    max_redundancy_search, multi_objective_solve, optimize, pareto_archive, ConvergenceHistory, ObjectiveWeights,
    PlacementProblem, TlboConfig,
};
use pmu_core::{Network, Placement, ResilienceOptions};

use crate::args::*;
use crate::report::{self, join};
use crate::{load_case, ExitCode, Failure, Rendered};

type CommandResult<'a> = Result<(Rendered, Option<&'a PathBuf>), Failure>;

pub(crate) fn execute(cmd: &Command) -> CommandResult<'_> {
    let (common, rendered) = match cmd {
        Command::Solve(a) => (&a.common, solve(a)?),
        Command::Vsi(a) => (&a.common, vsi(a)?),
        Command::Phasing(a) => (&a.common, phasing(a)?),
        Command::Multi(a) => (&a.common, multi(a)?),
    };
    Ok((rendered, common.out.as_ref()))
}

/// Loads the case and honours `--dump-model`.
fn prepare(common: &CommonArgs) -> Result<Network, Failure> {
    let net = load_case(&common.case)?;
    if let Some(path) = &common.dump_model {
        std::fs::write(path, net.to_case_text())
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(net)
}

fn tlbo_config(a: &TlboArgs) -> Result<TlboConfig, Failure> {
    let d = TlboConfig::default();
    let cfg = TlboConfig {
        seed: a.seed,
        population: a.population.unwrap_or(d.population),
        groups: a.groups.unwrap_or(d.groups),
        max_iterations: a.iterations.unwrap_or(d.max_iterations),
        ..d
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_history(a: &TlboArgs, history: &ConvergenceHistory) -> Result<(), Failure> {
    if let Some(path) = &a.history {
        std::fs::write(path, history.to_csv())
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn ids(net: &Network, p: &Placement) -> Vec<usize> {
    p.bus_ids(net).into_iter().map(|b| b.0).collect()
}

fn scenario_options(s: ScenarioArg, convention: ConventionArg) -> ResilienceOptions {
    let opts = match s {
        ScenarioArg::Base => ResilienceOptions::BASE,
        ScenarioArg::Zib => ResilienceOptions::ZIB,
        ScenarioArg::PmuLoss => ResilienceOptions::PMU_LOSS,
        ScenarioArg::LineOutage => ResilienceOptions::LINE_OUTAGE,
    };
    opts.with_convention(match convention {
        ConventionArg::AllLines => OutageConvention::AllLines,
        ConventionArg::SkipIslanding => OutageConvention::SkipIslanding,
    })
}

#[derive(Serialize)]
struct SolveReport {
    case: String,
    scenario: &'static str,
    solver: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    count: usize,
    locations: Vec<usize>,
    redundancy: u64,
    proven_optimal: bool,
}

fn solve(a: &SolveArgs) -> Result<Rendered, Failure> {
    let net = prepare(&a.common)?;
    let opts = scenario_options(a.scenario, a.outage_convention);
    let mut req = SolveRequest::new(&net, opts);
    if let Some(b) = a.node_budget {
        req = req.node_budget(b);
    }
    let (placement, proven, seed) = match a.solver {
        SolverArg::Exact if a.max_redundancy => {
            let r = max_redundancy_at_optimum(&req)?;
            (r.placement, r.proven, None)
        }
        SolverArg::Exact => {
            let r = solve_min(&req)?;
            (r.best, r.proven_optimal, None)
        }
        SolverArg::Tlbo => {
            let cfg = tlbo_config(&a.tlbo)?;
            let out = optimize(&PlacementProblem::min_count(&net, opts), &cfg)?;
            write_history(&a.tlbo, &out.history)?;
            let mut placement = out.placement;
            if a.max_redundancy {
                if let Some((p, _)) = max_redundancy_search(&net, opts, placement.count(), &cfg)? {
                    placement = p;
                }
            }
            (placement, false, Some(a.tlbo.seed))
        }
    };
    if !is_feasible(&net, &placement, opts) {
        return Err(Failure { code: ExitCode::Infeasible, message: "no feasible placement found".into() });
    }
    let rep = SolveReport {
        case: a.common.case.clone(),
        scenario: a.scenario.name(),
        solver: match a.solver {
            SolverArg::Exact => "exact",
            SolverArg::Tlbo => "tlbo",
        },
        seed,
        count: placement.count(),
        locations: ids(&net, &placement),
        redundancy: effective_redundancy(&net, &placement, opts),
        proven_optimal: proven,
    };
    let text = match a.common.format {
        Format::Json => report::json("solve", &rep),
        Format::Csv => report::csv(
            &["case", "scenario", "solver", "count", "locations", "redundancy", "proven_optimal"],
            &[vec![
                rep.case.clone(),
                rep.scenario.into(),
                rep.solver.into(),
                rep.count.to_string(),
                join(&rep.locations, ";"),
                rep.redundancy.to_string(),
                rep.proven_optimal.to_string(),
            ]],
        ),
        Format::Table => report::pairs(&[
            ("case", rep.case.clone()),
            ("scenario", rep.scenario.into()),
            ("solver", rep.solver.into()),
            ("pmus", rep.count.to_string()),
            ("locations", join(&rep.locations, ", ")),
            ("redundancy", rep.redundancy.to_string()),
            ("proven optimal", rep.proven_optimal.to_string()),
        ]),
    };
    // a TLBO result is never proven, which is not a budget failure
    let code = if a.solver == SolverArg::Exact && !proven { ExitCode::BudgetExhausted } else { ExitCode::Ok };
    let note =
        (code == ExitCode::BudgetExhausted).then(|| "node budget exhausted; best placement found is reported".into());
    Ok(Rendered { text, code, note })
}

fn sweep_config(a: &SweepArgs) -> Result<SweepConfig, Failure> {
    if !(a.step > 0.0 && a.step.is_finite()) {
        return Err(Failure::input("--step must be positive"));
    }
    let strategy = match a.strategy {
        StrategyArg::Linear => SweepStrategy::Linear,
        StrategyArg::Galloping => SweepStrategy::Galloping,
    };
    Ok(SweepConfig { strategy, ..SweepConfig::with_step(a.step) })
}

#[derive(Serialize)]
struct VsiRow {
    rank: usize,
    load_bus: usize,
    q_max: f64,
    vsi: f64,
    critical_line: [usize; 2],
}

#[derive(Serialize)]
struct VsiReport {
    case: String,
    step: f64,
    records: Vec<VsiRow>,
    critical_buses: Vec<usize>,
}

fn vsi(a: &VsiArgs) -> Result<Rendered, Failure> {
    let net = prepare(&a.common)?;
    let cfg = sweep_config(&a.sweep)?;
    let k = a.critical_k.unwrap_or_else(|| net.load_buses().len().min(10));
    let ranking = rank_critical(&net, &cfg, k)?;
    let rows: Vec<VsiRow> = ranking
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| VsiRow {
            rank: i + 1,
            load_bus: r.load_bus.0,
            q_max: r.q_max,
            vsi: r.vsi_at_limit,
            critical_line: [r.critical_line.0 .0, r.critical_line.1 .0],
        })
        .collect();
    let rep = VsiReport {
        case: a.common.case.clone(),
        step: cfg.step,
        records: rows,
        critical_buses: ranking.critical_buses.iter().map(|b| b.0).collect(),
    };
    let cells = |r: &VsiRow| {
        vec![
            r.rank.to_string(),
            r.load_bus.to_string(),
            format!("{:.4}", r.q_max),
            format!("{:.4}", r.vsi),
            format!("{}-{}", r.critical_line[0], r.critical_line[1]),
        ]
    };
    let headers = ["rank", "load_bus", "q_max", "vsi", "critical_line"];
    let rows: Vec<Vec<String>> = rep.records.iter().map(cells).collect();
    let text = match a.common.format {
        Format::Json => report::json("vsi", &rep),
        Format::Csv => report::csv(&headers, &rows),
        Format::Table => report::table(&headers, &rows),
    };
    Ok(Rendered { text, code: ExitCode::Ok, note: None })
}

#[derive(Serialize)]
struct PhasingRow {
    stage: usize,
    new_buses: Vec<usize>,
    cumulative_pmus: usize,
    observed: usize,
    cumulative_pct: f64,
}

#[derive(Serialize)]
struct PhasingReport {
    case: String,
    zib: bool,
    bus_count: usize,
    stages: Vec<PhasingRow>,
    proven: bool,
}

fn phasing(a: &PhasingArgs) -> Result<Rendered, Failure> {
    let net = prepare(&a.common)?;
    let method = match a.method {
        MethodArg::Exact => PhasingMethod::Exact,
        MethodArg::Greedy => PhasingMethod::Greedy,
    };
    let p = plan(&net, &a.budgets, a.zib, method)?;
    let stages = stage_report(&p)
        .into_iter()
        .zip(&p.stages)
        .map(|(row, s)| PhasingRow {
            stage: row.stage,
            new_buses: s.new_buses.iter().map(|b| b.0).collect(),
            cumulative_pmus: row.cumulative_pmus,
            observed: row.observed,
            cumulative_pct: row.observability_pct,
        })
        .collect();
    let rep =
        PhasingReport { case: a.common.case.clone(), zib: a.zib, bus_count: p.bus_count, stages, proven: p.proven };
    let headers = ["stage", "new_buses", "cumulative_pmus", "observed", "cumulative_pct"];
    let rows = |sep: &str| -> Vec<Vec<String>> {
        rep.stages
            .iter()
            .map(|r| {
                vec![
                    r.stage.to_string(),
                    join(&r.new_buses, sep),
                    r.cumulative_pmus.to_string(),
                    r.observed.to_string(),
                    format!("{:.2}", r.cumulative_pct),
                ]
            })
            .collect()
    };
    let text = match a.common.format {
        Format::Json => report::json("phasing", &rep),
        Format::Csv => report::csv(&headers, &rows(";")),
        Format::Table => report::table(&headers, &rows(" ")),
    };
    let code = if p.proven { ExitCode::Ok } else { ExitCode::BudgetExhausted };
    let note = (!p.proven).then(|| "stage search budget exhausted; best stages found are reported".into());
    Ok(Rendered { text, code, note })
}

/// Published WSOI for the bundled cases with default settings.
fn reference_wsoi(case: &str) -> Option<u64> {
    match case {
        "ieee14" => Some(23),
        "ieee30" => Some(76),
        _ => None,
    }
}

#[derive(Serialize)]
struct VsoiRow {
    bus: usize,
    vsoi: u32,
    violated: bool,
}

#[derive(Serialize)]
struct MultiReport {
    case: String,
    seed: u64,
    weights: [f64; 3],
    count: usize,
    locations: Vec<usize>,
    redundancy: u64,
    objective: f64,
    critical: Vec<VsoiRow>,
    wsoi: u64,
    reference_wsoi: Option<u64>,
    /// Raised when the WSOI differs from the reference value, whose
    /// definition admits more than one reading.
    wsoi_definition_flag: bool,
}

fn multi(a: &MultiArgs) -> Result<Rendered, Failure> {
    let net = prepare(&a.common)?;
    let weights = match &a.weights {
        None => ObjectiveWeights::defaults_for(&net),
        Some(w) if w.len() == 3 => ObjectiveWeights { count: w[0], redundancy: w[1], vsi: w[2] },
        Some(_) => return Err(Failure::input("--weights takes three comma-separated values")),
    };
    let sweep = sweep_config(&a.sweep)?;
    let cfg = tlbo_config(&a.tlbo)?;
    let ranking = rank_critical(&net, &sweep, a.critical_k)?;
    let critical = ranking.critical_indices(&net)?;
    if a.pareto {
        return pareto(a, &net, weights, &ranking.vsi_by_line, &critical, &cfg);
    }
    let out = multi_objective_solve(&net, weights, &ranking.vsi_by_line, &critical, &cfg)?;
    write_history(&a.tlbo, &out.history)?;
    let reference = reference_wsoi(&a.common.case);
    let rep = MultiReport {
        case: a.common.case.clone(),
        seed: cfg.seed,
        weights: [weights.count, weights.redundancy, weights.vsi],
        count: out.placement.count(),
        locations: ids(&net, &out.placement),
        redundancy: redundancy(&connectivity(&net), &out.placement)?,
        objective: out.objective,
        critical: out.vsoi.iter().map(|e| VsoiRow { bus: e.bus.0, vsoi: e.vsoi, violated: e.violated }).collect(),
        wsoi: out.wsoi,
        reference_wsoi: reference,
        wsoi_definition_flag: reference.is_some_and(|r| r != out.wsoi),
    };
    let critical_cells: Vec<String> = rep.critical.iter().map(|c| format!("{}:{}", c.bus, c.vsoi)).collect();
    let text = match a.common.format {
        Format::Json => report::json("multi", &rep),
        Format::Csv => report::csv(
            &[
                "case",
                "seed",
                "count",
                "locations",
                "redundancy",
                "critical_vsoi",
                "wsoi",
                "reference_wsoi",
                "wsoi_definition_flag",
            ],
            &[vec![
                rep.case.clone(),
                rep.seed.to_string(),
                rep.count.to_string(),
                join(&rep.locations, ";"),
                rep.redundancy.to_string(),
                critical_cells.join(";"),
                rep.wsoi.to_string(),
                reference.map(|r| r.to_string()).unwrap_or_default(),
                rep.wsoi_definition_flag.to_string(),
            ]],
        ),
        Format::Table => {
            let mut s = report::pairs(&[
                ("case", rep.case.clone()),
                ("pmus", rep.count.to_string()),
                ("locations", join(&rep.locations, ", ")),
                ("redundancy", rep.redundancy.to_string()),
                ("wsoi", rep.wsoi.to_string()),
            ]);
            s.push('\n');
            let rows: Vec<Vec<String>> = rep
                .critical
                .iter()
                .map(|c| {
                    vec![c.bus.to_string(), c.vsoi.to_string(), if c.violated { "yes".into() } else { "no".into() }]
                })
                .collect();
            s.push_str(&report::table(&["critical_bus", "vsoi", "violated"], &rows));
            if rep.wsoi_definition_flag {
                s.push_str(&format!(
                    "\nflag: WSOI {} differs from the reference {}; the WSOI definition is ambiguous\n",
                    rep.wsoi,
                    reference.unwrap_or_default()
                ));
            }
            s
        }
    };
    Ok(Rendered { text, code: ExitCode::Ok, note: None })
}

#[derive(Serialize)]
struct ParetoRow {
    count: usize,
    redundancy: u64,
    vsi_score: f64,
    locations: Vec<usize>,
}

#[derive(Serialize)]
struct ParetoReport {
    case: String,
    seed: u64,
    points: Vec<ParetoRow>,
}

fn pareto(
    a: &MultiArgs,
    net: &Network,
    weights: ObjectiveWeights,
    vsi_by_line: &[f64],
    critical: &[usize],
    cfg: &TlboConfig,
) -> Result<Rendered, Failure> {
    let archive = pareto_archive(net, weights, vsi_by_line, critical, cfg)?;
    let points: Vec<ParetoRow> = archive
        .iter()
        .map(|p| ParetoRow {
            count: p.count,
            redundancy: p.redundancy,
            vsi_score: p.vsi_score,
            locations: ids(net, &p.placement),
        })
        .collect();
    let rep = ParetoReport { case: a.common.case.clone(), seed: cfg.seed, points };
    let headers = ["count", "redundancy", "vsi_score", "locations"];
    let rows = |sep: &str| -> Vec<Vec<String>> {
        rep.points
            .iter()
            .map(|p| {
                vec![
                    p.count.to_string(),
                    p.redundancy.to_string(),
                    format!("{:.4}", p.vsi_score),
                    join(&p.locations, sep),
                ]
            })
            .collect()
    };
    let text = match a.common.format {
        Format::Json => report::json("multi", &rep),
        Format::Csv => report::csv(&headers, &rows(";")),
        Format::Table => report::table(&headers, &rows(" ")),
    };
    Ok(Rendered { text, code: ExitCode::Ok, note: None })
}
