//! Browser bindings: network geometry, minimum placement, phased installation
//! and VSI ranking, each returned as a JSON string.
//!
//! The `*_json` functions are plain Rust so they can be tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

// `!(x > 0.0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pmu_core::exact::{solve_min, SolveRequest};
use pmu_core::observability::{effective_redundancy, observable};
use pmu_core::phasing::{plan, PhasingMethod};
use pmu_core::stability::{rank_critical, SweepConfig};
use pmu_core::{cases, parse_case, Network, ResilienceOptions};

/// Node budget per solve; keeps the page responsive on the larger cases.
pub const DEMO_NODE_BUDGET: u64 = 2_000_000;

/// A bundled alias or MATPOWER case text.
pub fn load(case: &str) -> Result<Network, String> {
    match cases::load_bundled(case.trim()) {
        Some(net) => net,
        None => parse_case(case),
    }
    .map_err(|e| e.to_string())
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct BusView {
    id: usize,
    zib: bool,
    load: bool,
    generator: bool,
}

#[derive(Serialize)]
struct NetworkView {
    buses: Vec<BusView>,
    branches: Vec<[usize; 2]>,
}

pub fn network_json(case: &str) -> Result<String, String> {
    let net = load(case)?;
    let loads = net.load_buses();
    let buses = net
        .buses()
        .iter()
        .enumerate()
        .map(|(i, b)| BusView { id: b.id.0, zib: b.is_zib, load: loads.contains(&i), generator: b.generator.is_some() })
        .collect();
    let branches = net.in_service_branches().map(|b| [b.from.0, b.to.0]).collect();
    to_json(&NetworkView { buses, branches })
}

#[derive(Serialize)]
struct PlacementView {
    count: usize,
    locations: Vec<usize>,
    observed: Vec<usize>,
    redundancy: u64,
    proven_optimal: bool,
}

/// `scenario` is one of `base`, `zib`, `pmu_loss`, `line_outage`.
pub fn placement_json(case: &str, scenario: &str) -> Result<String, String> {
    let net = load(case)?;
    let opts = match scenario {
        "base" => ResilienceOptions::BASE,
        "zib" => ResilienceOptions::ZIB,
        "pmu_loss" => ResilienceOptions::PMU_LOSS,
        "line_outage" => ResilienceOptions::LINE_OUTAGE,
        other => return Err(format!("unknown scenario {other}")),
    };
    let r = solve_min(&SolveRequest::new(&net, opts).node_budget(DEMO_NODE_BUDGET)).map_err(|e| e.to_string())?;
    let verdict = observable(&net, &r.best, opts);
    let observed = verdict.observed.iter().enumerate().filter(|(_, o)| **o).map(|(i, _)| net.bus_id(i).0).collect();
    to_json(&PlacementView {
        count: r.best.count(),
        locations: r.best.bus_ids(&net).into_iter().map(|b| b.0).collect(),
        observed,
        redundancy: effective_redundancy(&net, &r.best, opts),
        proven_optimal: r.proven_optimal,
    })
}

#[derive(Serialize)]
struct StageView {
    new_buses: Vec<usize>,
    observed: usize,
    percent: f64,
}

/// `budgets` is a comma-separated list such as `1,1,1,1`.
pub fn phasing_json(case: &str, budgets: &str, use_zib: bool) -> Result<String, String> {
    let net = load(case)?;
    let budgets = budgets
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| format!("bad budget {s:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    let p = plan(&net, &budgets, use_zib, PhasingMethod::Exact).map_err(|e| e.to_string())?;
    let stages: Vec<StageView> = p
        .stages
        .iter()
        .map(|s| StageView {
            new_buses: s.new_buses.iter().map(|b| b.0).collect(),
            observed: s.observed,
            percent: 100.0 * s.cumulative_fraction,
        })
        .collect();
    to_json(&stages)
}

#[derive(Serialize)]
struct VsiView {
    bus: usize,
    q_max: f64,
    vsi: f64,
    line: [usize; 2],
}

pub fn vsi_json(case: &str, step: f64) -> Result<String, String> {
    let net = load(case)?;
    if !(step > 0.0) {
        return Err("step must be positive".into());
    }
    let ranking = rank_critical(&net, &SweepConfig::with_step(step), 0).map_err(|e| e.to_string())?;
    let rows: Vec<VsiView> = ranking
        .records
        .iter()
        .map(|r| VsiView {
            bus: r.load_bus.0,
            q_max: r.q_max,
            vsi: r.vsi_at_limit,
            line: [r.critical_line.0 .0, r.critical_line.1 .0],
        })
        .collect();
    to_json(&rows)
}

#[wasm_bindgen]
pub fn network(case: &str) -> Result<String, JsError> {
    network_json(case).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn placement(case: &str, scenario: &str) -> Result<String, JsError> {
    placement_json(case, scenario).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn phasing(case: &str, budgets: &str, use_zib: bool) -> Result<String, JsError> {
    phasing_json(case, budgets, use_zib).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn vsi_ranking(case: &str, step: f64) -> Result<String, JsError> {
    vsi_json(case, step).map_err(|e| JsError::new(&e))
}
