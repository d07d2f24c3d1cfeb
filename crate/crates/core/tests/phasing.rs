use pmu_core::cases;
use pmu_core::observability::{observable, Placement};
use pmu_core::phasing::*;
use pmu_core::{BusId, ResilienceOptions};

fn observed_count(net: &pmu_core::Network, ids: &[usize]) -> usize {
    let p = Placement::from_bus_ids(net, ids).unwrap();
    observable(net, &p, ResilienceOptions::BASE).observed_count()
}

#[test]
fn each_stage_is_best_given_the_previous_ones() {
    let net = cases::ieee14();
    let plan = plan(&net, &[1, 1, 1, 1], false, PhasingMethod::Exact).unwrap();
    let mut installed: Vec<usize> = Vec::new();
    for stage in &plan.stages {
        let best = (1..=14)
            .filter(|b| !installed.contains(b))
            .map(|b| {
                let mut s = installed.clone();
                s.push(b);
                observed_count(&net, &s)
            })
            .max()
            .unwrap();
        installed.extend(stage.new_buses.iter().map(|b| b.0));
        assert_eq!(stage.observed, best);
        assert_eq!(observed_count(&net, &installed), stage.observed);
    }
}

#[test]
fn stages_do_not_look_ahead() {
    let net = cases::ieee14();
    let plan = plan(&net, &[1, 1, 1], false, PhasingMethod::Exact).unwrap();
    let myopic = plan.stages[2].observed;
    // the best three-PMU set observes more than the staged one
    assert_eq!(observed_count(&net, &[2, 6, 9]), 13);
    assert_eq!(myopic, 12);
}

#[test]
fn exact_never_trails_greedy() {
    for (net, budgets) in
        [(cases::ieee14(), vec![1, 1, 1, 1]), (cases::ieee14(), vec![2, 2]), (cases::ieee30(), vec![3, 4, 3])]
    {
        let e = plan(&net, &budgets, false, PhasingMethod::Exact).unwrap();
        let g = plan(&net, &budgets, false, PhasingMethod::Greedy).unwrap();
        for (a, b) in e.stages.iter().zip(&g.stages) {
            assert!(a.observed >= b.observed);
        }
    }
}

#[test]
fn plan_invariants() {
    let net = cases::ieee30();
    let p = plan(&net, &[2, 3, 5], true, PhasingMethod::Exact).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    let mut last = 0.0;
    for (stage, budget) in p.stages.iter().zip([2, 3, 5]) {
        assert_eq!(stage.new_buses.len(), budget);
        for b in &stage.new_buses {
            assert!(seen.insert(*b));
        }
        assert!(stage.cumulative_fraction >= last);
        last = stage.cumulative_fraction;
    }
}

#[test]
fn optimum_count_in_one_stage_is_complete() {
    for (net, k) in [(cases::ieee14(), 4), (cases::ieee30(), 10)] {
        let p = plan(&net, &[k], false, PhasingMethod::Exact).unwrap();
        assert_eq!(p.stages[0].cumulative_fraction, 1.0);
    }
}

#[test]
fn report_and_csv() {
    let net = cases::ieee14();
    let p = plan(&net, &[1, 1], false, PhasingMethod::Exact).unwrap();
    let rows = stage_report(&p);
    assert_eq!(rows[1].cumulative_pmus, 2);
    assert!((rows[0].observability_pct - 600.0 / 14.0).abs() < 1e-9);
    assert_eq!(p.stages[0].new_buses, vec![BusId(4)]);
    let csv = p.to_csv();
    assert_eq!(csv.lines().nth(1).unwrap(), "1,4,1,6,42.86");
}
