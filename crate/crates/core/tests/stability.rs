use pmu_core::cases;
use pmu_core::grid::parse_case;
use pmu_core::observability::Placement;
use pmu_core::power_flow::{receiving_end, solve, LoadOverride, PowerFlowConfig};
use pmu_core::stability::*;
use pmu_core::BusId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn vsi_agrees_with_expanded_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let r: f64 = rng.gen_range(0.0..0.5);
        let x: f64 = rng.gen_range(0.001..1.0) * if rng.gen_bool(0.1) { -1.0 } else { 1.0 };
        let q: f64 = rng.gen_range(-2.0..2.0);
        let v: f64 = rng.gen_range(0.8..1.2);
        let z = r.hypot(x);
        // 4 (r^2 + x^2) q / (v^2 x) written as a sum of two terms
        let expanded = 4.0 * q * (r * r / x + x) / (v * v);
        let got = vsi(z, x, q, v).unwrap();
        assert!((got - expanded).abs() <= 1e-12 * expanded.abs().max(1.0), "{got} vs {expanded}");
    }
}

fn ieee14_ranking(step: f64) -> VsiRanking {
    rank_critical(&cases::ieee14(), &SweepConfig::with_step(step), 10).unwrap()
}

/// Largest VSI over the lines that deliver power into `bus`.
fn feeding_max(net: &pmu_core::Network, bus: usize, extra: f64) -> Option<f64> {
    let mut load = LoadOverride::base(net);
    load.qd[bus] += extra;
    let sol = solve(net, Some(&load), &PowerFlowConfig::default()).unwrap();
    assert!(sol.converged);
    net.incident_branches(bus)
        .into_iter()
        .filter(|&k| receiving_end(net, &sol, k).unwrap().1 == bus)
        .map(|k| line_vsi(net, &sol, k).unwrap())
        .max_by(f64::total_cmp)
}

#[test]
fn feeding_line_vsi_rises_along_the_sweep() {
    let net = cases::ieee14();
    let cfg = SweepConfig { strategy: SweepStrategy::Linear, ..SweepConfig::default() };
    for i in net.load_buses() {
        let rec = loadability_sweep(&net, net.bus_id(i), &cfg).unwrap();
        let mut last = f64::NEG_INFINITY;
        for &(extra, _) in &rec.trace {
            if let Some(v) = feeding_max(&net, i, extra) {
                assert!(v >= last - 1e-12, "bus {} at {extra}", net.bus_id(i));
                last = v;
            }
        }
    }
}

#[test]
fn sending_lines_can_relax_early_in_the_sweep() {
    // bus 9 exports to 14 at base load, so that line's index falls first
    let net = cases::ieee14();
    let cfg = SweepConfig { strategy: SweepStrategy::Linear, ..SweepConfig::default() };
    let rec = loadability_sweep(&net, BusId(9), &cfg).unwrap();
    assert!(rec.trace[1].1 < rec.trace[0].1);
    let tail = &rec.trace[rec.trace.len() / 2..];
    assert!(tail.windows(2).all(|w| w[1].1 >= w[0].1));
}

#[test]
fn linear_and_galloping_agree_on_ieee14() {
    let net = cases::ieee14();
    let lin =
        rank_critical(&net, &SweepConfig { strategy: SweepStrategy::Linear, ..SweepConfig::default() }, 5).unwrap();
    let gal = rank_critical(&net, &SweepConfig::default(), 5).unwrap();
    for (a, b) in lin.records.iter().zip(&gal.records) {
        assert_eq!((a.load_bus, a.critical_line), (b.load_bus, b.critical_line));
        assert!((a.q_max - b.q_max).abs() < 1e-12);
    }
}

#[test]
fn halving_the_step_only_swaps_close_neighbours() {
    let coarse = ieee14_ranking(0.01);
    let fine = ieee14_ranking(0.005);
    let order_c: Vec<BusId> = coarse.records.iter().map(|r| r.load_bus).collect();
    let order_f: Vec<BusId> = fine.records.iter().map(|r| r.load_bus).collect();
    for (i, (a, b)) in order_c.iter().zip(&order_f).enumerate() {
        if a != b {
            let qa = fine.records.iter().find(|r| r.load_bus == *a).unwrap().q_max;
            let qb = fine.records.iter().find(|r| r.load_bus == *b).unwrap().q_max;
            assert!((qa - qb).abs() < 2.0 * 0.01, "position {i}: {a} vs {b}");
        }
    }
}

#[test]
fn ieee14_limits_are_near_unity() {
    let r = ieee14_ranking(0.005);
    assert_eq!(r.records.len(), 10);
    for rec in &r.records {
        assert!(rec.vsi_at_limit > 0.9 && rec.vsi_at_limit <= 1.0, "{rec:?}");
        assert!(rec.q_max > 0.0);
    }
    for w in r.records.windows(2) {
        assert!(w[0].q_max <= w[1].q_max);
    }
    let bus9 = r.records.iter().find(|x| x.load_bus == BusId(9)).unwrap();
    assert_eq!(bus9.critical_line, (BusId(4), BusId(9)));
    assert_eq!(r.to_csv().lines().count(), 11);
}

#[test]
fn single_load_bus_ranks_first() {
    let net = parse_case(
        "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0 100 1 1.1 0.9;\n2 1 10 5 0 0 1 1 0 100 1 1.1 0.9;\n];\n\
         mpc.gen = [\n1 0 0 999 -999 1 100 1 999 -999;\n];\nmpc.branch = [\n1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360;\n];\n",
    )
    .unwrap();
    let r = rank_critical(&net, &SweepConfig::default(), 1).unwrap();
    assert_eq!(r.critical_buses, vec![BusId(2)]);
    assert!(r.records[0].vsi_at_limit <= 1.0 && r.records[0].vsi_at_limit > 0.9);
}

#[test]
fn stiff_line_trips_the_guard_at_once() {
    // a resistive line with tiny reactance blows the index up immediately
    let net = parse_case(
        "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0 100 1 1.1 0.9;\n2 1 10 5 0 0 1 1 0 100 1 1.1 0.9;\n];\n\
         mpc.gen = [\n1 0 0 999 -999 1 100 1 999 -999;\n];\nmpc.branch = [\n1 2 0.05 0.00001 0 0 0 0 0 0 1 -360 360;\n];\n",
    )
    .unwrap();
    let rec = loadability_sweep(&net, BusId(2), &SweepConfig::default()).unwrap();
    assert_eq!(rec.q_max, 0.0);
}

#[test]
fn of3_sums_incident_line_scores() {
    let net = cases::ieee14();
    let vsi: Vec<f64> = (0..net.branches().len()).map(|k| 0.01 * (k + 1) as f64).collect();
    let p = Placement::from_bus_ids(&net, &[2, 6, 9]).unwrap();
    let mut expected = 0.0;
    for bus in [2, 6, 9] {
        for (k, br) in net.branches().iter().enumerate() {
            if br.from.0 == bus || br.to.0 == bus {
                expected += vsi[k];
            }
        }
    }
    assert!((of3_score(&net, &p, &vsi).unwrap() - expected).abs() < 1e-12);

    // a degree-one bus contributes its single line
    let b8 = Placement::from_bus_ids(&net, &[8]).unwrap();
    let k78 = net.branches().iter().position(|b| b.from.0 == 7 && b.to.0 == 8).unwrap();
    assert!((of3_score(&net, &b8, &vsi).unwrap() - vsi[k78]).abs() < 1e-12);
}

#[test]
fn wsoi_adds_critical_coverage_to_redundancy() {
    let net = cases::ieee14();
    let p = Placement::from_bus_ids(&net, &[2, 6, 9, 12, 14]).unwrap();
    let crit: Vec<usize> = [9].iter().map(|&b| net.index_of(BusId(b)).unwrap()).collect();
    let (entries, wsoi) = vsoi_wsoi(&net, &p, &crit).unwrap();
    assert_eq!(entries[0].vsoi, 2);
    assert_eq!(wsoi, 21 + 2);
}
