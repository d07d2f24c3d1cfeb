#![allow(dead_code)]

use pmu_core::{parse_case, Network};
use proptest::prelude::*;

/// Case text for a network on buses `1..=n`; bus 1 is the slack, buses in
/// `zibs` carry no load, every other bus a small load.
pub fn case_text(n: usize, edges: &[(usize, usize)], zibs: &[usize]) -> String {
    let mut s = String::from("mpc.baseMVA = 100;\nmpc.bus = [\n");
    for b in 1..=n {
        let kind = if b == 1 { 3 } else { 1 };
        let (pd, qd) = if b == 1 || zibs.contains(&b) { (0.0, 0.0) } else { (5.0, 1.0) };
        s.push_str(&format!("{b} {kind} {pd} {qd} 0 0 1 1 0 100 1 1.1 0.9;\n"));
    }
    s.push_str("];\nmpc.gen = [\n1 0 0 100 -100 1 100 1 200 0;\n];\nmpc.branch = [\n");
    for &(f, t) in edges {
        s.push_str(&format!("{f} {t} 0.01 0.1 0 0 0 0 0 0 1 -360 360;\n"));
    }
    s.push_str("];\n");
    s
}

pub fn network(n: usize, edges: &[(usize, usize)], zibs: &[usize]) -> Network {
    let net = parse_case(&case_text(n, edges, zibs)).expect("generated case is valid");
    assert_eq!(pmu_core::grid::detect_zibs(&net).len(), zibs.len());
    net
}

/// Random connected graph: a random spanning tree plus extra edges, and a
/// random subset of ZIBs among buses 2..=n.
pub fn arb_network(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<usize>)> {
    (2..=max_n).prop_flat_map(|n| {
        let parents: Vec<BoxedStrategy<usize>> = (2..=n).map(|b| (1..b).boxed()).collect();
        let extra = proptest::collection::vec((1..=n, 1..=n), 0..n);
        let zib_mask = proptest::collection::vec(proptest::bool::weighted(0.2), n);
        (Just(n), parents, extra, zib_mask).prop_map(|(n, parents, extra, mask)| {
            let mut edges: Vec<(usize, usize)> = parents.iter().enumerate().map(|(i, &p)| (p, i + 2)).collect();
            for (a, b) in extra {
                if a != b && !edges.contains(&(a.min(b), a.max(b))) && !edges.contains(&(a.max(b), a.min(b))) {
                    edges.push((a.min(b), a.max(b)));
                }
            }
            let zibs = (2..=n).filter(|&b| mask[b - 1]).collect();
            (n, edges, zibs)
        })
    })
}

pub fn deterministic_runner(cases: u32) -> proptest::test_runner::TestRunner {
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[7; 32]))
}
