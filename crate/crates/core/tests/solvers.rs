mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use trwmap::instances::{cycle4, diamond_counterexample, three_tree_example, triangle};
use trwmap::lp::{build_local_lp, solve_local_lp, LpStatus, Vertex};
use trwmap::treedp::brute_force_map;
use trwmap::trees::{load_reweighting, Reweighting, TreeDistribution};
use trwmap::trw::{
    run_tree_updates, run_trw, OsOutcome, TreeUpdateTermination, TrwConfig, Variant,
};
use trwmap::{Assignment, Error};

#[test]
fn tree_updates_certify_the_diamond() {
    let m = diamond_counterexample();
    let dist = TreeDistribution::uniform_all(&m).unwrap();
    let r = run_tree_updates(&m, &dist, &TrwConfig::default()).unwrap();
    assert!(r.converged);
    assert_eq!(r.certificate(), Some(&Assignment(vec![1; 4])));
    assert!(r.message_units > 0);
}

#[test]
fn tree_updates_stop_without_certificate_on_frustrated_triangle() {
    let m = triangle(-1.0);
    let dist = TreeDistribution::uniform_all(&m).unwrap();
    let config = TrwConfig {
        max_iterations: 200,
        ..TrwConfig::default()
    };
    let r = run_tree_updates(&m, &dist, &config).unwrap();
    assert_eq!(r.os, OsOutcome::None);
    assert!(!matches!(
        r.termination,
        Some(TreeUpdateTermination::SharedOptimum(_))
    ));
}

#[test]
fn cycle_with_two_optima_gets_one_of_them() {
    let m = cycle4();
    let opt = brute_force_map(&m).unwrap();
    assert_eq!(opt.len(), 2);
    let dist = TreeDistribution::uniform_all(&m).unwrap();
    for variant in [Variant::Reparameterization, Variant::Messages] {
        let r = run_trw(
            &m,
            &Reweighting::Trees(dist.clone()),
            &TrwConfig::default(),
            variant,
        )
        .unwrap();
        let x = r.certificate().expect("certificate");
        assert!(opt.contains(x), "{variant:?}: {x}");
    }
}

#[test]
fn upper_bound_trace_never_below_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let m = common::random_connected(&mut rng, 6, 3, 4, 1.5);
        let map = brute_force_map(&m).unwrap().value;
        let dist = TreeDistribution::uniform_all(&m).unwrap();
        let r = run_trw(
            &m,
            &Reweighting::Trees(dist),
            &TrwConfig::default(),
            Variant::Messages,
        )
        .unwrap();
        assert!(!r.upper_bound.is_empty());
        assert!(r.upper_bound.iter().all(|&b| b >= map - 1e-9));
    }
}

#[test]
fn tree_documents_load_both_forms() {
    let (m, _) = three_tree_example();
    let doc = br#"[
        {"edges": [[0,1],[1,2],[2,3],[2,4]], "weight": 0.5},
        {"edges": [[0,1],[0,2],[2,3],[2,4]], "weight": 0.25},
        {"edges": [[1,2],[2,3],[0,3],[2,4]], "weight": 0.25}
    ]"#;
    let w = load_reweighting(doc, &m).unwrap();
    let rho = w.edge_appearance(&m).unwrap();
    assert_eq!(rho.rho()[m.edge_index(0, 1).unwrap()], 0.75);
    assert!(w.trees().is_some());

    let doc =
        br#"{"rho_e": {"0,1": 0.5, "1,2": 0.75, "2,3": 1.0, "0,3": 0.5, "0,2": 0.25, "2,4": 1.0}}"#;
    let w = load_reweighting(doc, &m).unwrap();
    assert!(w.trees().is_none());
    assert_eq!(w.edge_appearance(&m).unwrap().rho()[4], 0.25);
}

#[test]
fn tree_documents_report_locations() {
    let (m, _) = three_tree_example();
    let bad_tree = br#"[{"edges": [[0,1],[1,2]], "weight": 1.0}]"#;
    match load_reweighting(bad_tree, &m) {
        Err(Error::Parse { location, .. }) => assert_eq!(location, "trees[0]"),
        other => panic!("{other:?}"),
    }
    let missing = br#"{"rho_e": {"0,1": 0.5}}"#;
    assert!(matches!(
        load_reweighting(missing, &m),
        Err(Error::Parse { .. })
    ));
    let not_edge = br#"{"rho_e": {"1,4": 0.5}}"#;
    assert!(matches!(
        load_reweighting(not_edge, &m),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn local_lp_export_and_solution() {
    let m = triangle(1.0);
    let lp = build_local_lp(&m);
    assert_eq!(lp.variable_count(), 3 * 2 + 3 * 4);
    let text = lp.to_text();
    assert!(text.contains("tau_0_1_0_1"));
    let sol = lp.solve();
    assert_eq!(sol.status, LpStatus::Optimal);
    let local = solve_local_lp(&m).unwrap();
    assert!(matches!(local.vertex, Vertex::Integral(_)));
    assert!(local.value.abs() < 1e-9);
}
