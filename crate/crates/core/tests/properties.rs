mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trwmap::instances::random_tree_mrf;
use trwmap::lp::{in_local, in_local_tree, solve_local_lp, Pseudomarginal};
use trwmap::model::{ising_to_overcomplete, load_model, save_model};
use trwmap::treedp::{backtrack_optimum, brute_force_map, tree_max_marginals};
use trwmap::trees::{
    edge_appearance, enumerate_spanning_trees, Reweighting, SpanningTree, TreeDistribution,
};
use trwmap::trw::{run_trw, thetas_from_pseudo, upper_bound, TrwConfig, Variant};
use trwmap::{Assignment, PairwiseMrf, Potentials};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_assignment(rng: &mut ChaCha8Rng, mrf: &PairwiseMrf) -> Vec<usize> {
    mrf.cards().iter().map(|&m| rng.gen_range(0..m)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_is_linear_in_theta(seed in any::<u64>(), c in -3.0f64..3.0) {
        let mut r = rng(seed);
        let a = common::random_connected(&mut r, 5, 3, 3, 1.0);
        let b = common::random_connected(&mut rng(seed), 5, 3, 3, 2.0);
        let b = a.with_theta(b.theta().map(|v| v * 0.7 + 0.1)).unwrap();
        let mut sum = a.theta().clone();
        sum.add_scaled(c, b.theta());
        let x = random_assignment(&mut r, &a);
        let lhs = a.score_with(&sum, &x);
        let rhs = a.score_with(a.theta(), &x) + c * a.score_with(b.theta(), &x);
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn ising_conversion_preserves_scores(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=7);
        let edges: Vec<(usize, usize)> = (1..n).map(|v| (r.gen_range(0..v), v)).collect();
        let h: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let j: Vec<f64> = edges.iter().map(|_| r.gen_range(-1.0..1.0)).collect();
        let m = ising_to_overcomplete(n, &edges, &h, &j).unwrap();
        m.for_each_state(1 << 10, |x| {
            let spin = |s: usize| if x[s] == 0 { -1.0 } else { 1.0 };
            let direct: f64 = (0..n).map(|s| h[s] * spin(s)).sum::<f64>()
                + edges.iter().zip(&j).map(|(&(s, t), w)| w * spin(s) * spin(t)).sum::<f64>();
            assert!((m.score_with(m.theta(), x) - direct).abs() < 1e-12);
        }).unwrap();
    }

    #[test]
    fn spanning_tree_count_matches_kirchhoff(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=8);
        let m = common::random_connected(&mut r, n, 2, 6, 1.0);
        let trees = enumerate_spanning_trees(&m).unwrap();
        let expect = common::kirchhoff_count(n, m.edges());
        prop_assert_eq!(trees.len() as f64, expect.round());
        // each edge's share is the tree count of G / e over the tree count of G
        let dist = TreeDistribution::uniform_all(&m).unwrap();
        let rho = edge_appearance(&dist, &m).unwrap();
        for (e, &(s, t)) in m.edges().iter().enumerate() {
            // trees containing e correspond to spanning trees of G / e
            let contracted: Vec<(usize, usize)> = m
                .edges()
                .iter()
                .enumerate()
                .filter(|&(f, _)| f != e)
                .map(|(_, &(a, b))| {
                    let relabel = |v: usize| {
                        let v = if v == t { s } else { v };
                        if v > t { v - 1 } else { v }
                    };
                    (relabel(a), relabel(b))
                })
                .filter(|(a, b)| a != b)
                .collect();
            let containing = common::kirchhoff_count(n - 1, &contracted);
            prop_assert!((rho.rho()[e] - containing / expect).abs() < 1e-9);
        }
        let total: f64 = rho.rho().iter().sum();
        prop_assert!((total - (n - 1) as f64).abs() < 1e-9);
    }

    #[test]
    fn tree_max_marginals_match_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=7);
        let m = random_tree_mrf(&mut r, n, 3);
        let tree = SpanningTree::whole(&m).unwrap();
        let mm = tree_max_marginals(&m, &tree, m.theta()).unwrap();
        let (node, edge) = common::enumerated_max_marginals(&m, m.theta());
        for (a, b) in mm.node.iter().flatten().zip(node.iter().flatten()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for (e, table) in edge.iter().enumerate() {
            for (a, b) in mm.edge[e].as_ref().unwrap().iter().zip(table) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
        // backtracking from any root lands on an optimum
        let opt = brute_force_map(&m).unwrap();
        let root = r.gen_range(0..n);
        let x = backtrack_optimum(&m, &mm, &tree, root).unwrap();
        prop_assert!((m.score(&x).unwrap() - opt.value).abs() < 1e-9);
    }

    #[test]
    fn tree_max_marginals_factorize(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=7);
        let m = random_tree_mrf(&mut r, n, 3);
        let tree = SpanningTree::whole(&m).unwrap();
        let mm = tree_max_marginals(&m, &tree, m.theta()).unwrap();
        let opt = brute_force_map(&m).unwrap();
        // max_x [sum_s log nu_s + sum_st (log nu_st - log nu_s - log nu_t)] = 0
        // and the score difference between configurations is preserved
        let factored = |x: &[usize]| -> f64 {
            let mut v: f64 = (0..n).map(|s| mm.node[s][x[s]]).sum();
            for (e, &(s, t)) in m.edges().iter().enumerate() {
                v += mm.edge[e].as_ref().unwrap()[x[s] * m.card(t) + x[t]] - mm.node[s][x[s]] - mm.node[t][x[t]];
            }
            v
        };
        let x = random_assignment(&mut r, &m);
        let best = opt.configs[0].values();
        let lhs = factored(&x) - factored(best);
        let rhs = m.score_with(m.theta(), &x) - opt.value;
        prop_assert!((lhs - rhs).abs() < 1e-9);
        prop_assert!(factored(best).abs() < 1e-9);
    }

    #[test]
    fn local_polytope_is_intersection_of_tree_polytopes(seed in any::<u64>(), consistent in any::<bool>()) {
        let mut r = rng(seed);
        let n = r.gen_range(3..=6);
        let m = common::random_connected(&mut r, n, 3, 3, 1.0);
        let tau = random_pseudomarginal(&mut r, &m, consistent);
        let trees = enumerate_spanning_trees(&m).unwrap();
        let all = trees.iter().all(|t| in_local_tree(&m, t, &tau, 1e-9));
        prop_assert_eq!(in_local(&m, &tau, 1e-9), all);
        if consistent {
            prop_assert!(all);
        }
    }

    #[test]
    fn relabeling_nodes_preserves_values(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(3..=6);
        let m = common::random_connected(&mut r, n, 3, 3, 1.0);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.gen_range(0..=i));
        }
        let p = permute(&m, &perm);
        let a = brute_force_map(&m).unwrap().value;
        let b = brute_force_map(&p).unwrap().value;
        prop_assert!((a - b).abs() < 1e-9);
        let la = solve_local_lp(&m).unwrap().value;
        let lb = solve_local_lp(&p).unwrap().value;
        prop_assert!((la - lb).abs() < 1e-7);
    }

    #[test]
    fn map_local_and_tree_bounds_are_ordered(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(3..=6);
        let m = common::random_connected(&mut r, n, 2, 3, 1.0);
        let map = brute_force_map(&m).unwrap().value;
        let lp = solve_local_lp(&m).unwrap().value;
        prop_assert!(map <= lp + 1e-7);
        let dist = TreeDistribution::uniform_all(&m).unwrap();
        let config = TrwConfig { max_iterations: 40, ..TrwConfig::default() };
        let run = run_trw(&m, &Reweighting::Trees(dist.clone()), &config, Variant::Messages).unwrap();
        let bound = upper_bound(&m, &dist, &thetas_from_pseudo(&m, &run.nu, &dist)).unwrap();
        prop_assert!(lp <= bound + 1e-7, "LP {} above tree bound {}", lp, bound);
    }

    #[test]
    fn model_documents_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=6);
        let m = common::random_connected(&mut r, n, 4, 4, 5.0);
        let back = load_model(&save_model(&m)).unwrap();
        prop_assert_eq!(back, m);
    }
}

fn random_pseudomarginal(
    rng: &mut ChaCha8Rng,
    m: &PairwiseMrf,
    consistent: bool,
) -> Pseudomarginal {
    let simplex = |rng: &mut ChaCha8Rng, k: usize| -> Vec<f64> {
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|v| v / total).collect()
    };
    let node: Vec<Vec<f64>> = m.cards().iter().map(|&k| simplex(rng, k)).collect();
    let edge = m
        .edges()
        .iter()
        .map(|&(s, t)| {
            if consistent {
                node[s]
                    .iter()
                    .flat_map(|a| node[t].iter().map(move |b| a * b))
                    .collect()
            } else {
                simplex(rng, m.card(s) * m.card(t))
            }
        })
        .collect();
    Pseudomarginal { node, edge }
}

fn permute(m: &PairwiseMrf, perm: &[usize]) -> PairwiseMrf {
    let n = m.node_count();
    let mut cards = vec![0; n];
    let mut node = vec![Vec::new(); n];
    for s in 0..n {
        cards[perm[s]] = m.card(s);
        node[perm[s]] = m.theta().node[s].clone();
    }
    let mut edges = Vec::new();
    let mut tables = Vec::new();
    for (e, &(s, t)) in m.edges().iter().enumerate() {
        let (a, b) = (perm[s], perm[t]);
        let table = &m.theta().edge[e];
        if a < b {
            edges.push((a, b));
            tables.push(table.clone());
        } else {
            let (ms, mt) = (m.card(s), m.card(t));
            let mut flipped = vec![0.0; ms * mt];
            for i in 0..ms {
                for j in 0..mt {
                    flipped[j * ms + i] = table[i * mt + j];
                }
            }
            edges.push((b, a));
            tables.push(flipped);
        }
    }
    PairwiseMrf::new(cards, edges, node, tables).unwrap()
}

#[test]
fn random_pseudomarginals_detect_inconsistency() {
    let mut r = rng(9);
    let mut outside = 0;
    for _ in 0..100 {
        let m = common::random_connected(&mut r, 5, 3, 3, 1.0);
        let tau = random_pseudomarginal(&mut r, &m, false);
        let trees = enumerate_spanning_trees(&m).unwrap();
        let all = trees.iter().all(|t| in_local_tree(&m, t, &tau, 1e-9));
        assert_eq!(in_local(&m, &tau, 1e-9), all);
        outside += usize::from(!all);
    }
    assert!(outside > 90);
}

#[test]
fn integral_points_are_in_every_tree_polytope() {
    let mut r = rng(10);
    let m = common::random_connected(&mut r, 6, 3, 4, 1.0);
    let trees = enumerate_spanning_trees(&m).unwrap();
    for _ in 0..20 {
        let x = Assignment(random_assignment(&mut r, &m));
        let tau = Pseudomarginal::indicator(&m, &x).unwrap();
        assert!(trees.iter().all(|t| in_local_tree(&m, t, &tau, 0.0)));
        assert!((tau.objective(&m) - m.score(&x).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn zero_potentials_score_zero() {
    let m = PairwiseMrf::zeros(vec![2, 3, 2], vec![(0, 1), (1, 2)]).unwrap();
    let theta = Potentials::zeros(m.cards(), m.edges());
    m.for_each_state(100, |x| assert_eq!(m.score_with(&theta, x), 0.0))
        .unwrap();
}
