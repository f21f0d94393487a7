//! Small reference models and random model generators.

use rand::Rng;

use crate::error::Result;
use crate::model::{grid_edges, ising_to_overcomplete, PairwiseMrf};
use crate::trees::{SpanningTree, TreeDistribution};

/// Three binary nodes on a triangle with zero node terms and edge matrix
/// `[[0, -beta], [-beta, 0]]`. Frustrated for `beta < 0`.
pub fn triangle(beta: f64) -> PairwiseMrf {
    let table = vec![0.0, -beta, -beta, 0.0];
    PairwiseMrf::new(
        vec![2; 3],
        vec![(0, 1), (0, 2), (1, 2)],
        vec![vec![0.0; 2]; 3],
        vec![table; 3],
    )
    .expect("triangle is well formed")
}

/// Ising model on a 4-cycle with unit couplings and no fields.
pub fn cycle4() -> PairwiseMrf {
    ising_to_overcomplete(4, &[(0, 1), (1, 2), (2, 3), (0, 3)], &[0.0; 4], &[1.0; 4])
        .expect("cycle is well formed")
}

/// Four binary nodes: two outer nodes `0` and `3` joined through two middle
/// nodes `1` and `2`, which are also joined to each other. Node terms are
/// `[0, alpha]` on the outer nodes and `[0, beta]` on the middle ones; every
/// edge carries `[[0, -gamma], [-gamma, 0]]`.
pub fn diamond(alpha: f64, beta: f64, gamma: f64) -> PairwiseMrf {
    let table = vec![0.0, -gamma, -gamma, 0.0];
    PairwiseMrf::new(
        vec![2; 4],
        vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)],
        vec![
            vec![0.0, alpha],
            vec![0.0, beta],
            vec![0.0, beta],
            vec![0.0, alpha],
        ],
        vec![table; 5],
    )
    .expect("diamond is well formed")
}

/// The diamond at `alpha = 0.31, beta = -0.30, gamma = 2`, where plain
/// max-product settles on `0000` but the optimum is `1111`.
pub fn diamond_counterexample() -> PairwiseMrf {
    diamond(0.31, -0.30, 2.0)
}

/// A 4-cycle `0-1-2-3` with chord `(0, 2)` and pendant edge `(2, 4)`, and
/// three spanning trees with weight 1/3 each. The pendant edge lies in all
/// three trees, `(0, 1)` in two, and the chord in one.
pub fn three_tree_example() -> (PairwiseMrf, TreeDistribution) {
    let m = PairwiseMrf::zeros(
        vec![2; 5],
        vec![(0, 1), (1, 2), (2, 3), (0, 3), (0, 2), (2, 4)],
    )
    .expect("graph is well formed");
    let trees = [
        vec![(0, 1), (1, 2), (2, 3), (2, 4)],
        vec![(0, 1), (0, 2), (2, 3), (2, 4)],
        vec![(1, 2), (2, 3), (0, 3), (2, 4)],
    ]
    .iter()
    .map(|pairs| SpanningTree::from_pairs(&m, pairs).expect("valid tree"))
    .collect();
    let dist = TreeDistribution::uniform(&m, trees).expect("valid distribution");
    (m, dist)
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// A random tree on `n` nodes (each node after the first attaches to a
/// uniformly chosen earlier node) with cardinalities in `2..=max_card` and
/// parameters uniform on `[-1, 1]`.
pub fn random_tree_mrf(rng: &mut impl Rng, n: usize, max_card: usize) -> PairwiseMrf {
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=max_card.max(2))).collect();
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    random_parameters(rng, cards, edges, 1.0)
}

/// Uniform `[-scale, scale]` parameters on a given graph.
pub fn random_parameters(
    rng: &mut impl Rng,
    cards: Vec<usize>,
    edges: Vec<(usize, usize)>,
    scale: f64,
) -> PairwiseMrf {
    let node = cards
        .iter()
        .map(|&m| (0..m).map(|_| uniform(rng, -scale, scale)).collect())
        .collect();
    let edge = edges
        .iter()
        .map(|&(s, t)| {
            (0..cards[s] * cards[t])
                .map(|_| uniform(rng, -scale, scale))
                .collect()
        })
        .collect();
    PairwiseMrf::new(cards, edges, node, edge).expect("random model is well formed")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    /// Couplings uniform on `[0, gamma]`.
    Attractive,
    /// Couplings uniform on `[-gamma/2, gamma/2]`.
    Mixed,
}

/// Ising grid with fields uniform on `[-1, 1]` and couplings drawn per
/// `coupling`, converted to the overcomplete form. Fields are drawn first
/// in node order, then couplings in [`grid_edges`] order.
pub fn random_grid_ising(
    rng: &mut impl Rng,
    rows: usize,
    cols: usize,
    gamma: f64,
    coupling: Coupling,
) -> Result<PairwiseMrf> {
    let edges = grid_edges(rows, cols);
    let fields: Vec<f64> = (0..rows * cols).map(|_| uniform(rng, -1.0, 1.0)).collect();
    let couplings: Vec<f64> = edges
        .iter()
        .map(|_| match coupling {
            Coupling::Attractive => uniform(rng, 0.0, gamma),
            Coupling::Mixed => uniform(rng, -gamma / 2.0, gamma / 2.0),
        })
        .collect();
    ising_to_overcomplete(rows * cols, &edges, &fields, &couplings)
}
