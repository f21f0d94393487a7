#![allow(dead_code)]

use rand::Rng;
use trwmap::instances::random_parameters;
use trwmap::{PairwiseMrf, Potentials};

/// Random connected graph: a random tree plus up to `extra` chords.
pub fn random_connected(
    rng: &mut impl Rng,
    n: usize,
    max_card: usize,
    extra: usize,
    scale: f64,
) -> PairwiseMrf {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let e = (a.min(b), a.max(b));
        if a != b && !edges.contains(&e) {
            edges.push(e);
        }
    }
    let cards = (0..n).map(|_| rng.gen_range(2..=max_card.max(2))).collect();
    random_parameters(rng, cards, edges, scale)
}

/// Number of spanning trees by the matrix-tree theorem: determinant of the
/// Laplacian with the last row and column removed.
pub fn kirchhoff_count(n: usize, edges: &[(usize, usize)]) -> f64 {
    let k = n - 1;
    let mut a = vec![vec![0.0f64; k]; k];
    for &(s, t) in edges {
        for (u, v) in [(s, t), (t, s)] {
            if u < k {
                a[u][u] += 1.0;
                if v < k {
                    a[u][v] -= 1.0;
                }
            }
        }
    }
    let mut det = 1.0;
    for c in 0..k {
        let p = (c..k)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        let pivot = a[c].clone();
        for row in a.iter_mut().skip(c + 1) {
            let f = row[c] / pivot[c];
            row.iter_mut()
                .zip(&pivot)
                .skip(c)
                .for_each(|(x, p)| *x -= f * p);
        }
    }
    det
}

/// Log max-marginals by direct maximization over all configurations, each
/// table shifted to a maximum of 0. Edge tables for every graph edge.
pub fn enumerated_max_marginals(
    mrf: &PairwiseMrf,
    theta: &Potentials,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut node: Vec<Vec<f64>> = mrf
        .cards()
        .iter()
        .map(|&m| vec![f64::NEG_INFINITY; m])
        .collect();
    let mut edge: Vec<Vec<f64>> = mrf
        .edges()
        .iter()
        .map(|&(s, t)| vec![f64::NEG_INFINITY; mrf.card(s) * mrf.card(t)])
        .collect();
    mrf.for_each_state(1 << 22, |x| {
        let v = mrf.score_with(theta, x);
        for s in 0..x.len() {
            node[s][x[s]] = node[s][x[s]].max(v);
        }
        for (e, &(s, t)) in mrf.edges().iter().enumerate() {
            let k = x[s] * mrf.card(t) + x[t];
            edge[e][k] = edge[e][k].max(v);
        }
    })
    .unwrap();
    for v in node.iter_mut().chain(edge.iter_mut()) {
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        v.iter_mut().for_each(|a| *a -= m);
    }
    (node, edge)
}

/// Relative difference of `exp(a)` and `exp(b)` for log values.
pub fn rel_exp_diff(a: f64, b: f64) -> f64 {
    let (x, y) = (a.exp(), b.exp());
    (x - y).abs() / x.max(y)
}
