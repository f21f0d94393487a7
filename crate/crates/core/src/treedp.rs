//! Exact computations: max-marginals on trees, backtracking, edge
//! consistency, and exhaustive oracles.
//!
//! Every max-marginal table is kept in the log domain and shifted so its
//! largest entry is 0.

use crate::error::{Error, Result};
use crate::model::{Assignment, PairwiseMrf, Potentials};
use crate::trees::{SpanningTree, TreeDistribution, TreeLayout};

/// Default cap on the number of joint states an exhaustive search visits.
pub const BRUTE_FORCE_LIMIT: u128 = 1 << 24;

/// Scores within this (relative) distance of the maximum count as ties.
pub const TIE_TOL: f64 = 1e-9;

/// Read access to log-domain node and edge tables.
pub trait LogTables {
    fn log_node(&self, s: usize) -> &[f64];
    /// `None` for edges without a table.
    fn log_edge(&self, e: usize) -> Option<&[f64]>;
}

/// Log max-marginals of a tree-structured distribution. Only tree edges
/// carry a table.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxMarginals {
    pub node: Vec<Vec<f64>>,
    pub edge: Vec<Option<Vec<f64>>>,
}

impl LogTables for MaxMarginals {
    fn log_node(&self, s: usize) -> &[f64] {
        &self.node[s]
    }

    fn log_edge(&self, e: usize) -> Option<&[f64]> {
        self.edge[e].as_deref()
    }
}

/// Optimal value and the complete set of maximizers, in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct OptSet {
    pub value: f64,
    pub configs: Vec<Assignment>,
}

impl OptSet {
    pub fn contains(&self, x: &Assignment) -> bool {
        self.configs.binary_search(x).is_ok()
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

pub(crate) fn shift_to_max(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for a in v {
        *a -= m;
    }
}

pub(crate) fn is_tie(v: f64, best: f64) -> bool {
    v >= best - TIE_TOL * best.abs().max(1.0)
}

/// Exhaustive maximum of the model's own score.
pub fn brute_force_map(mrf: &PairwiseMrf) -> Result<OptSet> {
    opt_set_with_limit(mrf, mrf.theta(), BRUTE_FORCE_LIMIT)
}

pub fn brute_force_map_with_limit(mrf: &PairwiseMrf, limit: u128) -> Result<OptSet> {
    opt_set_with_limit(mrf, mrf.theta(), limit)
}

/// Exhaustive maximum of `<theta, phi(x)>` for parameters on this graph.
pub fn opt_set(mrf: &PairwiseMrf, theta: &Potentials) -> Result<OptSet> {
    opt_set_with_limit(mrf, theta, BRUTE_FORCE_LIMIT)
}

pub fn opt_set_with_limit(mrf: &PairwiseMrf, theta: &Potentials, limit: u128) -> Result<OptSet> {
    let mut best = f64::NEG_INFINITY;
    let mut configs: Vec<(f64, Vec<usize>)> = Vec::new();
    mrf.for_each_state(limit, |x| {
        let v = mrf.score_with(theta, x);
        if v > best {
            best = v;
            configs.retain(|(w, _)| is_tie(*w, best));
        }
        if is_tie(v, best) {
            configs.push((v, x.to_vec()));
        }
    })?;
    Ok(OptSet {
        value: best,
        configs: configs.into_iter().map(|(_, x)| Assignment(x)).collect(),
    })
}

fn check_on_tree(mrf: &PairwiseMrf, tree: &SpanningTree, theta: &Potentials) -> Result<()> {
    for (e, table) in theta.edge.iter().enumerate() {
        if !tree.contains(e) && table.iter().any(|&v| v != 0.0) {
            let (s, t) = mrf.edge(e);
            return Err(Error::OffTreeParameter(s, t));
        }
    }
    Ok(())
}

/// Max over `x_t` of `table(x_s, x_t) + add(x_t)`, for an `m_s x m_t` table,
/// returned as a vector over `x_s`.
pub(crate) fn max_over_cols(table: &[f64], ms: usize, mt: usize, add: &[f64]) -> Vec<f64> {
    (0..ms)
        .map(|i| {
            (0..mt)
                .map(|j| table[i * mt + j] + add[j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Max over `x_s` of `table(x_s, x_t) + add(x_s)`, returned over `x_t`.
pub(crate) fn max_over_rows(table: &[f64], ms: usize, mt: usize, add: &[f64]) -> Vec<f64> {
    (0..mt)
        .map(|j| {
            (0..ms)
                .map(|i| table[i * mt + j] + add[i])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Sends a max-product message across edge `e` from node `from`:
/// `out(x_to) = max_{x_from} [table(x_from, x_to) + h(x_from)]`.
pub(crate) fn send(mrf: &PairwiseMrf, e: usize, table: &[f64], from: usize, h: &[f64]) -> Vec<f64> {
    let (s, t) = mrf.edge(e);
    let (ms, mt) = (mrf.card(s), mrf.card(t));
    if from == s {
        max_over_rows(table, ms, mt, h)
    } else {
        max_over_cols(table, ms, mt, h)
    }
}

struct TreePass {
    layout: TreeLayout,
    /// message from each non-root node to its parent, over parent states
    up: Vec<Vec<f64>>,
    /// message from each non-root node's parent down to it
    down: Vec<Vec<f64>>,
}

fn upward(
    mrf: &PairwiseMrf,
    tree: &SpanningTree,
    theta: &Potentials,
    root: usize,
) -> Result<(TreePass, Vec<f64>)> {
    let layout = tree.layout(mrf, root)?;
    let n = mrf.node_count();
    let mut inbound: Vec<Vec<f64>> = theta.node.clone();
    let mut up = vec![Vec::new(); n];
    for &c in layout.order.iter().rev() {
        if let Some(p) = layout.parent[c] {
            let msg = send(mrf, p.edge, &theta.edge[p.edge], c, &inbound[c]);
            for (a, b) in inbound[p.neighbor].iter_mut().zip(&msg) {
                *a += b;
            }
            up[c] = msg;
        }
    }
    let root_belief = inbound[root].clone();
    Ok((
        TreePass {
            layout,
            up,
            down: vec![Vec::new(); n],
        },
        root_belief,
    ))
}

/// `max_x <theta, phi(x)>` for parameters supported on `tree`.
pub fn tree_max_value(mrf: &PairwiseMrf, tree: &SpanningTree, theta: &Potentials) -> Result<f64> {
    check_on_tree(mrf, tree, theta)?;
    let (_, root_belief) = upward(mrf, tree, theta, 0)?;
    Ok(root_belief.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Exact log max-marginals of a tree-structured parameter by two-pass
/// max-product on the tree.
pub fn tree_max_marginals(
    mrf: &PairwiseMrf,
    tree: &SpanningTree,
    theta: &Potentials,
) -> Result<MaxMarginals> {
    check_on_tree(mrf, tree, theta)?;
    let (mut pass, _) = upward(mrf, tree, theta, 0)?;
    let n = mrf.node_count();
    // full belief at each node: theta plus every incoming message
    let mut belief: Vec<Vec<f64>> = theta.node.clone();
    for c in 0..n {
        if let Some(p) = pass.layout.parent[c] {
            for (a, b) in belief[p.neighbor].iter_mut().zip(&pass.up[c]) {
                *a += b;
            }
        }
    }
    for &c in &pass.layout.order {
        if let Some(p) = pass.layout.parent[c] {
            let h: Vec<f64> = belief[p.neighbor]
                .iter()
                .zip(&pass.up[c])
                .map(|(a, b)| a - b)
                .collect();
            let msg = send(mrf, p.edge, &theta.edge[p.edge], p.neighbor, &h);
            for (a, b) in belief[c].iter_mut().zip(&msg) {
                *a += b;
            }
            pass.down[c] = msg;
        }
    }
    let mut edge = vec![None; mrf.edge_count()];
    for c in 0..n {
        let Some(p) = pass.layout.parent[c] else {
            continue;
        };
        let (s, t) = mrf.edge(p.edge);
        let mt = mrf.card(t);
        // cavity: belief excluding the message across this edge
        let cav_c: Vec<f64> = belief[c]
            .iter()
            .zip(&pass.down[c])
            .map(|(a, b)| a - b)
            .collect();
        let cav_p: Vec<f64> = belief[p.neighbor]
            .iter()
            .zip(&pass.up[c])
            .map(|(a, b)| a - b)
            .collect();
        let (hs, ht) = if s == c {
            (&cav_c, &cav_p)
        } else {
            (&cav_p, &cav_c)
        };
        let mut table = theta.edge[p.edge].clone();
        for (i, row) in table.chunks_mut(mt).enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += hs[i] + ht[j];
            }
        }
        shift_to_max(&mut table);
        edge[p.edge] = Some(table);
    }
    for b in &mut belief {
        shift_to_max(b);
    }
    Ok(MaxMarginals { node: belief, edge })
}

/// Per-edge edge-consistency deviation.
#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    /// `None` for edges without a table.
    pub per_edge: Vec<Option<f64>>,
}

impl ConsistencyReport {
    pub fn max_deviation(&self) -> f64 {
        self.per_edge.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Edges whose deviation exceeds `tol`.
    pub fn flagged(&self, tol: f64) -> Vec<usize> {
        self.per_edge
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_some_and(|d| d > tol))
            .map(|(e, _)| e)
            .collect()
    }
}

/// Relative deviation from `max_{x_t} nu_st(x_s, x_t) = kappa * nu_s(x_s)`
/// for a single constant, checked in both directions. A value `d` means
/// the implied constants differ by a factor of at most `1 + d`.
pub fn edge_deviation(mrf: &PairwiseMrf, nu: &impl LogTables, e: usize) -> Option<f64> {
    let table = nu.log_edge(e)?;
    let (s, t) = mrf.edge(e);
    let (ms, mt) = (mrf.card(s), mrf.card(t));
    let spread = |maxed: Vec<f64>, node: &[f64]| {
        let diffs = maxed.iter().zip(node).map(|(a, b)| a - b);
        let (lo, hi) = diffs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
        (hi - lo).exp_m1()
    };
    let to_s = spread(max_over_cols(table, ms, mt, &vec![0.0; mt]), nu.log_node(s));
    let to_t = spread(max_over_rows(table, ms, mt, &vec![0.0; ms]), nu.log_node(t));
    Some(to_s.max(to_t))
}

pub fn check_edge_consistency(mrf: &PairwiseMrf, nu: &impl LogTables) -> ConsistencyReport {
    ConsistencyReport {
        per_edge: (0..mrf.edge_count())
            .map(|e| edge_deviation(mrf, nu, e))
            .collect(),
    }
}

/// Lowest index whose value ties the maximum.
pub(crate) fn first_argmax(v: &[f64]) -> usize {
    let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter().position(|&a| a >= best - TIE_TOL).unwrap_or(0)
}

/// Reads an optimum off edge-consistent max-marginals: the root takes its
/// best state, then each child takes its best state given its parent.
/// Ties go to the lowest state index.
pub fn backtrack_optimum(
    mrf: &PairwiseMrf,
    nu: &impl LogTables,
    tree: &SpanningTree,
    root: usize,
) -> Result<Assignment> {
    let layout = tree.layout(mrf, root)?;
    let mut x = vec![0; mrf.node_count()];
    x[root] = first_argmax(nu.log_node(root));
    for &c in layout.order.iter().skip(1) {
        let p = layout.parent[c].expect("non-root node has a parent");
        let table = nu
            .log_edge(p.edge)
            .ok_or_else(|| Error::InvalidTree("max-marginals missing a tree edge".into()))?;
        let (s, t) = mrf.edge(p.edge);
        let mt = mrf.card(t);
        let slice: Vec<f64> = if c == t {
            table[x[s] * mt..(x[s] + 1) * mt].to_vec()
        } else {
            (0..mrf.card(s)).map(|i| table[i * mt + x[t]]).collect()
        };
        x[c] = first_argmax(&slice);
    }
    Ok(Assignment(x))
}

/// Exhaustive optimum set of a tree-structured parameter.
pub fn tree_opt_set(mrf: &PairwiseMrf, tree: &SpanningTree, theta: &Potentials) -> Result<OptSet> {
    check_on_tree(mrf, tree, theta)?;
    opt_set(mrf, theta)
}

/// `sum_T rho(T) max_x <theta(T), phi(x)>` over the support trees, with
/// `thetas` aligned with `dist.trees()`.
pub fn jensen_bound(
    mrf: &PairwiseMrf,
    dist: &TreeDistribution,
    thetas: &[Potentials],
) -> Result<f64> {
    let mut total = 0.0;
    for ((tree, &w), theta) in dist.trees().iter().zip(dist.weights()).zip(thetas) {
        if w > 0.0 {
            total += w * tree_max_value(mrf, tree, theta)?;
        }
    }
    Ok(total)
}

/// Configurations optimal for every support tree, by enumeration.
pub fn tree_agreement(
    mrf: &PairwiseMrf,
    dist: &TreeDistribution,
    thetas: &[Potentials],
) -> Result<Vec<Assignment>> {
    let mut common: Option<Vec<Assignment>> = None;
    for ((tree, &w), theta) in dist.trees().iter().zip(dist.weights()).zip(thetas) {
        if w <= 0.0 {
            continue;
        }
        let opt = tree_opt_set(mrf, tree, theta)?;
        common = Some(match common {
            None => opt.configs,
            Some(prev) => prev.into_iter().filter(|x| opt.contains(x)).collect(),
        });
    }
    Ok(common.unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ising_to_overcomplete;

    fn triangle(beta: f64) -> PairwiseMrf {
        PairwiseMrf::new(
            vec![2; 3],
            vec![(0, 1), (0, 2), (1, 2)],
            vec![vec![0.0; 2]; 3],
            vec![vec![0.0, -beta, -beta, 0.0]; 3],
        )
        .unwrap()
    }

    #[test]
    fn triangle_opt_sets() {
        let opt = brute_force_map(&triangle(1.0)).unwrap();
        assert_eq!(opt.value, 0.0);
        assert_eq!(
            opt.configs,
            vec![Assignment(vec![0; 3]), Assignment(vec![1; 3])]
        );
        let opt = brute_force_map(&triangle(-1.0)).unwrap();
        assert_eq!(opt.value, 2.0);
        assert_eq!(opt.len(), 6);
        assert!(!opt.contains(&Assignment(vec![0; 3])));
    }

    #[test]
    fn two_node_chain() {
        let m = PairwiseMrf::new(
            vec![2, 2],
            vec![(0, 1)],
            vec![vec![0.0; 2]; 2],
            vec![vec![0.0, -1.0, -1.0, 0.0]],
        )
        .unwrap();
        let t = SpanningTree::whole(&m).unwrap();
        let mm = tree_max_marginals(&m, &t, m.theta()).unwrap();
        assert_eq!(mm.node, vec![vec![0.0, 0.0]; 2]);
        assert_eq!(mm.edge[0].as_deref().unwrap(), &[0.0, -1.0, -1.0, 0.0]);
    }

    #[test]
    fn zero_parameters_give_flat_tables() {
        let m = PairwiseMrf::zeros(vec![2, 3, 2, 4], vec![(0, 1), (1, 2), (1, 3)]).unwrap();
        let t = SpanningTree::whole(&m).unwrap();
        let mm = tree_max_marginals(&m, &t, m.theta()).unwrap();
        assert!(mm.node.iter().flatten().all(|&v| v == 0.0));
        assert!(mm.edge.iter().flatten().flatten().all(|&v| v == 0.0));
        assert_eq!(tree_opt_set(&m, &t, m.theta()).unwrap().len(), 48);
    }

    #[test]
    fn off_tree_parameter_rejected() {
        let m = triangle(1.0);
        let t = SpanningTree::new(&m, vec![0, 1]).unwrap();
        assert!(matches!(
            tree_max_marginals(&m, &t, m.theta()),
            Err(Error::OffTreeParameter(1, 2))
        ));
    }

    #[test]
    fn consistency_flags_perturbation() {
        let m =
            ising_to_overcomplete(3, &[(0, 1), (1, 2)], &[0.3, -0.2, 0.5], &[0.7, -1.1]).unwrap();
        let t = SpanningTree::whole(&m).unwrap();
        let mut mm = tree_max_marginals(&m, &t, m.theta()).unwrap();
        assert!(check_edge_consistency(&m, &mm).max_deviation() < 1e-12);
        let table = mm.edge[1].as_mut().unwrap();
        let top = first_argmax(table);
        table[top] += 1.1f64.ln();
        let report = check_edge_consistency(&m, &mm);
        assert_eq!(report.flagged(1e-6), vec![1]);
    }

    #[test]
    fn backtrack_unique_chain() {
        let m = ising_to_overcomplete(
            4,
            &[(0, 1), (1, 2), (2, 3)],
            &[0.5, -0.1, 0.2, -0.4],
            &[0.3, 0.8, -0.6],
        )
        .unwrap();
        let t = SpanningTree::whole(&m).unwrap();
        let mm = tree_max_marginals(&m, &t, m.theta()).unwrap();
        let x = backtrack_optimum(&m, &mm, &t, 0).unwrap();
        let nodewise: Vec<usize> = mm.node.iter().map(|v| first_argmax(v)).collect();
        assert_eq!(x.values(), &nodewise[..]);
        assert_eq!(brute_force_map(&m).unwrap().configs, vec![x]);
    }

    #[test]
    fn tree_value_matches_enumeration() {
        let m = ising_to_overcomplete(
            5,
            &[(0, 1), (0, 2), (2, 3), (2, 4)],
            &[0.1, 0.2, -0.3, 0.4, -0.5],
            &[1.0, -0.5, 0.25, 0.7],
        )
        .unwrap();
        let t = SpanningTree::whole(&m).unwrap();
        let v = tree_max_value(&m, &t, m.theta()).unwrap();
        assert!((v - brute_force_map(&m).unwrap().value).abs() < 1e-12);
    }

    #[test]
    fn guard_respected() {
        let m = PairwiseMrf::zeros(vec![2; 10], vec![]).unwrap();
        assert!(matches!(
            brute_force_map_with_limit(&m, 512),
            Err(Error::Capacity(_))
        ));
    }
}
