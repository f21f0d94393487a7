//! Pairwise Markov random fields in the canonical overcomplete
//! representation.
//!
//! A model is a graph with per-node state counts, one real table per node
//! (`theta_s(x_s)`) and one real matrix per edge (`theta_st(x_s, x_t)`).
//! Edges are unordered, but every edge is stored as `(s, t)` with `s < t`
//! and its matrix is row-major with rows indexed by the lower endpoint.

mod factor;
mod io;

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

pub use factor::{factor_to_pairwise, Factor, FactorGraph, INDICATOR_PENALTY};
pub use io::{load_model, save_model};

/// Node tables and edge matrices aligned with a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Potentials {
    pub node: Vec<Vec<f64>>,
    /// Row-major `m_s x m_t` matrices, aligned with the edge list.
    pub edge: Vec<Vec<f64>>,
}

impl Potentials {
    pub fn zeros(cards: &[usize], edges: &[(usize, usize)]) -> Self {
        Potentials {
            node: cards.iter().map(|&m| vec![0.0; m]).collect(),
            edge: edges
                .iter()
                .map(|&(s, t)| {
                    let m = |v: usize| cards.get(v).copied().unwrap_or(0);
                    vec![0.0; m(s) * m(t)]
                })
                .collect(),
        }
    }

    /// Applies `f` to every entry.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Potentials {
            node: self
                .node
                .iter()
                .map(|v| v.iter().map(|&a| f(a)).collect())
                .collect(),
            edge: self
                .edge
                .iter()
                .map(|v| v.iter().map(|&a| f(a)).collect())
                .collect(),
        }
    }

    /// `self += weight * other`, entrywise.
    pub fn add_scaled(&mut self, weight: f64, other: &Potentials) {
        for (a, b) in self.node.iter_mut().zip(&other.node) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += weight * y;
            }
        }
        for (a, b) in self.edge.iter_mut().zip(&other.edge) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += weight * y;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Potentials) -> f64 {
        let nodes = self.node.iter().flatten().zip(other.node.iter().flatten());
        let edges = self.edge.iter().flatten().zip(other.edge.iter().flatten());
        nodes
            .chain(edges)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One incident edge seen from a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Incidence {
    pub neighbor: usize,
    pub edge: usize,
}

#[derive(Clone, Debug)]
pub struct PairwiseMrf {
    cards: Vec<usize>,
    edges: Vec<(usize, usize)>,
    theta: Potentials,
    neighbors: Vec<Vec<Incidence>>,
    edge_lookup: HashMap<(usize, usize), usize>,
}

impl PartialEq for PairwiseMrf {
    fn eq(&self, other: &Self) -> bool {
        self.cards == other.cards && self.edges == other.edges && self.theta == other.theta
    }
}

impl PairwiseMrf {
    pub fn new(
        cards: Vec<usize>,
        edges: Vec<(usize, usize)>,
        theta_node: Vec<Vec<f64>>,
        theta_edge: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = cards.len();
        if n == 0 {
            return Err(Error::InvalidModel("model has no nodes".into()));
        }
        if let Some(s) = cards.iter().position(|&m| m == 0) {
            return Err(Error::InvalidModel(format!("node {s} has cardinality 0")));
        }
        let mut edge_lookup = HashMap::with_capacity(edges.len());
        for (e, &(s, t)) in edges.iter().enumerate() {
            if s >= n || t >= n {
                return Err(Error::InvalidModel(format!(
                    "edge {e} ({s}, {t}) references a node outside 0..{n}"
                )));
            }
            if s == t {
                return Err(Error::InvalidModel(format!(
                    "edge {e} ({s}, {t}) is a self-loop"
                )));
            }
            if s > t {
                return Err(Error::InvalidModel(format!(
                    "edge {e} ({s}, {t}) must be stored with the lower index first"
                )));
            }
            if edge_lookup.insert((s, t), e).is_some() {
                return Err(Error::InvalidModel(format!("edge ({s}, {t}) is repeated")));
            }
        }
        if theta_node.len() != n {
            return Err(Error::InvalidModel(format!(
                "expected {n} node tables, found {}",
                theta_node.len()
            )));
        }
        for (s, table) in theta_node.iter().enumerate() {
            if table.len() != cards[s] {
                return Err(Error::InvalidModel(format!(
                    "node {s} table has shape {} but cardinality is {}",
                    table.len(),
                    cards[s]
                )));
            }
        }
        if theta_edge.len() != edges.len() {
            return Err(Error::InvalidModel(format!(
                "expected {} edge tables, found {}",
                edges.len(),
                theta_edge.len()
            )));
        }
        for (e, table) in theta_edge.iter().enumerate() {
            let (s, t) = edges[e];
            if table.len() != cards[s] * cards[t] {
                return Err(Error::InvalidModel(format!(
                    "edge ({s}, {t}) table has shape {} but expected {}x{}",
                    table.len(),
                    cards[s],
                    cards[t]
                )));
            }
        }
        let theta = Potentials {
            node: theta_node,
            edge: theta_edge,
        };
        if theta
            .node
            .iter()
            .chain(&theta.edge)
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidModel("parameters must be finite".into()));
        }
        let mut neighbors = vec![Vec::new(); n];
        for (e, &(s, t)) in edges.iter().enumerate() {
            neighbors[s].push(Incidence {
                neighbor: t,
                edge: e,
            });
            neighbors[t].push(Incidence {
                neighbor: s,
                edge: e,
            });
        }
        Ok(PairwiseMrf {
            cards,
            edges,
            theta,
            neighbors,
            edge_lookup,
        })
    }

    /// Same graph, zero parameters.
    pub fn zeros(cards: Vec<usize>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let theta = Potentials::zeros(&cards, &edges);
        PairwiseMrf::new(cards, edges, theta.node, theta.edge)
    }

    /// Same graph with different parameters.
    pub fn with_theta(&self, theta: Potentials) -> Result<Self> {
        PairwiseMrf::new(
            self.cards.clone(),
            self.edges.clone(),
            theta.node,
            theta.edge,
        )
    }

    pub fn node_count(&self) -> usize {
        self.cards.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn card(&self, s: usize) -> usize {
        self.cards[s]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Index of the edge joining `a` and `b`, in either order.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn neighbors(&self, s: usize) -> &[Incidence] {
        &self.neighbors[s]
    }

    pub fn theta(&self) -> &Potentials {
        &self.theta
    }

    /// Number of joint configurations, saturating at `u128::MAX`.
    pub fn state_count(&self) -> u128 {
        self.cards
            .iter()
            .try_fold(1u128, |acc, &m| acc.checked_mul(m as u128))
            .unwrap_or(u128::MAX)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for inc in &self.neighbors[u] {
                if !seen[inc.neighbor] {
                    seen[inc.neighbor] = true;
                    stack.push(inc.neighbor);
                }
            }
        }
        seen.into_iter().all(|v| v)
    }

    pub fn validate(&self, x: &Assignment) -> Result<()> {
        if x.len() != self.node_count() {
            return Err(Error::InvalidAssignment(format!(
                "assignment has {} entries, model has {} nodes",
                x.len(),
                self.node_count()
            )));
        }
        for (s, (&v, &m)) in x.0.iter().zip(&self.cards).enumerate() {
            if v >= m {
                return Err(Error::InvalidAssignment(format!(
                    "node {s} has state {v} but cardinality {m}"
                )));
            }
        }
        Ok(())
    }

    /// `<theta, phi(x)>` for the model's own parameters.
    pub fn score(&self, x: &Assignment) -> Result<f64> {
        self.validate(x)?;
        Ok(self.score_with(&self.theta, &x.0))
    }

    /// `<theta, phi(x)>` for parameters aligned with this graph. `x` must be valid.
    pub fn score_with(&self, theta: &Potentials, x: &[usize]) -> f64 {
        let mut total: f64 = x.iter().enumerate().map(|(s, &v)| theta.node[s][v]).sum();
        for (e, &(s, t)) in self.edges.iter().enumerate() {
            total += theta.edge[e][x[s] * self.cards[t] + x[t]];
        }
        total
    }

    /// Visits every joint configuration in lexicographic order (node 0 most
    /// significant). Fails when the state space exceeds `limit`.
    pub fn for_each_state(&self, limit: u128, mut f: impl FnMut(&[usize])) -> Result<()> {
        let total = self.state_count();
        if total > limit {
            return Err(Error::Capacity(format!(
                "joint state space has {total} configurations, limit is {limit}"
            )));
        }
        let n = self.node_count();
        let mut x = vec![0usize; n];
        loop {
            f(&x);
            let mut pos = n;
            loop {
                if pos == 0 {
                    return Ok(());
                }
                pos -= 1;
                x[pos] += 1;
                if x[pos] < self.cards[pos] {
                    break;
                }
                x[pos] = 0;
            }
        }
    }
}

/// One state per node.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Assignment {
    fn from(v: Vec<usize>) -> Self {
        Assignment(v)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&v| v < 10) {
            for v in &self.0 {
                write!(f, "{v}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

/// Maps minimal Ising parameters over spins in {-1, +1} to the binary
/// overcomplete form, with state 0 standing for spin -1 and state 1 for +1.
pub fn ising_to_overcomplete(
    node_count: usize,
    edges: &[(usize, usize)],
    node_weights: &[f64],
    edge_weights: &[f64],
) -> Result<PairwiseMrf> {
    if node_weights.len() != node_count || edge_weights.len() != edges.len() {
        return Err(Error::InvalidModel(
            "weight vectors do not match the graph".into(),
        ));
    }
    if node_weights
        .iter()
        .chain(edge_weights)
        .any(|w| !w.is_finite())
    {
        return Err(Error::InvalidModel("Ising weights must be finite".into()));
    }
    let mut oriented = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        oriented.push((a.min(b), a.max(b)));
    }
    let theta_node = node_weights.iter().map(|&w| vec![-w, w]).collect();
    let theta_edge = edge_weights.iter().map(|&w| vec![w, -w, -w, w]).collect();
    PairwiseMrf::new(vec![2; node_count], oriented, theta_node, theta_edge)
}

/// Edge list of a `rows x cols` nearest-neighbour grid, nodes numbered
/// row-major. For each node in order: its right edge, then its down edge.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(beta: f64) -> PairwiseMrf {
        let edges = vec![(0, 1), (0, 2), (1, 2)];
        PairwiseMrf::new(
            vec![2; 3],
            edges,
            vec![vec![0.0, 0.0]; 3],
            vec![vec![0.0, -beta, -beta, 0.0]; 3],
        )
        .unwrap()
    }

    #[test]
    fn triangle_score() {
        let m = triangle(-1.0);
        assert_eq!(m.score(&vec![1, 0, 1].into()).unwrap(), 2.0);
    }

    #[test]
    fn zero_model_scores_zero() {
        let m = PairwiseMrf::zeros(vec![3, 2, 4], vec![(0, 1), (1, 2)]).unwrap();
        m.for_each_state(1 << 10, |x| assert_eq!(m.score_with(m.theta(), x), 0.0))
            .unwrap();
    }

    #[test]
    fn score_rejects_bad_assignment() {
        let m = triangle(1.0);
        assert!(matches!(
            m.score(&vec![0, 1].into()),
            Err(Error::InvalidAssignment(_))
        ));
        assert!(matches!(
            m.score(&vec![0, 2, 0].into()),
            Err(Error::InvalidAssignment(_))
        ));
    }

    #[test]
    fn cycle_ising_scores() {
        let edges = vec![(0, 1), (1, 2), (2, 3), (0, 3)];
        let m = ising_to_overcomplete(4, &edges, &[0.0; 4], &[1.0; 4]).unwrap();
        assert_eq!(m.score(&vec![1, 1, 1, 1].into()).unwrap(), 4.0);
        assert_eq!(m.score(&vec![1, 0, 1, 0].into()).unwrap(), -4.0);
    }

    #[test]
    fn ising_tables() {
        let m = ising_to_overcomplete(2, &[(0, 1)], &[0.0, 0.0], &[2.0]).unwrap();
        assert_eq!(m.theta().edge[0], vec![2.0, -2.0, -2.0, 2.0]);
        let z = ising_to_overcomplete(3, &[(0, 1), (1, 2)], &[0.0; 3], &[0.0; 2]).unwrap();
        assert!(z
            .theta()
            .node
            .iter()
            .chain(&z.theta().edge)
            .flatten()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn constructor_rejects_bad_graphs() {
        assert!(PairwiseMrf::zeros(vec![2, 2], vec![(0, 0)]).is_err());
        assert!(PairwiseMrf::zeros(vec![2, 2], vec![(0, 1), (0, 1)]).is_err());
        assert!(PairwiseMrf::zeros(vec![2, 2], vec![(0, 2)]).is_err());
        assert!(PairwiseMrf::new(vec![2], vec![], vec![vec![0.0; 3]], vec![]).is_err());
        assert!(PairwiseMrf::new(vec![2], vec![], vec![vec![f64::NAN, 0.0]], vec![]).is_err());
    }

    #[test]
    fn state_enumeration_order() {
        let m = PairwiseMrf::zeros(vec![2, 3], vec![(0, 1)]).unwrap();
        let mut seen = Vec::new();
        m.for_each_state(100, |x| seen.push(x.to_vec())).unwrap();
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 0]);
        assert_eq!(seen[1], vec![0, 1]);
        assert_eq!(seen[5], vec![1, 2]);
        assert!(m.for_each_state(5, |_| {}).is_err());
    }

    #[test]
    fn grid_edge_layout() {
        let e = grid_edges(2, 3);
        assert_eq!(e.len(), 7);
        assert_eq!(grid_edges(4, 4).len(), 24);
        assert_eq!(e[0], (0, 1));
        assert_eq!(e[1], (0, 3));
    }
}
