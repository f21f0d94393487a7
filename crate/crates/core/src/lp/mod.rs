//! The relaxation of MAP estimation to a linear program over the local
//! consistency polytope, plus exact comparisons against the marginal
//! polytope.

mod dual;
mod simplex;

use crate::error::{Error, Result};
use crate::model::{Assignment, PairwiseMrf};
use crate::treedp::brute_force_map;
use crate::trees::SpanningTree;

pub use dual::{dual_from_messages, evaluate_dual, DualVector};
pub use simplex::{LinearProgram, LpSolution, LpStatus, FEASIBILITY_TOL, PIVOT_TOL};

/// Tolerance for the equality constraints of the local polytope.
pub const LOCAL_TOL: f64 = 1e-9;
/// Entries this close to 0 or 1 count as integral.
pub const INTEGRAL_TOL: f64 = 1e-7;
/// Largest joint state space `membership_in_marg` will expand.
pub const MARG_STATE_LIMIT: u128 = 1 << 12;

/// Node and edge pseudomarginals; edge tables are row-major like the
/// model's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Pseudomarginal {
    pub node: Vec<Vec<f64>>,
    pub edge: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Vertex {
    Integral(Assignment),
    Fractional,
}

impl Pseudomarginal {
    /// Indicator vector of a configuration.
    pub fn indicator(mrf: &PairwiseMrf, x: &Assignment) -> Result<Self> {
        mrf.validate(x)?;
        let x = x.values();
        let node = (0..mrf.node_count())
            .map(|s| {
                (0..mrf.card(s))
                    .map(|j| f64::from(u8::from(j == x[s])))
                    .collect()
            })
            .collect();
        let edge = mrf
            .edges()
            .iter()
            .map(|&(s, t)| {
                let mt = mrf.card(t);
                (0..mrf.card(s) * mt)
                    .map(|k| f64::from(u8::from(k == x[s] * mt + x[t])))
                    .collect()
            })
            .collect();
        Ok(Pseudomarginal { node, edge })
    }

    /// `sum_i w_i * tau_i`.
    pub fn mix(parts: &[(f64, &Pseudomarginal)]) -> Self {
        let (_, first) = parts[0];
        let mut out = Pseudomarginal {
            node: first.node.iter().map(|v| vec![0.0; v.len()]).collect(),
            edge: first.edge.iter().map(|v| vec![0.0; v.len()]).collect(),
        };
        for &(w, p) in parts {
            for (a, b) in out.node.iter_mut().flatten().zip(p.node.iter().flatten()) {
                *a += w * b;
            }
            for (a, b) in out.edge.iter_mut().flatten().zip(p.edge.iter().flatten()) {
                *a += w * b;
            }
        }
        out
    }

    pub fn from_vector(mrf: &PairwiseMrf, v: &[f64]) -> Self {
        let mut it = v.iter().copied();
        let node = mrf
            .cards()
            .iter()
            .map(|&m| it.by_ref().take(m).collect())
            .collect();
        let edge = mrf
            .edges()
            .iter()
            .map(|&(s, t)| it.by_ref().take(mrf.card(s) * mrf.card(t)).collect())
            .collect();
        Pseudomarginal { node, edge }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        self.node
            .iter()
            .chain(&self.edge)
            .flatten()
            .copied()
            .collect()
    }

    /// `<theta, tau>` for the model's parameters.
    pub fn objective(&self, mrf: &PairwiseMrf) -> f64 {
        let theta = mrf.theta();
        let a = theta.node.iter().flatten().zip(self.node.iter().flatten());
        let b = theta.edge.iter().flatten().zip(self.edge.iter().flatten());
        a.chain(b).map(|(x, y)| x * y).sum()
    }

    fn shape_matches(&self, mrf: &PairwiseMrf) -> bool {
        self.node.len() == mrf.node_count()
            && self.edge.len() == mrf.edge_count()
            && self
                .node
                .iter()
                .zip(mrf.cards())
                .all(|(v, &m)| v.len() == m)
            && self
                .edge
                .iter()
                .zip(mrf.edges())
                .all(|(v, &(s, t))| v.len() == mrf.card(s) * mrf.card(t))
    }
}

/// Largest violation of nonnegativity, node normalization, and edge
/// marginalization, the latter only on edges where `on_edge` holds.
fn violation(mrf: &PairwiseMrf, tau: &Pseudomarginal, on_edge: impl Fn(usize) -> bool) -> f64 {
    let mut worst: f64 = 0.0;
    for v in tau.node.iter().flatten() {
        worst = worst.max(-v);
    }
    for v in &tau.node {
        worst = worst.max((v.iter().sum::<f64>() - 1.0).abs());
    }
    for (e, &(s, t)) in mrf.edges().iter().enumerate() {
        if !on_edge(e) {
            continue;
        }
        let (ms, mt) = (mrf.card(s), mrf.card(t));
        let table = &tau.edge[e];
        for v in table {
            worst = worst.max(-v);
        }
        for j in 0..ms {
            let row: f64 = table[j * mt..(j + 1) * mt].iter().sum();
            worst = worst.max((row - tau.node[s][j]).abs());
        }
        for k in 0..mt {
            let col: f64 = (0..ms).map(|j| table[j * mt + k]).sum();
            worst = worst.max((col - tau.node[t][k]).abs());
        }
    }
    worst
}

/// Membership in the local consistency polytope.
pub fn in_local(mrf: &PairwiseMrf, tau: &Pseudomarginal, tol: f64) -> bool {
    tau.shape_matches(mrf) && violation(mrf, tau, |_| true) <= tol
}

/// Membership in the polytope that enforces consistency only on the edges
/// of `tree` and leaves the other edge tables free.
pub fn in_local_tree(
    mrf: &PairwiseMrf,
    tree: &SpanningTree,
    tau: &Pseudomarginal,
    tol: f64,
) -> bool {
    tau.shape_matches(mrf) && violation(mrf, tau, |e| tree.contains(e)) <= tol
}

/// Variables are all node entries followed by all edge entries. Rows are
/// node normalizations, then for each edge the constraints summing its
/// table over `x_t` and then over `x_s`.
pub fn build_local_lp(mrf: &PairwiseMrf) -> LinearProgram {
    let theta = mrf.theta();
    let mut node_offset = Vec::with_capacity(mrf.node_count());
    let mut names = Vec::new();
    for s in 0..mrf.node_count() {
        node_offset.push(names.len());
        names.extend((0..mrf.card(s)).map(|j| format!("tau_{s}_{j}")));
    }
    let mut edge_offset = Vec::with_capacity(mrf.edge_count());
    for &(s, t) in mrf.edges() {
        edge_offset.push(names.len());
        for j in 0..mrf.card(s) {
            names.extend((0..mrf.card(t)).map(|k| format!("tau_{s}_{t}_{j}_{k}")));
        }
    }
    let width = names.len();
    let objective: Vec<f64> = theta
        .node
        .iter()
        .chain(&theta.edge)
        .flatten()
        .copied()
        .collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for s in 0..mrf.node_count() {
        let mut r = vec![0.0; width];
        r[node_offset[s]..node_offset[s] + mrf.card(s)].fill(1.0);
        rows.push(r);
        rhs.push(1.0);
    }
    for (e, &(s, t)) in mrf.edges().iter().enumerate() {
        let (ms, mt) = (mrf.card(s), mrf.card(t));
        for j in 0..ms {
            let mut r = vec![0.0; width];
            r[edge_offset[e] + j * mt..edge_offset[e] + (j + 1) * mt].fill(1.0);
            r[node_offset[s] + j] = -1.0;
            rows.push(r);
            rhs.push(0.0);
        }
        for k in 0..mt {
            let mut r = vec![0.0; width];
            for j in 0..ms {
                r[edge_offset[e] + j * mt + k] = 1.0;
            }
            r[node_offset[t] + k] = -1.0;
            rows.push(r);
            rhs.push(0.0);
        }
    }
    LinearProgram {
        objective,
        rows,
        rhs,
        names,
    }
}

/// An optimal vertex of the local relaxation.
#[derive(Clone, Debug)]
pub struct LocalLpSolution {
    pub value: f64,
    pub tau: Pseudomarginal,
    pub vertex: Vertex,
}

pub fn solve_local_lp(mrf: &PairwiseMrf) -> Result<LocalLpSolution> {
    let sol = build_local_lp(mrf).solve();
    if sol.status != LpStatus::Optimal {
        return Err(Error::Infeasible(format!(
            "local relaxation solve ended {:?}",
            sol.status
        )));
    }
    let tau = Pseudomarginal::from_vector(mrf, &sol.x);
    let vertex = classify_vertex(mrf, &tau)?;
    Ok(LocalLpSolution {
        value: sol.value,
        tau,
        vertex,
    })
}

/// Integral if every entry lies within `INTEGRAL_TOL` of 0 or 1, in which
/// case the configuration is decoded from the node entries.
pub fn classify_vertex(mrf: &PairwiseMrf, tau: &Pseudomarginal) -> Result<Vertex> {
    if !tau.shape_matches(mrf) {
        return Err(Error::Domain("pseudomarginal has the wrong shape".into()));
    }
    let v = violation(mrf, tau, |_| true);
    if v > LOCAL_TOL {
        return Err(Error::Infeasible(format!("constraint violation {v:e}")));
    }
    let near_01 = |a: f64| a.abs() <= INTEGRAL_TOL || (a - 1.0).abs() <= INTEGRAL_TOL;
    if !tau
        .node
        .iter()
        .chain(&tau.edge)
        .flatten()
        .all(|&a| near_01(a))
    {
        return Ok(Vertex::Fractional);
    }
    let x = tau
        .node
        .iter()
        .map(|v| v.iter().position(|&a| a > 0.5).expect("normalized node"))
        .collect();
    Ok(Vertex::Integral(Assignment(x)))
}

/// The optimum over the marginal polytope, which is the MAP value.
pub fn marg_lp_value(mrf: &PairwiseMrf) -> Result<f64> {
    Ok(brute_force_map(mrf)?.value)
}

/// Whether some distribution over configurations has exactly the node and
/// edge marginals `tau`. Decided by a phase-one LP over the probabilities
/// of all configurations.
pub fn membership_in_marg(mrf: &PairwiseMrf, tau: &Pseudomarginal) -> Result<bool> {
    if !tau.shape_matches(mrf) {
        return Err(Error::Domain("pseudomarginal has the wrong shape".into()));
    }
    let mut states = Vec::new();
    mrf.for_each_state(MARG_STATE_LIMIT, |x| states.push(x.to_vec()))?;
    let mut rows = vec![vec![1.0; states.len()]];
    let mut rhs = vec![1.0];
    for s in 0..mrf.node_count() {
        for j in 0..mrf.card(s) {
            rows.push(
                states
                    .iter()
                    .map(|x| f64::from(u8::from(x[s] == j)))
                    .collect(),
            );
            rhs.push(tau.node[s][j]);
        }
    }
    for (e, &(s, t)) in mrf.edges().iter().enumerate() {
        let mt = mrf.card(t);
        for k in 0..mrf.card(s) * mt {
            rows.push(
                states
                    .iter()
                    .map(|x| f64::from(u8::from(x[s] * mt + x[t] == k)))
                    .collect(),
            );
            rhs.push(tau.edge[e][k]);
        }
    }
    let lp = LinearProgram {
        objective: vec![0.0; states.len()],
        rows,
        rhs,
        names: Vec::new(),
    };
    Ok(lp.is_feasible())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(beta: f64) -> PairwiseMrf {
        PairwiseMrf::new(
            vec![2; 3],
            vec![(0, 1), (0, 2), (1, 2)],
            vec![vec![0.0; 2]; 3],
            vec![vec![0.0, -beta, -beta, 0.0]; 3],
        )
        .unwrap()
    }

    fn fractional() -> Pseudomarginal {
        Pseudomarginal {
            node: vec![vec![0.5, 0.5]; 3],
            edge: vec![vec![0.0, 0.5, 0.5, 0.0]; 3],
        }
    }

    #[test]
    fn triangle_lp_shape() {
        let lp = build_local_lp(&triangle(1.0));
        assert_eq!(lp.variable_count(), 18);
        assert_eq!(lp.constraint_count(), 15);
    }

    #[test]
    fn single_node_lp() {
        let m = PairwiseMrf::new(vec![3], vec![], vec![vec![0.2, 1.5, -0.3]], vec![]).unwrap();
        let sol = solve_local_lp(&m).unwrap();
        assert!((sol.value - 1.5).abs() < 1e-12);
        assert_eq!(sol.vertex, Vertex::Integral(Assignment(vec![1])));
    }

    #[test]
    fn frustrated_triangle_is_fractional() {
        let m = triangle(-1.0);
        let sol = solve_local_lp(&m).unwrap();
        assert!((sol.value - 3.0).abs() < 1e-9);
        assert_eq!(sol.vertex, Vertex::Fractional);
        assert_eq!(
            classify_vertex(&m, &fractional()).unwrap(),
            Vertex::Fractional
        );
        assert!(!membership_in_marg(&m, &fractional()).unwrap());
    }

    #[test]
    fn indicators_and_mixtures() {
        let m = triangle(1.0);
        let x = Assignment(vec![1, 0, 1]);
        let d = Pseudomarginal::indicator(&m, &x).unwrap();
        assert_eq!(classify_vertex(&m, &d).unwrap(), Vertex::Integral(x));
        assert!(membership_in_marg(&m, &d).unwrap());
        let a = Pseudomarginal::indicator(&m, &Assignment(vec![0; 3])).unwrap();
        let b = Pseudomarginal::indicator(&m, &Assignment(vec![1; 3])).unwrap();
        let mid = Pseudomarginal::mix(&[(0.5, &a), (0.5, &b)]);
        assert_eq!(classify_vertex(&m, &mid).unwrap(), Vertex::Fractional);
        assert!(membership_in_marg(&m, &mid).unwrap());
    }

    #[test]
    fn infeasible_tau_rejected() {
        let m = triangle(1.0);
        let mut tau = fractional();
        tau.node[0] = vec![0.9, 0.9];
        assert!(classify_vertex(&m, &tau).is_err());
    }

    #[test]
    fn vector_round_trip() {
        let m = triangle(1.0);
        let tau = fractional();
        assert_eq!(Pseudomarginal::from_vector(&m, &tau.to_vector()), tau);
        assert!((tau.objective(&triangle(-1.0)) - 3.0).abs() < 1e-12);
    }
}
