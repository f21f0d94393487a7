use crate::error::{Error, Result};
use crate::model::PairwiseMrf;
use crate::trees::{edge_appearance, EdgeAppearance, TreeDistribution};
use crate::trw::{MessageSet, PseudoMaxMarginals};

/// Multipliers for the marginalization constraints, one vector per
/// directed edge. For edge `(s, t)`, `to_low[e]` is `lambda_ts` over `x_s`
/// and `to_high[e]` is `lambda_st` over `x_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualVector {
    pub to_low: Vec<Vec<f64>>,
    pub to_high: Vec<Vec<f64>>,
}

impl DualVector {
    pub fn zeros(mrf: &PairwiseMrf) -> Self {
        let m = MessageSet::unit(mrf);
        DualVector {
            to_low: m.to_low,
            to_high: m.to_high,
        }
    }
}

/// The Lagrangian maximized over the product of simplices, which separates
/// into independent node and edge maxima:
/// `sum_s max [theta_s + sum_t rho_st lambda_ts]`
/// `+ sum_st max [theta_st - rho_st lambda_ts - rho_st lambda_st]`.
pub fn evaluate_dual(mrf: &PairwiseMrf, lambda: &DualVector, rho: &EdgeAppearance) -> f64 {
    let theta = mrf.theta();
    let r = rho.rho();
    let mut node: Vec<Vec<f64>> = theta.node.clone();
    for (e, &(s, t)) in mrf.edges().iter().enumerate() {
        for (a, b) in node[s].iter_mut().zip(&lambda.to_low[e]) {
            *a += r[e] * b;
        }
        for (a, b) in node[t].iter_mut().zip(&lambda.to_high[e]) {
            *a += r[e] * b;
        }
    }
    let node_part: f64 = node
        .iter()
        .map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum();
    let edge_part: f64 = mrf
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(_, t))| {
            let mt = mrf.card(t);
            theta.edge[e]
                .iter()
                .enumerate()
                .map(|(k, &v)| v - r[e] * (lambda.to_low[e][k / mt] + lambda.to_high[e][k % mt]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    node_part + edge_part
}

/// Dual multipliers read off a message fixed point. Every support tree is
/// rooted at `root`; for the directed edge `t -> s`,
/// `lambda_ts = w_ts - (1 / rho_st) * sum over trees where t is the parent
/// of s of rho(T) log nu_s`.
pub fn dual_from_messages(
    mrf: &PairwiseMrf,
    msgs: &MessageSet,
    nu: &PseudoMaxMarginals,
    dist: &TreeDistribution,
    root: usize,
) -> Result<DualVector> {
    let rho = edge_appearance(dist, mrf)?;
    if root >= mrf.node_count() {
        return Err(Error::InvalidRoot(root));
    }
    let mut lambda = DualVector {
        to_low: msgs.to_low.clone(),
        to_high: msgs.to_high.clone(),
    };
    for (tree, w) in dist.support() {
        let layout = tree.layout(mrf, root)?;
        for s in 0..mrf.node_count() {
            let Some(p) = layout.parent[s] else { continue };
            let e = p.edge;
            let scale = w / rho.rho()[e];
            let slot = if mrf.edge(e).0 == s {
                &mut lambda.to_low[e]
            } else {
                &mut lambda.to_high[e]
            };
            for (a, b) in slot.iter_mut().zip(&nu.node[s]) {
                *a -= scale * b;
            }
        }
    }
    Ok(lambda)
}
