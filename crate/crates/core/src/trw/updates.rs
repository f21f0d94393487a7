use crate::error::{Error, Result};
use crate::model::PairwiseMrf;
use crate::treedp::{max_over_cols, max_over_rows, send, shift_to_max};
use crate::trees::EdgeAppearance;

use super::{MessageSet, PseudoMaxMarginals};

fn check_rho(mrf: &PairwiseMrf, rho: &EdgeAppearance) -> Result<()> {
    if rho.rho().len() != mrf.edge_count() {
        return Err(Error::InvalidDistribution(
            "edge weights belong to a different graph".into(),
        ));
    }
    if let Some(e) = rho.rho().iter().position(|&r| r.is_nan() || r <= 0.0) {
        let (s, t) = mrf.edge(e);
        return Err(Error::UncoveredEdge(s, t));
    }
    Ok(())
}

/// `log nu_s = theta_s`, `log nu_st = theta_st / rho_st + theta_s + theta_t`,
/// each shifted to a maximum of 0.
pub fn init_pseudo(mrf: &PairwiseMrf, rho: &EdgeAppearance) -> Result<PseudoMaxMarginals> {
    check_rho(mrf, rho)?;
    let theta = mrf.theta();
    let node = theta.node.clone();
    let edge = mrf
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(s, t))| {
            let r = rho.rho()[e];
            let mt = mrf.card(t);
            theta.edge[e]
                .iter()
                .enumerate()
                .map(|(k, &v)| v / r + theta.node[s][k / mt] + theta.node[t][k % mt])
                .collect()
        })
        .collect();
    let mut nu = PseudoMaxMarginals { node, edge };
    nu.normalize();
    Ok(nu)
}

fn damp(new: &mut [f64], old: &[f64], lambda: f64) {
    if lambda < 1.0 {
        for (a, b) in new.iter_mut().zip(old) {
            *a = lambda * *a + (1.0 - lambda) * b;
        }
    }
}

/// One synchronous edge-based reparameterization update, damped in the
/// log domain with weight `damping` on the new iterate.
pub fn reparam_step(
    mrf: &PairwiseMrf,
    nu: &PseudoMaxMarginals,
    rho: &EdgeAppearance,
    damping: f64,
) -> PseudoMaxMarginals {
    let rho = rho.rho();
    let mut node = nu.node.clone();
    let mut row_max = Vec::with_capacity(mrf.edge_count());
    let mut col_max = Vec::with_capacity(mrf.edge_count());
    for (e, &(s, t)) in mrf.edges().iter().enumerate() {
        let (ms, mt) = (mrf.card(s), mrf.card(t));
        let rm = max_over_cols(&nu.edge[e], ms, mt, &vec![0.0; mt]);
        let cm = max_over_rows(&nu.edge[e], ms, mt, &vec![0.0; ms]);
        for j in 0..ms {
            node[s][j] += rho[e] * (rm[j] - nu.node[s][j]);
        }
        for k in 0..mt {
            node[t][k] += rho[e] * (cm[k] - nu.node[t][k]);
        }
        row_max.push(rm);
        col_max.push(cm);
    }
    let edge = mrf
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(s, t))| {
            let mt = mrf.card(t);
            nu.edge[e]
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let (j, l) = (k / mt, k % mt);
                    v - row_max[e][j] - col_max[e][l] + node[s][j] + node[t][l]
                })
                .collect()
        })
        .collect();
    let mut out = PseudoMaxMarginals { node, edge };
    out.normalize();
    for (a, b) in out.node.iter_mut().zip(&nu.node) {
        damp(a, b, damping);
    }
    for (a, b) in out.edge.iter_mut().zip(&nu.edge) {
        damp(a, b, damping);
    }
    out.normalize();
    out
}

/// Sum over neighbours `v` of `node` of `rho_vs * msg(v -> node)`, optionally
/// leaving out the edge `skip`.
fn weighted_inflow(
    mrf: &PairwiseMrf,
    msgs: &MessageSet,
    rho: &[f64],
    node: usize,
    skip: Option<usize>,
) -> Vec<f64> {
    let mut acc = vec![0.0; mrf.card(node)];
    for inc in mrf.neighbors(node) {
        if Some(inc.edge) == skip {
            continue;
        }
        let m = msgs.into_node(mrf, inc.edge, node);
        for (a, b) in acc.iter_mut().zip(m) {
            *a += rho[inc.edge] * b;
        }
    }
    acc
}

/// One synchronous reweighted message update for every directed edge,
/// damped in the log domain and max-normalized.
pub fn message_step(
    mrf: &PairwiseMrf,
    msgs: &MessageSet,
    rho: &EdgeAppearance,
    damping: f64,
) -> MessageSet {
    let r = rho.rho();
    let theta = mrf.theta();
    let inflow: Vec<Vec<f64>> = (0..mrf.node_count())
        .map(|v| weighted_inflow(mrf, msgs, r, v, None))
        .collect();
    // message from `from` to `to` across e
    let message = |e: usize, from: usize, to: usize| -> Vec<f64> {
        debug_assert_ne!(from, to);
        // the reverse message enters with weight rho_e in the inflow and
        // with weight -(1 - rho_e) directly, so it cancels to -1
        let back = msgs.into_node(mrf, e, from);
        let h: Vec<f64> = (0..mrf.card(from))
            .map(|k| theta.node[from][k] + inflow[from][k] - back[k])
            .collect();
        let scaled: Vec<f64> = theta.edge[e].iter().map(|v| v / r[e]).collect();
        let mut out = send(mrf, e, &scaled, from, &h);
        shift_to_max(&mut out);
        out
    };
    let mut next = MessageSet {
        to_low: Vec::with_capacity(mrf.edge_count()),
        to_high: Vec::with_capacity(mrf.edge_count()),
    };
    for (e, &(s, t)) in mrf.edges().iter().enumerate() {
        let mut low = message(e, t, s);
        let mut high = message(e, s, t);
        damp(&mut low, &msgs.to_low[e], damping);
        damp(&mut high, &msgs.to_high[e], damping);
        shift_to_max(&mut low);
        shift_to_max(&mut high);
        next.to_low.push(low);
        next.to_high.push(high);
    }
    next
}

/// Pseudo-max-marginals implied by a message set:
/// `log nu_s = theta_s + sum_v rho_vs w_vs` and
/// `log nu_st = theta_st / rho_st + theta_s + theta_t`
/// `+ sum_{v != t} rho_vs w_vs - (1 - rho_st) w_ts + (same for t)`.
pub fn messages_to_pseudo(
    mrf: &PairwiseMrf,
    msgs: &MessageSet,
    rho: &EdgeAppearance,
) -> Result<PseudoMaxMarginals> {
    check_rho(mrf, rho)?;
    let r = rho.rho();
    let theta = mrf.theta();
    let node: Vec<Vec<f64>> = (0..mrf.node_count())
        .map(|s| {
            let inflow = weighted_inflow(mrf, msgs, r, s, None);
            theta.node[s]
                .iter()
                .zip(&inflow)
                .map(|(a, b)| a + b)
                .collect()
        })
        .collect();
    let edge = mrf
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(s, t))| {
            let mt = mrf.card(t);
            // node belief minus the full message across e
            let hs: Vec<f64> = node[s]
                .iter()
                .zip(&msgs.to_low[e])
                .map(|(a, b)| a - b)
                .collect();
            let ht: Vec<f64> = node[t]
                .iter()
                .zip(&msgs.to_high[e])
                .map(|(a, b)| a - b)
                .collect();
            theta.edge[e]
                .iter()
                .enumerate()
                .map(|(k, &v)| v / r[e] + hs[k / mt] + ht[k % mt])
                .collect()
        })
        .collect();
    let mut nu = PseudoMaxMarginals { node, edge };
    nu.normalize();
    Ok(nu)
}
