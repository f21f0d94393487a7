use crate::error::{Error, Result};
use crate::model::{PairwiseMrf, Potentials};
use crate::treedp::{tree_max_value, BRUTE_FORCE_LIMIT};
use crate::trees::{EdgeAppearance, TreeDistribution};

use super::PseudoMaxMarginals;

/// Tree parameters read off pseudo-max-marginals, one per tree in `dist`:
/// `theta_s(T) = log nu_s` and, on tree edges,
/// `theta_st(T) = log nu_st - log nu_s - log nu_t`.
pub fn thetas_from_pseudo(
    mrf: &PairwiseMrf,
    nu: &PseudoMaxMarginals,
    dist: &TreeDistribution,
) -> Vec<Potentials> {
    let edge_part = edge_interactions(mrf, nu);
    dist.trees()
        .iter()
        .map(|tree| Potentials {
            node: nu.node.clone(),
            edge: edge_part
                .iter()
                .enumerate()
                .map(|(e, table)| {
                    if tree.contains(e) {
                        table.clone()
                    } else {
                        vec![0.0; table.len()]
                    }
                })
                .collect(),
        })
        .collect()
}

fn edge_interactions(mrf: &PairwiseMrf, nu: &PseudoMaxMarginals) -> Vec<Vec<f64>> {
    mrf.edges()
        .iter()
        .enumerate()
        .map(|(e, &(s, t))| {
            let mt = mrf.card(t);
            nu.edge[e]
                .iter()
                .enumerate()
                .map(|(k, &v)| v - nu.node[s][k / mt] - nu.node[t][k % mt])
                .collect()
        })
        .collect()
}

/// `sum_T rho(T) theta(T)` for the tree parameters implied by `nu`, which
/// depends on the trees only through `rho_e`.
pub fn aggregate_parameter(
    mrf: &PairwiseMrf,
    nu: &PseudoMaxMarginals,
    rho: &EdgeAppearance,
) -> Potentials {
    let mut edge = edge_interactions(mrf, nu);
    for (table, &r) in edge.iter_mut().zip(rho.rho()) {
        for v in table {
            *v *= r;
        }
    }
    Potentials {
        node: nu.node.clone(),
        edge,
    }
}

fn weighted_sum(
    mrf: &PairwiseMrf,
    dist: &TreeDistribution,
    thetas: &[Potentials],
) -> Result<Potentials> {
    if thetas.len() != dist.trees().len() {
        return Err(Error::InvalidDistribution(format!(
            "{} parameters for {} trees",
            thetas.len(),
            dist.trees().len()
        )));
    }
    let mut total = Potentials::zeros(mrf.cards(), mrf.edges());
    for (theta, &w) in thetas.iter().zip(dist.weights()) {
        total.add_scaled(w, theta);
    }
    Ok(total)
}

/// Largest deviation of `<combined, phi(x)> - <theta_bar, phi(x)>` from its
/// mean over all configurations. Zero means the combination equals the
/// model's parameter up to an additive constant.
fn deviation(mrf: &PairwiseMrf, combined: &Potentials) -> Result<f64> {
    let mut diffs = Vec::new();
    mrf.for_each_state(BRUTE_FORCE_LIMIT, |x| {
        diffs.push(mrf.score_with(combined, x) - mrf.score_with(mrf.theta(), x));
    })?;
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    Ok(diffs.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max))
}

/// Checks `sum_T rho(T) theta(T) = theta_bar` (up to a constant) by
/// enumeration; returns the largest deviation.
pub fn check_reparameterization(
    mrf: &PairwiseMrf,
    dist: &TreeDistribution,
    thetas: &[Potentials],
) -> Result<f64> {
    dist.check_graph(mrf)?;
    deviation(mrf, &weighted_sum(mrf, dist, thetas)?)
}

/// The same check for the tree parameters implied by pseudo-max-marginals.
pub fn check_reparameterization_pseudo(
    mrf: &PairwiseMrf,
    nu: &PseudoMaxMarginals,
    rho: &EdgeAppearance,
) -> Result<f64> {
    deviation(mrf, &aggregate_parameter(mrf, nu, rho))
}

/// `sum_T rho(T) max_x <theta(T), phi(x)>`, shifted by the constant that
/// separates `sum_T rho(T) theta(T)` from the model's parameter, so the
/// result bounds the MAP value from above.
pub fn upper_bound(
    mrf: &PairwiseMrf,
    dist: &TreeDistribution,
    thetas: &[Potentials],
) -> Result<f64> {
    let combined = weighted_sum(mrf, dist, thetas)?;
    let zero = vec![0; mrf.node_count()];
    let offset = mrf.score_with(&combined, &zero) - mrf.score_with(mrf.theta(), &zero);
    let mut total = 0.0;
    for ((tree, &w), theta) in dist.trees().iter().zip(dist.weights()).zip(thetas) {
        if w > 0.0 {
            total += w * tree_max_value(mrf, tree, theta)?;
        }
    }
    Ok(total - offset)
}
