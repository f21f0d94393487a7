use crate::error::Result;
use crate::model::PairwiseMrf;
use crate::trees::Reweighting;

use super::{
    init_pseudo, message_step, messages_to_pseudo, os_check, reparam_step, thetas_from_pseudo,
    upper_bound, MessageSet, PseudoMaxMarginals, TrwConfig, TrwResult,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Edge-based updates on the pseudo-max-marginals directly.
    Reparameterization,
    /// Reweighted message passing.
    Messages,
}

fn bound(
    mrf: &PairwiseMrf,
    weights: &Reweighting,
    config: &TrwConfig,
    nu: &PseudoMaxMarginals,
    trace: &mut Vec<f64>,
) -> Result<()> {
    if let (true, Some(dist)) = (config.record_bound, weights.trees()) {
        trace.push(upper_bound(mrf, dist, &thetas_from_pseudo(mrf, nu, dist))?);
    }
    Ok(())
}

/// Iterates until the largest log change drops below the tolerance or the
/// iteration cap is reached, then searches the final pseudo-max-marginals
/// for a certificate. Not converging is reported, not an error.
pub fn run_trw(
    mrf: &PairwiseMrf,
    weights: &Reweighting,
    config: &TrwConfig,
    variant: Variant,
) -> Result<TrwResult> {
    config.validate()?;
    let rho = weights.edge_appearance(mrf)?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut units = 0u64;
    let (nu, messages) = match variant {
        Variant::Reparameterization => {
            let mut nu = init_pseudo(mrf, &rho)?;
            bound(mrf, weights, config, &nu, &mut trace)?;
            while iterations < config.max_iterations {
                let next = reparam_step(mrf, &nu, &rho, config.damping);
                iterations += 1;
                units += 2 * mrf.edge_count() as u64;
                let change = next.max_abs_diff(&nu);
                nu = next;
                bound(mrf, weights, config, &nu, &mut trace)?;
                if change < config.tolerance {
                    converged = true;
                    break;
                }
            }
            (nu, None)
        }
        Variant::Messages => {
            let mut msgs = MessageSet::unit(mrf);
            bound(
                mrf,
                weights,
                config,
                &messages_to_pseudo(mrf, &msgs, &rho)?,
                &mut trace,
            )?;
            while iterations < config.max_iterations {
                let next = message_step(mrf, &msgs, &rho, config.damping);
                iterations += 1;
                units += msgs.directed_count() as u64;
                let change = next.max_abs_diff(&msgs);
                msgs = next;
                if config.record_bound && weights.trees().is_some() {
                    let nu = messages_to_pseudo(mrf, &msgs, &rho)?;
                    bound(mrf, weights, config, &nu, &mut trace)?;
                }
                if change < config.tolerance {
                    converged = true;
                    break;
                }
            }
            (messages_to_pseudo(mrf, &msgs, &rho)?, Some(msgs))
        }
    };
    let os = os_check(mrf, &nu);
    Ok(TrwResult {
        nu,
        iterations,
        converged,
        os,
        upper_bound: trace,
        messages,
        message_units: units,
        termination: None,
    })
}
