use std::fs;

use anyhow::{Context, Result};

use trwmap::experiment::{run_experiment, to_csv, ExperimentSpec, Method, ORACLE_NODE_LIMIT};
use trwmap::instances::Coupling;

use crate::{ExperimentArgs, Regime, Status};

pub fn run(args: &ExperimentArgs) -> Result<Status> {
    let defaults = ExperimentSpec::default();
    let spec = ExperimentSpec {
        rows: args.rows,
        cols: args.cols,
        coupling: match args.regime {
            Regime::Attractive => Coupling::Attractive,
            Regime::Mixed => Coupling::Mixed,
        },
        gammas: args.gammas.clone().unwrap_or(defaults.gammas),
        seed: args.seed,
        damping: args.damping,
        tolerance: args.eps,
        max_iterations: args.max_iters,
        trials: args.trials,
        verify: args.verify_oracle || args.rows * args.cols <= ORACLE_NODE_LIMIT,
    };
    let records = run_experiment(&spec)?;
    let csv = to_csv(&records);
    match &args.out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{csv}"),
    }
    let mut bad = 0;
    for method in [Method::Edge, Method::Tree] {
        let rows: Vec<_> = records.iter().filter(|r| r.method == method).collect();
        let certs = rows.iter().filter(|r| r.certificate.is_some()).count();
        let wrong = rows
            .iter()
            .filter(|r| r.oracle_match == Some(false))
            .count();
        let mean = rows.iter().map(|r| r.messages_per_edge).sum::<f64>() / rows.len().max(1) as f64;
        bad += wrong;
        eprintln!(
            "{}: {} runs, {} certificates, {} not optimal, mean messages per edge {:.2}",
            method.tag(),
            rows.len(),
            certs,
            wrong,
            mean
        );
    }
    Ok(if bad == 0 { Status::Ok } else { Status::Failed })
}
