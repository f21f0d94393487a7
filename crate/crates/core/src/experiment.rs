//! Edge-based versus tree-based updates on random Ising grids.
//!
//! Each `(gamma, trial)` pair draws its model from a ChaCha8 stream: the
//! generator is seeded with the experiment seed and switched to stream
//! `(gamma_index << 32) | trial`, so any single trial can be reproduced on
//! its own. Uniform reals use the 53-bit mantissa conversion of `rand`.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instances::{random_grid_ising, Coupling};
use crate::model::PairwiseMrf;
use crate::treedp::{brute_force_map, OptSet};
use crate::trees::{grid_two_tree_distribution, EdgeAppearance, Reweighting};
use crate::trw::{run_tree_updates, run_trw, TrwConfig, TrwResult, Variant, OS_TIE_TOL};

/// Largest grid (in nodes) checked against exhaustive search.
pub const ORACLE_NODE_LIMIT: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub rows: usize,
    pub cols: usize,
    pub coupling: Coupling,
    pub gammas: Vec<f64>,
    pub seed: u64,
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub trials: usize,
    /// Compare certificates with exhaustive search (small grids only).
    pub verify: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            rows: 4,
            cols: 4,
            coupling: Coupling::Attractive,
            gammas: (1..=10).map(|i| f64::from(i) * 0.2).collect(),
            seed: 0,
            damping: 0.5,
            tolerance: 1e-8,
            max_iterations: 5_000,
            trials: 10,
            verify: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Edge,
    Tree,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Edge => "edge",
            Method::Tree => "tree",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub gamma: f64,
    pub trial: usize,
    pub method: Method,
    pub messages_per_edge: f64,
    pub converged: bool,
    /// Certificate found, if any.
    pub certificate: Option<String>,
    /// Whether the certificate is optimal; `None` without a certificate or
    /// without verification.
    pub oracle_match: Option<bool>,
    /// Among all nodes, the fraction whose maximal state is unique and
    /// appears at that node in some optimal configuration. `None` without
    /// verification.
    pub frac_unique_correct: Option<f64>,
}

impl ExperimentSpec {
    fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::Domain(
                "grid needs at least 2 rows and 2 columns".into(),
            ));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::Domain(format!(
                "coupling strength {g} must be finite and >= 0"
            )));
        }
        if self.verify && self.rows * self.cols > ORACLE_NODE_LIMIT {
            return Err(Error::Capacity(format!(
                "verification needs at most {ORACLE_NODE_LIMIT} nodes, grid has {}",
                self.rows * self.cols
            )));
        }
        Ok(())
    }

    pub fn model(&self, gamma_index: usize, trial: usize) -> Result<PairwiseMrf> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((gamma_index as u64) << 32) | trial as u64);
        random_grid_ising(
            &mut rng,
            self.rows,
            self.cols,
            self.gammas[gamma_index],
            self.coupling,
        )
    }
}

fn unique_correct(mrf: &PairwiseMrf, result: &TrwResult, opt: &OptSet) -> f64 {
    let mut hits = 0;
    for s in 0..mrf.node_count() {
        let v = &result.nu.node[s];
        let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let top: Vec<usize> = (0..v.len())
            .filter(|&j| v[j] >= best - OS_TIE_TOL)
            .collect();
        if let [j] = top[..] {
            if opt.configs.iter().any(|x| x.values()[s] == j) {
                hits += 1;
            }
        }
    }
    f64::from(hits) / mrf.node_count() as f64
}

fn record(
    mrf: &PairwiseMrf,
    gamma: f64,
    trial: usize,
    method: Method,
    result: &TrwResult,
    opt: Option<&OptSet>,
) -> ExperimentRecord {
    let cert = result.certificate();
    ExperimentRecord {
        gamma,
        trial,
        method,
        messages_per_edge: result.messages_per_edge(mrf),
        converged: result.converged,
        certificate: cert.map(|x| x.to_string()),
        oracle_match: opt.and_then(|o| cert.map(|x| o.contains(x))),
        frac_unique_correct: opt.map(|o| unique_correct(mrf, result, o)),
    }
}

fn run_trial(
    spec: &ExperimentSpec,
    gamma_index: usize,
    trial: usize,
) -> Result<[ExperimentRecord; 2]> {
    let mrf = spec.model(gamma_index, trial)?;
    let gamma = spec.gammas[gamma_index];
    let config = TrwConfig {
        damping: spec.damping,
        tolerance: spec.tolerance,
        max_iterations: spec.max_iterations,
        record_bound: false,
    };
    let edge = run_trw(
        &mrf,
        &Reweighting::Edges(EdgeAppearance::uniform(&mrf)),
        &config,
        Variant::Messages,
    )?;
    let dist = grid_two_tree_distribution(spec.rows, spec.cols)?;
    let tree = run_tree_updates(&mrf, &dist, &config)?;
    let opt = if spec.verify {
        Some(brute_force_map(&mrf)?)
    } else {
        None
    };
    Ok([
        record(&mrf, gamma, trial, Method::Edge, &edge, opt.as_ref()),
        record(&mrf, gamma, trial, Method::Tree, &tree, opt.as_ref()),
    ])
}

/// Runs every `(gamma, trial)` pair, in parallel, and returns the records
/// in `(gamma, trial, method)` order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ExperimentRecord>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.gammas.len())
        .flat_map(|g| (0..spec.trials).map(move |t| (g, t)))
        .collect();
    let results: Vec<[ExperimentRecord; 2]> = jobs
        .par_iter()
        .map(|&(g, t)| run_trial(spec, g, t))
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

pub const CSV_HEADER: &str =
    "gamma,trial,method,messages_per_edge,converged,certificate,oracle_match,frac_unique_correct";

pub fn to_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.gamma,
            r.trial,
            r.method.tag(),
            r.messages_per_edge,
            r.converged,
            r.certificate.as_deref().unwrap_or(""),
            r.oracle_match.map(|b| b.to_string()).unwrap_or_default(),
            r.frac_unique_correct
                .map(|f| f.to_string())
                .unwrap_or_default(),
        );
    }
    out
}
