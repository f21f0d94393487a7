//! Tree-reweighted max-product: edge-based reparameterization updates,
//! message passing, tree-based updates, and the optimum-specification
//! certificate.

mod os;
mod reparam;
mod run;
mod tree_updates;
mod updates;

use crate::model::{Assignment, PairwiseMrf};
use crate::treedp::LogTables;

pub use os::{os_check, os_check_with_guard, solve_local_csp, OS_SEARCH_LIMIT, OS_TIE_TOL};
pub use reparam::{
    aggregate_parameter, check_reparameterization, check_reparameterization_pseudo,
    thetas_from_pseudo, upper_bound,
};
pub use run::{run_trw, Variant};
pub use tree_updates::{run_tree_updates, TreeUpdateTermination, TreeUpdates};
pub use updates::{init_pseudo, message_step, messages_to_pseudo, reparam_step};

/// Log pseudo-max-marginals on every node and edge, max-normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoMaxMarginals {
    pub node: Vec<Vec<f64>>,
    /// Row-major tables aligned with the model's edges.
    pub edge: Vec<Vec<f64>>,
}

impl LogTables for PseudoMaxMarginals {
    fn log_node(&self, s: usize) -> &[f64] {
        &self.node[s]
    }

    fn log_edge(&self, e: usize) -> Option<&[f64]> {
        Some(&self.edge[e])
    }
}

impl PseudoMaxMarginals {
    pub fn max_abs_diff(&self, other: &PseudoMaxMarginals) -> f64 {
        let a = self.node.iter().flatten().chain(self.edge.iter().flatten());
        let b = other
            .node
            .iter()
            .flatten()
            .chain(other.edge.iter().flatten());
        a.zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    pub(crate) fn normalize(&mut self) {
        for v in self.node.iter_mut().chain(self.edge.iter_mut()) {
            crate::treedp::shift_to_max(v);
        }
    }
}

/// Log messages, two per edge. For edge `(s, t)`, `to_low[e]` is the
/// message from `t` into `s` (a vector over `x_s`) and `to_high[e]` the
/// message from `s` into `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageSet {
    pub to_low: Vec<Vec<f64>>,
    pub to_high: Vec<Vec<f64>>,
}

impl MessageSet {
    /// All-zero logs (unit messages).
    pub fn unit(mrf: &PairwiseMrf) -> Self {
        MessageSet {
            to_low: mrf
                .edges()
                .iter()
                .map(|&(s, _)| vec![0.0; mrf.card(s)])
                .collect(),
            to_high: mrf
                .edges()
                .iter()
                .map(|&(_, t)| vec![0.0; mrf.card(t)])
                .collect(),
        }
    }

    /// Message arriving at `node` across edge `e`.
    pub fn into_node(&self, mrf: &PairwiseMrf, e: usize, node: usize) -> &[f64] {
        if mrf.edge(e).0 == node {
            &self.to_low[e]
        } else {
            &self.to_high[e]
        }
    }

    pub fn max_abs_diff(&self, other: &MessageSet) -> f64 {
        let a = self
            .to_low
            .iter()
            .flatten()
            .chain(self.to_high.iter().flatten());
        let b = other
            .to_low
            .iter()
            .flatten()
            .chain(other.to_high.iter().flatten());
        a.zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    pub fn directed_count(&self) -> usize {
        self.to_low.len() * 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrwConfig {
    /// Weight on the new iterate, in (0, 1].
    pub damping: f64,
    /// Stop once the largest log change falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Record the tree upper bound each iteration (needs explicit trees).
    pub record_bound: bool,
}

impl Default for TrwConfig {
    fn default() -> Self {
        TrwConfig {
            damping: 0.5,
            tolerance: 1e-8,
            max_iterations: 10_000,
            record_bound: true,
        }
    }
}

impl TrwConfig {
    pub(crate) fn validate(&self) -> crate::Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(crate::Error::Domain(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(crate::Error::Domain(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Result of searching for a configuration that is optimal at every node
/// and edge of the pseudo-max-marginals.
#[derive(Clone, Debug, PartialEq)]
pub enum OsOutcome {
    Certificate(Assignment),
    None,
    /// The search budget ran out before a verdict.
    Indeterminate,
}

impl OsOutcome {
    pub fn certificate(&self) -> Option<&Assignment> {
        match self {
            OsOutcome::Certificate(x) => Some(x),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrwResult {
    pub nu: PseudoMaxMarginals,
    pub iterations: usize,
    pub converged: bool,
    pub os: OsOutcome,
    /// Tree upper bound on the MAP value, one entry for the starting point
    /// and one per iteration. Empty without explicit trees.
    pub upper_bound: Vec<f64>,
    /// Final messages, for message-passing runs.
    pub messages: Option<MessageSet>,
    /// Messages computed: one per directed message, or one per tree edge
    /// per direction for tree-based updates.
    pub message_units: u64,
    /// Which stopping rule ended a tree-based run.
    pub termination: Option<TreeUpdateTermination>,
}

impl TrwResult {
    pub fn certificate(&self) -> Option<&Assignment> {
        self.os.certificate()
    }

    pub fn messages_per_edge(&self, mrf: &PairwiseMrf) -> f64 {
        self.message_units as f64 / mrf.edge_count().max(1) as f64
    }
}
