use rayon::prelude::*;

use crate::error::Result;
use crate::model::{Assignment, PairwiseMrf, Potentials};
use crate::treedp::{shift_to_max, tree_max_marginals, MaxMarginals};
use crate::trees::{edge_appearance, EdgeAppearance, TreeDistribution};

use super::{
    os_check, solve_local_csp, upper_bound, OsOutcome, PseudoMaxMarginals, TrwConfig, TrwResult,
    OS_SEARCH_LIMIT, OS_TIE_TOL,
};

/// How a tree-based run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum TreeUpdateTermination {
    /// All trees share an optimal configuration, which is then MAP-optimal.
    SharedOptimum(Assignment),
    /// The trees' max-marginals agree on every shared node and edge.
    Agreement,
    IterationLimit,
}

/// State of the tree-based updates: a merged parameter `theta~` that is
/// split across the support trees each round.
pub struct TreeUpdates<'a> {
    mrf: &'a PairwiseMrf,
    dist: &'a TreeDistribution,
    rho: EdgeAppearance,
    config: TrwConfig,
    merged: Potentials,
    nu: PseudoMaxMarginals,
    units: u64,
    trace: Vec<f64>,
}

impl<'a> TreeUpdates<'a> {
    pub fn new(
        mrf: &'a PairwiseMrf,
        dist: &'a TreeDistribution,
        config: &TrwConfig,
    ) -> Result<Self> {
        config.validate()?;
        let rho = edge_appearance(dist, mrf)?;
        Ok(TreeUpdates {
            mrf,
            dist,
            rho,
            config: config.clone(),
            merged: mrf.theta().clone(),
            nu: PseudoMaxMarginals {
                node: mrf.cards().iter().map(|&m| vec![0.0; m]).collect(),
                edge: mrf
                    .edges()
                    .iter()
                    .map(|&(s, t)| vec![0.0; mrf.card(s) * mrf.card(t)])
                    .collect(),
            },
            units: 0,
            trace: Vec::new(),
        })
    }

    /// Current tree parameters, aligned with `dist.trees()`: node parameters
    /// are shared, and each tree edge carries `theta~_st / rho_st`.
    pub fn thetas(&self) -> Vec<Potentials> {
        self.dist
            .trees()
            .iter()
            .map(|tree| Potentials {
                node: self.merged.node.clone(),
                edge: self
                    .merged
                    .edge
                    .iter()
                    .enumerate()
                    .map(|(e, table)| {
                        if tree.contains(e) {
                            let r = self.rho.rho()[e];
                            table.iter().map(|v| v / r).collect()
                        } else {
                            vec![0.0; table.len()]
                        }
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn merged(&self) -> &Potentials {
        &self.merged
    }

    pub fn message_units(&self) -> u64 {
        self.units
    }

    /// One round: exact max-marginals on every support tree, then the two
    /// stopping tests, then a damped merge. Returns the stopping rule that
    /// fired, if any.
    pub fn step(&mut self) -> Result<Option<TreeUpdateTermination>> {
        let thetas = self.thetas();
        let support: Vec<usize> = (0..self.dist.trees().len())
            .filter(|&i| self.dist.weights()[i] > 0.0)
            .collect();
        let mrf = self.mrf;
        let trees = self.dist.trees();
        let marginals: Vec<MaxMarginals> = support
            .par_iter()
            .map(|&i| tree_max_marginals(mrf, &trees[i], &thetas[i]))
            .collect::<Result<_>>()?;
        // each tree pass sends one message per tree edge in each direction
        self.units += (support.len() * 2 * (mrf.node_count() - 1)) as u64;
        if self.config.record_bound {
            self.trace.push(upper_bound(mrf, self.dist, &thetas)?);
        }
        let weights: Vec<f64> = support.iter().map(|&i| self.dist.weights()[i]).collect();
        self.nu = self.average(&support, &weights, &marginals);

        if let Some(x) = self.shared_optimum(&support, &marginals) {
            return Ok(Some(TreeUpdateTermination::SharedOptimum(x)));
        }
        if self.disagreement(&support, &marginals) < self.config.tolerance {
            return Ok(Some(TreeUpdateTermination::Agreement));
        }
        let lambda = self.config.damping;
        let mut next = Potentials::zeros(mrf.cards(), mrf.edges());
        for (k, mm) in marginals.iter().enumerate() {
            let w = weights[k];
            let tree = &trees[support[k]];
            for (acc, v) in next.node.iter_mut().zip(&mm.node) {
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += w * b;
                }
            }
            for &e in tree.edges() {
                let (s, t) = mrf.edge(e);
                let mt = mrf.card(t);
                let table = mm.edge[e].as_ref().expect("tree edge has a table");
                for (idx, a) in next.edge[e].iter_mut().enumerate() {
                    *a += w * (table[idx] - mm.node[s][idx / mt] - mm.node[t][idx % mt]);
                }
            }
        }
        let mut damped = self.merged.map(|v| (1.0 - lambda) * v);
        damped.add_scaled(lambda, &next);
        self.merged = damped;
        Ok(None)
    }

    fn shared_optimum(&self, support: &[usize], marginals: &[MaxMarginals]) -> Option<Assignment> {
        let mrf = self.mrf;
        let top = |v: &[f64]| {
            let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            v.iter()
                .map(|&a| a >= best - OS_TIE_TOL)
                .collect::<Vec<bool>>()
        };
        let mut node: Vec<Vec<bool>> = mrf.cards().iter().map(|&m| vec![true; m]).collect();
        let mut edge: Vec<Option<Vec<bool>>> = vec![None; mrf.edge_count()];
        for mm in marginals {
            for (s, allowed) in node.iter_mut().enumerate() {
                for (a, b) in allowed.iter_mut().zip(top(&mm.node[s])) {
                    *a &= b;
                }
            }
            for (e, table) in mm.edge.iter().enumerate() {
                let Some(table) = table else { continue };
                let t = top(table);
                match &mut edge[e] {
                    Some(acc) => acc.iter_mut().zip(t).for_each(|(a, b)| *a &= b),
                    slot => *slot = Some(t),
                }
            }
        }
        debug_assert_eq!(support.len(), marginals.len());
        match solve_local_csp(mrf, node, &edge, OS_SEARCH_LIMIT) {
            OsOutcome::Certificate(x) => Some(x),
            _ => None,
        }
    }

    fn disagreement(&self, support: &[usize], marginals: &[MaxMarginals]) -> f64 {
        let mut worst: f64 = 0.0;
        let first = &marginals[0];
        for mm in &marginals[1..] {
            for (a, b) in mm.node.iter().flatten().zip(first.node.iter().flatten()) {
                worst = worst.max((a - b).abs());
            }
        }
        for e in 0..self.mrf.edge_count() {
            let mut tables = marginals.iter().filter_map(|mm| mm.edge[e].as_ref());
            if let Some(base) = tables.next() {
                for other in tables {
                    for (a, b) in other.iter().zip(base) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        debug_assert_eq!(support.len(), marginals.len());
        worst
    }

    fn average(
        &self,
        support: &[usize],
        weights: &[f64],
        marginals: &[MaxMarginals],
    ) -> PseudoMaxMarginals {
        let mrf = self.mrf;
        let mut nu = PseudoMaxMarginals {
            node: mrf.cards().iter().map(|&m| vec![0.0; m]).collect(),
            edge: mrf
                .edges()
                .iter()
                .map(|&(s, t)| vec![0.0; mrf.card(s) * mrf.card(t)])
                .collect(),
        };
        for (k, mm) in marginals.iter().enumerate() {
            let w = weights[k];
            for (acc, v) in nu.node.iter_mut().zip(&mm.node) {
                acc.iter_mut().zip(v).for_each(|(a, b)| *a += w * b);
            }
            for &e in self.dist.trees()[support[k]].edges() {
                let r = self.rho.rho()[e];
                let table = mm.edge[e].as_ref().expect("tree edge has a table");
                nu.edge[e]
                    .iter_mut()
                    .zip(table)
                    .for_each(|(a, b)| *a += w / r * b);
            }
        }
        for v in nu.node.iter_mut().chain(nu.edge.iter_mut()) {
            shift_to_max(v);
        }
        nu
    }
}

/// Tree-based updates until the trees share an optimum, their
/// max-marginals agree, or the iteration cap is hit. `iterations` counts
/// completed merges.
pub fn run_tree_updates(
    mrf: &PairwiseMrf,
    dist: &TreeDistribution,
    config: &TrwConfig,
) -> Result<TrwResult> {
    let mut state = TreeUpdates::new(mrf, dist, config)?;
    let mut iterations = 0;
    let termination = loop {
        if let Some(t) = state.step()? {
            break t;
        }
        iterations += 1;
        if iterations >= config.max_iterations {
            break TreeUpdateTermination::IterationLimit;
        }
    };
    let os = match &termination {
        TreeUpdateTermination::SharedOptimum(x) => OsOutcome::Certificate(x.clone()),
        _ => os_check(mrf, &state.nu),
    };
    Ok(TrwResult {
        converged: termination != TreeUpdateTermination::IterationLimit,
        nu: state.nu,
        iterations,
        os,
        upper_bound: state.trace,
        messages: None,
        message_units: state.units,
        termination: Some(termination),
    })
}
