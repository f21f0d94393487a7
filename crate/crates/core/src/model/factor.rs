use crate::error::{Error, Result};

use super::PairwiseMrf;

/// Penalty standing in for `log 0` on indicator edges.
pub const INDICATOR_PENALTY: f64 = 1e6;

/// A factor over a set of variables. The table is row-major over the joint
/// state of `vars`, first variable most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub vars: Vec<usize>,
    pub table: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorGraph {
    cards: Vec<usize>,
    factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn new(cards: Vec<usize>, factors: Vec<Factor>) -> Result<Self> {
        if cards.is_empty() || cards.contains(&0) {
            return Err(Error::InvalidModel(
                "factor graph needs at least one variable, all with positive cardinality".into(),
            ));
        }
        for (i, f) in factors.iter().enumerate() {
            if f.vars.is_empty() {
                return Err(Error::InvalidModel(format!("factor {i} has no variables")));
            }
            for (k, &v) in f.vars.iter().enumerate() {
                if v >= cards.len() {
                    return Err(Error::InvalidModel(format!(
                        "factor {i} references variable {v}"
                    )));
                }
                if f.vars[..k].contains(&v) {
                    return Err(Error::InvalidModel(format!(
                        "factor {i} repeats variable {v}"
                    )));
                }
            }
            let size: usize = f.vars.iter().map(|&v| cards[v]).product();
            if f.table.len() != size {
                return Err(Error::InvalidModel(format!(
                    "factor {i} table has {} entries, expected {size}",
                    f.table.len()
                )));
            }
            if let Some(bad) = f.table.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
                return Err(Error::Domain(format!(
                    "factor {i} has non-positive or non-finite entry {bad}"
                )));
            }
        }
        Ok(FactorGraph { cards, factors })
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// `sum_f log f(x)` for a full assignment of the variables.
    pub fn log_score(&self, x: &[usize]) -> f64 {
        self.factors
            .iter()
            .map(|f| f.table[joint_index(&self.cards, &f.vars, x)].ln())
            .sum()
    }

    /// Exhaustive maximum of `log prod f` and all maximizers within `tie_tol`.
    pub fn brute_force_map(&self, limit: u128, tie_tol: f64) -> Result<(f64, Vec<Vec<usize>>)> {
        let shell = PairwiseMrf::zeros(self.cards.clone(), Vec::new())?;
        let mut scored = Vec::new();
        shell.for_each_state(limit, |x| scored.push((self.log_score(x), x.to_vec())))?;
        let best = scored.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let opt = scored
            .into_iter()
            .filter(|p| p.0 >= best - tie_tol)
            .map(|p| p.1)
            .collect();
        Ok((best, opt))
    }
}

fn joint_index(cards: &[usize], vars: &[usize], x: &[usize]) -> usize {
    vars.iter().fold(0, |acc, &v| acc * cards[v] + x[v])
}

/// Converts a factor graph into a pairwise model with the same optimum.
///
/// Unary and binary factors become node and edge parameters. Each factor of
/// arity three or more gets an auxiliary node whose states enumerate the
/// factor's joint configurations; indicator edges tie it to its members.
/// The original variables keep their indices; auxiliary nodes follow in
/// factor order.
pub fn factor_to_pairwise(fg: &FactorGraph) -> Result<PairwiseMrf> {
    let n = fg.cards.len();
    let mut cards = fg.cards.clone();
    let mut theta_node: Vec<Vec<f64>> = cards.iter().map(|&m| vec![0.0; m]).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut theta_edge: Vec<Vec<f64>> = Vec::new();
    let mut lookup = std::collections::HashMap::new();

    for f in &fg.factors {
        match f.vars.len() {
            1 => {
                for (slot, p) in theta_node[f.vars[0]].iter_mut().zip(&f.table) {
                    *slot += p.ln();
                }
            }
            2 => {
                let (a, b) = (f.vars[0], f.vars[1]);
                let (s, t) = (a.min(b), a.max(b));
                let e = *lookup.entry((s, t)).or_insert_with(|| {
                    edges.push((s, t));
                    theta_edge.push(vec![0.0; cards[s] * cards[t]]);
                    edges.len() - 1
                });
                for xa in 0..cards[a] {
                    for xb in 0..cards[b] {
                        let v = f.table[xa * cards[b] + xb].ln();
                        let (xs, xt) = if a == s { (xa, xb) } else { (xb, xa) };
                        theta_edge[e][xs * cards[t] + xt] += v;
                    }
                }
            }
            _ => {
                let aux = cards.len();
                let size = f.table.len();
                cards.push(size);
                theta_node.push(f.table.iter().map(|p| p.ln()).collect());
                // stride of each member inside the joint index
                let mut stride = vec![1usize; f.vars.len()];
                for k in (0..f.vars.len() - 1).rev() {
                    stride[k] = stride[k + 1] * fg.cards[f.vars[k + 1]];
                }
                for (k, &v) in f.vars.iter().enumerate() {
                    let m = fg.cards[v];
                    let mut table = vec![-INDICATOR_PENALTY; m * size];
                    for z in 0..size {
                        let xv = (z / stride[k]) % m;
                        table[xv * size + z] = 0.0;
                    }
                    edges.push((v, aux));
                    theta_edge.push(table);
                }
            }
        }
    }
    debug_assert!(cards.len() >= n);
    PairwiseMrf::new(cards, edges, theta_node, theta_edge)
}
