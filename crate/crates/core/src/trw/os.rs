use crate::model::{Assignment, PairwiseMrf};
use crate::treedp::LogTables;

use super::OsOutcome;

/// Log-domain slack for counting a state as maximal.
pub const OS_TIE_TOL: f64 = 1e-9;

/// Search nodes visited before the certificate search gives up.
pub const OS_SEARCH_LIMIT: u64 = 1_000_000;

fn maximal(v: &[f64]) -> Vec<bool> {
    let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter().map(|&a| a >= best - OS_TIE_TOL).collect()
}

/// Looks for a configuration that maximizes every node table and every edge
/// table at once.
pub fn os_check(mrf: &PairwiseMrf, nu: &impl LogTables) -> OsOutcome {
    os_check_with_guard(mrf, nu, OS_SEARCH_LIMIT)
}

pub fn os_check_with_guard(mrf: &PairwiseMrf, nu: &impl LogTables, guard: u64) -> OsOutcome {
    let node: Vec<Vec<bool>> = (0..mrf.node_count())
        .map(|s| maximal(nu.log_node(s)))
        .collect();
    let edge: Vec<Option<Vec<bool>>> = (0..mrf.edge_count())
        .map(|e| nu.log_edge(e).map(maximal))
        .collect();
    solve_local_csp(mrf, node, &edge, guard)
}

/// Finds an assignment with every `x_s` allowed by `node[s]` and every edge
/// pair allowed by `edge[e]` (edges with `None` are unconstrained).
/// Backtracking with arc consistency; smallest domain first, states in
/// increasing order, so the witness is deterministic.
pub fn solve_local_csp(
    mrf: &PairwiseMrf,
    node: Vec<Vec<bool>>,
    edge: &[Option<Vec<bool>>],
    guard: u64,
) -> OsOutcome {
    let mut search = Csp {
        mrf,
        edge,
        visited: 0,
        guard,
    };
    let mut domains = node;
    if domains.iter().any(|d| !d.contains(&true)) {
        return OsOutcome::None;
    }
    if !search.propagate(&mut domains, (0..mrf.node_count()).collect()) {
        return OsOutcome::None;
    }
    match search.descend(domains) {
        Found::Yes(x) => OsOutcome::Certificate(Assignment(x)),
        Found::No => OsOutcome::None,
        Found::Budget => OsOutcome::Indeterminate,
    }
}

enum Found {
    Yes(Vec<usize>),
    No,
    Budget,
}

struct Csp<'a> {
    mrf: &'a PairwiseMrf,
    edge: &'a [Option<Vec<bool>>],
    visited: u64,
    guard: u64,
}

impl Csp<'_> {
    fn allowed(&self, e: usize, xs: usize, xt: usize) -> bool {
        match &self.edge[e] {
            None => true,
            Some(table) => table[xs * self.mrf.card(self.mrf.edge(e).1) + xt],
        }
    }

    /// Removes unsupported states until every constrained edge is arc
    /// consistent. Returns false if some domain empties.
    fn propagate(&self, domains: &mut [Vec<bool>], mut queue: Vec<usize>) -> bool {
        let mut queued = vec![false; domains.len()];
        for &v in &queue {
            queued[v] = true;
        }
        while let Some(u) = queue.pop() {
            queued[u] = false;
            for inc in self.mrf.neighbors(u) {
                if self.edge[inc.edge].is_none() {
                    continue;
                }
                let w = inc.neighbor;
                let (s, _) = self.mrf.edge(inc.edge);
                let mut changed = false;
                for xw in 0..domains[w].len() {
                    if !domains[w][xw] {
                        continue;
                    }
                    let supported = (0..domains[u].len()).any(|xu| {
                        domains[u][xu]
                            && if s == u {
                                self.allowed(inc.edge, xu, xw)
                            } else {
                                self.allowed(inc.edge, xw, xu)
                            }
                    });
                    if !supported {
                        domains[w][xw] = false;
                        changed = true;
                    }
                }
                if changed {
                    if !domains[w].iter().any(|&b| b) {
                        return false;
                    }
                    if !queued[w] {
                        queued[w] = true;
                        queue.push(w);
                    }
                }
            }
        }
        true
    }

    fn descend(&mut self, domains: Vec<Vec<bool>>) -> Found {
        self.visited += 1;
        if self.visited > self.guard {
            return Found::Budget;
        }
        let open = (0..domains.len())
            .map(|v| (domains[v].iter().filter(|&&b| b).count(), v))
            .filter(|&(c, _)| c > 1)
            .min();
        let Some((_, v)) = open else {
            let x: Vec<usize> = domains
                .iter()
                .map(|d| d.iter().position(|&b| b).expect("domain is non-empty"))
                .collect();
            return Found::Yes(x);
        };
        for val in 0..domains[v].len() {
            if !domains[v][val] {
                continue;
            }
            let mut next = domains.clone();
            next[v]
                .iter_mut()
                .enumerate()
                .for_each(|(i, b)| *b = i == val);
            if !self.propagate(&mut next, vec![v]) {
                continue;
            }
            match self.descend(next) {
                Found::No => {}
                other => return other,
            }
        }
        Found::No
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trw::PseudoMaxMarginals;

    fn triangle_fixed_point(beta: f64) -> (PairwiseMrf, PseudoMaxMarginals) {
        let m = PairwiseMrf::new(
            vec![2; 3],
            vec![(0, 1), (0, 2), (1, 2)],
            vec![vec![0.0; 2]; 3],
            vec![vec![0.0, -beta, -beta, 0.0]; 3],
        )
        .unwrap();
        let mut table = vec![0.0, -1.5 * beta, -1.5 * beta, 0.0];
        crate::treedp::shift_to_max(&mut table);
        let nu = PseudoMaxMarginals {
            node: vec![vec![0.0; 2]; 3],
            edge: vec![table; 3],
        };
        (m, nu)
    }

    #[test]
    fn attractive_triangle_certified() {
        let (m, nu) = triangle_fixed_point(1.0);
        assert_eq!(
            os_check(&m, &nu),
            OsOutcome::Certificate(Assignment(vec![0; 3]))
        );
    }

    #[test]
    fn frustrated_triangle_fails() {
        let (m, nu) = triangle_fixed_point(-1.0);
        assert_eq!(os_check(&m, &nu), OsOutcome::None);
    }

    #[test]
    fn budget_reports_indeterminate() {
        // unconstrained edges with ties everywhere force branching, and an
        // odd cycle of "differ" constraints only fails at the end
        let n = 9;
        let edges: Vec<(usize, usize)> = (0..n)
            .map(|i| (i.min((i + 1) % n), i.max((i + 1) % n)))
            .collect();
        let m = PairwiseMrf::zeros(vec![3; n], edges).unwrap();
        let differ: Vec<bool> = (0..9).map(|k| k / 3 != k % 3).collect();
        let edge_sets = vec![Some(differ); n];
        let out = solve_local_csp(&m, vec![vec![true; 3]; n], &edge_sets, 3);
        assert_eq!(out, OsOutcome::Indeterminate);
        let out = solve_local_csp(&m, vec![vec![true; 3]; n], &edge_sets, OS_SEARCH_LIMIT);
        assert!(matches!(out, OsOutcome::Certificate(_)));
    }

    #[test]
    fn two_coloring_odd_cycle_impossible() {
        let n = 5;
        let edges: Vec<(usize, usize)> = (0..n)
            .map(|i| (i.min((i + 1) % n), i.max((i + 1) % n)))
            .collect();
        let m = PairwiseMrf::zeros(vec![2; n], edges).unwrap();
        let differ = Some(vec![false, true, true, false]);
        let out = solve_local_csp(
            &m,
            vec![vec![true; 2]; n],
            &vec![differ; n],
            OS_SEARCH_LIMIT,
        );
        assert_eq!(out, OsOutcome::None);
    }
}
