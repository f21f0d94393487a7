//! Dense two-phase primal simplex with Bland's rule.

use std::fmt::Write as _;

/// Entries smaller than this are not used as pivots.
pub const PIVOT_TOL: f64 = 1e-10;
/// Phase-one objective below this counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// `maximize c.x subject to A x = b, x >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Dense constraint rows, each as long as `objective`.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Optional variable names for export.
    pub names: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub x: Vec<f64>,
}

impl LinearProgram {
    pub fn variable_count(&self) -> usize {
        self.objective.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.rows.len()
    }

    /// Plain-text standard form: a `max` line with the objective, then one
    /// line per equality row listing its nonzero terms.
    pub fn to_text(&self) -> String {
        let name = |j: usize| {
            self.names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("x{j}"))
        };
        let terms = |coeffs: &[f64]| {
            let parts: Vec<String> = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, c)| format!("{c:+} {}", name(j)))
                .collect();
            if parts.is_empty() {
                "0".to_string()
            } else {
                parts.join(" ")
            }
        };
        let mut out = String::new();
        let _ = writeln!(out, "max {}", terms(&self.objective));
        let _ = writeln!(out, "subject to");
        for (row, b) in self.rows.iter().zip(&self.rhs) {
            let _ = writeln!(out, "  {} = {b}", terms(row));
        }
        let _ = writeln!(out, "  all variables >= 0");
        out
    }

    pub fn solve(&self) -> LpSolution {
        Simplex::new(self).run(&self.objective)
    }

    /// Phase one only: is `{x >= 0 : A x = b}` non-empty?
    pub fn is_feasible(&self) -> bool {
        let zero = vec![0.0; self.variable_count()];
        Simplex::new(self).run(&zero).status != LpStatus::Infeasible
    }
}

struct Simplex {
    n: usize,
    /// rows of `[B^-1 A | B^-1 b]`, artificial columns included
    tab: Vec<Vec<f64>>,
    basis: Vec<usize>,
}

impl Simplex {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.variable_count();
        let m = lp.constraint_count();
        let width = n + m + 1;
        let mut tab = Vec::with_capacity(m);
        for (i, (row, &b)) in lp.rows.iter().zip(&lp.rhs).enumerate() {
            let sign = if b < 0.0 { -1.0 } else { 1.0 };
            let mut r = vec![0.0; width];
            for (j, &a) in row.iter().enumerate() {
                r[j] = sign * a;
            }
            r[n + i] = 1.0;
            r[width - 1] = sign * b;
            tab.push(r);
        }
        Simplex {
            n,
            tab,
            basis: (n..n + m).collect(),
        }
    }

    fn rhs(&self, i: usize) -> f64 {
        *self.tab[i].last().expect("row has a rhs")
    }

    fn pivot(&mut self, r: usize, q: usize, obj: &mut [f64]) {
        let p = self.tab[r][q];
        for v in self.tab[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.tab[r].clone();
        for (i, row) in self.tab.iter_mut().enumerate() {
            if i != r {
                let f = row[q];
                if f != 0.0 {
                    for (a, b) in row.iter_mut().zip(&pivot_row) {
                        *a -= f * b;
                    }
                    row[q] = 0.0;
                }
            }
        }
        let f = obj[q];
        if f != 0.0 {
            for (a, b) in obj.iter_mut().zip(&pivot_row) {
                *a -= f * b;
            }
            obj[q] = 0.0;
        }
        self.basis[r] = q;
    }

    /// Reduced-cost row for objective `c` (length of the tableau width);
    /// the last entry holds minus the current objective value.
    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut obj = c.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = c[b];
            if cb != 0.0 {
                for (a, t) in obj.iter_mut().zip(&self.tab[i]) {
                    *a -= cb * t;
                }
            }
        }
        obj
    }

    /// Bland's rule iterations over columns `0..limit`. Returns false on an
    /// unbounded direction.
    fn optimize(&mut self, obj: &mut [f64], limit: usize) -> bool {
        loop {
            let Some(q) = (0..limit).find(|&j| obj[j] > PIVOT_TOL) else {
                return true;
            };
            let mut leave: Option<(f64, usize, usize)> = None;
            for i in 0..self.tab.len() {
                let a = self.tab[i][q];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((best, _, var)) => {
                            ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < var)
                        }
                    };
                    if better {
                        leave = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            let Some((_, r, _)) = leave else {
                return false;
            };
            self.pivot(r, q, obj);
        }
    }

    fn run(mut self, c: &[f64]) -> LpSolution {
        let n = self.n;
        let m = self.tab.len();
        let width = n + m + 1;
        let fail = |status| LpSolution {
            status,
            value: f64::NAN,
            x: Vec::new(),
        };

        let mut phase1 = vec![0.0; width];
        for v in &mut phase1[n..n + m] {
            *v = -1.0;
        }
        let mut obj = self.reduced_costs(&phase1);
        self.optimize(&mut obj, n + m);
        if -obj[width - 1] < -FEASIBILITY_TOL {
            return fail(LpStatus::Infeasible);
        }

        // drive remaining artificials out of the basis, dropping rows that
        // turn out to be redundant
        let mut i = 0;
        while i < self.tab.len() {
            if self.basis[i] >= n {
                match (0..n).find(|&j| self.tab[i][j].abs() > PIVOT_TOL) {
                    Some(q) => {
                        let mut scratch = vec![0.0; width];
                        self.pivot(i, q, &mut scratch);
                        i += 1;
                    }
                    None => {
                        self.tab.remove(i);
                        self.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }

        let mut phase2 = vec![0.0; width];
        phase2[..n].copy_from_slice(c);
        let mut obj = self.reduced_costs(&phase2);
        if !self.optimize(&mut obj, n) {
            return fail(LpStatus::Unbounded);
        }
        let mut x = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rhs(i);
            }
        }
        let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        LpSolution {
            status: LpStatus::Optimal,
            value,
            x,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(objective: Vec<f64>, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> LinearProgram {
        LinearProgram {
            objective,
            rows,
            rhs,
            names: Vec::new(),
        }
    }

    #[test]
    fn small_max() {
        // max x + 2y, x + y + s = 4, x + 3y + u = 6
        let p = lp(
            vec![1.0, 2.0, 0.0, 0.0],
            vec![vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]],
            vec![4.0, 6.0],
        );
        let s = p.solve();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 5.0).abs() < 1e-12);
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(vec![0.0, 0.0], vec![vec![1.0, 1.0]], vec![-1.0]);
        assert_eq!(p.solve().status, LpStatus::Infeasible);
        assert!(!p.is_feasible());
        let p = lp(vec![1.0, 0.0], vec![vec![1.0, -1.0]], vec![1.0]);
        assert_eq!(p.solve().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows_dropped() {
        let p = lp(
            vec![1.0, 1.0],
            vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![1.0, 0.0]],
            vec![1.0, 2.0, 0.25],
        );
        let s = p.solve();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn export_lists_rows() {
        let p = lp(vec![1.0, 0.0], vec![vec![1.0, 1.0]], vec![1.0]);
        let text = p.to_text();
        assert!(text.starts_with("max +1 x0"));
        assert!(text.contains("+1 x0 +1 x1 = 1"));
    }
}
