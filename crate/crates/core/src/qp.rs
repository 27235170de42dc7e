//! Exact solver for tiny projection QPs
//!
//! ```text
//! minimise   ½‖u − u_q‖²
//! subject to aₖ·u + bₖ ≥ 0      (k = 1..K)
//!            lo ≤ u ≤ hi
//! ```
//!
//! by enumerating every linearly independent active set of at most `dim`
//! rows, solving the equality-constrained projection in closed form and
//! keeping the best feasible point. With two controls and at most four
//! barriers that is at most 67 tiny solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

/// Feasibility tolerance for candidate points.
pub const FEAS_TOL: f64 = 1e-9;

/// `a·u + b ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CbfConstraint {
    pub a: Vec<f64>,
    pub b: f64,
    pub label: String,
}

impl CbfConstraint {
    pub fn value(&self, u: &[f64]) -> f64 {
        self.a.iter().zip(u).map(|(a, x)| a * x).sum::<f64>() + self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub nominal: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<CbfConstraint>,
}

/// Identifies one inequality row of the stacked system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Row {
    Constraint(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: Vec<f64>,
    pub feasible: bool,
    /// `½‖u − u_q‖²`; meaningless when infeasible.
    pub objective: f64,
    /// `aₖ·u + bₖ` for every barrier constraint.
    pub slacks: Vec<f64>,
    pub active: Vec<Row>,
    /// Lagrange multipliers of `active`, same order.
    pub multipliers: Vec<f64>,
}

impl QpProblem {
    pub fn new(
        nominal: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        constraints: Vec<CbfConstraint>,
        max_constraints: usize,
    ) -> Result<Self> {
        let n = nominal.len();
        if n == 0 || lower.len() != n || upper.len() != n {
            return Err(CoreError::Config(format!(
                "QP needs matching nonempty nominal/bounds, got {}/{}/{}",
                n,
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(l, h)| !(l <= h)) {
            return Err(CoreError::Config("QP bounds must satisfy lo <= hi".into()));
        }
        if constraints.len() > max_constraints {
            return Err(CoreError::Config(format!(
                "{} constraints exceed the maximum of {max_constraints}",
                constraints.len()
            )));
        }
        if let Some(c) = constraints
            .iter()
            .find(|c| c.a.len() != n || !c.b.is_finite() || c.a.iter().any(|v| !v.is_finite()))
        {
            return Err(CoreError::Config(format!(
                "constraint {} is malformed or non-finite",
                c.label
            )));
        }
        Ok(Self {
            nominal,
            lower,
            upper,
            constraints,
        })
    }

    pub fn dim(&self) -> usize {
        self.nominal.len()
    }

    /// `(g, c)` such that the row reads `g·u + c ≥ 0`.
    pub fn row(&self, row: Row) -> (Vec<f64>, f64) {
        let n = self.dim();
        match row {
            Row::Constraint(k) => (self.constraints[k].a.clone(), self.constraints[k].b),
            Row::Lower(j) => {
                let mut g = vec![0.0; n];
                g[j] = 1.0;
                (g, -self.lower[j])
            }
            Row::Upper(j) => {
                let mut g = vec![0.0; n];
                g[j] = -1.0;
                (g, self.upper[j])
            }
        }
    }

    pub fn rows(&self) -> Vec<Row> {
        let mut rows: Vec<Row> = (0..self.constraints.len()).map(Row::Constraint).collect();
        for j in 0..self.dim() {
            rows.push(Row::Lower(j));
            rows.push(Row::Upper(j));
        }
        rows
    }

    pub fn is_feasible(&self, u: &[f64], tol: f64) -> bool {
        self.rows().into_iter().all(|r| {
            let (g, c) = self.row(r);
            dot(&g, u) + c >= -tol
        })
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        0.5 * u
            .iter()
            .zip(&self.nominal)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }

    fn slacks(&self, u: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(u)).collect()
    }

    /// Projection of `u_q` onto the intersection of the given rows taken as
    /// equalities; `None` when the rows are linearly dependent.
    fn project(&self, active: &[Row]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let m = active.len();
        if m == 0 {
            return Some((self.nominal.clone(), Vec::new()));
        }
        let rows: Vec<(Vec<f64>, f64)> = active.iter().map(|&r| self.row(r)).collect();
        let g = DMatrix::from_fn(m, n, |i, j| rows[i].0[j]);
        let gram = &g * g.transpose();
        let rhs = DVector::from_fn(m, |i, _| -(dot(&rows[i].0, &self.nominal) + rows[i].1));
        let chol = gram.cholesky()?;
        let lambda = chol.solve(&rhs);
        if lambda.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let shift = g.transpose() * &lambda;
        let u = self.nominal.iter().zip(shift.iter()).map(|(a, b)| a + b).collect();
        Some((u, lambda.iter().copied().collect()))
    }

    pub fn solve(&self) -> QpSolution {
        let rows = self.rows();
        let mut best: Option<(Vec<f64>, f64, Vec<Row>, Vec<f64>)> = None;
        for size in 0..=self.dim().min(rows.len()) {
            for subset in combinations(rows.len(), size) {
                let active: Vec<Row> = subset.iter().map(|&i| rows[i]).collect();
                let Some((u, lambda)) = self.project(&active) else {
                    continue;
                };
                if !self.is_feasible(&u, FEAS_TOL) {
                    continue;
                }
                let obj = self.objective(&u);
                let dual_ok = lambda.iter().all(|&l| l >= -1e-10);
                let better = match &best {
                    None => true,
                    Some((_, best_obj, _, best_lambda)) => {
                        let best_dual_ok = best_lambda.iter().all(|&l| l >= -1e-10);
                        obj < best_obj - 1e-13 || (obj <= best_obj + 1e-13 && dual_ok && !best_dual_ok)
                    }
                };
                if better {
                    best = Some((u, obj, active, lambda));
                }
            }
        }
        match best {
            Some((u, objective, active, multipliers)) => QpSolution {
                slacks: self.slacks(&u),
                u,
                feasible: true,
                objective,
                active,
                multipliers,
            },
            None => {
                let u: Vec<f64> = self
                    .nominal
                    .iter()
                    .zip(self.lower.iter().zip(&self.upper))
                    .map(|(x, (l, h))| x.clamp(*l, *h))
                    .collect();
                QpSolution {
                    slacks: self.slacks(&u),
                    objective: self.objective(&u),
                    u,
                    feasible: false,
                    active: Vec::new(),
                    multipliers: Vec::new(),
                }
            }
        }
    }

    /// `‖u − u_q − Σ λ_r g_r‖` for a solution's active set.
    pub fn stationarity_residual(&self, sol: &QpSolution) -> f64 {
        let mut r: Vec<f64> = sol.u.iter().zip(&self.nominal).map(|(a, b)| a - b).collect();
        for (&row, &lambda) in sol.active.iter().zip(&sol.multipliers) {
            let (g, _) = self.row(row);
            for (ri, gi) in r.iter_mut().zip(&g) {
                *ri -= lambda * gi;
            }
        }
        r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}
