//! Dense two-phase simplex with Bland's rule.
//!
//! Solves `max cᵀx  s.t.  A x = b,  x ≥ l` by shifting to `y = x − l ≥ 0`.
//! Sized for the small feasibility problems behind the geometric predicates.

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;

pub const PIVOT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Meaningful only when `status == Optimal`.
    pub objective: f64,
    pub solution: Vec<f64>,
}

struct Tableau {
    /// Constraint rows, each `ncols + 1` wide (last entry is the right-hand side).
    rows: Vec<Vec<f64>>,
    /// Reduced costs for minimization, last entry is `−objective`.
    cost: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    row.iter_mut()
                        .zip(&pivot_row)
                        .for_each(|(v, pv)| *v -= f * pv);
                }
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            self.cost
                .iter_mut()
                .zip(&pivot_row)
                .for_each(|(v, pv)| *v -= f * pv);
        }
        self.basis[r] = c;
    }

    /// Minimizes the current cost row over columns `< allowed`, Bland's rule.
    fn run(&mut self, allowed: usize, steps: &mut usize, limit: usize) -> Result<Outcome> {
        loop {
            let Some(c) = (0..allowed).find(|&j| self.cost[j] < -PIVOT_TOL) else {
                return Ok(Outcome::Optimal);
            };
            let rhs = self.ncols;
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[c] > PIVOT_TOL {
                    let ratio = row[rhs] / row[c];
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12
                                || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Ok(Outcome::Unbounded);
            };
            *steps += 1;
            if *steps > limit {
                return Err(Error::IterationLimit {
                    solver: "simplex",
                    limit,
                });
            }
            self.pivot(r, c);
        }
    }
}

/// `max objectiveᵀ x` subject to `a x = b` and `x ≥ lower_bounds`.
pub fn lp_solve(
    objective: &[f64],
    a: &Matrix,
    b: &[f64],
    lower_bounds: &[f64],
) -> Result<LpResult> {
    let nv = a.cols();
    check_dim(nv, objective.len())?;
    check_dim(nv, lower_bounds.len())?;
    check_dim(a.rows(), b.len())?;
    if objective
        .iter()
        .chain(b)
        .chain(lower_bounds)
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidInput("LP data must be finite".into()));
    }
    let m = a.rows();
    let ncols = nv + m;
    let shift = a.mul_vec(lower_bounds)?;

    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0; ncols + 1];
        row[..nv].copy_from_slice(a.row(i));
        row[nv + i] = 1.0;
        row[ncols] = b[i] - shift[i];
        if row[ncols] < 0.0 {
            row[..nv].iter_mut().for_each(|v| *v = -*v);
            row[ncols] = -row[ncols];
        }
        rows.push(row);
    }
    // Phase one: minimize the sum of artificials.
    let mut cost = vec![0.0; ncols + 1];
    for row in &rows {
        for j in 0..nv {
            cost[j] -= row[j];
        }
        cost[ncols] -= row[ncols];
    }
    let mut t = Tableau {
        rows,
        cost,
        basis: (nv..ncols).collect(),
        ncols,
    };
    let limit = 50 * (m + nv + 1);
    let mut steps = 0;
    t.run(ncols, &mut steps, limit)?;

    let b_scale = 1.0
        + b.iter()
            .chain(&shift)
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if -t.cost[ncols] > 1e-9 * b_scale {
        return Ok(LpResult {
            status: LpStatus::Infeasible,
            objective: f64::NAN,
            solution: Vec::new(),
        });
    }

    // Drive artificials out of the basis; rows where that is impossible are redundant.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= nv {
            if let Some(c) = (0..nv).find(|&j| t.rows[r][j].abs() > PIVOT_TOL) {
                t.pivot(r, c);
                r += 1;
            } else {
                t.rows.remove(r);
                t.basis.remove(r);
            }
        } else {
            r += 1;
        }
    }

    // Phase two on the original columns, minimizing −objective.
    let mut cost = vec![0.0; ncols + 1];
    for j in 0..nv {
        cost[j] = -objective[j];
    }
    for (i, &bj) in t.basis.iter().enumerate() {
        let f = cost[bj];
        if f != 0.0 {
            cost.iter_mut()
                .zip(&t.rows[i])
                .for_each(|(v, rv)| *v -= f * rv);
        }
    }
    t.cost = cost;
    match t.run(nv, &mut steps, limit)? {
        Outcome::Unbounded => Ok(LpResult {
            status: LpStatus::Unbounded,
            objective: f64::INFINITY,
            solution: Vec::new(),
        }),
        Outcome::Optimal => {
            let mut x = lower_bounds.to_vec();
            for (i, &bj) in t.basis.iter().enumerate() {
                x[bj] += t.rows[i][ncols];
            }
            let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            Ok(LpResult {
                status: LpStatus::Optimal,
                objective: value,
                solution: x,
            })
        }
    }
}
