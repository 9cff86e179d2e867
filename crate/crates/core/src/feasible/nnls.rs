//! Lawson–Hanson active-set nonnegative least squares.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm, solve_least_squares, sub, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct NnlsResult {
    /// `μ ≥ 0`, one per column of `G`.
    pub coefficients: Vec<f64>,
    /// `G μ`, the metric projection of `z` onto `pos G`.
    pub projection: Vec<f64>,
    pub residual_norm: f64,
}

/// `min |z − G μ|` over `μ ≥ 0`.
pub fn nnls(g: &Matrix, z: &[f64]) -> Result<NnlsResult> {
    check_dim(g.rows(), z.len())?;
    let (n, m) = (g.rows(), g.cols());
    let columns = g.columns();
    let limit = 10 * m * n.max(1);
    let col_scale = g.max_column_norm();
    let kkt_tol = 1e-11 * col_scale * norm(z).max(f64::MIN_POSITIVE);

    let mut x = vec![0.0; m];
    let mut passive = vec![false; m];
    let mut steps = 0usize;

    let residual = |x: &[f64]| -> Vec<f64> {
        let gx = g.mul_vec(x).expect("dimension checked");
        sub(z, &gx)
    };

    // Columns whose least-squares coefficient came out non-positive (or that
    // were numerically dependent) right after entering; skipped until x moves.
    let mut blocked = vec![false; m];

    loop {
        let r = residual(&x);
        let w: Vec<f64> = columns.iter().map(|c| dot(c, &r)).collect();
        let enter = (0..m)
            .filter(|&j| !passive[j] && !blocked[j] && w[j] > kkt_tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = enter else { break };

        passive[j] = true;
        let mut first = true;
        loop {
            steps += 1;
            if steps > limit {
                return Err(Error::IterationLimit {
                    solver: "nnls",
                    limit,
                });
            }
            let idx: Vec<usize> = (0..m).filter(|&i| passive[i]).collect();
            let sub_cols: Vec<Vec<f64>> = idx.iter().map(|&i| columns[i].clone()).collect();
            let s = Matrix::from_columns(&sub_cols)
                .ok()
                .and_then(|a| solve_least_squares(&a, z));
            let Some(s) = s else {
                passive[j] = false;
                blocked[j] = true;
                break;
            };
            if s.iter().all(|v| *v > 0.0) {
                for (&i, v) in idx.iter().zip(&s) {
                    x[i] = *v;
                }
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            if first && idx.iter().zip(&s).any(|(&i, v)| i == j && *v <= 0.0) {
                passive[j] = false;
                blocked[j] = true;
                break;
            }
            first = false;
            // Step toward s until the first passive coefficient reaches zero.
            let mut alpha = 1.0f64;
            for (&i, &si) in idx.iter().zip(&s) {
                if si <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - si));
                }
            }
            for (&i, &si) in idx.iter().zip(&s) {
                x[i] += alpha * (si - x[i]);
                if x[i] <= 1e-15 * (1.0 + si.abs()) {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            blocked.iter_mut().for_each(|b| *b = false);
        }
    }

    let projection = g.mul_vec(&x)?;
    let residual_norm = norm(&sub(z, &projection));
    Ok(NnlsResult {
        coefficients: x,
        projection,
        residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn orthant_clip() {
        let r = nnls(&Matrix::identity(2).unwrap(), &[1.0, -1.0]).unwrap();
        assert_eq!(r.coefficients, vec![1.0, 0.0]);
        assert_eq!(r.projection, vec![1.0, 0.0]);
        assert_abs_diff_eq!(r.residual_norm, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn weyl_b2_projection() {
        let g = Matrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let r = nnls(&g, &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(r.projection[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.projection[1], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.residual_norm, 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn member_has_zero_residual() {
        let g = Matrix::from_columns(&[
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let z = g.mul_vec(&[0.3, 1.2, 0.7]).unwrap();
        assert!(nnls(&g, &z).unwrap().residual_norm <= 1e-8);
    }

    #[test]
    fn zero_target_and_mismatch() {
        let r = nnls(&Matrix::identity(3).unwrap(), &[0.0; 3]).unwrap();
        assert_eq!(r.coefficients, vec![0.0; 3]);
        assert!(nnls(&Matrix::identity(3).unwrap(), &[0.0; 2]).is_err());
    }

    #[test]
    fn dependent_columns_are_handled() {
        // Opposite and repeated columns: a line plus a duplicate ray.
        let g = Matrix::from_columns(&[
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let r = nnls(&g, &[-3.0, -1.0]).unwrap();
        assert_abs_diff_eq!(r.projection[0], -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.projection[1], 0.0, epsilon = 1e-12);
    }
}
