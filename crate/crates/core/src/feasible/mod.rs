//! Geometric predicates on finitely generated cones.
//!
//! Metric projection goes through NNLS; every "strictly inside" question is
//! a small LP of the form
//!
//! ```text
//!     max t   s.t.   Σ μᵢ vᵢ = 0,   Σ μᵢ = 1,   μᵢ ≥ t
//! ```
//!
//! whose optimum is positive exactly when some strictly positive combination
//! of the `vᵢ` vanishes. Any strictly positive solution can be rescaled to sum
//! to one, so the normalization loses nothing. For a finite set, the strictly
//! positive combinations are the relative interior of its conic (or convex)
//! hull, which is what the predicates below rely on.

mod lp;
mod nnls;

pub use lp::{lp_solve, LpResult, LpStatus, PIVOT_TOL};
pub use nnls::{nnls, NnlsResult};

use crate::cones::ConeVRep;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm, rank_of_columns, scaled, Matrix, Subspace, DEFAULT_TOL};

/// Threshold for deciding `t > 0` in the balance LP.
pub const STRICT_TOL: f64 = 1e-9;

/// Optimal `t` of the balance LP over the given vectors (all of one length),
/// or `None` when no feasible point has `t ≥ −1`. The restriction to
/// `t ≥ −1` only affects answers that are negative anyway.
///
/// Variables are `sᵢ ≥ 0` and `u ≥ 0` with `μᵢ = sᵢ + u − 1`, `t = u − 1`.
pub fn balance_lp(vectors: &[Vec<f64>], dim: usize) -> Result<Option<f64>> {
    let m = vectors.len();
    if m == 0 {
        return Err(Error::InvalidInput(
            "balance LP needs at least one vector".into(),
        ));
    }
    for v in vectors {
        check_dim(dim, v.len())?;
    }
    let rows = dim + 1;
    let cols = m + 1;
    let mut a = vec![0.0; rows * cols];
    let mut b = vec![0.0; rows];
    for r in 0..dim {
        let mut total = 0.0;
        for (i, v) in vectors.iter().enumerate() {
            a[r * cols + i] = v[r];
            total += v[r];
        }
        a[r * cols + m] = total;
        b[r] = total;
    }
    for i in 0..m {
        a[dim * cols + i] = 1.0;
    }
    a[dim * cols + m] = m as f64;
    b[dim] = 1.0 + m as f64;
    let a = Matrix::new(rows, cols, a)?;
    let mut c = vec![0.0; cols];
    c[m] = 1.0;
    let res = lp_solve(&c, &a, &b, &vec![0.0; cols])?;
    match res.status {
        LpStatus::Optimal => Ok(Some(res.objective - 1.0)),
        LpStatus::Infeasible => Ok(None),
        // t ≤ 1/m on the feasible set, so this cannot happen short of numerical failure.
        LpStatus::Unbounded => Err(Error::IterationLimit {
            solver: "balance LP (reported unbounded)",
            limit: 0,
        }),
    }
}

pub(crate) fn strictly_balanced(vectors: &[Vec<f64>], dim: usize) -> Result<bool> {
    Ok(balance_lp(vectors, dim)?.is_some_and(|t| t > STRICT_TOL))
}

fn normalize_nonzero(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            let r = norm(p);
            if r > 0.0 {
                scaled(1.0 / r, p)
            } else {
                p.clone()
            }
        })
        .collect()
}

/// `0 ∈ int conv(points)`, equivalently `pos(points) = ℝᵏ`.
///
/// Requires a strictly positive convex combination equal to zero (the origin
/// is in the relative interior of the hull) and full rank `k` (the relative
/// interior is the interior).
pub fn origin_in_interior_of_hull(points: &[Vec<f64>]) -> Result<bool> {
    let k = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidInput("need at least one point".into()))?;
    for p in points {
        check_dim(k, p.len())?;
    }
    if points.len() < k + 1 {
        return Ok(false);
    }
    let unit = normalize_nonzero(points);
    if rank_of_columns(&unit, DEFAULT_TOL) < k {
        return Ok(false);
    }
    strictly_balanced(&unit, k)
}

/// `0 ∈ relint conv(generators)`, which holds exactly when `pos(generators)`
/// is a linear subspace.
pub fn is_linear_subspace(c: &ConeVRep) -> Result<bool> {
    strictly_balanced(&c.unit_generators(), c.ambient_dim())
}

pub fn project_onto_cone(c: &ConeVRep, z: &[f64]) -> Result<NnlsResult> {
    check_dim(c.ambient_dim(), z.len())?;
    nnls(&c.generator_matrix(), z)
}

/// `dist²(z, C)`
pub fn dist2(c: &ConeVRep, z: &[f64]) -> Result<f64> {
    Ok(project_onto_cone(c, z)?.residual_norm.powi(2))
}

/// `|Π_C(z)|²`, which equals `sup_{x ∈ C∖0} ⟨z, x⟩₊² / |x|²`.
pub fn proj_norm2(c: &ConeVRep, z: &[f64]) -> Result<f64> {
    let p = project_onto_cone(c, z)?;
    Ok(dot(&p.projection, &p.projection))
}

/// `z ∈ C` up to an NNLS residual of `tol · max(1, |z|)`.
pub fn cone_contains(c: &ConeVRep, z: &[f64], tol: f64) -> Result<bool> {
    check_dim(c.ambient_dim(), z.len())?;
    let g = Matrix::from_columns(&c.unit_generators())?;
    let r = nnls(&g, z)?;
    Ok(r.residual_norm <= tol * norm(z).max(1.0))
}

/// `(relint C) ∩ W ≠ ∅` for a cone that is not a linear subspace.
pub fn relint_meets_subspace(c: &ConeVRep, w: &Subspace) -> Result<bool> {
    check_dim(c.ambient_dim(), w.ambient_dim())?;
    if is_linear_subspace(c)? {
        return Err(Error::Precondition(
            "relint test is only valid for cones that are not linear subspaces; \
             use the closed form for subspaces"
                .into(),
        ));
    }
    relint_meets_complement_of(&c.unit_generators(), &w.orthogonal_complement())
}

/// Same test without the subspace precondition check, phrased through an
/// orthonormal basis of `W⊥`: some strictly positive combination of the
/// generators is orthogonal to every vector of `complement`.
pub(crate) fn relint_meets_complement_of(
    unit_generators: &[Vec<f64>],
    complement: &Subspace,
) -> Result<bool> {
    let q = complement.basis();
    let reduced: Vec<Vec<f64>> = unit_generators
        .iter()
        .map(|g| q.iter().map(|b| dot(b, g)).collect())
        .collect();
    strictly_balanced(&reduced, q.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::{orthant, weyl_chamber_b};
    use crate::linalg::{sample_uniform_subspace, RngStream};
    use approx::assert_abs_diff_eq;

    #[test]
    fn hull_examples() {
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
        assert!(origin_in_interior_of_hull(&pts).unwrap());
        let pts = vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.0]];
        assert!(!origin_in_interior_of_hull(&pts).unwrap());
        assert!(origin_in_interior_of_hull(&[vec![2.5], vec![-0.1]]).unwrap());
        // Positive combination vanishes but the points span only a line.
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![-2.0, 0.0]];
        assert!(!origin_in_interior_of_hull(&pts).unwrap());
        // Origin on the boundary of the hull.
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]];
        assert!(!origin_in_interior_of_hull(&pts).unwrap());
    }

    #[test]
    fn projection_examples() {
        let c = orthant(3).unwrap();
        let p = project_onto_cone(&c, &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(p.projection, vec![1.0, 0.0, 3.0]);
        assert_abs_diff_eq!(dist2(&c, &[1.0, -2.0, 3.0]).unwrap(), 4.0, epsilon = 1e-12);

        let ray = ConeVRep::new(3, vec![vec![2.0, -1.0, 0.5]]).unwrap();
        let z = [0.3, -0.8, 1.1];
        let g = &ray.generators()[0];
        let expected = dot(&z, g).max(0.0).powi(2) / dot(g, g);
        assert_abs_diff_eq!(proj_norm2(&ray, &z).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn unit_vectors_have_distance_at_most_one() {
        let mut rng = RngStream::new(2, 0).rng();
        let c = weyl_chamber_b(4).unwrap();
        for _ in 0..500 {
            let z = crate::linalg::sample_uniform_sphere(4, &mut rng);
            let d = dist2(&c, &z).unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&d));
        }
    }

    #[test]
    fn membership_examples() {
        let o2 = orthant(2).unwrap();
        assert!(cone_contains(&o2, &[0.3, 0.0], DEFAULT_TOL).unwrap());
        assert!(!cone_contains(&o2, &[-1.0, 1.0], DEFAULT_TOL).unwrap());
        assert!(cone_contains(&weyl_chamber_b(3).unwrap(), &[3.0, 2.0, 1.0], DEFAULT_TOL).unwrap());
    }

    #[test]
    fn relint_examples() {
        let o2 = orthant(2).unwrap();
        let diag = Subspace::span(2, &[vec![1.0, 1.0]]).unwrap();
        assert!(relint_meets_subspace(&o2, &diag).unwrap());
        let anti = Subspace::span(2, &[vec![1.0, -1.0]]).unwrap();
        assert!(!relint_meets_subspace(&o2, &anti).unwrap());
        let line = crate::cones::linear_subspace_cone(&[vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            relint_meets_subspace(&line, &diag),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn relint_frequency_matches_orthant_angle() {
        // γ₁(orthant(3)) = 3/4, probed with random planes.
        let c = orthant(3).unwrap();
        let mut rng = RngStream::new(77, 0).rng();
        let n = 100_000;
        let mut hits = 0;
        for _ in 0..n {
            let w = sample_uniform_subspace(3, 2, &mut rng).unwrap();
            hits += relint_meets_subspace(&c, &w).unwrap() as usize;
        }
        let p = hits as f64 / n as f64;
        assert!(
            (p - 0.75).abs() <= 3.0 * (0.75 * 0.25 / n as f64).sqrt(),
            "p = {p}"
        );
    }

    #[test]
    fn subspace_detection() {
        assert!(!is_linear_subspace(&orthant(3).unwrap()).unwrap());
        let plane = crate::cones::linear_subspace_cone(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]])
            .unwrap();
        assert!(is_linear_subspace(&plane).unwrap());
        let tri =
            ConeVRep::new(2, vec![vec![1.0, 0.0], vec![-1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        assert!(is_linear_subspace(&tri).unwrap());
    }
}
