//! Finitely generated cones `pos(g₁, …, g_m)` and the named families.
//!
//! Cones are kept in V-representation only. Generators are stored exactly as
//! constructed (partial sums, vertex differences); predicates normalize them
//! internally.

use crate::error::{check_dim, Error, Result};
use crate::feasible;
use crate::linalg::{self, norm, rank_of_columns, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct ConeVRep {
    ambient_dim: usize,
    generators: Vec<Vec<f64>>,
}

impl ConeVRep {
    pub fn new(ambient_dim: usize, generators: Vec<Vec<f64>>) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::InvalidInput("ambient dimension must be >= 1".into()));
        }
        if generators.is_empty() {
            return Err(Error::DegenerateCone(
                "a cone needs at least one generator".into(),
            ));
        }
        for g in &generators {
            check_dim(ambient_dim, g.len())?;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "generator entries must be finite".into(),
                ));
            }
            if norm(g) == 0.0 {
                return Err(Error::DegenerateCone("zero generator".into()));
            }
        }
        Ok(Self {
            ambient_dim,
            generators,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    /// `n×m` matrix with the generators as columns.
    pub fn generator_matrix(&self) -> Matrix {
        Matrix::from_columns(&self.generators).expect("validated at construction")
    }

    /// Generators scaled to unit length.
    pub fn unit_generators(&self) -> Vec<Vec<f64>> {
        self.generators
            .iter()
            .map(|g| linalg::scaled(1.0 / norm(g), g))
            .collect()
    }

    /// Same cone in ℝᴺ, `N ≥ n`, by zero-padding every generator.
    pub fn embed(&self, ambient_dim: usize) -> Result<Self> {
        if ambient_dim < self.ambient_dim {
            return Err(Error::InvalidInput(format!(
                "cannot embed ℝ^{} into ℝ^{ambient_dim}",
                self.ambient_dim
            )));
        }
        let generators = self
            .generators
            .iter()
            .map(|g| {
                let mut p = g.clone();
                p.resize(ambient_dim, 0.0);
                p
            })
            .collect();
        Self::new(ambient_dim, generators)
    }

    pub fn dim(&self) -> usize {
        rank_of_columns(&self.generators, linalg::DEFAULT_TOL)
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

fn require_positive(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidInput(format!("{what} must be >= 1")))
    } else {
        Ok(())
    }
}

/// The nonnegative orthant `[0, ∞)ⁿ`.
pub fn orthant(n: usize) -> Result<ConeVRep> {
    require_positive(n, "orthant dimension")?;
    ConeVRep::new(n, (0..n).map(|i| unit(n, i)).collect())
}

/// Weyl chamber of type Bₙ, `{t₁ ≥ … ≥ tₙ ≥ 0}`, generated by the partial sums
/// `e₁, e₁+e₂, …, e₁+…+eₙ`.
pub fn weyl_chamber_b(n: usize) -> Result<ConeVRep> {
    require_positive(n, "Weyl chamber dimension")?;
    let gens = (1..=n)
        .map(|len| (0..n).map(|i| if i < len { 1.0 } else { 0.0 }).collect())
        .collect();
    ConeVRep::new(n, gens)
}

/// The linear span of `basis`, as the cone generated by `±bᵢ`.
pub fn linear_subspace_cone(basis: &[Vec<f64>]) -> Result<ConeVRep> {
    let n = basis
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::DegenerateCone("empty basis spans {0}".into()))?;
    for b in basis {
        check_dim(n, b.len())?;
    }
    let rank = rank_of_columns(basis, linalg::DEFAULT_TOL);
    if rank < basis.len() {
        return Err(Error::RankDeficient {
            rank,
            required: basis.len(),
        });
    }
    let gens = basis
        .iter()
        .flat_map(|b| [b.clone(), linalg::scaled(-1.0, b)])
        .collect();
    ConeVRep::new(n, gens)
}

/// Tangent cone of `conv(points)` at the face spanned by the first
/// `face_size` points: `pos(Xᵢ − X̄ : i = 1..n)` with `X̄` the mean of those
/// points. Zero differences (the vertex itself when `face_size == 1`) are dropped.
pub fn simplex_tangent_cone(points: &[Vec<f64>], face_size: usize) -> Result<ConeVRep> {
    let n = points.len();
    if face_size == 0 || face_size > n {
        return Err(Error::InvalidInput(format!(
            "face size {face_size} out of range 1..={n}"
        )));
    }
    let k = points[0].len();
    for p in points {
        check_dim(k, p.len())?;
    }
    let mut centroid = vec![0.0; k];
    for p in &points[..face_size] {
        linalg::axpy(1.0 / face_size as f64, p, &mut centroid);
    }
    let gens: Vec<Vec<f64>> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| !(face_size == 1 && *i == 0))
        .map(|(_, p)| linalg::sub(p, &centroid))
        .filter(|d| norm(d) > 0.0)
        .collect();
    ConeVRep::new(k, gens)
}

/// `A·C = pos(A g : g generator of C)`, dropping generators mapped to 0.
pub fn apply_linear_map(a: &Matrix, c: &ConeVRep) -> Result<ConeVRep> {
    check_dim(c.ambient_dim, a.cols())?;
    let scale = a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    let gens: Vec<Vec<f64>> = c
        .generators
        .iter()
        .filter_map(|g| {
            let img = a.mul_vec(g).expect("dimension checked");
            (norm(&img) > 1e-14 * scale * norm(g)).then_some(img)
        })
        .collect();
    if gens.is_empty() {
        return Err(Error::DegenerateCone(
            "every generator lies in the kernel; the image is {0}".into(),
        ));
    }
    ConeVRep::new(a.rows(), gens)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConeStructure {
    /// `dim lin C`
    pub dim: usize,
    /// `dim (C ∩ −C)`
    pub lineality_dim: usize,
    pub is_linear_subspace: bool,
}

/// Dimension, lineality and subspace test.
///
/// The lineality space of a finitely generated cone is spanned by exactly
/// those generators `g` with `−g ∈ C`, so its dimension is the rank of that
/// subset.
pub fn structure(c: &ConeVRep, tol: f64) -> Result<ConeStructure> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "tolerance must be > 0, got {tol}"
        )));
    }
    let dim = rank_of_columns(&c.generators, tol);
    let mut lineal = Vec::new();
    for g in &c.generators {
        if feasible::cone_contains(c, &linalg::scaled(-1.0, g), tol)? {
            lineal.push(g.clone());
        }
    }
    let lineality_dim = rank_of_columns(&lineal, tol);
    Ok(ConeStructure {
        dim,
        lineality_dim,
        is_linear_subspace: lineality_dim == dim,
    })
}
