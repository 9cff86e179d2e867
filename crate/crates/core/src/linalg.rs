//! Small dense linear algebra and every source of randomness in the crate.
//!
//! All dimensions handled here are tiny (at most a few dozen), so matrices are
//! plain row-major `Vec<f64>` buffers and factorizations are written out
//! directly. Random draws go through [`RngStream`], a counter-style ChaCha
//! stream keyed by `(seed, stream_index)`, so every sampler is a pure function
//! of its dimensions and the stream it is handed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Relative tolerance below which a Gram–Schmidt residual counts as dependent.
pub const ORTHO_TOL: f64 = 1e-10;

/// Default tolerance for rank and membership decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

/// Dense real matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix must have at least one row and column, got {rows}x{cols}"
            )));
        }
        check_dim(rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Builds the matrix whose columns are `columns`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            check_dim(rows, c.len())?;
            for (i, v) in c.iter().enumerate() {
                data[i * cols + j] = *v;
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.get(r, c);
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, x.len())?;
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// `selfᵀ · y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for (r, yr) in y.iter().enumerate() {
            axpy(*yr, self.row(r), &mut out);
        }
        Ok(out)
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        check_dim(self.cols, other.rows)?;
        let mut data = vec![0.0; self.rows * other.cols];
        for r in 0..self.rows {
            let out = &mut data[r * other.cols..(r + 1) * other.cols];
            for (k, a) in self.row(r).iter().enumerate() {
                axpy(*a, other.row(k), out);
            }
        }
        Ok(Matrix {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    pub fn max_column_norm(&self) -> f64 {
        (0..self.cols)
            .map(|c| norm(&self.column(c)))
            .fold(0.0, f64::max)
    }
}

/// Least-squares solution of `min |A x - b|` by Householder QR.
///
/// Returns `None` when a diagonal entry of R falls below `ORTHO_TOL` relative
/// to the largest column norm, i.e. when `A` is numerically rank deficient.
pub fn solve_least_squares(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let (m, n) = (a.rows, a.cols);
    if b.len() != m || n > m {
        return None;
    }
    let scale = a.max_column_norm();
    if scale == 0.0 {
        return None;
    }
    let mut r = a.data.clone();
    let mut qtb = b.to_vec();
    for j in 0..n {
        let mut alpha = 0.0;
        for i in j..m {
            alpha += r[i * n + j] * r[i * n + j];
        }
        let alpha = alpha.sqrt();
        if alpha <= ORTHO_TOL * scale {
            return None;
        }
        let sign = if r[j * n + j] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = (j..m).map(|i| r[i * n + j]).collect();
        v[0] += sign * alpha;
        let vnorm2 = dot(&v, &v);
        for c in j..n {
            let s: f64 = (j..m).map(|i| v[i - j] * r[i * n + c]).sum::<f64>() * 2.0 / vnorm2;
            for i in j..m {
                r[i * n + c] -= s * v[i - j];
            }
        }
        let s: f64 = (j..m).map(|i| v[i - j] * qtb[i]).sum::<f64>() * 2.0 / vnorm2;
        for i in j..m {
            qtb[i] -= s * v[i - j];
        }
    }
    let mut x = vec![0.0; n];
    for j in (0..n).rev() {
        let mut s = qtb[j];
        for c in j + 1..n {
            s -= r[j * n + c] * x[c];
        }
        x[j] = s / r[j * n + j];
    }
    Some(x)
}

/// Linear subspace of ℝⁿ held through an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: Vec<Vec<f64>>,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: Vec::new(),
        }
    }

    pub fn whole(ambient_dim: usize) -> Self {
        let basis = (0..ambient_dim)
            .map(|i| {
                let mut e = vec![0.0; ambient_dim];
                e[i] = 1.0;
                e
            })
            .collect();
        Self { ambient_dim, basis }
    }

    /// Span of arbitrary vectors; dependent vectors are dropped.
    pub fn span(ambient_dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        orthonormalize(ambient_dim, vectors)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        project_onto_subspace(x, self)
    }

    /// Orthonormal basis of the orthogonal complement, completed from the
    /// standard basis.
    pub fn orthogonal_complement(&self) -> Subspace {
        let mut basis = self.basis.clone();
        let start = basis.len();
        for i in 0..self.ambient_dim {
            if basis.len() == self.ambient_dim {
                break;
            }
            let mut e = vec![0.0; self.ambient_dim];
            e[i] = 1.0;
            if let Some(q) = orthogonalize_against(&basis, &e) {
                basis.push(q);
            }
        }
        Subspace {
            ambient_dim: self.ambient_dim,
            basis: basis.split_off(start),
        }
    }

    /// `n×n` orthogonal projector `Σ b bᵀ`.
    pub fn projector(&self) -> Result<Matrix> {
        let n = self.ambient_dim;
        let mut p = Matrix::zeros(n, n)?;
        for b in &self.basis {
            for r in 0..n {
                for c in 0..n {
                    p.set(r, c, p.get(r, c) + b[r] * b[c]);
                }
            }
        }
        Ok(p)
    }
}

/// `Σ ⟨x, b_i⟩ b_i` over the stored orthonormal basis.
pub fn project_onto_subspace(x: &[f64], w: &Subspace) -> Result<Vec<f64>> {
    check_dim(w.ambient_dim, x.len())?;
    let mut out = vec![0.0; x.len()];
    for b in &w.basis {
        axpy(dot(x, b), b, &mut out);
    }
    Ok(out)
}

/// Residual of `v` against an orthonormal set, normalized, or `None` when the
/// residual is below `ORTHO_TOL` relative to `|v|`. Two Gram–Schmidt passes.
fn orthogonalize_against(basis: &[Vec<f64>], v: &[f64]) -> Option<Vec<f64>> {
    let scale = norm(v);
    if scale == 0.0 {
        return None;
    }
    let mut r = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(&r, b);
            axpy(-c, b, &mut r);
        }
    }
    let rn = norm(&r);
    if rn <= ORTHO_TOL * scale {
        return None;
    }
    r.iter_mut().for_each(|x| *x /= rn);
    Some(r)
}

/// Modified Gram–Schmidt with re-orthogonalization, in input order.
pub fn orthonormalize(ambient_dim: usize, vectors: &[Vec<f64>]) -> Result<Subspace> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len().min(ambient_dim));
    for v in vectors {
        check_dim(ambient_dim, v.len())?;
        if basis.len() == ambient_dim {
            break;
        }
        if let Some(q) = orthogonalize_against(&basis, v) {
            basis.push(q);
        }
    }
    Ok(Subspace { ambient_dim, basis })
}

/// Rank of the column set by Gram–Schmidt with column pivoting: a pivot counts
/// while its residual norm exceeds `tol` times the largest column norm.
pub fn rank_of_columns(columns: &[Vec<f64>], tol: f64) -> usize {
    let scale = columns.iter().map(|c| norm(c)).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let mut residual: Vec<Vec<f64>> = columns.to_vec();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut used = vec![false; residual.len()];
    loop {
        let pick = residual
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, r)| (i, norm(r)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, rn)) = pick else { break };
        if rn <= tol * scale {
            break;
        }
        used[i] = true;
        let mut q = residual[i].clone();
        for b in &basis {
            let c = dot(&q, b);
            axpy(-c, b, &mut q);
        }
        let qn = norm(&q);
        if qn <= tol * scale {
            break;
        }
        q.iter_mut().for_each(|x| *x /= qn);
        for (j, r) in residual.iter_mut().enumerate() {
            if !used[j] {
                let c = dot(r, &q);
                axpy(-c, &q, r);
            }
        }
        basis.push(q);
    }
    basis.len()
}

pub fn numerical_rank(m: &Matrix, tol: f64) -> Result<usize> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "rank tolerance must be > 0, got {tol}"
        )));
    }
    Ok(rank_of_columns(&m.columns(), tol))
}

/// Generator type behind [`RngStream`].
pub type StreamRng = ChaCha8Rng;

/// Identifies one reproducible random stream.
///
/// The ChaCha key is expanded from `seed`; `stream_index` selects the ChaCha
/// stream, so distinct indices under one seed never overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Independent family of streams keyed by this one; used for chunking.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(self.stream_index)), index)
    }

    /// Stream for a named sub-task (for example one estimate inside an experiment).
    pub fn derive(&self, label: &str) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ fnv1a(label)), self.stream_index)
    }
}

pub fn sample_gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `k×n` matrix of i.i.d. standard normal entries, filled row by row.
pub fn sample_gaussian_matrix<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Result<Matrix> {
    Matrix::new(k, n, sample_gaussian_vector(k * n, rng))
}

/// Uniform point on the unit sphere in ℝⁿ (normalized Gaussian vector).
pub fn sample_uniform_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v = sample_gaussian_vector(n, rng);
        let r = norm(&v);
        if r > 0.0 {
            v.iter_mut().for_each(|x| *x /= r);
            return v;
        }
    }
}

/// Haar-distributed `d`-dimensional subspace of ℝⁿ: orthonormalized Gaussian columns.
pub fn sample_uniform_subspace<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    rng: &mut R,
) -> Result<Subspace> {
    if d > n {
        return Err(Error::InvalidInput(format!(
            "subspace dimension {d} exceeds ambient dimension {n}"
        )));
    }
    loop {
        let vectors: Vec<Vec<f64>> = (0..d).map(|_| sample_gaussian_vector(n, rng)).collect();
        let w = orthonormalize(n, &vectors)?;
        if w.dim() == d {
            return Ok(w);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_matrix_is_deterministic_per_stream() {
        let a = sample_gaussian_matrix(1, 1, &mut RngStream::new(11, 0).rng()).unwrap();
        let b = sample_gaussian_matrix(1, 1, &mut RngStream::new(11, 0).rng()).unwrap();
        assert_eq!(a, b);
        let c = sample_gaussian_matrix(1, 1, &mut RngStream::new(11, 1).rng()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_matrix_shape() {
        let m = sample_gaussian_matrix(3, 5, &mut RngStream::new(1, 0).rng()).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 5));
        assert!(m.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn gaussian_sample_mean_within_clt_bound() {
        let mut rng = RngStream::new(3, 0).rng();
        let n = 1_000_000;
        let mean: f64 = sample_gaussian_vector(n, &mut rng).iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 0.004, "mean {mean}");
    }

    #[test]
    fn sphere_in_one_dimension_is_a_fair_sign() {
        let mut rng = RngStream::new(5, 0).rng();
        let n = 100_000;
        let mut plus = 0usize;
        for _ in 0..n {
            let x = sample_uniform_sphere(1, &mut rng);
            assert!(x[0] == 1.0 || x[0] == -1.0);
            plus += (x[0] > 0.0) as usize;
        }
        let p = plus as f64 / n as f64;
        assert!((p - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn sphere_points_have_unit_norm() {
        let mut rng = RngStream::new(6, 0).rng();
        for _ in 0..1000 {
            assert_abs_diff_eq!(
                norm(&sample_uniform_sphere(3, &mut rng)),
                1.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn sphere_half_plane_frequency() {
        let mut rng = RngStream::new(8, 0).rng();
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_uniform_sphere(2, &mut rng)[0] > 0.0)
            .count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn subspace_edge_dimensions() {
        let mut rng = RngStream::new(9, 0).rng();
        assert_eq!(sample_uniform_subspace(4, 0, &mut rng).unwrap().dim(), 0);
        let full = sample_uniform_subspace(4, 4, &mut rng).unwrap();
        let p = full.projector().unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_abs_diff_eq!(p.get(r, c), (r == c) as u8 as f64, epsilon = 1e-10);
            }
        }
        assert!(sample_uniform_subspace(2, 3, &mut rng).is_err());
    }

    #[test]
    fn random_line_meets_open_quadrant_half_the_time() {
        // The line meets the open first quadrant or its negative: probability 2·(1/4).
        let mut rng = RngStream::new(10, 0).rng();
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                let w = sample_uniform_subspace(2, 1, &mut rng).unwrap();
                let b = &w.basis()[0];
                b[0] * b[1] > 0.0
            })
            .count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt(), "p = {p}");
    }

    #[test]
    fn projection_examples() {
        let e1 = Subspace::span(2, &[vec![1.0, 0.0]]).unwrap();
        assert_eq!(
            project_onto_subspace(&[1.0, 2.0], &e1).unwrap(),
            vec![1.0, 0.0]
        );

        let w = Subspace::span(3, &[vec![1.0, -1.0, 0.0]]).unwrap();
        let x = [1.0, 1.0, 0.0];
        let p = w.project(&x).unwrap();
        for v in &p {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(dot(&sub(&x, &p), &w.basis()[0]), 0.0, epsilon = 1e-15);

        let full = Subspace::whole(3);
        assert_eq!(
            full.project(&[1.5, -2.0, 0.25]).unwrap(),
            vec![1.5, -2.0, 0.25]
        );
        assert!(e1.project(&[1.0]).is_err());
    }

    #[test]
    fn orthonormalize_examples() {
        let w = orthonormalize(2, &[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(w.basis(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let w = orthonormalize(2, &[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(w.dim(), 1);
    }

    #[test]
    fn rank_examples() {
        let m = Matrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 1e-13]]).unwrap();
        assert_eq!(numerical_rank(&m, 1e-9).unwrap(), 1);
        assert_eq!(
            numerical_rank(&Matrix::identity(4).unwrap(), 1e-9).unwrap(),
            4
        );
        assert!(numerical_rank(&m, 0.0).is_err());
    }

    #[test]
    fn complement_is_orthogonal_and_completes() {
        let mut rng = RngStream::new(12, 0).rng();
        for d in 0..=5 {
            let w = sample_uniform_subspace(5, d, &mut rng).unwrap();
            let c = w.orthogonal_complement();
            assert_eq!(c.dim(), 5 - d);
            for a in w.basis() {
                for b in c.basis() {
                    assert_abs_diff_eq!(dot(a, b), 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let x = solve_least_squares(&a, &[1.0, 2.0, 2.0]).unwrap();
        // Normal equations: [[3,3],[3,5]] x = [5,6]
        assert_abs_diff_eq!(x[0], 7.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 0.5, epsilon = 1e-12);
        let singular = Matrix::from_columns(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(solve_least_squares(&singular, &[1.0, 0.0]).is_none());
    }

    #[test]
    fn substreams_differ() {
        let s = RngStream::new(42, 0);
        let a: u64 = s.substream(0).rng().random();
        let b: u64 = s.substream(1).rng().random();
        let c: u64 = s.derive("x").substream(0).rng().random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
