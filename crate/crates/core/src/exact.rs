//! Closed-form conic intrinsic volumes and Grassmann angles for the orthant,
//! the type-B Weyl chamber and linear subspaces, plus the transforms and
//! special functions the Monte Carlo inversions need.
//!
//! Closed forms are evaluated from exact integer combinatorics and only
//! converted to `f64` at the end.

use std::fmt;

use num_integer::Integer;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{dot, rank_of_columns, solve_least_squares, Matrix};

/// Largest `n` for which the Weyl-chamber coefficients are computed.
pub const MAX_WEYL_N: usize = 20;

/// Conic intrinsic volumes `υ₀, …, υₙ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntrinsicVolumes {
    pub values: Vec<f64>,
}

impl IntrinsicVolumes {
    /// Checks nonnegativity and `Σ υ = 1` within `tol`.
    pub fn new(values: Vec<f64>, tol: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty intrinsic volume vector".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < -tol) {
            return Err(Error::InvalidInput("intrinsic volumes must be >= 0".into()));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "intrinsic volumes sum to {total}, not 1"
            )));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len() - 1
    }

    /// `(υ₀ + υ₂ + …, υ₁ + υ₃ + …)`
    pub fn parity_sums(&self) -> (f64, f64) {
        let even = self.values.iter().step_by(2).sum();
        let odd = self.values.iter().skip(1).step_by(2).sum();
        (even, odd)
    }
}

/// Grassmann angles `γ₀, …, γₙ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleProfile {
    pub values: Vec<f64>,
}

impl AngleProfile {
    /// `γ_k`, with `γ_k = 0` beyond the stored range.
    pub fn get(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }
}

/// Reduced nonnegative fraction, used for rendering exact tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fraction {
    pub num: u128,
    pub den: u128,
}

impl Fraction {
    pub fn new(num: u128, den: u128) -> Self {
        assert!(den > 0, "zero denominator");
        let g = num.gcd(&den).max(1);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Exact υ and γ vectors for one cone, as fractions.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactTable {
    pub volumes: Vec<Fraction>,
    pub angles: Vec<Fraction>,
}

impl ExactTable {
    pub fn intrinsic_volumes(&self) -> IntrinsicVolumes {
        IntrinsicVolumes {
            values: self.volumes.iter().map(|f| f.to_f64()).collect(),
        }
    }

    pub fn angle_profile(&self) -> AngleProfile {
        AngleProfile {
            values: self.angles.iter().map(|f| f.to_f64()).collect(),
        }
    }
}

fn require_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidInput("dimension must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn overflow(what: &str) -> Error {
    Error::Overflow(what.to_string())
}

pub fn binomial(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc
            .checked_mul(u128::from(n - i))
            .ok_or_else(|| overflow("binomial coefficient"))?
            / u128::from(i + 1);
    }
    Ok(acc)
}

fn pow2(n: usize) -> Result<u128> {
    1u128
        .checked_shl(n as u32)
        .filter(|_| n < 127)
        .ok_or_else(|| overflow("power of two"))
}

/// `2 Σ_{i ≥ 0} x_{k+1+2i}` over integer weights.
fn alternating_tail(weights: &[u128], k: usize) -> u128 {
    weights.iter().skip(k + 1).step_by(2).sum()
}

pub fn orthant_table(n: usize) -> Result<ExactTable> {
    require_n(n)?;
    let den = pow2(n)?;
    let coeffs = (0..=n)
        .map(|k| binomial(n as u64, k as u64))
        .collect::<Result<Vec<_>>>()?;
    let volumes = coeffs.iter().map(|&c| Fraction::new(c, den)).collect();
    let mut angles: Vec<Fraction> = (0..n)
        .map(|k| Fraction::new(2 * alternating_tail(&coeffs, k), den))
        .collect();
    angles.push(Fraction::new(0, 1));
    Ok(ExactTable { volumes, angles })
}

/// `υ_k = C(n, k) / 2ⁿ`
pub fn orthant_intrinsic_volumes(n: usize) -> Result<IntrinsicVolumes> {
    Ok(orthant_table(n)?.intrinsic_volumes())
}

/// `γ_k = 2^{1−n} Σ_{i=k}^{n−1} C(n−1, i)`, `γ_n = 0`.
pub fn orthant_grassmann(n: usize) -> Result<AngleProfile> {
    require_n(n)?;
    let den = pow2(n - 1)?;
    let mut values = Vec::with_capacity(n + 1);
    for k in 0..n {
        let mut s = 0u128;
        for i in k..n {
            s += binomial(n as u64 - 1, i as u64)?;
        }
        values.push(Fraction::new(s, den).to_f64());
    }
    values.push(0.0);
    Ok(AngleProfile { values })
}

/// Coefficients of `(t+1)(t+3)⋯(t+2n−1) = Σ B(n,k) tᵏ`, lowest degree first.
pub fn weyl_b_coefficients(n: usize) -> Result<Vec<u128>> {
    require_n(n)?;
    if n > MAX_WEYL_N {
        return Err(overflow(&format!(
            "B(n, k) is only computed for n <= {MAX_WEYL_N}, got {n}"
        )));
    }
    let mut poly = vec![1u128];
    for i in 1..=n {
        let c = 2 * i as u128 - 1;
        let mut next = vec![0u128; poly.len() + 1];
        for (d, &p) in poly.iter().enumerate() {
            next[d] = next[d]
                .checked_add(p.checked_mul(c).ok_or_else(|| overflow("B(n,k)"))?)
                .ok_or_else(|| overflow("B(n,k)"))?;
            next[d + 1] = next[d + 1]
                .checked_add(p)
                .ok_or_else(|| overflow("B(n,k)"))?;
        }
        poly = next;
    }
    Ok(poly)
}

fn weyl_denominator(n: usize) -> Result<u128> {
    let fact = (1..=n as u128).try_fold(1u128, |acc, i| acc.checked_mul(i));
    fact.and_then(|f| f.checked_mul(pow2(n).ok()?))
        .ok_or_else(|| overflow("2^n n!"))
}

pub fn weyl_b_table(n: usize) -> Result<ExactTable> {
    let b = weyl_b_coefficients(n)?;
    let den = weyl_denominator(n)?;
    let volumes = b.iter().map(|&c| Fraction::new(c, den)).collect();
    let mut angles: Vec<Fraction> = (0..n)
        .map(|k| Fraction::new(2 * alternating_tail(&b, k), den))
        .collect();
    angles.push(Fraction::new(0, 1));
    Ok(ExactTable { volumes, angles })
}

/// `υ_k = B(n,k) / (2ⁿ n!)`
pub fn weyl_b_intrinsic_volumes(n: usize) -> Result<IntrinsicVolumes> {
    Ok(weyl_b_table(n)?.intrinsic_volumes())
}

/// `γ_k = 2 (B(n,k+1) + B(n,k+3) + …) / (2ⁿ n!)`
pub fn weyl_b_grassmann(n: usize) -> Result<AngleProfile> {
    Ok(weyl_b_table(n)?.angle_profile())
}

/// Linear `m`-plane in ℝⁿ: `υ = e_m`, `γ_k = 1` for `k < m`, else 0.
pub fn subspace_table(m: usize, n: usize) -> Result<ExactTable> {
    if m > n {
        return Err(Error::InvalidInput(format!(
            "subspace dimension {m} exceeds ambient dimension {n}"
        )));
    }
    let volumes = (0..=n)
        .map(|k| Fraction::new((k == m) as u128, 1))
        .collect();
    let angles = (0..=n).map(|k| Fraction::new((k < m) as u128, 1)).collect();
    Ok(ExactTable { volumes, angles })
}

pub fn subspace_grassmann(m: usize, n: usize) -> Result<AngleProfile> {
    Ok(subspace_table(m, n)?.angle_profile())
}

/// Conic Crofton transform.
///
/// For cones that are not subspaces, `γ_k = 2(υ_{k+1} + υ_{k+3} + …)`.
/// For a subspace the volume vector is a point mass at its dimension and
/// `γ_k = Σ_{i>k} υ_i`.
pub fn crofton_from_v(v: &IntrinsicVolumes, is_subspace: bool) -> AngleProfile {
    let n = v.values.len();
    let values = (0..n)
        .map(|k| {
            if is_subspace {
                v.values[k + 1..].iter().sum()
            } else {
                2.0 * v.values.iter().skip(k + 1).step_by(2).sum::<f64>()
            }
        })
        .collect();
    AngleProfile { values }
}

/// Absorption probability of a Gaussian polytope with `n` vertices in ℝᵏ:
/// `2^{1−n} Σ_{i=k}^{n−1} C(n−1, i)`.
pub fn wendel_absorption(n: usize, k: usize) -> Result<f64> {
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "absorption needs 1 <= k <= n-1, got n = {n}, k = {k}"
        )));
    }
    Ok(orthant_grassmann(n)?.values[k])
}

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Continued fraction (modified Lentz), switching to `1 − I_{1−x}(b, a)`
/// beyond the mean so the fraction converges fast.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "beta parameters must be positive and finite, got ({a}, {b})"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidInput(format!("x = {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_front.exp() * beta_continued_fraction(a, b, x)? / a)
    } else {
        Ok(1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x)? / b)
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> Result<f64> {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::IterationLimit {
        solver: "incomplete beta continued fraction",
        limit: MAX_ITER,
    })
}

/// CDF at `r` of `dist²(Z, L)` for a linear `k`-plane `L ⊂ ℝⁿ` and `Z`
/// uniform on the sphere: Beta((n−k)/2, k/2), with the two degenerate ends
/// (`k = n`: point mass at 0, `k = 0`: point mass at 1).
pub fn steiner_beta_cdf(k: usize, n: usize, r: f64) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidInput(format!("k = {k} exceeds n = {n}")));
    }
    if k == n {
        return Ok(if r >= 0.0 { 1.0 } else { 0.0 });
    }
    if k == 0 {
        return Ok(if r >= 1.0 { 1.0 } else { 0.0 });
    }
    reg_inc_beta((n - k) as f64 / 2.0, k as f64 / 2.0, r.clamp(0.0, 1.0))
}

fn check_grid(grid: &[f64], lo_open: f64, hi: Option<f64>) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty r grid".into()));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidInput(
                "r grid must be strictly increasing".into(),
            ));
        }
    }
    for &r in grid {
        if !(r > lo_open && hi.is_none_or(|h| r <= h) && r.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "r = {r} outside the allowed range"
            )));
        }
    }
    Ok(())
}

/// Rows `r_j`, columns `k = 0..n`: entry `β_{k,n}(r_j)`.
pub fn steiner_design_matrix(n: usize, r_grid: &[f64]) -> Result<Matrix> {
    require_n(n)?;
    check_grid(r_grid, 0.0, Some(1.0))?;
    let mut data = Vec::with_capacity(r_grid.len() * (n + 1));
    for &r in r_grid {
        for k in 0..=n {
            data.push(steiner_beta_cdf(k, n, r)?);
        }
    }
    Matrix::new(r_grid.len(), n + 1, data)
}

/// Vandermonde rows `(1, r, r², …, rⁿ)`.
pub fn mgf_design_matrix(n: usize, r_grid: &[f64]) -> Result<Matrix> {
    require_n(n)?;
    check_grid(r_grid, 0.0, None)?;
    let mut data = Vec::with_capacity(r_grid.len() * (n + 1));
    for &r in r_grid {
        for k in 0..=n {
            data.push(r.powi(k as i32));
        }
    }
    Matrix::new(r_grid.len(), n + 1, data)
}

/// `12` equispaced points `1/12, …, 1`.
pub fn default_steiner_grid() -> Vec<f64> {
    (1..=12).map(|i| i as f64 / 12.0).collect()
}

/// `n + 1` equispaced points in `[0.6, 1.4]`, with `r = 1` inserted when the
/// spacing misses it.
pub fn default_mgf_grid(n: usize) -> Vec<f64> {
    let m = n + 1;
    let mut grid: Vec<f64> = (0..m)
        .map(|i| 0.6 + 0.8 * i as f64 / (m - 1).max(1) as f64)
        .collect();
    if let Some(p) = grid.iter().position(|r| (r - 1.0).abs() < 1e-12) {
        grid[p] = 1.0;
    } else {
        let p = grid.partition_point(|&r| r < 1.0);
        grid.insert(p, 1.0);
    }
    grid
}

/// Least squares over the probability simplex, `min |A υ − b|` subject to
/// `υ ≥ 0`, `Σ υ = 1`.
///
/// Primal active-set method: on the current support the equality-constrained
/// problem is solved in the null space of `1ᵀ`. A column enters when the
/// subproblem on the enlarged support gives it a positive weight (the sign
/// of that weight is the sign of its multiplier, and unlike a gradient test
/// it stays reliable for ill-conditioned designs); weights that turn
/// negative are removed by ratio steps.
pub fn solve_simplex_constrained_ls(a: &Matrix, b: &[f64]) -> Result<IntrinsicVolumes> {
    const ENTER_TOL: f64 = 1e-9;
    crate::error::check_dim(a.rows(), b.len())?;
    let cols = a.columns();
    let m = cols.len();
    let rank = rank_of_columns(&cols, 1e-12);
    if rank < m {
        return Err(Error::RankDeficient { rank, required: m });
    }

    let objective = |x: &[f64]| -> f64 {
        let ax = a.mul_vec(x).expect("dims");
        ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum()
    };
    let vertex = |i: usize| -> Vec<f64> {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        e
    };
    let start = (0..m)
        .min_by(|&i, &j| objective(&vertex(i)).total_cmp(&objective(&vertex(j))))
        .expect("m >= 1");
    let mut x = vertex(start);
    let mut support = vec![false; m];
    support[start] = true;
    let limit = 20 * m * m + 50;
    let mut steps = 0;

    loop {
        let ax = a.mul_vec(&x)?;
        let resid: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
        let grad: Vec<f64> = cols.iter().map(|c| dot(c, &resid)).collect();
        // Try the steepest candidates first.
        let mut candidates: Vec<usize> = (0..m).filter(|&i| !support[i]).collect();
        candidates.sort_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let mut enter = None;
        for &j in &candidates {
            let mut idx: Vec<usize> = (0..m).filter(|&i| support[i]).collect();
            idx.push(j);
            let s = equality_constrained_ls(&cols, b, &idx)?;
            if s[idx.len() - 1] > ENTER_TOL {
                enter = Some(j);
                break;
            }
        }
        let Some(j) = enter else { break };
        support[j] = true;

        loop {
            steps += 1;
            if steps > limit {
                return Err(Error::IterationLimit {
                    solver: "simplex-constrained least squares",
                    limit,
                });
            }
            let idx: Vec<usize> = (0..m).filter(|&i| support[i]).collect();
            let s = equality_constrained_ls(&cols, b, &idx)?;
            if s.iter().all(|v| *v > 0.0) {
                x = vec![0.0; m];
                for (&i, v) in idx.iter().zip(&s) {
                    x[i] = *v;
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (&i, &si) in idx.iter().zip(&s) {
                if si <= 0.0 && x[i] > si {
                    alpha = alpha.min(x[i] / (x[i] - si));
                }
            }
            for (&i, &si) in idx.iter().zip(&s) {
                x[i] += alpha * (si - x[i]);
            }
            for &i in &idx {
                if x[i] <= 1e-15 {
                    x[i] = 0.0;
                    support[i] = false;
                }
            }
            if !support.iter().any(|s| *s) {
                // Cannot happen in exact arithmetic; restart from the best vertex.
                support[start] = true;
                x = vertex(start);
                break;
            }
            let total: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= total);
        }
    }
    IntrinsicVolumes::new(x, 1e-9)
}

/// `min |A_S y − b|` over `Σ y = 1`, via `y = e₀ + Z w` with `Z` spanning
/// `{Σ y = 0}` on the support `S`.
fn equality_constrained_ls(cols: &[Vec<f64>], b: &[f64], support: &[usize]) -> Result<Vec<f64>> {
    let first = &cols[support[0]];
    if support.len() == 1 {
        return Ok(vec![1.0]);
    }
    let z_cols: Vec<Vec<f64>> = support[1..]
        .iter()
        .map(|&i| cols[i].iter().zip(first).map(|(c, f)| c - f).collect())
        .collect();
    let rhs: Vec<f64> = b.iter().zip(first).map(|(q, f)| q - f).collect();
    let reduced = Matrix::from_columns(&z_cols)?;
    let w = solve_least_squares(&reduced, &rhs).ok_or(Error::RankDeficient {
        rank: support.len() - 1,
        required: support.len(),
    })?;
    let mut y = Vec::with_capacity(support.len());
    y.push(1.0 - w.iter().sum::<f64>());
    y.extend(w);
    Ok(y)
}
