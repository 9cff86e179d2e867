use serde::{Deserialize, Serialize};

use super::{check_samples, run_chunked, Estimate, Moments, Tally};
use crate::cones::{apply_linear_map, simplex_tangent_cone, ConeVRep};
use crate::error::{Error, Result};
use crate::exact::{
    binomial, mgf_design_matrix, solve_simplex_constrained_ls, steiner_design_matrix,
    IntrinsicVolumes,
};
use crate::feasible::{
    is_linear_subspace, nnls, origin_in_interior_of_hull, relint_meets_complement_of,
    strictly_balanced,
};
use crate::linalg::{
    dot, norm, rank_of_columns, sample_gaussian_matrix, sample_gaussian_vector,
    sample_uniform_sphere, sample_uniform_subspace, Matrix, RngStream, StreamRng, DEFAULT_TOL,
};

fn require_not_subspace(c: &ConeVRep, context: &str) -> Result<()> {
    if is_linear_subspace(c)? {
        return Err(Error::Precondition(format!(
            "{context} requires that the cone is not a linear subspace; \
             use the closed-form subspace angles instead"
        )));
    }
    Ok(())
}

/// `z ∈ pos(columns of g)` for a matrix of unit generators.
fn contains(g: &Matrix, z: &[f64]) -> Result<bool> {
    Ok(nnls(g, z)?.residual_norm <= DEFAULT_TOL * norm(z).max(1.0))
}

fn merge_tallies(parts: Vec<Tally>) -> Tally {
    let mut total = Tally::default();
    parts.iter().for_each(|t| total.merge(t));
    total
}

/// Indicator mean with the image tally it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageEstimate {
    pub estimate: Estimate,
    pub tally: Tally,
}

/// `γ_k(pos M) = P[0 ∈ int conv(A M)]` with `A` a `k×n` Gaussian matrix.
pub fn estimate_absorption(
    m: &ConeVRep,
    k: usize,
    samples: u64,
    stream: RngStream,
) -> Result<Estimate> {
    check_samples(samples)?;
    if k == 0 {
        return Err(Error::InvalidInput("absorption needs k >= 1".into()));
    }
    require_not_subspace(m, "the absorption estimator")?;
    let n = m.ambient_dim();
    let gens = m.generators();
    let parts = run_chunked(samples, stream, |rng, len| {
        let mut hits = 0u64;
        for _ in 0..len {
            let a = sample_gaussian_matrix(k, n, rng)?;
            let points = gens
                .iter()
                .map(|g| a.mul_vec(g))
                .collect::<Result<Vec<_>>>()?;
            hits += origin_in_interior_of_hull(&points)? as u64;
        }
        Ok(hits)
    })?;
    Ok(Estimate::from_indicator(
        &format!("absorption(k={k})"),
        parts.iter().sum(),
        samples,
    ))
}

/// `γ_j(C)` as the frequency with which `relint C` meets a uniform
/// `(n−j)`-dimensional subspace. The complement (dimension `j`) is drawn.
pub fn estimate_grassmann_subspace(
    c: &ConeVRep,
    j: usize,
    samples: u64,
    stream: RngStream,
) -> Result<Estimate> {
    check_samples(samples)?;
    let n = c.ambient_dim();
    if j > n {
        return Err(Error::InvalidInput(format!(
            "j = {j} exceeds ambient dimension {n}"
        )));
    }
    require_not_subspace(c, "the subspace-intersection estimator")?;
    let unit = c.unit_generators();
    let parts = run_chunked(samples, stream, |rng, len| {
        let mut hits = 0u64;
        for _ in 0..len {
            let complement = sample_uniform_subspace(n, j, rng)?;
            hits += relint_meets_complement_of(&unit, &complement)? as u64;
        }
        Ok(hits)
    })?;
    Ok(Estimate::from_indicator(
        &format!("grassmann(j={j})"),
        parts.iter().sum(),
        samples,
    ))
}

enum ImageSample {
    /// `A C = ℝᵏ`.
    FullSpace,
    /// The image collapsed to `{0}` or to a proper subspace.
    Degenerate,
    /// Unit generators of a pointed-or-not image that is not a subspace.
    Proper(Vec<Vec<f64>>),
}

fn image_sample(c: &ConeVRep, k: usize, rng: &mut StreamRng) -> Result<ImageSample> {
    let a = sample_gaussian_matrix(k, c.ambient_dim(), rng)?;
    let ac = match apply_linear_map(&a, c) {
        Ok(ac) => ac,
        Err(Error::DegenerateCone(_)) => return Ok(ImageSample::Degenerate),
        Err(e) => return Err(e),
    };
    let gens = ac.unit_generators();
    if strictly_balanced(&gens, k)? {
        // A subspace; all of ℝᵏ exactly when it has full rank.
        return Ok(if rank_of_columns(&gens, DEFAULT_TOL) == k {
            ImageSample::FullSpace
        } else {
            ImageSample::Degenerate
        });
    }
    Ok(ImageSample::Proper(gens))
}

fn check_image_args(c: &ConeVRep, k: usize, j: usize) -> Result<()> {
    let dim = c.dim();
    if j >= dim.min(k) {
        return Err(Error::InvalidInput(format!(
            "need j < min(dim C, k); got j = {j}, dim C = {dim}, k = {k}"
        )));
    }
    require_not_subspace(c, "the Gaussian-image estimator")
}

fn grassmann_image_tally(
    c: &ConeVRep,
    k: usize,
    j: usize,
    samples: u64,
    stream: RngStream,
    exclude_full_space: bool,
) -> Result<Tally> {
    check_samples(samples)?;
    check_image_args(c, k, j)?;
    let parts = run_chunked(samples, stream, |rng, len| {
        let mut t = Tally::default();
        for _ in 0..len {
            let sample = image_sample(c, k, rng)?;
            let complement = sample_uniform_subspace(k, j, rng)?;
            match sample {
                ImageSample::FullSpace => {
                    t.trials += 1;
                    t.full_space += 1;
                    t.hits += (!exclude_full_space) as u64;
                }
                ImageSample::Degenerate => t.degenerate += 1,
                ImageSample::Proper(gens) => {
                    t.trials += 1;
                    t.hits += relint_meets_complement_of(&gens, &complement)? as u64;
                }
            }
        }
        Ok(t)
    })?;
    let total = merge_tallies(parts);
    total.check_degenerate("Gaussian image collapsed to a proper subspace")?;
    Ok(total)
}

/// `E[γ_j(A C)]` for a `k×n` Gaussian `A`, by the joint indicator that
/// `relint(A C)` meets a uniform `(k−j)`-dimensional subspace of ℝᵏ.
///
/// Images equal to ℝᵏ count as hits (every subspace meets ℝᵏ) and are
/// reported in the tally. Images that collapse to a proper subspace have
/// probability zero; they are excluded and the run fails when they exceed
/// [`super::MAX_DEGENERATE_FRACTION`].
pub fn estimate_expected_grassmann_image(
    c: &ConeVRep,
    k: usize,
    j: usize,
    samples: u64,
    stream: RngStream,
) -> Result<ImageEstimate> {
    let tally = grassmann_image_tally(c, k, j, samples, stream, false)?;
    Ok(ImageEstimate {
        estimate: tally.estimate(&format!("E[gamma_{j}(AC)] (k={k})")),
        tally,
    })
}

/// `E[γ_j(A C) 1{A C ≠ ℝᵏ}]`, the same joint indicator with full-space
/// images counted as misses.
pub fn estimate_conditional_grassmann_image(
    c: &ConeVRep,
    k: usize,
    j: usize,
    samples: u64,
    stream: RngStream,
) -> Result<ImageEstimate> {
    let tally = grassmann_image_tally(c, k, j, samples, stream, true)?;
    Ok(ImageEstimate {
        estimate: tally.estimate(&format!("E[gamma_{j}(AC); AC != R^{k}]")),
        tally,
    })
}

/// `α(C) = P[Z ∈ C]` for `Z` uniform on the sphere.
pub fn estimate_solid_angle(c: &ConeVRep, samples: u64, stream: RngStream) -> Result<Estimate> {
    check_samples(samples)?;
    let n = c.ambient_dim();
    let g = Matrix::from_columns(&c.unit_generators())?;
    let parts = run_chunked(samples, stream, |rng, len| {
        let mut hits = 0u64;
        for _ in 0..len {
            hits += contains(&g, &sample_uniform_sphere(n, rng))? as u64;
        }
        Ok(hits)
    })?;
    Ok(Estimate::from_indicator(
        "alpha(C)",
        parts.iter().sum(),
        samples,
    ))
}

/// `E[α(A C)]` with `A` and the sphere point drawn jointly per sample.
pub fn estimate_expected_solid_angle_image(
    c: &ConeVRep,
    k: usize,
    samples: u64,
    stream: RngStream,
) -> Result<ImageEstimate> {
    check_samples(samples)?;
    if k == 0 || k > c.dim() {
        return Err(Error::InvalidInput(format!(
            "need 1 <= k <= dim C = {}, got k = {k}",
            c.dim()
        )));
    }
    require_not_subspace(c, "the solid-angle image estimator")?;
    let parts = run_chunked(samples, stream, |rng, len| {
        let mut t = Tally::default();
        for _ in 0..len {
            let sample = image_sample(c, k, rng)?;
            let z = sample_uniform_sphere(k, rng);
            match sample {
                ImageSample::FullSpace => {
                    t.trials += 1;
                    t.full_space += 1;
                    t.hits += 1;
                }
                ImageSample::Degenerate => t.degenerate += 1,
                ImageSample::Proper(gens) => {
                    t.trials += 1;
                    t.hits += contains(&Matrix::from_columns(&gens)?, &z)? as u64;
                }
            }
        }
        Ok(t)
    })?;
    let tally = merge_tallies(parts);
    tally.check_degenerate("Gaussian image collapsed to a proper subspace")?;
    Ok(ImageEstimate {
        estimate: tally.estimate(&format!("E[alpha(AC)] (k={k})")),
        tally,
    })
}

/// `υ₀(pos M) = P[⟨N, g⟩ ≥ 0 for every generator g]` for Gaussian `N`.
pub fn estimate_persistence_v0(m: &ConeVRep, samples: u64, stream: RngStream) -> Result<Estimate> {
    check_samples(samples)?;
    require_not_subspace(m, "the persistence estimator")?;
    let n = m.ambient_dim();
    let gens = m.generators();
    let parts = run_chunked(samples, stream, |rng, len| {
        let mut hits = 0u64;
        for _ in 0..len {
            let x = sample_gaussian_vector(n, rng);
            hits += gens.iter().all(|g| dot(&x, g) >= 0.0) as u64;
        }
        Ok(hits)
    })?;
    Ok(Estimate::from_indicator(
        "upsilon_0",
        parts.iter().sum(),
        samples,
    ))
}

/// Recovered intrinsic volumes together with the per-`r` Monte Carlo rows
/// they were fitted to.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeRecovery {
    pub volumes: IntrinsicVolumes,
    pub r_grid: Vec<f64>,
    pub rows: Vec<Estimate>,
}

/// Sampling scheme for the moment-generating-function rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MgfMode {
    /// Uniform direction `u`, with the Gaussian radius integrated out:
    /// `(1 − (1 − r⁻²)|Π_C(u)|²)^{−n/2}`.
    #[default]
    Conditioned,
    /// Gaussian `N`, `exp((1 − r⁻²)/2 · |Π_C(N)|²)`.
    Raw,
}

/// Intrinsic volumes from `E exp((1 − r⁻²)/2 · |Π_C(N)|²) = Σ rᵏ υ_k`,
/// estimated at each grid point and inverted by simplex-constrained least
/// squares.
pub fn estimate_intrinsic_volumes_mgf(
    c: &ConeVRep,
    r_grid: &[f64],
    samples: u64,
    stream: RngStream,
    mode: MgfMode,
) -> Result<VolumeRecovery> {
    check_samples(samples)?;
    let n = c.ambient_dim();
    let design = mgf_design_matrix(n, r_grid)?;
    let g = c.generator_matrix();
    let slopes: Vec<f64> = r_grid.iter().map(|r| 1.0 - r.powi(-2)).collect();
    let parts = run_chunked(samples, stream, |rng, len| {
        let mut acc = vec![Moments::default(); slopes.len()];
        for _ in 0..len {
            match mode {
                MgfMode::Conditioned => {
                    let u = sample_uniform_sphere(n, rng);
                    let p = nnls(&g, &u)?.projection;
                    let c2 = dot(&p, &p).clamp(0.0, 1.0);
                    for (m, s) in acc.iter_mut().zip(&slopes) {
                        m.push((1.0 - s * c2).powf(-(n as f64) / 2.0));
                    }
                }
                MgfMode::Raw => {
                    let x = sample_gaussian_vector(n, rng);
                    let p = nnls(&g, &x)?.projection;
                    let c2 = dot(&p, &p);
                    for (m, s) in acc.iter_mut().zip(&slopes) {
                        m.push((0.5 * s * c2).exp());
                    }
                }
            }
        }
        Ok(acc)
    })?;
    let mut total = vec![Moments::default(); slopes.len()];
    for part in &parts {
        total.iter_mut().zip(part).for_each(|(t, p)| t.merge(p));
    }
    let rows: Vec<Estimate> = total
        .iter()
        .zip(r_grid)
        .map(|(m, r)| Estimate::from_moments(&format!("mgf(r={r})"), m))
        .collect();
    let means: Vec<f64> = rows.iter().map(|e| e.value).collect();
    Ok(VolumeRecovery {
        volumes: solve_simplex_constrained_ls(&design, &means)?,
        r_grid: r_grid.to_vec(),
        rows,
    })
}

/// Intrinsic volumes from the empirical CDF of `dist²(Z, C)`, `Z` uniform on
/// the sphere, against the Steiner design matrix. One sample set serves all
/// grid points.
pub fn estimate_intrinsic_volumes_steiner(
    c: &ConeVRep,
    r_grid: &[f64],
    samples: u64,
    stream: RngStream,
) -> Result<VolumeRecovery> {
    check_samples(samples)?;
    let n = c.ambient_dim();
    let design = steiner_design_matrix(n, r_grid)?;
    let g = c.generator_matrix();
    let parts = run_chunked(samples, stream, |rng, len| {
        let mut hits = vec![0u64; r_grid.len()];
        for _ in 0..len {
            let z = sample_uniform_sphere(n, rng);
            // A unit vector is never farther than 1 from a cone.
            let d = nnls(&g, &z)?.residual_norm.powi(2).min(1.0);
            for (h, r) in hits.iter_mut().zip(r_grid) {
                *h += (d <= *r) as u64;
            }
        }
        Ok(hits)
    })?;
    let mut hits = vec![0u64; r_grid.len()];
    for part in &parts {
        hits.iter_mut().zip(part).for_each(|(h, p)| *h += p);
    }
    let rows: Vec<Estimate> = hits
        .iter()
        .zip(r_grid)
        .map(|(&h, r)| Estimate::from_indicator(&format!("cdf(r={r})"), h, samples))
        .collect();
    let cdf: Vec<f64> = rows.iter().map(|e| e.value).collect();
    Ok(VolumeRecovery {
        volumes: solve_simplex_constrained_ls(&design, &cdf)?,
        r_grid: r_grid.to_vec(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AngleSumEstimate {
    /// `E S_{ℓ,j}` for the Gaussian simplex in ℝᵏ.
    pub gaussian: Estimate,
    /// `S_{ℓ,j}` for the regular simplex.
    pub regular: Estimate,
    /// `gaussian − regular`, compared against 0.
    pub difference: Estimate,
}

fn identity_points(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|r| (r == i) as u8 as f64).collect())
        .collect()
}

/// Tangent cone of the regular simplex `conv(e₁, …, eₙ)` at the face spanned
/// by its first `ell + 1` vertices.
pub fn regular_simplex_tangent_cone(n: usize, ell: usize) -> Result<ConeVRep> {
    simplex_tangent_cone(&identity_points(n), ell + 1)
}

/// Sums over ℓ-faces of the `j`-th Grassmann angle of the tangent cone, for
/// a Gaussian simplex with `n` vertices in ℝᵏ and for the regular simplex.
///
/// By exchangeability both sides are `C(n, ℓ+1)` times the angle at one
/// fixed face.
pub fn estimate_face_angle_sums(
    n: usize,
    k: usize,
    ell: usize,
    j: usize,
    samples: u64,
    stream: RngStream,
) -> Result<AngleSumEstimate> {
    check_samples(samples)?;
    if n < 2 || n > k + 1 || ell + 2 > n || j + 2 > n {
        return Err(Error::InvalidInput(format!(
            "need 2 <= n <= k+1, ell <= n-2, j <= n-2; got n = {n}, k = {k}, ell = {ell}, j = {j}"
        )));
    }
    let faces = binomial(n as u64, ell as u64 + 1)? as f64;
    let parts = run_chunked(samples, stream.derive("gaussian"), |rng, len| {
        let mut hits = 0u64;
        for _ in 0..len {
            let points: Vec<Vec<f64>> = (0..n).map(|_| sample_gaussian_vector(k, rng)).collect();
            let complement = sample_uniform_subspace(k, j, rng)?;
            let t = simplex_tangent_cone(&points, ell + 1)?;
            hits += relint_meets_complement_of(&t.unit_generators(), &complement)? as u64;
        }
        Ok(hits)
    })?;
    let gaussian = Estimate::from_indicator(
        &format!("gaussian S_{{{ell},{j}}}"),
        parts.iter().sum(),
        samples,
    )
    .scaled(faces);
    let mut regular = estimate_grassmann_subspace(
        &regular_simplex_tangent_cone(n, ell)?,
        j,
        samples,
        stream.derive("regular"),
    )?
    .scaled(faces);
    regular.name = format!("regular S_{{{ell},{j}}}");
    let difference = Estimate::difference("gaussian - regular", &gaussian, &regular);
    Ok(AngleSumEstimate {
        gaussian,
        regular,
        difference,
    })
}
