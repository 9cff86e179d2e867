//! Independent reference implementations used to check the solvers.
//!
//! Shared by the core integration tests and the CLI acceptance target.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Projection of `z` onto `pos(columns)` by enumerating every linearly
/// independent support and keeping the best nonnegative least-squares fit.
/// Some optimal support is always independent, so nothing is missed.
pub fn exhaustive_projection(columns: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let target = DVector::from_column_slice(z);
    let mut best = vec![0.0; n];
    let mut best_resid = target.norm();
    for mask in 1u32..(1 << columns.len()) {
        let support: Vec<usize> = (0..columns.len()).filter(|i| mask >> i & 1 == 1).collect();
        if support.len() > n {
            continue;
        }
        let a = DMatrix::from_fn(n, support.len(), |r, c| columns[support[c]][r]);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        if svd
            .singular_values
            .iter()
            .any(|&s| s <= 1e-10 * smax.max(1.0))
        {
            continue;
        }
        let x = svd.solve(&target, 0.0).expect("full column rank");
        if x.iter().any(|&v| v < 0.0) {
            continue;
        }
        let p = &a * &x;
        let resid = (&target - &p).norm();
        if resid < best_resid {
            best_resid = resid;
            best = p.iter().copied().collect();
        }
    }
    best
}

/// Least-squares fit of a nonincreasing sequence (pool adjacent violators).
pub fn pava_nonincreasing(z: &[f64]) -> Vec<f64> {
    // Blocks of (sum, count); merge while a later block mean exceeds an earlier one.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(z.len());
    for &v in z {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s2 / c2 as f64 > s1 / c1 as f64 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s1 + s2, c1 + c2);
            } else {
                break;
            }
        }
    }
    blocks
        .iter()
        .flat_map(|&(s, c)| std::iter::repeat_n(s / c as f64, c))
        .collect()
}

/// Projection onto `{t₁ ≥ … ≥ tₙ ≥ 0}`: isotonic fit, then clip at zero.
pub fn weyl_projection(z: &[f64]) -> Vec<f64> {
    pava_nonincreasing(z)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
