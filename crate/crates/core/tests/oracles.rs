mod support;

use conic_core::cones::weyl_chamber_b;
use conic_core::exact::{
    default_mgf_grid, default_steiner_grid, mgf_design_matrix, solve_simplex_constrained_ls,
    steiner_design_matrix,
};
use conic_core::feasible::{nnls, project_onto_cone};
use conic_core::linalg::{sample_gaussian_vector, Matrix, RngStream};
use support::oracles::{exhaustive_projection, max_abs_diff, weyl_projection};

const INSTANCES: usize = 500;

#[test]
fn nnls_matches_exhaustive_enumeration() {
    let mut rng = RngStream::new(101, 0).rng();
    let mut worst = 0.0f64;
    for i in 0..INSTANCES {
        let n = 1 + i % 5;
        let m = 1 + (i / 5) % 6;
        let columns: Vec<Vec<f64>> = (0..m)
            .map(|_| sample_gaussian_vector(n, &mut rng))
            .collect();
        let z = sample_gaussian_vector(n, &mut rng);
        let ours = nnls(&Matrix::from_columns(&columns).unwrap(), &z).unwrap();
        assert!(ours.coefficients.iter().all(|&c| c >= 0.0));
        worst = worst.max(max_abs_diff(
            &ours.projection,
            &exhaustive_projection(&columns, &z),
        ));
    }
    assert!(worst <= 1e-7, "max error {worst:e}");
}

#[test]
fn nnls_handles_duplicate_and_opposite_columns() {
    let mut rng = RngStream::new(102, 0).rng();
    for i in 0..100 {
        let n = 2 + i % 3;
        let a = sample_gaussian_vector(n, &mut rng);
        let b = sample_gaussian_vector(n, &mut rng);
        let neg_a: Vec<f64> = a.iter().map(|v| -v).collect();
        let twice_b: Vec<f64> = b.iter().map(|v| 2.0 * v).collect();
        let columns = vec![a, neg_a, b, twice_b];
        let z = sample_gaussian_vector(n, &mut rng);
        let ours = nnls(&Matrix::from_columns(&columns).unwrap(), &z).unwrap();
        let err = max_abs_diff(&ours.projection, &exhaustive_projection(&columns, &z));
        assert!(err <= 1e-7, "instance {i}: {err:e}");
    }
}

#[test]
fn weyl_projection_matches_isotonic_regression() {
    let mut rng = RngStream::new(103, 0).rng();
    let mut worst = 0.0f64;
    for i in 0..INSTANCES {
        let n = 1 + i % 10;
        let c = weyl_chamber_b(n).unwrap();
        let z: Vec<f64> = sample_gaussian_vector(n, &mut rng)
            .iter()
            .map(|v| 3.0 * v)
            .collect();
        let ours = project_onto_cone(&c, &z).unwrap().projection;
        worst = worst.max(max_abs_diff(&ours, &weyl_projection(&z)));
    }
    assert!(worst <= 1e-7, "max error {worst:e}");
}

/// Point of the probability simplex with a few exact zeros.
fn sparse_simplex_point(n: usize, rng: &mut conic_core::linalg::StreamRng, i: usize) -> Vec<f64> {
    let mut v: Vec<f64> = sample_gaussian_vector(n + 1, rng)
        .iter()
        .map(|x| x.abs())
        .collect();
    if n > 0 {
        v[i % (n + 1)] = 0.0;
    }
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

#[test]
fn constrained_ls_recovers_noiseless_volumes() {
    let mut rng = RngStream::new(104, 0).rng();
    let mut worst = 0.0f64;
    for i in 0..INSTANCES {
        let n = 1 + i % 6;
        let truth = sparse_simplex_point(n, &mut rng, i);
        for a in [
            mgf_design_matrix(n, &default_mgf_grid(n)).unwrap(),
            steiner_design_matrix(n, &default_steiner_grid()).unwrap(),
        ] {
            let b = a.mul_vec(&truth).unwrap();
            let got = solve_simplex_constrained_ls(&a, &b).unwrap();
            let e = max_abs_diff(&got.values, &truth);
            worst = worst.max(e);
        }
    }
    assert!(worst <= 1e-6, "max error {worst:e}");
}
