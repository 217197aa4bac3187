mod common;

use cpsignal::dnn::{project_psd, spectral_norm, sym_eig};
use nalgebra::DMatrix;
use rand::Rng;

/// Characteristic polynomial coefficients `c_0..c_n` (monic, `c_n = 1`) by
/// Faddeev-LeVerrier.
fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + DMatrix::identity(n, n) * c[n - k + 1];
        c[n - k] = -(a * &m).trace() / k as f64;
    }
    c
}

/// Real parts of the companion matrix eigenvalues, ascending.
fn companion_roots(c: &[f64]) -> Vec<f64> {
    let n = c.len() - 1;
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -c[i];
    }
    let mut roots: Vec<f64> = comp.complex_eigenvalues().iter().map(|z| z.re).collect();
    roots.sort_by(f64::total_cmp);
    roots
}

#[test]
fn jacobi_matches_companion_roots() {
    let mut r = common::rng(55);
    for _ in 0..20 {
        let b = DMatrix::from_fn(5, 5, |_, _| r.random_range(-1.0..1.0));
        let q = &b + b.transpose();
        let eig = sym_eig(&q).unwrap();
        let roots = companion_roots(&char_poly(&q));
        for (got, want) in eig.values.iter().zip(&roots) {
            assert!((got - want).abs() < 1e-8, "{:?} vs {:?}", eig.values, roots);
        }
        let recon = eig.reconstruct_with(|l| l);
        assert!((&recon - &q).norm() <= 1e-9 * q.norm());
        let orth = eig.vectors.transpose() * &eig.vectors;
        assert!((orth - DMatrix::identity(5, 5)).amax() < 1e-12);
    }
}

#[test]
fn deception_weight_eigenvalues() {
    let v = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 0.0]);
    let eig = sym_eig(&v).unwrap();
    let s5 = 5f64.sqrt();
    assert!((eig.values[0] - (1.0 - s5) / 2.0).abs() < 1e-14);
    assert!((eig.values[1] - (1.0 + s5) / 2.0).abs() < 1e-14);
    assert!((spectral_norm(&v).unwrap() - (1.0 + s5) / 2.0).abs() < 1e-14);
}

#[test]
fn psd_projection_fixes_psd_matrices() {
    let mut r = common::rng(56);
    for n in 1..=8 {
        let b = DMatrix::from_fn(n, n + 1, |_, _| r.random_range(-1.0..1.0));
        let q = &b * b.transpose();
        let p = project_psd(&q).unwrap();
        assert!((p - &q).amax() <= 1e-12 * q.amax().max(1.0));
    }
}

#[test]
fn asymmetric_input_is_rejected() {
    let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
    assert!(sym_eig(&q).is_err());
}
