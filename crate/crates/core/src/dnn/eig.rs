//! Cyclic Jacobi eigen-decomposition for small symmetric matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const OFFDIAG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `E diag(f(lambda)) E'`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let s = f(l);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.vectors.transpose()
    }
}

/// Symmetric eigen-decomposition by cyclic Jacobi sweeps.
///
/// Sweeps continue until every off-diagonal entry is below
/// `1e-12 * ||Q||_F`.
pub fn sym_eig(q: &DMatrix<f64>) -> Result<SymEigen> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, expected square",
            n,
            q.ncols()
        )));
    }
    let scale = q.amax().max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (q[(i, j)] - q[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut a: Vec<f64> = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (q[(i, j)] + q[(j, i)]);
        }
    }
    let mut v = vec![0.0; n * n];
    jacobi_in_place(n, &mut a, &mut v);
    Ok(sorted(n, &a, &v))
}

/// Core sweep loop on row-major storage. On return `a` is (numerically)
/// diagonal and `v` holds the eigenvectors as columns.
pub(crate) fn jacobi_in_place(n: usize, a: &mut [f64], v: &mut [f64]) {
    v.fill(0.0);
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if fro == 0.0 {
        return;
    }
    let threshold = OFFDIAG_TOL * fro;
    for _ in 0..MAX_SWEEPS {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for qq in p + 1..n {
                off = off.max(a[p * n + qq].abs());
            }
        }
        if off < threshold {
            return;
        }
        for p in 0..n {
            for qq in p + 1..n {
                let apq = a[p * n + qq];
                if apq.abs() < threshold * 1e-3 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[qq * n + qq];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + qq];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + qq] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[qq * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[qq * n + k] = s * apk + c * aqk;
                }
                a[p * n + qq] = 0.0;
                a[qq * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + qq];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + qq] = s * vkp + c * vkq;
                }
            }
        }
    }
}

fn sorted(n: usize, a: &[f64], v: &[f64]) -> SymEigen {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    SymEigen { values, vectors }
}

/// Nearest positive semidefinite matrix in Frobenius norm.
pub fn project_psd(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (q + q.transpose()) * 0.5;
    let e = sym_eig(&sym)?;
    if e.min() >= 0.0 {
        return Ok(sym);
    }
    Ok(e.reconstruct_with(|l| l.max(0.0)))
}

/// Largest absolute eigenvalue.
pub fn spectral_norm(q: &DMatrix<f64>) -> Result<f64> {
    let e = sym_eig(q)?;
    Ok(e.min().abs().max(e.max().abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_spectrum() {
        let e = sym_eig(&DMatrix::identity(4, 4)).unwrap();
        assert!(e.values.iter().all(|&l| (l - 1.0).abs() < 1e-15));
    }

    #[test]
    fn deception_weight_matrix_spectrum() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 0.0]);
        let e = sym_eig(&v).unwrap();
        let s5 = 5f64.sqrt();
        assert!((e.values[0] - (1.0 - s5) / 2.0).abs() < 1e-14);
        assert!((e.values[1] - (1.0 + s5) / 2.0).abs() < 1e-14);
        assert!((spectral_norm(&v).unwrap() - (1.0 + s5) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(sym_eig(&q).is_err());
        assert!(sym_eig(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn zero_and_empty() {
        let e = sym_eig(&DMatrix::zeros(3, 3)).unwrap();
        assert!(e.values.iter().all(|&l| l == 0.0));
        let e = sym_eig(&DMatrix::zeros(0, 0)).unwrap();
        assert!(e.values.is_empty());
    }

    #[test]
    fn psd_projection_fixes_psd_input() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 0.2, 1.0, 0.3, 0.1]);
        let q = &b * b.transpose();
        let p = project_psd(&q).unwrap();
        assert!((p - q).amax() < 1e-12);
    }

    #[test]
    fn psd_projection_clamps() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 0.0]);
        let p = project_psd(&q).unwrap();
        let e = sym_eig(&p).unwrap();
        assert!(e.min() > -1e-14);
        assert!((e.max() - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
    }
}
