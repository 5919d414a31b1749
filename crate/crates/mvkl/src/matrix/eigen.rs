//! Full symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Jacobi is slower than tridiagonalization-based solvers but its
//! rotations are orthogonal to machine precision, which keeps the
//! reconstruction error tight — that property is load-bearing for the
//! spectral Sylvester solver used as a reference oracle.

use crate::error::{Error, Result};
use crate::matrix::{canonicalize_sign, DenseMatrix, SymmetricMatrix};

/// Eigenvalues in ascending order; column k of `vectors` pairs with
/// `values[k]`. Each eigenvector's first nonzero component is positive.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl EigenDecomposition {
    /// `Q diag(values) Qᵀ` as a dense matrix.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for i in 0..n {
            let row = scaled.row_mut(i);
            for (k, r) in row.iter_mut().enumerate() {
                *r *= self.values[k];
            }
        }
        scaled.mul(&self.vectors.transpose())
    }

    pub fn min_value(&self) -> f64 {
        *self.values.first().expect("nonempty spectrum")
    }

    pub fn max_value(&self) -> f64 {
        *self.values.last().expect("nonempty spectrum")
    }
}

const MAX_SWEEPS: usize = 60;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eigendecomposition(a: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let mut m = a.to_dense();
    let mut vecs = DenseMatrix::identity(n);
    let mut d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];
    let scale = a.frob_norm().max(1.0);

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].abs();
            }
        }
        if off == 0.0 || off <= 1e-14 * scale {
            return finish(d, vecs);
        }
        // During the first sweeps only rotate entries above a coarse
        // threshold; afterwards rotate everything (standard Jacobi
        // scheduling).
        let tresh = if sweep < 3 {
            0.2 * off / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let g = 100.0 * apq.abs();
                // Skip rotations that can no longer change the diagonal.
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                if apq.abs() <= tresh {
                    continue;
                }
                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                let rot = |m: &mut DenseMatrix, i: usize, j: usize, k: usize, l: usize| {
                    let g = m[(i, j)];
                    let h = m[(k, l)];
                    m[(i, j)] = g - s * (h + g * tau);
                    m[(k, l)] = h + s * (g - h * tau);
                };
                for j in 0..p {
                    rot(&mut m, j, p, j, q);
                }
                for j in (p + 1)..q {
                    rot(&mut m, p, j, j, q);
                }
                for j in (q + 1)..n {
                    rot(&mut m, p, j, q, j);
                }
                for j in 0..n {
                    rot(&mut vecs, j, p, j, q);
                }
            }
        }
        for i in 0..n {
            b[i] += z[i];
            d[i] = b[i];
            z[i] = 0.0;
        }
    }
    Err(Error::NumericalFailure(format!(
        "Jacobi eigendecomposition did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn finish(d: Vec<f64>, vecs: DenseMatrix) -> Result<EigenDecomposition> {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        let mut col: Vec<f64> = (0..n).map(|i| vecs[(i, old_col)]).collect();
        canonicalize_sign(&mut col);
        for i in 0..n {
            vectors[(i, new_col)] = col[i];
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Smallest eigenvalue via the full decomposition; intended for small
/// matrices and feasibility checks.
pub fn min_eigenvalue(a: &SymmetricMatrix) -> Result<f64> {
    Ok(sym_eigendecomposition(a)?.min_value())
}

/// Spectral norm of a PSD matrix (its largest eigenvalue, floored at 0).
pub fn psd_spectral_norm(a: &SymmetricMatrix) -> Result<f64> {
    Ok(sym_eigendecomposition(a)?.max_value().max(0.0))
}
