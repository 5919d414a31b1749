//! Dense and packed-symmetric matrix types plus the two symmetric
//! eigensolvers the optimizer is built on.

mod dense;
mod eigen;
mod lanczos;
mod symmetric;

pub use dense::DenseMatrix;
pub use eigen::{min_eigenvalue, psd_spectral_norm, sym_eigendecomposition, EigenDecomposition};
pub use lanczos::{extremal_eigenvector, ExtremalEigen};
pub use symmetric::SymmetricMatrix;

/// Flips a vector in place so its first significant component is
/// positive. Gives eigenvectors a deterministic orientation.
pub(crate) fn canonicalize_sign(v: &mut [f64]) {
    let max_abs = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if let Some(first) = v
        .iter()
        .find(|x| x.abs() > 1e-12 * max_abs.max(f64::MIN_POSITIVE))
    {
        if *first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}
