//! Solvers for the shifted Sylvester system `K C L + σ C = Y` that the
//! coefficient block of the alternating minimization reduces to.
//!
//! The linear map `C ↦ K C L + σC` is self-adjoint under the Frobenius
//! inner product and positive definite whenever `K`, `L` are PSD and
//! `σ > 0`, so conjugate gradient applies directly in matrix form
//! without ever forming the (ln)×(ln) Kronecker system.

use crate::error::{Error, Result};
use crate::kernels::KernelApply;
use crate::matrix::{sym_eigendecomposition, DenseMatrix, SymmetricMatrix};

pub struct SylvesterProblem<'a, K: KernelApply> {
    pub input_op: &'a K,
    pub output_kernel: &'a SymmetricMatrix,
    pub sigma: f64,
    pub rhs: &'a DenseMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Frobenius norm of `Y - (K C L + σC)` recomputed at the returned
    /// iterate, not the recurrence residual.
    pub residual: f64,
    pub converged: bool,
}

impl<K: KernelApply> SylvesterProblem<'_, K> {
    fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ridge shift must be positive, got {}",
                self.sigma
            )));
        }
        if self.input_op.dim() != self.rhs.rows() {
            return Err(Error::DimensionMismatch(format!(
                "input operator acts on {} samples but the right-hand side has {} rows",
                self.input_op.dim(),
                self.rhs.rows()
            )));
        }
        if self.output_kernel.dim() != self.rhs.cols() {
            return Err(Error::DimensionMismatch(format!(
                "output kernel is {0}x{0} but the right-hand side has {1} columns",
                self.output_kernel.dim(),
                self.rhs.cols()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, c: &DenseMatrix) -> DenseMatrix {
        let mut out = self.input_op.apply(&self.output_kernel.right_mul_dense(c));
        out.axpy(self.sigma, c);
        out
    }

    fn residual_norm(&self, c: &DenseMatrix) -> f64 {
        self.rhs.sub(&self.apply(c)).frob_norm()
    }
}

/// Conjugate gradient on the matrix-form normal operator. Stops when the
/// residual drops below `rel_tol · ‖Y‖_F` or after `max_iter` steps.
pub fn cg_sylvester_solve<K: KernelApply>(
    problem: &SylvesterProblem<'_, K>,
    c0: Option<&DenseMatrix>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(DenseMatrix, CgReport)> {
    cg_sylvester_solve_observed(problem, c0, rel_tol, max_iter, |_, _| {})
}

/// Same as [`cg_sylvester_solve`] but invokes `observe(k, C_k)` at the
/// starting point (k = 0) and after every accepted step.
pub fn cg_sylvester_solve_observed<K: KernelApply>(
    problem: &SylvesterProblem<'_, K>,
    c0: Option<&DenseMatrix>,
    rel_tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(usize, &DenseMatrix),
) -> Result<(DenseMatrix, CgReport)> {
    problem.validate()?;
    if !(rel_tol.is_finite() && rel_tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "relative tolerance must be positive, got {rel_tol}"
        )));
    }
    let (l, n) = (problem.rhs.rows(), problem.rhs.cols());
    let mut c = match c0 {
        Some(start) => {
            if start.rows() != l || start.cols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "warm start is {}x{}, expected {l}x{n}",
                    start.rows(),
                    start.cols()
                )));
            }
            start.clone()
        }
        None => DenseMatrix::zeros(l, n),
    };
    let threshold = rel_tol * problem.rhs.frob_norm().max(f64::MIN_POSITIVE);

    observe(0, &c);
    let mut r = problem.rhs.sub(&problem.apply(&c));
    let mut p = r.clone();
    let mut rs = r.frob_dot(&r);
    let mut iterations = 0;

    while iterations < max_iter && rs.sqrt() > threshold {
        let ap = problem.apply(&p);
        let curvature = p.frob_dot(&ap);
        if !(curvature.is_finite() && curvature > 0.0) {
            return Err(Error::NumericalFailure(format!(
                "conjugate gradient curvature {curvature} is not positive; \
                 the system operator is not positive definite"
            )));
        }
        let alpha = rs / curvature;
        c.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rs_next = r.frob_dot(&r);
        if !rs_next.is_finite() {
            return Err(Error::NumericalFailure(
                "conjugate gradient residual diverged".into(),
            ));
        }
        let beta = rs_next / rs;
        let mut p_next = r.clone();
        p_next.axpy(beta, &p);
        p = p_next;
        rs = rs_next;
        iterations += 1;
        observe(iterations, &c);
    }

    // Recurrence residuals drift from the true residual; report the
    // recomputed one and judge convergence against it.
    let residual = problem.residual_norm(&c);
    let report = CgReport {
        iterations,
        residual,
        converged: residual <= threshold * (1.0 + 1e-6),
    };
    Ok((c, report))
}

/// Direct solution through eigendecompositions of both kernels:
/// with `K = T diag(σ_i) Tᵀ` and `L = S diag(ρ_j) Sᵀ`, the solution is
/// `C = T X̃ Sᵀ` where `X̃_ij = (Tᵀ Y S)_ij / (σ_i ρ_j + σ)`.
///
/// Exact up to the eigendecomposition accuracy; used as the reference
/// the iterative path is checked against, and as the cheap route when a
/// factorization of `K` is already available.
pub fn eig_sylvester_solve(
    k_gram: &SymmetricMatrix,
    output_kernel: &SymmetricMatrix,
    sigma: f64,
    rhs: &DenseMatrix,
) -> Result<DenseMatrix> {
    let problem = SylvesterProblem {
        input_op: k_gram,
        output_kernel,
        sigma,
        rhs,
    };
    problem.validate()?;
    let ek = sym_eigendecomposition(k_gram)?;
    let el = sym_eigendecomposition(output_kernel)?;
    let t = &ek.vectors;
    let s = &el.vectors;
    let projected = t.t_mul(&rhs.mul(s));
    let mut scaled = projected;
    for i in 0..scaled.rows() {
        for j in 0..scaled.cols() {
            let denom = ek.values[i] * el.values[j] + sigma;
            if !(denom.is_finite() && denom > 0.0) {
                return Err(Error::NumericalFailure(format!(
                    "eigenvalue product {:.3e} · {:.3e} + {sigma:.3e} is not positive; \
                     kernels must be positive semidefinite",
                    ek.values[i], el.values[j]
                )));
            }
            scaled[(i, j)] /= denom;
        }
    }
    Ok(t.mul(&scaled.mul(&s.transpose())))
}
