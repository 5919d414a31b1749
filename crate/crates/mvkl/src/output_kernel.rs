//! Frank–Wolfe minimization of the output-kernel block over the
//! spectahedron `{L ⪰ 0 : tr L ≤ τ}`.
//!
//! The block objective is
//!
//! ```text
//! g(L) = (1/l)·‖A L − Y‖²_F + λ·tr(sym(B) L)
//! ```
//!
//! with `A = K_η C` and `B = Cᵀ A` held fixed. The linear minimization
//! oracle over the spectahedron is rank one: `τ v vᵀ` for the smallest
//! eigenvector `v` of the gradient when that eigenvalue is negative,
//! and the zero matrix otherwise. Combined with exact line search the
//! iterates stay feasible and the objective never increases.

use crate::error::{Error, Result};
use crate::matrix::{extremal_eigenvector, min_eigenvalue, DenseMatrix, SymmetricMatrix};

pub struct SpectahedronProblem {
    lambda: f64,
    sym_b: SymmetricMatrix,
    tau: f64,
    samples: f64,
    // cached quadratic-form pieces so each iteration costs O(n³), not O(l n²)
    ata: SymmetricMatrix,
    aty: DenseMatrix,
    y_sq: f64,
}

#[derive(Clone, Debug)]
pub struct FwState {
    pub l: SymmetricMatrix,
    pub objective: f64,
    /// Duality gap measured at this iterate; infinite before the first
    /// gradient evaluation.
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct FwReport {
    pub iterations: usize,
    pub gap: f64,
    pub converged: bool,
}

impl SpectahedronProblem {
    /// `a` is the smoothed design `K_η C`, `y` the targets, `b` the raw
    /// (possibly asymmetric) trace factor `Cᵀ A`; it is symmetrized here.
    pub fn new(
        a: DenseMatrix,
        y: &DenseMatrix,
        b: &DenseMatrix,
        lambda: f64,
        tau: f64,
    ) -> Result<Self> {
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::InvalidInput("empty design matrix".into()));
        }
        if a.rows() != y.rows() || a.cols() != y.cols() {
            return Err(Error::DimensionMismatch(format!(
                "design is {}x{}, targets are {}x{}",
                a.rows(),
                a.cols(),
                y.rows(),
                y.cols()
            )));
        }
        if b.rows() != a.cols() || b.cols() != a.cols() {
            return Err(Error::DimensionMismatch(format!(
                "trace factor is {}x{}, expected {2}x{2}",
                b.rows(),
                b.cols(),
                a.cols()
            )));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "regularization weight must be nonnegative, got {lambda}"
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidInput(format!(
                "trace budget must be positive, got {tau}"
            )));
        }
        let n = a.cols();
        let ata = SymmetricMatrix::from_fn(n, |i, j| {
            (0..a.rows()).map(|r| a[(r, i)] * a[(r, j)]).sum()
        })?;
        let aty = a.t_mul(y);
        let y_sq = y.frob_dot(y);
        Ok(SpectahedronProblem {
            samples: a.rows() as f64,
            lambda,
            sym_b: SymmetricMatrix::symmetrize(b)?,
            tau,
            ata,
            aty,
            y_sq,
        })
    }

    pub fn dim(&self) -> usize {
        self.ata.dim()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `(1/l)‖AL − Y‖²_F + λ tr(sym(B) L)`, evaluated via the cached
    /// Gram pieces: `‖AL − Y‖² = ⟨L, AᵀA L⟩ − 2⟨L, AᵀY⟩ + ‖Y‖²`.
    pub fn objective_g(&self, l: &SymmetricMatrix) -> f64 {
        let ld = l.to_dense();
        let atal = self.ata.mul_dense(&ld);
        let fit = ld.frob_dot(&atal) - 2.0 * ld.frob_dot(&self.aty) + self.y_sq;
        fit / self.samples + self.lambda * self.sym_b.frob_dot(l)
    }

    /// Gradient restricted to symmetric matrices:
    /// `(1/l)(G + Gᵀ) + λ sym(B)` with `G = AᵀA L − AᵀY`.
    pub fn gradient_g(&self, l: &SymmetricMatrix) -> SymmetricMatrix {
        let (grad, _) = self.gradient_with_inner(l);
        grad
    }

    fn gradient_with_inner(&self, l: &SymmetricMatrix) -> (SymmetricMatrix, DenseMatrix) {
        let g = {
            let mut g = self.ata.mul_dense(&l.to_dense());
            g.axpy(-1.0, &self.aty);
            g
        };
        let grad = SymmetricMatrix::from_fn(self.dim(), |i, j| {
            (g[(i, j)] + g[(j, i)]) / self.samples + self.lambda * self.sym_b.get(i, j)
        })
        .expect("finite gradient entries");
        (grad, g)
    }

    /// Minimizer of `α ↦ g(L + αP)` over `[0, 1]`. The restriction is a
    /// quadratic with curvature `(2/l)‖AP‖²_F ≥ 0`; a vanishing
    /// curvature leaves a linear segment, solved by its endpoint.
    pub fn exact_line_search(&self, l: &SymmetricMatrix, p: &SymmetricMatrix) -> f64 {
        let (_, g) = self.gradient_with_inner(l);
        self.line_search_with_inner(&g, p)
    }

    fn line_search_with_inner(&self, g: &DenseMatrix, p: &SymmetricMatrix) -> f64 {
        let pd = p.to_dense();
        // slope of the restriction at α = 0 is (2/l)⟨P, G⟩ + λ⟨sym B, P⟩
        let num = -((2.0 / self.samples) * pd.frob_dot(g) + self.lambda * self.sym_b.frob_dot(p));
        let den = (2.0 / self.samples) * pd.frob_dot(&self.ata.mul_dense(&pd));
        if den <= 1e-14 * num.abs().max(1.0) {
            return if num > 0.0 { 1.0 } else { 0.0 };
        }
        (num / den).clamp(0.0, 1.0)
    }
}

/// Spectahedron linear minimization oracle: the feasible minimizer of
/// `S ↦ ⟨grad, S⟩` is `τ v vᵀ` (smallest eigenvector) when the smallest
/// eigenvalue is negative, else the zero matrix.
pub fn linear_minimizer(
    grad: &SymmetricMatrix,
    tau: f64,
    ev_tol: f64,
    max_matvecs: usize,
) -> Result<SymmetricMatrix> {
    let pair = extremal_eigenvector(grad, ev_tol, max_matvecs)?;
    if pair.value >= 0.0 {
        return Ok(SymmetricMatrix::zeros(grad.dim()));
    }
    let v = &pair.vector;
    SymmetricMatrix::from_fn(grad.dim(), |i, j| tau * v[i] * v[j])
}

/// Frank–Wolfe with exact line search. Stops when the duality gap
/// `⟨∇g(L), L − S⟩` falls below `fw_tol · max(1, |g(L)|)`.
pub fn solve_output_kernel(
    problem: &SpectahedronProblem,
    l0: Option<&SymmetricMatrix>,
    fw_tol: f64,
    max_iter: usize,
) -> Result<(SymmetricMatrix, FwReport)> {
    solve_output_kernel_observed(problem, l0, fw_tol, max_iter, |_| {})
}

/// Same as [`solve_output_kernel`] but invokes the observer at the
/// starting point and after every accepted step.
pub fn solve_output_kernel_observed(
    problem: &SpectahedronProblem,
    l0: Option<&SymmetricMatrix>,
    fw_tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(&FwState),
) -> Result<(SymmetricMatrix, FwReport)> {
    if !(fw_tol.is_finite() && fw_tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "duality-gap tolerance must be positive, got {fw_tol}"
        )));
    }
    let n = problem.dim();
    let mut l = match l0 {
        Some(start) => {
            if start.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "start iterate is {}x{}, expected {n}x{n}",
                    start.dim(),
                    start.dim()
                )));
            }
            if start.trace() > problem.tau * (1.0 + 1e-9) {
                return Err(Error::InvalidInput(format!(
                    "start iterate has trace {} above the budget {}",
                    start.trace(),
                    problem.tau
                )));
            }
            if min_eigenvalue(start)? < -1e-8 * start.frob_norm().max(1.0) {
                return Err(Error::InvalidInput(
                    "start iterate is not positive semidefinite".into(),
                ));
            }
            start.clone()
        }
        None => SymmetricMatrix::zeros(n),
    };

    let mut objective = problem.objective_g(&l);
    let mut gap = f64::INFINITY;
    let mut gap_estimate = objective.abs().max(1.0);
    let mut steps = 0usize;
    let mut converged = false;
    observe(&FwState {
        l: l.clone(),
        objective,
        gap,
        iterations: 0,
    });

    let ev_budget = (40 * n).max(256);
    for k in 1..=max_iter {
        let (grad, inner) = problem.gradient_with_inner(&l);
        // eigensolver accuracy tightens as 1/k², scaled by the last gap
        let ev_tol = (gap_estimate / (k * k) as f64).max(1e-10);
        let s = linear_minimizer(&grad, problem.tau, ev_tol, ev_budget)?;
        let mut p = s;
        p.add_scaled(-1.0, &l);
        gap = -grad.frob_dot(&p);
        if !gap.is_finite() || !objective.is_finite() {
            return Err(Error::NumericalFailure(
                "output-kernel objective or gap became non-finite".into(),
            ));
        }
        if gap <= fw_tol * objective.abs().max(1.0) {
            converged = true;
            break;
        }
        gap_estimate = gap;
        let alpha = problem.line_search_with_inner(&inner, &p);
        if alpha == 0.0 {
            // positive gap but no descent step: the approximate oracle
            // produced an ascent direction; stop rather than loop
            break;
        }
        l.add_scaled(alpha, &p);
        objective = problem.objective_g(&l);
        steps = k;
        observe(&FwState {
            l: l.clone(),
            objective,
            gap,
            iterations: k,
        });
    }

    Ok((
        l,
        FwReport {
            iterations: steps,
            gap,
            converged,
        },
    ))
}
