//! Alternating block minimization of the joint objective
//!
//! ```text
//! F(C, η, L) = (1/l)·‖K_η C L − Y‖²_F + λ·tr(Cᵀ K_η C L) + λ·ω(η)
//! ```
//!
//! over coefficients `C`, kernel weights `η ≥ 0`, and the output kernel
//! `L` in the spectahedron. Each block has an exact or guarded solver:
//! `C` by conjugate gradient on the shifted Sylvester system, `η` by the
//! regularizer's closed-form minimizer, `L` by Frank–Wolfe. Every block
//! update is accepted only if the recomputed objective did not increase,
//! so the recorded trace is nonincreasing by construction.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{KernelDictionary, ScalarKernelSpec, WeightedKernel};
use crate::matrix::{
    min_eigenvalue, sym_eigendecomposition, DenseMatrix, EigenDecomposition, SymmetricMatrix,
};
use crate::output_kernel::{solve_output_kernel, SpectahedronProblem};
use crate::sylvester::{cg_sylvester_solve, SylvesterProblem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Regularizer {
    /// Squared ℓp norm of the component functions, p ∈ [1, 2]. The
    /// auxiliary weight constraint is Σ η^q ≤ 1 with q = p/(2−p)
    /// (max η ≤ 1 at p = 2, where q is infinite).
    LpSquared { p: f64 },
    /// Elastic net, μ ∈ [0, 1]: weight update η_j = α_j/(1−μ+μα_j).
    /// μ = 0 is a plain lasso-like sum penalty, μ = 1 a box constraint.
    ElasticNet { mu: f64 },
}

impl Regularizer {
    fn validate(&self) -> Result<()> {
        match *self {
            Regularizer::LpSquared { p } => {
                if !(p.is_finite() && (1.0..=2.0).contains(&p)) {
                    return Err(Error::InvalidInput(format!(
                        "ℓp exponent must lie in [1, 2], got {p}"
                    )));
                }
            }
            Regularizer::ElasticNet { mu } => {
                if !(mu.is_finite() && (0.0..=1.0).contains(&mu)) {
                    return Err(Error::InvalidInput(format!(
                        "elastic-net mixing must lie in [0, 1], got {mu}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `q = p/(2−p)`; `None` encodes q = ∞ (p = 2).
pub fn lp_dual_exponent(p: f64) -> Option<f64> {
    if p >= 2.0 {
        None
    } else {
        Some(p / (2.0 - p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockTag {
    #[serde(rename = "C")]
    C,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "L")]
    L,
}

impl std::fmt::Display for BlockTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BlockTag::C => "C",
            BlockTag::Eta => "eta",
            BlockTag::L => "L",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub lambda: f64,
    pub tau: f64,
    pub regularizer: Regularizer,
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
    pub fw_tol: f64,
    pub fw_max_iter: usize,
    pub outer_max_iter: usize,
    pub outer_rel_tol: f64,
    /// Blocks run per outer sweep, in order; omitting one freezes it.
    pub blocks: Vec<BlockTag>,
    /// Overrides the uniform feasible starting weights.
    pub init_eta: Option<Vec<f64>>,
    /// Overrides the (τ/n)·I starting output kernel; symmetrized.
    pub init_l: Option<DenseMatrix>,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda: 1e-3,
            tau: 1.0,
            regularizer: Regularizer::LpSquared { p: 1.0 },
            cg_rel_tol: 1e-8,
            cg_max_iter: 500,
            fw_tol: 1e-7,
            fw_max_iter: 1000,
            outer_max_iter: 50,
            outer_rel_tol: 1e-6,
            blocks: vec![BlockTag::C, BlockTag::Eta, BlockTag::L],
            init_eta: None,
            init_l: None,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        self.regularizer.validate()?;
        for (name, v) in [
            ("lambda", self.lambda),
            ("tau", self.tau),
            ("cg_rel_tol", self.cg_rel_tol),
            ("fw_tol", self.fw_tol),
            ("outer_rel_tol", self.outer_rel_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.blocks.is_empty() {
            return Err(Error::InvalidInput("no blocks enabled".into()));
        }
        if self.outer_max_iter == 0 || self.cg_max_iter == 0 || self.fw_max_iter == 0 {
            return Err(Error::InvalidInput(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer_iter: usize,
    /// "init", "C", "eta", or "L"; callers may prefix it, e.g. per node.
    pub block: String,
    pub objective: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Every kernel weight hit zero, so the model can no longer change.
    DeadModel,
}

#[derive(Clone, Debug)]
pub struct ModelState {
    pub c: DenseMatrix,
    pub l_out: SymmetricMatrix,
    pub eta: Vec<f64>,
    pub objective_trace: Vec<TraceRecord>,
    pub converged: bool,
    pub termination: Termination,
}

impl ModelState {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace
            .last()
            .map(|r| r.objective)
            .unwrap_or(f64::NAN)
    }
}

/// Component norms `α_j = η̂_j · √(max(0, tr(Cᵀ K_j C L)))`; the trace
/// is clamped against negative round-off.
pub fn component_alphas(
    c: &DenseMatrix,
    l_out: &SymmetricMatrix,
    dict: &KernelDictionary,
    eta_prev: &[f64],
) -> Result<Vec<f64>> {
    if eta_prev.len() != dict.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} previous weights for {} kernels",
            eta_prev.len(),
            dict.len()
        )));
    }
    if c.rows() != dict.sample_len() || c.cols() != l_out.dim() {
        return Err(Error::DimensionMismatch(format!(
            "coefficients are {}x{}, expected {}x{}",
            c.rows(),
            c.cols(),
            dict.sample_len(),
            l_out.dim()
        )));
    }
    if let Some(&bad) = eta_prev.iter().find(|&&e| !(e.is_finite() && e >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "previous weights must be finite and nonnegative, got {bad}"
        )));
    }
    let cl = l_out.right_mul_dense(c);
    Ok(eta_prev
        .iter()
        .enumerate()
        .map(|(j, &w)| w * c.frob_dot(&dict.gram(j).mul_dense(&cl)).max(0.0).sqrt())
        .collect())
}

/// Exact minimizer of `Σ_j α_j²/η_j` over `{η ≥ 0, Σ η^q ≤ 1}` with
/// `q = p/(2−p)`:
///
/// ```text
/// η_j = α_j^{2/(q+1)} / (Σ_k α_k^{2q/(q+1)})^{1/q}
/// ```
///
/// and for p = 2 (box constraint `max η ≤ 1`) the minimizer saturates:
/// `η_j = 1` wherever `α_j > 0`. Zero components stay zero. The second
/// return value flags a dead model (all α zero → all weights zero).
pub fn eta_update_lp(alpha: &[f64], p: f64) -> Result<(Vec<f64>, bool)> {
    Regularizer::LpSquared { p }.validate()?;
    validate_alphas(alpha)?;
    let max = alpha.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return Ok((vec![0.0; alpha.len()], true));
    }
    let eta = match lp_dual_exponent(p) {
        None => alpha
            .iter()
            .map(|&a| if a > 0.0 { 1.0 } else { 0.0 })
            .collect(),
        Some(q) => {
            // normalize by the largest α first: the minimizer is scale
            // invariant and the powers stay in [0, 1]
            let e_num = 2.0 / (q + 1.0);
            let e_sum = 2.0 * q / (q + 1.0);
            let denom: f64 = alpha.iter().map(|&a| (a / max).powf(e_sum)).sum();
            let denom = denom.powf(1.0 / q);
            alpha.iter().map(|&a| (a / max).powf(e_num) / denom).collect()
        }
    };
    Ok((eta, false))
}

/// Componentwise elastic-net update `η_j = α_j/(1−μ+μα_j)`; at μ = 1 a
/// zero α_j takes its limit value 0.
pub fn eta_update_elastic(alpha: &[f64], mu: f64) -> Result<(Vec<f64>, bool)> {
    Regularizer::ElasticNet { mu }.validate()?;
    validate_alphas(alpha)?;
    let eta: Vec<f64> = alpha
        .iter()
        .map(|&a| if a == 0.0 { 0.0 } else { a / (1.0 - mu + mu * a) })
        .collect();
    let dead = alpha.iter().all(|&a| a == 0.0);
    Ok((eta, dead))
}

fn validate_alphas(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::InvalidInput("empty component-norm list".into()));
    }
    if let Some(&bad) = alpha.iter().find(|&&a| !(a.is_finite() && a >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "component norms must be finite and nonnegative, got {bad}"
        )));
    }
    Ok(())
}

/// The auxiliary penalty `ω(η)` entering the objective as `λ·ω(η)`.
///
/// For squared-ℓp it is the indicator of the constraint set (0 inside,
/// +∞ outside, with 1e-10 feasibility slack). For the elastic net it is
/// the function `Σ_j (1−μ)²η_j/(1−μη_j)` whose quadratic variational
/// representation reproduces the componentwise update above; at μ = 1
/// this degenerates to the indicator of `max η ≤ 1`.
pub fn auxiliary_penalty(eta: &[f64], regularizer: Regularizer) -> f64 {
    const SLACK: f64 = 1e-10;
    if eta.iter().any(|&e| !(e.is_finite() && e >= 0.0)) {
        return f64::INFINITY;
    }
    match regularizer {
        Regularizer::LpSquared { p } => match lp_dual_exponent(p) {
            None => {
                let max = eta.iter().cloned().fold(0.0f64, f64::max);
                if max <= 1.0 + SLACK {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Some(q) => {
                let sum: f64 = eta.iter().map(|&e| e.powf(q)).sum();
                if sum <= 1.0 + SLACK {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        },
        Regularizer::ElasticNet { mu } => {
            if mu >= 1.0 {
                let max = eta.iter().cloned().fold(0.0f64, f64::max);
                return if max <= 1.0 + SLACK { 0.0 } else { f64::INFINITY };
            }
            let shrink = (1.0 - mu) * (1.0 - mu);
            eta.iter()
                .map(|&e| {
                    let denom = 1.0 - mu * e;
                    if denom <= 0.0 {
                        f64::INFINITY
                    } else {
                        shrink * e / denom
                    }
                })
                .sum()
        }
    }
}

/// Full objective `F(C, η, L)`. Infeasible weights yield `+∞`.
pub fn objective_value(
    c: &DenseMatrix,
    l_out: &SymmetricMatrix,
    eta: &[f64],
    y: &DenseMatrix,
    dict: &KernelDictionary,
    lambda: f64,
    regularizer: Regularizer,
) -> Result<f64> {
    let wk = WeightedKernel::new(dict, eta)?;
    if y.rows() != c.rows() || y.cols() != c.cols() || l_out.dim() != y.cols() {
        return Err(Error::DimensionMismatch(format!(
            "coefficients {}x{}, targets {}x{}, output kernel {2}x{2}",
            c.rows(),
            c.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let penalty = auxiliary_penalty(eta, regularizer);
    if penalty.is_infinite() {
        log::warn!("weight vector is outside the regularizer's feasible set");
        return Ok(f64::INFINITY);
    }
    use crate::kernels::KernelApply;
    let fitted = wk.apply(&l_out.right_mul_dense(c));
    let misfit = fitted.sub(y);
    let l_samples = y.rows() as f64;
    Ok(misfit.frob_dot(&misfit) / l_samples
        + lambda * c.frob_dot(&fitted)
        + lambda * penalty)
}

fn uniform_eta(m: usize, regularizer: Regularizer) -> Vec<f64> {
    let w = match regularizer {
        Regularizer::LpSquared { p } => match lp_dual_exponent(p) {
            Some(q) => (m as f64).powf(-1.0 / q),
            None => 1.0,
        },
        Regularizer::ElasticNet { .. } => 1.0,
    };
    vec![w; m]
}

/// `K⁺ M` through an eigendecomposition, dropping eigenvalues below
/// `1e-12 · λ_max`.
fn pinv_apply(eig: &EigenDecomposition, m: &DenseMatrix) -> DenseMatrix {
    let lead = eig.values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let cutoff = 1e-12 * lead.max(f64::MIN_POSITIVE);
    let mut w = eig.vectors.t_mul(m);
    for i in 0..w.rows() {
        let s = eig.values[i];
        let f = if s > cutoff { 1.0 / s } else { 0.0 };
        for v in w.row_mut(i) {
            *v *= f;
        }
    }
    eig.vectors.mul(&w)
}

struct FitContext<'a> {
    y: &'a DenseMatrix,
    dict: &'a KernelDictionary,
    hp: &'a Hyperparams,
    sigma: f64,
    started: Instant,
}

impl FitContext<'_> {
    fn objective(&self, c: &DenseMatrix, l_out: &SymmetricMatrix, eta: &[f64]) -> Result<f64> {
        objective_value(
            c,
            l_out,
            eta,
            self.y,
            self.dict,
            self.hp.lambda,
            self.hp.regularizer,
        )
    }

    fn record(&self, trace: &mut Vec<TraceRecord>, outer: usize, block: &str, objective: f64) {
        trace.push(TraceRecord {
            outer_iter: outer,
            block: block.to_string(),
            objective,
            elapsed_ms: self.started.elapsed().as_secs_f64() * 1e3,
        });
    }
}

fn accepts(new: f64, old: f64) -> bool {
    new <= old * (1.0 + 1e-12) + f64::MIN_POSITIVE
}

/// Block coordinate descent on `F`. Starts from `C = 0`, uniform
/// feasible weights, and `L = (τ/n)·I` unless overridden; records the
/// objective after initialization and after every block update.
pub fn fit(y: &DenseMatrix, dict: &KernelDictionary, hp: &Hyperparams) -> Result<ModelState> {
    hp.validate()?;
    let l_samples = y.rows();
    let n = y.cols();
    if l_samples == 0 || n == 0 {
        return Err(Error::InsufficientData("empty target matrix".into()));
    }
    if dict.sample_len() != l_samples {
        return Err(Error::DimensionMismatch(format!(
            "dictionary Grams are {0}x{0} but the targets have {1} rows",
            dict.sample_len(),
            l_samples
        )));
    }
    let m = dict.len();

    let mut eta = match &hp.init_eta {
        Some(e) => {
            if e.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "{} starting weights for {m} kernels",
                    e.len()
                )));
            }
            if auxiliary_penalty(e, hp.regularizer).is_infinite() {
                return Err(Error::InvalidInput(
                    "starting weights are outside the regularizer's feasible set".into(),
                ));
            }
            e.clone()
        }
        None => uniform_eta(m, hp.regularizer),
    };
    let mut l_out = match &hp.init_l {
        Some(dense) => {
            let sym = SymmetricMatrix::symmetrize(dense)?;
            if sym.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "starting output kernel is {0}x{0}, expected {n}x{n}",
                    sym.dim()
                )));
            }
            if sym.trace() > hp.tau * (1.0 + 1e-9)
                || min_eigenvalue(&sym)? < -1e-8 * sym.frob_norm().max(1.0)
            {
                return Err(Error::InvalidInput(
                    "starting output kernel is outside the trace-bounded PSD set".into(),
                ));
            }
            sym
        }
        None => SymmetricMatrix::scaled_identity(n, hp.tau / n as f64),
    };
    let mut c = DenseMatrix::zeros(l_samples, n);

    let ctx = FitContext {
        y,
        dict,
        hp,
        sigma: hp.lambda * l_samples as f64,
        started: Instant::now(),
    };
    let mut trace = Vec::new();
    let mut objective = ctx.objective(&c, &l_out, &eta)?;
    if !objective.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "starting objective is {objective}"
        )));
    }
    ctx.record(&mut trace, 0, "init", objective);

    let mut termination = Termination::MaxIterations;
    'outer: for outer in 1..=hp.outer_max_iter {
        let sweep_start = objective;
        for &block in &hp.blocks {
            match block {
                BlockTag::C => {
                    let (c_new, f_new) = c_block(&ctx, &c, &l_out, &eta, objective)?;
                    if accepts(f_new, objective) {
                        c = c_new;
                        objective = f_new;
                    }
                }
                BlockTag::Eta => {
                    match eta_block(&ctx, &c, &l_out, &eta, objective)? {
                        EtaOutcome::Dead => {
                            ctx.record(&mut trace, outer, "eta", objective);
                            log::warn!(
                                "every kernel weight reached zero; stopping with a dead model"
                            );
                            termination = Termination::DeadModel;
                            break 'outer;
                        }
                        EtaOutcome::Updated {
                            eta: e,
                            c: c_new,
                            objective: f_new,
                        } => {
                            eta = e;
                            if let Some(cc) = c_new {
                                c = cc;
                            }
                            objective = f_new;
                        }
                        EtaOutcome::Kept => {}
                    }
                }
                BlockTag::L => {
                    let (l_new, f_new) = l_block(&ctx, &c, &l_out, &eta)?;
                    if accepts(f_new, objective) {
                        l_out = l_new;
                        objective = f_new;
                    }
                }
            }
            if !objective.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "objective became {objective} during outer sweep {outer}"
                )));
            }
            ctx.record(&mut trace, outer, &block.to_string(), objective);
        }
        let decrease = (sweep_start - objective) / sweep_start.abs().max(f64::MIN_POSITIVE);
        if decrease < hp.outer_rel_tol {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(ModelState {
        c,
        l_out,
        eta,
        objective_trace: trace,
        converged: termination == Termination::Converged,
        termination,
    })
}

/// Conjugate gradient on `K_η C L + σC = Y` from a warm start. CG
/// minimizes the system's own quadratic, not `F`, so an early stop can
/// raise `F`; on an increase the solve is resumed with a tighter
/// tolerance a few times before giving up and keeping the old iterate.
fn c_block(
    ctx: &FitContext<'_>,
    c: &DenseMatrix,
    l_out: &SymmetricMatrix,
    eta: &[f64],
    objective: f64,
) -> Result<(DenseMatrix, f64)> {
    let wk = WeightedKernel::new(ctx.dict, eta)?;
    let problem = SylvesterProblem {
        input_op: &wk,
        output_kernel: l_out,
        sigma: ctx.sigma,
        rhs: ctx.y,
    };
    let mut tol = ctx.hp.cg_rel_tol;
    let (mut c_new, _) = cg_sylvester_solve(&problem, Some(c), tol, ctx.hp.cg_max_iter)?;
    let mut f_new = ctx.objective(&c_new, l_out, eta)?;
    for _ in 0..3 {
        if accepts(f_new, objective) {
            break;
        }
        tol *= 1e-2;
        let (resumed, _) = cg_sylvester_solve(&problem, Some(&c_new), tol, ctx.hp.cg_max_iter)?;
        c_new = resumed;
        f_new = ctx.objective(&c_new, l_out, eta)?;
    }
    Ok((c_new, f_new))
}

enum EtaOutcome {
    Dead,
    Kept,
    Updated {
        eta: Vec<f64>,
        c: Option<DenseMatrix>,
        objective: f64,
    },
}

/// Closed-form weight update followed, when needed, by a
/// prediction-preserving re-expansion of the coefficients.
///
/// Swapping `η̂ → η̃` at fixed `C` changes the fitted values, so the raw
/// swap alone can raise `F`. Re-expanding `C̃ = K_η̃⁺ (K_η̂ C L) L⁺`
/// keeps the fitted values bitwise-identical in exact arithmetic (dead
/// kernels contribute nothing to `K_η̂ C L`, so the system is
/// consistent) and the minimal-norm representation realizes the
/// variational bound `tr(C̃ᵀK_η̃C̃L) ≤ Σ_j α_j²/η̃_j`, which is what the
/// closed-form update minimizes — hence `F` cannot increase. The cheap
/// raw swap is tried first; the re-expansion only runs when the swap
/// raises the objective.
fn eta_block(
    ctx: &FitContext<'_>,
    c: &DenseMatrix,
    l_out: &SymmetricMatrix,
    eta: &[f64],
    objective: f64,
) -> Result<EtaOutcome> {
    let alphas = component_alphas(c, l_out, ctx.dict, eta)?;
    let (eta_new, dead) = match ctx.hp.regularizer {
        Regularizer::LpSquared { p } => eta_update_lp(&alphas, p)?,
        Regularizer::ElasticNet { mu } => eta_update_elastic(&alphas, mu)?,
    };
    if dead {
        return Ok(EtaOutcome::Dead);
    }
    if eta_new == eta {
        return Ok(EtaOutcome::Kept);
    }

    let f_swap = ctx.objective(c, l_out, &eta_new)?;
    if accepts(f_swap, objective) {
        return Ok(EtaOutcome::Updated {
            eta: eta_new,
            c: None,
            objective: f_swap,
        });
    }

    use crate::kernels::KernelApply;
    let fitted = {
        let wk = WeightedKernel::new(ctx.dict, eta)?;
        wk.apply(&l_out.right_mul_dense(c))
    };
    let gram_new = WeightedKernel::new(ctx.dict, &eta_new)?.weighted_gram();
    let eig_k = sym_eigendecomposition(&gram_new)?;
    let eig_l = sym_eigendecomposition(l_out)?;
    // C̃ = K⁺ · M · L⁺ with M the old fitted values
    let ml_pinv = pinv_apply(&eig_l, &fitted.transpose()).transpose();
    let c_new = pinv_apply(&eig_k, &ml_pinv);
    let f_re = ctx.objective(&c_new, l_out, &eta_new)?;
    if accepts(f_re, objective) {
        Ok(EtaOutcome::Updated {
            eta: eta_new,
            c: Some(c_new),
            objective: f_re,
        })
    } else {
        log::debug!(
            "weight update rejected: swap {f_swap:.6e}, re-expansion {f_re:.6e}, \
             current {objective:.6e}"
        );
        Ok(EtaOutcome::Kept)
    }
}

fn l_block(
    ctx: &FitContext<'_>,
    c: &DenseMatrix,
    l_out: &SymmetricMatrix,
    eta: &[f64],
) -> Result<(SymmetricMatrix, f64)> {
    use crate::kernels::KernelApply;
    let a = WeightedKernel::new(ctx.dict, eta)?.apply(c);
    let b = c.t_mul(&a);
    let problem = SpectahedronProblem::new(a, ctx.y, &b, ctx.hp.lambda, ctx.hp.tau)?;
    let (l_new, _) =
        solve_output_kernel(&problem, Some(l_out), ctx.hp.fw_tol, ctx.hp.fw_max_iter)?;
    let f_new = ctx.objective(c, &l_new, eta)?;
    Ok((l_new, f_new))
}

/// Prediction at a new point: `y = L Cᵀ κ(x)` with `κ_i = k_η(x, x_i)`.
pub fn predict(
    state: &ModelState,
    dict: &KernelDictionary,
    x_train: &DenseMatrix,
    x_new: &[f64],
) -> Result<Vec<f64>> {
    if x_train.rows() != state.c.rows() {
        return Err(Error::DimensionMismatch(format!(
            "training sample has {} rows, coefficients have {}",
            x_train.rows(),
            state.c.rows()
        )));
    }
    let wk = WeightedKernel::new(dict, &state.eta)?;
    let kappa = wk.cross_row(x_train, x_new)?;
    let n = state.c.cols();
    let mut v = vec![0.0; n];
    for i in 0..state.c.rows() {
        let k = kappa[i];
        if k == 0.0 {
            continue;
        }
        for (a, vv) in v.iter_mut().enumerate() {
            *vv += k * state.c[(i, a)];
        }
    }
    Ok(state.l_out.matvec(&v))
}

pub fn predict_batch(
    state: &ModelState,
    dict: &KernelDictionary,
    x_train: &DenseMatrix,
    x_new: &DenseMatrix,
) -> Result<DenseMatrix> {
    let n = state.c.cols();
    let mut out = DenseMatrix::zeros(x_new.rows(), n);
    for i in 0..x_new.rows() {
        let y = predict(state, dict, x_train, x_new.row(i))?;
        for (j, v) in y.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Hypothesis-class radius (the generalization bound's own scale
    /// parameter, distinct from the ridge weight).
    pub norm_budget: f64,
    pub m: usize,
    /// Uniform bound on the scalar kernels' diagonal values.
    pub kappa: f64,
    pub tau: f64,
    pub l: usize,
    pub p: f64,
    /// Reserved for non-separable variants; unused by the separable forms.
    pub r: Option<usize>,
}

const ETA0: f64 = 23.0 / 22.0;

pub fn rademacher_part_a(norm_budget: f64, m: usize, kappa: f64, tau: f64, l: usize) -> f64 {
    norm_budget * m as f64 * (kappa * tau / l as f64).sqrt()
}

pub fn rademacher_part_b(
    norm_budget: f64,
    m: usize,
    q: f64,
    kappa: f64,
    tau: f64,
    l: usize,
) -> f64 {
    norm_budget * (m as f64).powf(1.0 / q) * (ETA0 * q * kappa * tau / l as f64).sqrt()
}

pub fn rademacher_part_c(norm_budget: f64, m: usize, kappa: f64, tau: f64, l: usize) -> f64 {
    if m <= 1 {
        norm_budget * (ETA0 * kappa * tau / l as f64).sqrt()
    } else {
        let log_term = (2.0 * (m as f64).ln()).ceil();
        norm_budget * (ETA0 * std::f64::consts::E * log_term * kappa * tau / l as f64).sqrt()
    }
}

/// Empirical Rademacher complexity bound for the ℓp-constrained
/// separable-kernel class. Dispatch: p = 1 uses the logarithmic form
/// (part C); p with an integer conjugate q = p/(p−1) uses part B; any
/// other p falls back to the dimension-linear part A.
pub fn rademacher_bound(inputs: &BoundInputs) -> Result<f64> {
    let BoundInputs {
        norm_budget,
        m,
        kappa,
        tau,
        l,
        p,
        r: _,
    } = *inputs;
    for (name, v) in [
        ("norm_budget", norm_budget),
        ("kappa", kappa),
        ("tau", tau),
        ("p", p),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidInput(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if m == 0 || l == 0 {
        return Err(Error::InvalidInput(
            "kernel count and sample count must be positive".into(),
        ));
    }
    if p < 1.0 {
        return Err(Error::InvalidInput(format!(
            "norm exponent must be at least 1, got {p}"
        )));
    }
    if p == 1.0 {
        return Ok(rademacher_part_c(norm_budget, m, kappa, tau, l));
    }
    let q = p / (p - 1.0);
    if (q - q.round()).abs() < 1e-9 && q.round() >= 1.0 {
        return Ok(rademacher_part_b(norm_budget, m, q.round(), kappa, tau, l));
    }
    Ok(rademacher_part_a(norm_budget, m, kappa, tau, l))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldKind {
    /// Consecutive blocks of rows — the right choice for time series.
    Contiguous,
    /// Seeded shuffle before splitting.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvPoint {
    pub lambda: f64,
    pub tau: f64,
    pub mean_rmse: f64,
}

/// Grid search over (λ, τ) with k-fold cross-validation on held-out
/// RMSE. Folds are refit from scratch (Grams included) and run in
/// parallel; results come back in grid order.
pub fn cross_validate(
    x: &DenseMatrix,
    y: &DenseMatrix,
    specs: &[ScalarKernelSpec],
    base: &Hyperparams,
    lambdas: &[f64],
    taus: &[f64],
    folds: usize,
    kind: FoldKind,
    seed: u64,
) -> Result<Vec<CvPoint>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rayon::prelude::*;

    if folds < 2 || x.rows() < folds {
        return Err(Error::InvalidInput(format!(
            "need at least 2 folds and one row per fold, got {folds} folds for {} rows",
            x.rows()
        )));
    }
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows vs {} target rows",
            x.rows(),
            y.rows()
        )));
    }
    let mut order: Vec<usize> = (0..x.rows()).collect();
    if kind == FoldKind::Random {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    let fold_of: Vec<usize> = (0..x.rows()).map(|i| i * folds / x.rows()).collect();

    let grid: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&la| taus.iter().map(move |&ta| (la, ta)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();

    let errors: Vec<Result<(usize, f64, usize)>> = jobs
        .par_iter()
        .map(|&(g, fold)| {
            let (lambda, tau) = grid[g];
            let train: Vec<usize> = order
                .iter()
                .enumerate()
                .filter(|&(pos, _)| fold_of[pos] != fold)
                .map(|(_, &row)| row)
                .collect();
            let test: Vec<usize> = order
                .iter()
                .enumerate()
                .filter(|&(pos, _)| fold_of[pos] == fold)
                .map(|(_, &row)| row)
                .collect();
            let x_train = x.select_rows(&train);
            let y_train = y.select_rows(&train);
            let dict = KernelDictionary::build(specs.to_vec(), &x_train)?;
            let hp = Hyperparams {
                lambda,
                tau,
                ..base.clone()
            };
            let state = fit(&y_train, &dict, &hp)?;
            let mut sq = 0.0;
            for &row in &test {
                let pred = predict(&state, &dict, &x_train, x.row(row))?;
                for (a, &p) in pred.iter().enumerate() {
                    let d = p - y[(row, a)];
                    sq += d * d;
                }
            }
            Ok((g, sq, test.len() * y.cols()))
        })
        .collect();

    let mut sums = vec![(0.0, 0usize); grid.len()];
    for e in errors {
        let (g, sq, count) = e?;
        sums[g].0 += sq;
        sums[g].1 += count;
    }
    Ok(grid
        .iter()
        .zip(sums)
        .map(|(&(lambda, tau), (sq, count))| CvPoint {
            lambda,
            tau,
            mean_rmse: (sq / count.max(1) as f64).sqrt(),
        })
        .collect())
}

/// Self-describing serialized model: everything needed to reload and
/// predict, plus a fingerprint tying it to the training design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub hyperparams: Hyperparams,
    pub kernel_specs: Vec<ScalarKernelSpec>,
    pub eta: Vec<f64>,
    pub l_out: DenseMatrix,
    pub c: DenseMatrix,
    pub x_train: DenseMatrix,
    pub target_names: Vec<String>,
    pub design_fingerprint: String,
    pub converged: bool,
    pub termination: Termination,
}

pub fn design_fingerprint(x: &DenseMatrix) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("{}x{}:", x.rows(), x.cols()).as_bytes());
    for v in x.data() {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

impl SavedModel {
    pub fn from_state(
        state: &ModelState,
        specs: &[ScalarKernelSpec],
        hp: &Hyperparams,
        x_train: &DenseMatrix,
        target_names: &[String],
    ) -> Self {
        SavedModel {
            hyperparams: hp.clone(),
            kernel_specs: specs.to_vec(),
            eta: state.eta.clone(),
            l_out: state.l_out.to_dense(),
            c: state.c.clone(),
            x_train: x_train.clone(),
            target_names: target_names.to_vec(),
            design_fingerprint: design_fingerprint(x_train),
            converged: state.converged,
            termination: state.termination,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(format!("model serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: SavedModel = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("model deserialization failed: {e}")))?;
        let expect = design_fingerprint(&model.x_train);
        if model.design_fingerprint != expect {
            return Err(Error::InvalidInput(
                "stored design fingerprint does not match the stored training matrix".into(),
            ));
        }
        Ok(model)
    }

    /// Rebuilds the dictionary and a minimal state for prediction.
    pub fn restore(&self) -> Result<(KernelDictionary, ModelState)> {
        let dict = KernelDictionary::build(self.kernel_specs.clone(), &self.x_train)?;
        let state = ModelState {
            c: self.c.clone(),
            l_out: SymmetricMatrix::symmetrize(&self.l_out)?,
            eta: self.eta.clone(),
            objective_trace: Vec::new(),
            converged: self.converged,
            termination: self.termination,
        };
        Ok((dict, state))
    }
}
