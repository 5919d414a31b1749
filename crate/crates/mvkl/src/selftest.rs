//! Shippable oracle-equivalence suites behind the `selftest` subcommand.
//!
//! Each suite checks a closed-form or specialized solver against an
//! independent route to the same quantity: the conjugate-gradient
//! Sylvester solver against the eigendecomposition solver, the
//! closed-form weight update against a numeric projected-gradient
//! minimizer, and the Frank–Wolfe exact line search against a dense
//! grid. Everything is seeded, so output is identical across runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::driver::{eta_update_lp, lp_dual_exponent};
use crate::kernels::{KernelDictionary, ScalarKernelSpec, WeightedKernel};
use crate::matrix::{DenseMatrix, SymmetricMatrix};
use crate::output_kernel::SpectahedronProblem;
use crate::sylvester::{cg_sylvester_solve, eig_sylvester_solve, SylvesterProblem};

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Runs all suites. Deterministic for a fixed seed.
pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    vec![
        suite_cg_vs_eigendecomposition(seed),
        suite_eta_vs_numeric_minimizer(seed ^ 0x9e37_79b9),
        suite_line_search_vs_grid(seed ^ 0x7f4a_7c15),
    ]
}

fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DenseMatrix::new(rows, cols, data).expect("finite random data")
}

fn random_psd(rng: &mut ChaCha8Rng, dim: usize) -> SymmetricMatrix {
    let z = random_dense(rng, dim, dim);
    SymmetricMatrix::from_fn(dim, |i, j| {
        (0..dim).map(|r| z[(i, r)] * z[(j, r)]).sum::<f64>() / dim as f64
    })
    .expect("finite product")
}

/// CG on the shifted Sylvester system against the direct
/// eigendecomposition solver, on seeded weighted-dictionary instances.
pub fn suite_cg_vs_eigendecomposition(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for trial in 0..5 {
        let l = 16 + 2 * trial;
        let n = 3;
        let x = random_dense(&mut rng, l, 2);
        let specs: Vec<ScalarKernelSpec> = (0..3)
            .map(|j| ScalarKernelSpec::gaussian(0.6 + 0.3 * j as f64, vec![]))
            .collect();
        let dict = KernelDictionary::build(specs, &x).expect("gaussian grams are valid");
        let eta = vec![0.5, 0.3, 0.2];
        let wk = WeightedKernel::new(&dict, &eta).expect("weights match dictionary");
        let l_out = random_psd(&mut rng, n);
        let rhs = random_dense(&mut rng, l, n);
        let sigma = 0.01 * l as f64;
        let problem = SylvesterProblem {
            input_op: &wk,
            output_kernel: &l_out,
            sigma,
            rhs: &rhs,
        };
        let (cg, _) = match cg_sylvester_solve(&problem, None, 1e-12, 4000) {
            Ok(v) => v,
            Err(e) => {
                return SuiteResult {
                    name: "cg-vs-eigendecomposition",
                    passed: false,
                    detail: format!("CG failed on trial {trial}: {e}"),
                }
            }
        };
        let direct = match eig_sylvester_solve(&wk.weighted_gram(), &l_out, sigma, &rhs) {
            Ok(v) => v,
            Err(e) => {
                return SuiteResult {
                    name: "cg-vs-eigendecomposition",
                    passed: false,
                    detail: format!("eigendecomposition solve failed on trial {trial}: {e}"),
                }
            }
        };
        let rel = cg.sub(&direct).frob_norm() / direct.frob_norm().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    SuiteResult {
        name: "cg-vs-eigendecomposition",
        passed: worst < 1e-8,
        detail: format!("max relative gap {worst:.3e} over 5 instances (limit 1e-8)"),
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let candidate = (cum - 1.0) / (i + 1) as f64;
        if ui - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Numeric minimizer of `Σ α_j²/η_j` over the weight constraint set,
/// independent of the closed form: substitute `β_j = η_j^q`, which maps
/// the constraint to the probability simplex, and run projected
/// gradient with backtracking on `h(β) = Σ α_j² β_j^{-1/q}`. For p = 2
/// the constraint is the unit box and the projection clamps instead.
pub fn numeric_lp_minimizer(alpha: &[f64], p: f64, max_iter: usize) -> Vec<f64> {
    let m = alpha.len();
    let active: Vec<usize> = (0..m).filter(|&j| alpha[j] > 0.0).collect();
    let mut eta = vec![0.0; m];
    if active.is_empty() {
        return eta;
    }
    let a: Vec<f64> = active.iter().map(|&j| alpha[j] * alpha[j]).collect();
    let k = active.len();

    match lp_dual_exponent(p) {
        None => {
            // box constraint 0 ≤ η ≤ 1; objective decreasing in each η
            let mut b = vec![0.5; k];
            for _ in 0..max_iter {
                let mut moved = 0.0f64;
                for i in 0..k {
                    let grad = -a[i] / (b[i] * b[i]);
                    let next = (b[i] - 0.5 * grad).clamp(1e-12, 1.0);
                    moved = moved.max((next - b[i]).abs());
                    b[i] = next;
                }
                if moved < 1e-14 {
                    break;
                }
            }
            for (i, &j) in active.iter().enumerate() {
                eta[j] = b[i];
            }
            eta
        }
        Some(q) => {
            let h = |b: &[f64]| -> f64 {
                b.iter()
                    .zip(&a)
                    .map(|(&bi, &ai)| {
                        if bi <= 0.0 {
                            f64::INFINITY
                        } else {
                            ai * bi.powf(-1.0 / q)
                        }
                    })
                    .sum()
            };
            let mut b = vec![1.0 / k as f64; k];
            let mut fb = h(&b);
            let mut step = 1.0;
            for _ in 0..max_iter {
                let grad: Vec<f64> = b
                    .iter()
                    .zip(&a)
                    .map(|(&bi, &ai)| -(ai / q) * bi.powf(-1.0 / q - 1.0))
                    .collect();
                let mut improved = false;
                for _ in 0..60 {
                    let trial: Vec<f64> = b
                        .iter()
                        .zip(&grad)
                        .map(|(&bi, &gi)| bi - step * gi)
                        .collect();
                    let proj = project_simplex(&trial);
                    let fp = h(&proj);
                    if fp < fb {
                        let shift: f64 = proj
                            .iter()
                            .zip(&b)
                            .map(|(&x, &y)| (x - y).abs())
                            .fold(0.0, f64::max);
                        b = proj;
                        fb = fp;
                        improved = true;
                        step *= 1.3;
                        if shift < 1e-15 {
                            return finish_lp(&active, &b, q, m);
                        }
                        break;
                    }
                    step *= 0.5;
                }
                if !improved {
                    break;
                }
            }
            finish_lp(&active, &b, q, m)
        }
    }
}

fn finish_lp(active: &[usize], b: &[f64], q: f64, m: usize) -> Vec<f64> {
    let mut eta = vec![0.0; m];
    for (i, &j) in active.iter().enumerate() {
        eta[j] = b[i].powf(1.0 / q);
    }
    eta
}

/// Closed-form weight update against the projected-gradient minimizer
/// across the exponent range.
pub fn suite_eta_vs_numeric_minimizer(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &p in &[1.0, 1.25, 1.5, 1.7, 2.0] {
        for _ in 0..10 {
            let alpha: Vec<f64> = (0..6)
                .map(|j| {
                    if j == 2 {
                        0.0
                    } else {
                        rng.gen_range(0.05..3.0)
                    }
                })
                .collect();
            let (closed, dead) = match eta_update_lp(&alpha, p) {
                Ok(v) => v,
                Err(e) => {
                    return SuiteResult {
                        name: "eta-vs-numeric-minimizer",
                        passed: false,
                        detail: format!("closed form failed: {e}"),
                    }
                }
            };
            if dead {
                continue;
            }
            let numeric = numeric_lp_minimizer(&alpha, p, 20_000);
            for (c, n) in closed.iter().zip(&numeric) {
                worst = worst.max((c - n).abs());
            }
        }
    }
    SuiteResult {
        name: "eta-vs-numeric-minimizer",
        passed: worst < 1e-6,
        detail: format!("max componentwise gap {worst:.3e} over 50 draws (limit 1e-6)"),
    }
}

/// Exact Frank–Wolfe line search against a dense 1001-point grid over
/// the segment, on seeded quadratic instances.
pub fn suite_line_search_vs_grid(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for trial in 0..5 {
        let (l_samples, n) = (10, 4);
        let a = random_dense(&mut rng, l_samples, n);
        let y = random_dense(&mut rng, l_samples, n);
        let b = random_dense(&mut rng, n, n);
        let tau = 2.0;
        let problem = match SpectahedronProblem::new(a, &y, &b, 0.05, tau) {
            Ok(v) => v,
            Err(e) => {
                return SuiteResult {
                    name: "line-search-vs-grid",
                    passed: false,
                    detail: format!("problem construction failed on trial {trial}: {e}"),
                }
            }
        };
        let l0 = {
            let mut m = random_psd(&mut rng, n);
            let tr = m.trace();
            m.scale(0.8 * tau / tr.max(f64::MIN_POSITIVE));
            m
        };
        // direction toward a feasible vertex, as Frank–Wolfe would take
        let v = random_dense(&mut rng, n, 1);
        let norm: f64 = v.col(0).iter().map(|x| x * x).sum::<f64>().sqrt();
        let s = SymmetricMatrix::from_fn(n, |i, j| tau * v[(i, 0)] * v[(j, 0)] / (norm * norm))
            .expect("rank-one vertex");
        let mut p = s.clone();
        p.add_scaled(-1.0, &l0);

        let alpha = problem.exact_line_search(&l0, &p);
        let g_alpha = {
            let mut l = l0.clone();
            l.add_scaled(alpha, &p);
            problem.objective_g(&l)
        };
        let mut grid_best = f64::INFINITY;
        for k in 0..=1000 {
            let t = k as f64 / 1000.0;
            let mut l = l0.clone();
            l.add_scaled(t, &p);
            grid_best = grid_best.min(problem.objective_g(&l));
        }
        let gap = (g_alpha - grid_best).max(0.0) / grid_best.abs().max(1.0);
        worst = worst.max(gap);
    }
    SuiteResult {
        name: "line-search-vs-grid",
        passed: worst < 1e-10,
        detail: format!("max relative excess {worst:.3e} over 5 instances (limit 1e-10)"),
    }
}
