//! Acceptance suite: one test per criterion, each printing a single
//! PASS line (run with `--nocapture` to see them). Every numeric check
//! is against an independent oracle or a closed-form value, never
//! against the implementation's own output.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mvkl::driver::{
    eta_update_lp, fit, lp_dual_exponent, predict, rademacher_part_a, rademacher_part_c,
    BlockTag, Hyperparams, Regularizer,
};
use mvkl::granger::{infer_causal_graph, NodeKernelKind, TimeSeriesPanel};
use mvkl::kernels::{gram_matrix, KernelDictionary, ScalarKernelSpec, WeightedKernel};
use mvkl::matrix::{
    min_eigenvalue, psd_spectral_norm, sym_eigendecomposition, DenseMatrix, SymmetricMatrix,
};
use mvkl::output_kernel::{solve_output_kernel, solve_output_kernel_observed, SpectahedronProblem};
use mvkl::selftest::numeric_lp_minimizer;
use mvkl::sylvester::{cg_sylvester_solve, cg_sylvester_solve_observed, eig_sylvester_solve, SylvesterProblem};

fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

/// Random PSD matrix MᵀM rescaled to the requested trace.
fn random_psd_with_trace(rng: &mut ChaCha8Rng, dim: usize, trace: f64) -> SymmetricMatrix {
    let m = random_dense(rng, dim, dim, 1.0);
    let mtm = m.t_mul(&m);
    let raw = SymmetricMatrix::from_fn(dim, |i, j| (mtm[(i, j)] + mtm[(j, i)]) / 2.0).unwrap();
    let scale = trace / raw.trace();
    SymmetricMatrix::from_fn(dim, |i, j| raw.get(i, j) * scale).unwrap()
}

/// Solves `A z = y` for symmetric positive definite `A` by full
/// eigendecomposition — the test-side linear-solve oracle.
fn spd_solve(a: &SymmetricMatrix, y: &[f64]) -> Vec<f64> {
    let eig = sym_eigendecomposition(a).unwrap();
    let n = y.len();
    let v = &eig.vectors;
    let mut proj = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            proj[j] += v[(i, j)] * y[i];
        }
        proj[j] /= eig.values[j];
    }
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            out[i] += v[(i, j)] * proj[j];
        }
    }
    out
}

fn gaussian_dict(x: &DenseMatrix, bandwidths: &[f64]) -> (Vec<ScalarKernelSpec>, KernelDictionary) {
    let specs: Vec<ScalarKernelSpec> = bandwidths
        .iter()
        .map(|&b| ScalarKernelSpec::gaussian(b, vec![]))
        .collect();
    let dict = KernelDictionary::build(specs.clone(), x).unwrap();
    (specs, dict)
}

#[test]
fn criterion_01_sylvester_solvers_agree() {
    let start = Instant::now();
    let (l_samples, n, lambda) = (40, 8, 0.01);
    let sigma = lambda * l_samples as f64;
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + t);
        let x = random_dense(&mut rng, l_samples, 3, 1.5);
        let (_, dict) = gaussian_dict(&x, &[0.5, 0.9, 1.4, 2.2]);
        let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let eta: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let weighted = WeightedKernel::new(&dict, &eta).unwrap();
        let l_out = random_psd_with_trace(&mut rng, n, 1.5);
        let y = random_dense(&mut rng, l_samples, n, 1.0);

        // operator route: the weighted kernel is applied gram-by-gram
        let problem = SylvesterProblem {
            input_op: &weighted,
            output_kernel: &l_out,
            sigma,
            rhs: &y,
        };
        let (c_cg, report) = cg_sylvester_solve(&problem, None, 1e-10, 10_000).unwrap();
        assert!(report.converged, "instance {t} did not converge");

        // oracle route: materialized gram, full eigendecomposition
        let c_eig = eig_sylvester_solve(&weighted.weighted_gram(), &l_out, sigma, &y).unwrap();

        let rel = c_cg.sub(&c_eig).frob_norm() / c_eig.frob_norm();
        worst = worst.max(rel);
        assert!(rel <= 1e-8, "instance {t}: relative gap {rel:e}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "took {elapsed:.2} s, budget 5 s");
    println!(
        "PASS criterion 1: CG matches the eigendecomposition oracle on 20 instances \
         (worst relative gap {worst:.2e}, {elapsed:.2} s)"
    );
}

#[test]
fn criterion_02_cg_error_contraction_rate() {
    let (l_samples, n, lambda, tau) = (30, 5, 0.01, 1.2);
    let sigma = lambda * l_samples as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let x = random_dense(&mut rng, l_samples, 2, 1.5);
    let (_, dict) = gaussian_dict(&x, &[0.6, 1.1, 1.9]);
    let eta = vec![1.0 / 3.0; 3];
    let weighted = WeightedKernel::new(&dict, &eta).unwrap();
    let l_out = random_psd_with_trace(&mut rng, n, tau);
    let y = random_dense(&mut rng, l_samples, n, 1.0);

    let gamma = (0..dict.len())
        .map(|j| psd_spectral_norm(dict.gram(j)).unwrap())
        .fold(0.0f64, f64::max);
    let phi = 1.0 + gamma * tau / sigma;
    let rho = (phi.sqrt() - 1.0) / (phi.sqrt() + 1.0);

    let c_star = eig_sylvester_solve(&weighted.weighted_gram(), &l_out, sigma, &y).unwrap();
    let problem = SylvesterProblem {
        input_op: &weighted,
        output_kernel: &l_out,
        sigma,
        rhs: &y,
    };
    let mut errors = Vec::new();
    cg_sylvester_solve_observed(&problem, None, 1e-12, 500, |_, c| {
        errors.push(c.sub(&c_star).frob_norm());
    })
    .unwrap();
    assert!(errors.len() > 5, "too few iterates to check a rate");

    let err0 = errors[0];
    for (k, &err) in errors.iter().enumerate() {
        let bound = 2.0 * phi.sqrt() * rho.powi(k as i32) * err0;
        assert!(
            err <= bound * (1.0 + 1e-9) + 1e-14,
            "iterate {k}: error {err:e} exceeds bound {bound:e} (phi = {phi:.2})"
        );
    }
    println!(
        "PASS criterion 2: CG error under the contraction envelope for all {} iterates \
         (phi = {phi:.1})",
        errors.len()
    );
}

#[test]
fn criterion_03_fw_feasibility_descent_and_rate() {
    let (l_samples, n, tau, lambda, gamma_target) = (12, 6, 1.0, 0.05, 0.5);
    let epsilon = 0.01;
    let k_req = (16.0 * (tau * gamma_target as f64).powi(2) / epsilon).ceil() as usize;
    assert!(k_req + 1 < 500, "instance must resolve within the 500-iteration budget");

    let mut worst_gap: f64 = 0.0;
    for t in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + t);
        // dictionary of three PSD grams, each rescaled to spectral norm
        // exactly gamma_target; with uniform ℓ1 weights the mixed gram
        // stays within that envelope
        let mut mixed = SymmetricMatrix::zeros(l_samples);
        for _ in 0..3 {
            let raw = random_psd_with_trace(&mut rng, l_samples, 3.0);
            let norm = psd_spectral_norm(&raw).unwrap();
            let scale = gamma_target / norm;
            mixed = SymmetricMatrix::from_fn(l_samples, |i, j| {
                mixed.get(i, j) + raw.get(i, j) * scale / 3.0
            })
            .unwrap();
        }
        let c = random_dense(&mut rng, l_samples, n, 0.5);
        let a = mixed.mul_dense(&c);
        let b = c.t_mul(&a);
        let y = random_dense(&mut rng, l_samples, n, 0.5);
        let problem = SpectahedronProblem::new(a, &y, &b, lambda, tau).unwrap();

        let mut objectives = Vec::new();
        let (_, _) = solve_output_kernel_observed(&problem, None, 1e-15, 500, |state| {
            let trace = state.l.trace();
            assert!(
                trace <= tau * (1.0 + 1e-12),
                "run {t}: trace {trace} exceeds the budget"
            );
            let min_eig = min_eigenvalue(&state.l).unwrap();
            assert!(
                min_eig >= -1e-10 * trace.max(1.0),
                "run {t}: min eigenvalue {min_eig:e} at iterate {}",
                state.iterations
            );
            objectives.push(state.objective);
        })
        .unwrap();
        for w in objectives.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0),
                "run {t}: objective rose from {} to {}",
                w[0],
                w[1]
            );
        }

        // long-run self-oracle for the optimal value
        let (l_star, _) = solve_output_kernel(&problem, None, 1e-16, 100_000).unwrap();
        let g_star = problem.objective_g(&l_star);
        let idx = (k_req + 1).min(objectives.len() - 1);
        let gap = objectives[idx] - g_star;
        worst_gap = worst_gap.max(gap);
        assert!(
            gap <= epsilon / 2.0 + 1e-12,
            "run {t}: primal gap {gap:e} at iterate {idx} exceeds {}",
            epsilon / 2.0
        );
    }
    println!(
        "PASS criterion 3: iterates feasible & nonincreasing over 10 runs; primal gap at \
         iterate {} at most {worst_gap:.2e} (budget {:.0e})",
        k_req + 1,
        epsilon / 2.0
    );
}

#[test]
fn criterion_04_gradient_matches_finite_differences() {
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + t);
        let (l_samples, n) = (10, 4);
        let a = random_dense(&mut rng, l_samples, n, 1.0);
        let y = random_dense(&mut rng, l_samples, n, 1.0);
        let b = random_dense(&mut rng, n, n, 1.0);
        let problem = SpectahedronProblem::new(a, &y, &b, 0.3, 2.0).unwrap();
        let l_point = random_psd_with_trace(&mut rng, n, 1.4);
        let grad = problem.gradient_g(&l_point);

        let d = {
            let raw = random_dense(&mut rng, n, n, 1.0);
            SymmetricMatrix::from_fn(n, |i, j| (raw[(i, j)] + raw[(j, i)]) / 2.0).unwrap()
        };
        let shifted = |s: f64| {
            SymmetricMatrix::from_fn(n, |i, j| l_point.get(i, j) + s * d.get(i, j)).unwrap()
        };
        let fd = (problem.objective_g(&shifted(step)) - problem.objective_g(&shifted(-step)))
            / (2.0 * step);
        let inner = grad.frob_dot(&d);
        let rel = (fd - inner).abs() / fd.abs().max(1.0);
        worst = worst.max(rel);
        assert!(rel <= 1e-5, "probe {t}: directional derivative off by {rel:e}");
    }
    println!(
        "PASS criterion 4: analytic gradient matches central differences on 20 probes \
         (worst relative error {worst:.2e})"
    );
}

#[test]
fn criterion_05_weight_update_matches_numeric_minimizer() {
    let mut worst: f64 = 0.0;
    let mut draws = 0;
    for (pi, &p) in [1.0, 1.25, 1.5, 1.7, 2.0].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + pi as u64);
        for t in 0..10 {
            let mut alpha: Vec<f64> = (0..6).map(|_| rng.gen_range(0.05..2.0)).collect();
            alpha[t % 6] = 0.0; // keep a dead component in every draw
            let (eta, dead) = eta_update_lp(&alpha, p).unwrap();
            assert!(!dead);
            let reference = numeric_lp_minimizer(&alpha, p, 20_000);
            for (j, (&a, &b)) in eta.iter().zip(&reference).enumerate() {
                let gap = (a - b).abs();
                worst = worst.max(gap);
                assert!(
                    gap <= 1e-6,
                    "p = {p}, draw {t}, component {j}: {a} vs numeric {b}"
                );
            }
            match lp_dual_exponent(p) {
                Some(q) => {
                    let total: f64 = eta.iter().map(|v| v.powf(q)).sum();
                    assert!(total <= 1.0 + 1e-10, "p = {p}: constraint mass {total}");
                }
                None => {
                    let max = eta.iter().fold(0.0f64, |m, &v| m.max(v));
                    assert!(max <= 1.0 + 1e-10, "p = {p}: box violated ({max})");
                }
            }
            draws += 1;
        }
    }
    println!(
        "PASS criterion 5: closed-form weight update matches the projected-gradient \
         minimizer on {draws} draws (worst componentwise gap {worst:.2e})"
    );
}

#[test]
fn criterion_06_block_descent_objective_monotone() {
    let mut total_records = 0;
    for t in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + t);
        let (l_samples, n) = (40, 4);
        let x = random_dense(&mut rng, l_samples, 3, 1.5);
        let (_, dict) = gaussian_dict(&x, &[0.4, 0.7, 1.1, 1.8, 2.9, 4.7]);
        let y = random_dense(&mut rng, l_samples, n, 1.0);
        let hp = Hyperparams {
            lambda: 1e-3,
            tau: n as f64,
            regularizer: Regularizer::LpSquared { p: 1.0 },
            ..Hyperparams::default()
        };
        let state = fit(&y, &dict, &hp).unwrap();
        let trace = &state.objective_trace;
        assert!(trace.len() >= 4, "run {t}: trace too short");
        for w in trace.windows(2) {
            assert!(
                w[1].objective <= w[0].objective + 1e-9 * w[0].objective.abs().max(1.0),
                "run {t}: objective rose from {} ({} {}) to {} ({} {})",
                w[0].objective,
                w[0].outer_iter,
                w[0].block,
                w[1].objective,
                w[1].outer_iter,
                w[1].block
            );
        }
        let last = trace.last().unwrap().objective;
        assert!(last.is_finite(), "run {t}: final objective {last}");
        total_records += trace.len();
    }
    println!(
        "PASS criterion 6: objective nonincreasing across every block update in 10 runs \
         ({total_records} records)"
    );
}

#[test]
fn criterion_07_single_output_collapses_to_kernel_ridge() {
    let mut rng = ChaCha8Rng::seed_from_u64(7000);
    let l_samples = 15;
    let lambda = 0.1;
    let x_train = random_dense(&mut rng, l_samples, 1, 2.0);
    let y: Vec<f64> = (0..l_samples)
        .map(|i| (1.3 * x_train[(i, 0)]).sin() + 0.1 * rng.gen_range(-1.0..1.0))
        .collect();
    let y_mat = DenseMatrix::new(l_samples, 1, y.clone()).unwrap();
    let spec = ScalarKernelSpec::gaussian(0.8, vec![]);
    let dict = KernelDictionary::build(vec![spec.clone()], &x_train).unwrap();

    // single kernel, unit weight, unit output scale, coefficients only
    let hp = Hyperparams {
        lambda,
        tau: 1.0,
        blocks: vec![BlockTag::C],
        init_eta: Some(vec![1.0]),
        init_l: Some(DenseMatrix::new(1, 1, vec![1.0]).unwrap()),
        cg_rel_tol: 1e-13,
        cg_max_iter: 2000,
        outer_max_iter: 4,
        ..Hyperparams::default()
    };
    let state = fit(&y_mat, &dict, &hp).unwrap();

    // closed-form ridge oracle: c* = (K + λl I)⁻¹ y via eigendecomposition
    let k = gram_matrix(&spec, &x_train).unwrap();
    let shifted = SymmetricMatrix::from_fn(l_samples, |i, j| {
        k.get(i, j) + if i == j { lambda * l_samples as f64 } else { 0.0 }
    })
    .unwrap();
    let c_star = spd_solve(&shifted, &y);

    let x_new = random_dense(&mut rng, 10, 1, 2.0);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let ours = predict(&state, &dict, &x_train, x_new.row(i)).unwrap()[0];
        let mut ridge = 0.0;
        for j in 0..l_samples {
            ridge += spec.eval(x_new.row(i), x_train.row(j)).unwrap() * c_star[j];
        }
        let gap = (ours - ridge).abs();
        worst = worst.max(gap);
        assert!(gap <= 1e-6, "held-out point {i}: {ours} vs ridge {ridge}");
    }
    println!(
        "PASS criterion 7: single-output predictor equals closed-form kernel ridge on 10 \
         held-out points (worst gap {worst:.2e})"
    );
}

#[test]
fn criterion_08_fixed_weights_equal_premixed_gram() {
    let mut rng = ChaCha8Rng::seed_from_u64(8000);
    let (l_samples, n) = (20, 3);
    let x = random_dense(&mut rng, l_samples, 2, 1.5);
    let y = random_dense(&mut rng, l_samples, n, 1.0);
    let (a, b) = (0.6, 0.4);
    let spec1 = ScalarKernelSpec::gaussian(0.6, vec![]);
    let spec2 = ScalarKernelSpec::gaussian(1.5, vec![]);
    let k1 = gram_matrix(&spec1, &x).unwrap();
    let k2 = gram_matrix(&spec2, &x).unwrap();
    let mixed =
        SymmetricMatrix::from_fn(l_samples, |i, j| a * k1.get(i, j) + b * k2.get(i, j)).unwrap();

    let base = Hyperparams {
        lambda: 1e-2,
        tau: 1.0,
        blocks: vec![BlockTag::C],
        cg_rel_tol: 1e-13,
        cg_max_iter: 2000,
        outer_max_iter: 3,
        ..Hyperparams::default()
    };
    let two_kernel = {
        let dict = KernelDictionary::build(vec![spec1, spec2], &x).unwrap();
        let hp = Hyperparams {
            init_eta: Some(vec![a, b]),
            ..base.clone()
        };
        fit(&y, &dict, &hp).unwrap()
    };
    let premixed = {
        let dict =
            KernelDictionary::build(vec![ScalarKernelSpec::precomputed(mixed)], &x).unwrap();
        let hp = Hyperparams {
            init_eta: Some(vec![1.0]),
            ..base
        };
        fit(&y, &dict, &hp).unwrap()
    };

    let c_gap = two_kernel.c.sub(&premixed.c).frob_norm();
    let f_gap = (two_kernel.final_objective() - premixed.final_objective()).abs();
    assert!(c_gap <= 1e-8, "coefficient gap {c_gap:e}");
    assert!(f_gap <= 1e-8, "objective gap {f_gap:e}");
    println!(
        "PASS criterion 8: fixed-weight two-kernel fit equals the premixed-gram fit \
         (coefficient gap {c_gap:.2e}, objective gap {f_gap:.2e})"
    );
}

/// The driven pair: node 0 is autoregressive, node 1 copies node 0's
/// previous value, so the only real cross edge is 0 → 1.
fn driver_pair_panel(seed: u64, steps: usize) -> TimeSeriesPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x1 = vec![0.0f64; steps];
    let mut x2 = vec![0.0f64; steps];
    for t in 1..steps {
        x1[t] = 0.9 * x1[t - 1] + 0.3 * rng.gen_range(-1.0..1.0);
        x2[t] = 0.9 * x1[t - 1] + 0.05 * rng.gen_range(-1.0..1.0);
    }
    let mut data = Vec::with_capacity(2 * steps);
    for t in 0..steps {
        data.push(x1[t]);
        data.push(x2[t]);
    }
    TimeSeriesPanel::new(
        vec!["x1".into(), "x2".into()],
        vec![1, 1],
        (0..steps).map(|t| t as f64).collect(),
        DenseMatrix::new(steps, 2, data).unwrap(),
    )
    .unwrap()
}

#[test]
fn criterion_09_granger_recovers_the_driven_pair() {
    let start = Instant::now();
    let panel = driver_pair_panel(42, 400);
    let hp = Hyperparams {
        lambda: 3e-2,
        regularizer: Regularizer::LpSquared { p: 1.0 },
        ..Hyperparams::default()
    };
    let graph = infer_causal_graph(&panel, 2, &[1.0], NodeKernelKind::Linear, &hp).unwrap();
    let g = &graph.g;

    // true edge x1 → x2 dominates the x2 row; the reverse edge is noise
    let forward = g[(1, 0)];
    let reverse = g[(0, 1)];
    let row_x2 = g[(1, 0)] + g[(1, 1)];
    let row_x1 = g[(0, 0)] + g[(0, 1)];
    assert!(forward > 0.0, "missing forward edge");
    assert!(
        forward >= 0.8 * row_x2,
        "forward edge carries {forward} of row mass {row_x2}"
    );
    assert!(
        reverse <= 0.1 * row_x1,
        "reverse edge carries {reverse} of row mass {row_x1}"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed:.2} s, budget 30 s");
    println!(
        "PASS criterion 9: driven-pair graph recovered ({:.1}% forward, {:.1}% reverse, \
         {elapsed:.2} s)",
        100.0 * forward / row_x2,
        100.0 * reverse / row_x1
    );
}

#[test]
fn criterion_10_rademacher_closed_forms() {
    let single = rademacher_part_c(1.0, 1, 1.0, 1.0, 1);
    let expected = (23.0f64 / 22.0).sqrt();
    assert!(
        (single - expected).abs() <= 1e-12,
        "single-kernel bound {single} vs {expected}"
    );
    let general = rademacher_part_a(1.0, 2, 1.0, 4.0, 16);
    assert!(
        (general - 1.0).abs() <= 1e-12,
        "general-dictionary bound {general} vs 1"
    );
    println!(
        "PASS criterion 10: closed-form complexity bounds match hand values \
         ({single:.15} and {general})"
    );
}

fn run_cli(work: &Path, args: &[&str]) -> (String, String) {
    let exe = env!("CARGO_BIN_EXE_mvkl");
    let output = Command::new(exe)
        .current_dir(work)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "mvkl {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    (
        String::from_utf8(output.stdout).unwrap(),
        String::from_utf8(output.stderr).unwrap(),
    )
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|entry| {
            let entry = entry.unwrap();
            (
                entry.file_name().into_string().unwrap(),
                std::fs::read(entry.path()).unwrap(),
            )
        })
        .collect();
    files.sort_by(|a, b| a.0.cmp(&b.0));
    files
}

#[test]
fn criterion_11_cli_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let panel_path = tmp.path().join("panel.csv");
    mvkl::io::emit_timeseries_csv(&driver_pair_panel(11, 150), &panel_path).unwrap();
    let panel_arg = panel_path.to_str().unwrap();

    let mut stdouts = Vec::new();
    let mut contents = Vec::new();
    for run in 0..2 {
        let work = tmp.path().join(format!("run{run}"));
        std::fs::create_dir(&work).unwrap();
        let (stdout, _) = run_cli(
            &work,
            &[
                "granger", "--input", panel_arg, "--kernel", "linear", "--lag", "2",
                "--lambda", "0.03", "--threads", "1", "--seed", "0", "--out", "out",
            ],
        );
        stdouts.push(stdout);
        contents.push(dir_contents(&work.join("out")));
    }
    assert_eq!(stdouts[0], stdouts[1], "granger stdout differs across runs");
    assert_eq!(
        contents[0].len(),
        contents[1].len(),
        "different artifact sets"
    );
    for (a, b) in contents[0].iter().zip(&contents[1]) {
        assert_eq!(a.0, b.0, "artifact names differ");
        assert_eq!(a.1, b.1, "artifact {} differs byte-for-byte", a.0);
    }

    let (self1, _) = run_cli(tmp.path(), &["selftest", "--threads", "1"]);
    let (self2, _) = run_cli(tmp.path(), &["selftest", "--threads", "1"]);
    assert_eq!(self1, self2, "selftest stdout differs across runs");
    assert!(self1.contains("PASS"), "selftest did not report suites");

    println!(
        "PASS criterion 11: repeated single-threaded runs byte-identical \
         ({} artifacts and both stdout streams)",
        contents[0].len()
    );
}
