//! Command-line front end: fit, predict, granger, bound, selftest.
//!
//! Settings resolve in three layers — built-in defaults, then a JSON
//! config file (`--config`), then explicit flags. Errors print a single
//! machine-parsable line (`<kind>: <detail>`) on stderr and exit 1.
//! `MVKERNEL_LOG` (error|info|debug) controls diagnostics on stderr.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use mvkl::driver::{predict_batch, rademacher_bound, BoundInputs, SavedModel};
use mvkl::error::{Error, Result};
use mvkl::granger::{infer_causal_graph, NodeKernelKind};
use mvkl::io::{
    emit_outputs, ingest_regression_csv, ingest_timeseries_csv, read_matrix_csv, KernelChoice,
    RunConfig, RunOutputs, TaskKind,
};
use mvkl::kernels::{gaussian_dictionary_specs, KernelDictionary, ScalarKernelSpec};
use mvkl::matrix::{DenseMatrix, SymmetricMatrix};
use mvkl::selftest;

#[derive(Parser)]
#[command(
    name = "mvkl",
    version,
    about = "Matrix-valued kernel learning: joint input/output kernel estimation and Granger graph inference"
)]
struct Cli {
    #[command(subcommand)]
    task: Task,
}

/// Flags shared by every subcommand; each one overrides the matching
/// config-file field.
#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// JSON run configuration; explicit flags win over its fields
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Ridge weight λ
    #[arg(long)]
    lambda: Option<f64>,
    /// Output-kernel trace budget τ
    #[arg(long)]
    tau: Option<f64>,
    /// ℓp exponent in [1, 2] for the kernel-weight penalty
    #[arg(long)]
    p: Option<f64>,
    /// Elastic-net mixing in [0, 1]; replaces the ℓp penalty when set
    #[arg(long)]
    mu: Option<f64>,
    /// History length for granger lag embedding
    #[arg(long)]
    lag: Option<usize>,
    /// Scalar kernel family: gaussian, linear, or precomputed
    #[arg(long, value_name = "KIND")]
    kernel: Option<String>,
    /// Comma-separated bandwidth multipliers for the Gaussian grid
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    bandwidths: Option<Vec<f64>>,
    /// Relative tolerance of the conjugate-gradient coefficient solver
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    cg_max_iter: Option<usize>,
    /// Duality-gap tolerance of the output-kernel solver
    #[arg(long)]
    fw_tol: Option<f64>,
    #[arg(long)]
    fw_max_iter: Option<usize>,
    #[arg(long)]
    outer_max_iter: Option<usize>,
    /// Relative objective-decrease tolerance across outer sweeps
    #[arg(long)]
    outer_tol: Option<f64>,
    /// Drop graph.dot edges with weight at or below this value
    #[arg(long)]
    threshold: Option<f64>,
    /// Worker threads (0 = machine default)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Record wall-clock per block in trace.csv (off keeps artifacts
    /// byte-reproducible across runs)
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Task {
    /// Fit a joint kernel-weights / output-kernel model to a CSV table
    Fit {
        #[command(flatten)]
        common: Common,
        /// Training table with a header row
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Comma-separated target column names; the rest are features
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        targets: Option<Vec<String>>,
        /// Headerless Gram CSVs, one per precomputed kernel
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        grams: Option<Vec<PathBuf>>,
    },
    /// Predict targets for new rows with a saved model
    Predict {
        #[command(flatten)]
        common: Common,
        /// model.json written by fit
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Feature table with the training column layout
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Infer a weighted causal graph from a multivariate panel
    Granger {
        #[command(flatten)]
        common: Common,
        /// Panel CSV: column `t` then `<node>.<dim>` columns
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Also write adjacency_row_normalized.csv
        #[arg(long)]
        row_normalize: bool,
    },
    /// Evaluate the Rademacher complexity bound for given class constants
    Bound {
        #[command(flatten)]
        common: Common,
        /// Hypothesis-class radius
        #[arg(long)]
        norm_budget: Option<f64>,
        /// Dictionary size
        #[arg(long)]
        m: Option<usize>,
        /// Uniform bound on the scalar kernels' diagonal
        #[arg(long)]
        kappa: Option<f64>,
        /// Sample size
        #[arg(long)]
        l: Option<usize>,
    },
    /// Run the oracle-equivalence suites and print one line per suite
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

fn main() {
    let filter = std::env::var("MVKERNEL_LOG").unwrap_or_else(|_| "error".to_owned());
    env_logger::Builder::new()
        .parse_filters(&filter)
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(e) = run(cli.task) {
        eprintln!("{e}");
        std::process::exit(1);
    }
}

/// Config file (if any) overlaid with every flag the user set.
fn build_config(common: &Common, task: TaskKind) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    cfg.task = task;
    macro_rules! overlay {
        ($($field:ident),*) => {
            $(if let Some(v) = common.$field { cfg.$field = v; })*
        };
    }
    overlay!(
        lambda, tau, p, lag, cg_tol, cg_max_iter, fw_tol, fw_max_iter, outer_max_iter,
        outer_tol, threshold, threads, seed
    );
    if let Some(mu) = common.mu {
        cfg.mu = Some(mu);
    }
    if let Some(kernel) = &common.kernel {
        cfg.kernel = kernel.parse()?;
    }
    if let Some(bandwidths) = &common.bandwidths {
        cfg.bandwidths = bandwidths.clone();
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if common.timing {
        cfg.timing = true;
    }
    Ok(cfg)
}

fn init_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn run(task: Task) -> Result<()> {
    match task {
        Task::Fit {
            common,
            input,
            targets,
            grams,
        } => {
            let mut cfg = build_config(&common, TaskKind::Fit)?;
            if let Some(v) = input {
                cfg.input = Some(v);
            }
            if let Some(v) = targets {
                cfg.targets = v;
            }
            if let Some(v) = grams {
                cfg.grams = v;
            }
            cfg.validate()?;
            init_threads(cfg.threads)?;
            run_fit(&cfg)
        }
        Task::Predict {
            common,
            model,
            input,
        } => {
            let mut cfg = build_config(&common, TaskKind::Predict)?;
            if let Some(v) = model {
                cfg.model = Some(v);
            }
            if let Some(v) = input {
                cfg.input = Some(v);
            }
            cfg.validate()?;
            run_predict(&cfg)
        }
        Task::Granger {
            common,
            input,
            row_normalize,
        } => {
            let mut cfg = build_config(&common, TaskKind::Granger)?;
            if let Some(v) = input {
                cfg.input = Some(v);
            }
            if row_normalize {
                cfg.row_normalize = true;
            }
            cfg.validate()?;
            init_threads(cfg.threads)?;
            run_granger(&cfg)
        }
        Task::Bound {
            common,
            norm_budget,
            m,
            kappa,
            l,
        } => {
            let mut cfg = build_config(&common, TaskKind::Bound)?;
            if let Some(v) = norm_budget {
                cfg.norm_budget = v;
            }
            if let Some(v) = m {
                cfg.m = v;
            }
            if let Some(v) = kappa {
                cfg.kappa = v;
            }
            if let Some(v) = l {
                cfg.l = v;
            }
            cfg.validate()?;
            run_bound(&cfg)
        }
        Task::Selftest { common } => {
            let cfg = build_config(&common, TaskKind::Selftest)?;
            cfg.validate()?;
            run_selftest(&cfg)
        }
    }
}

/// Dictionary for the plain regression task: a bandwidth grid over all
/// features, a single linear kernel, or one precomputed Gram per file.
fn fit_specs(cfg: &RunConfig, x: &DenseMatrix) -> Result<Vec<ScalarKernelSpec>> {
    match cfg.kernel {
        KernelChoice::Gaussian => {
            let all: Vec<usize> = (0..x.cols()).collect();
            gaussian_dictionary_specs(x, &[all], &cfg.bandwidth_grid())
        }
        KernelChoice::Linear => Ok(vec![ScalarKernelSpec::linear(Vec::new())]),
        KernelChoice::Precomputed => cfg
            .grams
            .iter()
            .map(|path| {
                let dense = read_matrix_csv(path)?;
                let gram = SymmetricMatrix::symmetrize(&dense)?;
                if gram.dim() != x.rows() {
                    return Err(Error::DimensionMismatch(format!(
                        "gram {} is {}x{} but the table has {} rows",
                        path.display(),
                        gram.dim(),
                        gram.dim(),
                        x.rows()
                    )));
                }
                Ok(ScalarKernelSpec::precomputed(gram))
            })
            .collect(),
    }
}

fn run_fit(cfg: &RunConfig) -> Result<()> {
    let input = cfg.input.as_ref().expect("validated");
    let (x, y) = ingest_regression_csv(input, &cfg.targets)?;
    log::info!(
        "fit: {} rows, {} features, {} targets",
        x.rows(),
        x.cols(),
        y.cols()
    );
    let specs = fit_specs(cfg, &x)?;
    let dict = KernelDictionary::build(specs.clone(), &x)?;
    let hp = cfg.hyperparams();
    let state = mvkl::driver::fit(&y, &dict, &hp)?;
    let model = SavedModel::from_state(&state, &specs, &hp, &x, &cfg.targets);
    let written = emit_outputs(
        &RunOutputs::Fit {
            model,
            trace: state.objective_trace.clone(),
        },
        cfg,
    )?;
    let active = state.eta.iter().filter(|&&w| w > 0.0).count();
    println!(
        "fit: {} rows, {} kernels ({} active), final objective {}",
        x.rows(),
        dict.len(),
        active,
        state.final_objective()
    );
    println!("termination: {:?}", state.termination);
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_predict(cfg: &RunConfig) -> Result<()> {
    let model_path = cfg.model.as_ref().expect("validated");
    let text = std::fs::read_to_string(model_path).map_err(|e| Error::io(model_path, e))?;
    let model = SavedModel::from_json(&text)?;
    let (dict, state) = model.restore()?;
    let input = cfg.input.as_ref().expect("validated");
    let (x_new, _) = ingest_regression_csv(input, &[])?;
    if x_new.cols() != model.x_train.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} has {} feature columns but the model was trained on {}",
            input.display(),
            x_new.cols(),
            model.x_train.cols()
        )));
    }
    let values = predict_batch(&state, &dict, &model.x_train, &x_new)?;
    let written = emit_outputs(
        &RunOutputs::Predictions {
            target_names: model.target_names.clone(),
            values,
        },
        cfg,
    )?;
    println!(
        "predict: {} rows, {} targets",
        x_new.rows(),
        model.target_names.len()
    );
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn node_kernel_kind(cfg: &RunConfig) -> Result<NodeKernelKind> {
    match cfg.kernel {
        KernelChoice::Gaussian => Ok(NodeKernelKind::Gaussian),
        KernelChoice::Linear => Ok(NodeKernelKind::Linear),
        KernelChoice::Precomputed => Err(Error::Config(
            "granger supports gaussian or linear kernels, not precomputed".into(),
        )),
    }
}

fn run_granger(cfg: &RunConfig) -> Result<()> {
    let input = cfg.input.as_ref().expect("validated");
    let panel = ingest_timeseries_csv(input)?;
    log::info!(
        "granger: {} nodes, {} time steps, lag {}",
        panel.node_count(),
        panel.len(),
        cfg.lag
    );
    let graph = infer_causal_graph(
        &panel,
        cfg.lag,
        &cfg.bandwidth_grid(),
        node_kernel_kind(cfg)?,
        &cfg.hyperparams(),
    )?;
    let written = emit_outputs(
        &RunOutputs::Granger {
            graph: graph.clone(),
        },
        cfg,
    )?;
    println!("granger: {} nodes, lag {}", graph.node_count(), cfg.lag);
    for i in 0..graph.node_count() {
        println!(
            "node {}: holdout rmse {}, {:?}",
            graph.node_names[i], graph.per_node_holdout_rmse[i], graph.per_node_termination[i]
        );
    }
    let edges = graph.edges(cfg.threshold);
    println!("edges above {}: {}", cfg.threshold, edges.len());
    for edge in &edges {
        println!(
            "  {} -> {} weight {}",
            graph.node_names[edge.source], graph.node_names[edge.target], edge.weight
        );
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_bound(cfg: &RunConfig) -> Result<()> {
    let value = rademacher_bound(&BoundInputs {
        norm_budget: cfg.norm_budget,
        m: cfg.m,
        kappa: cfg.kappa,
        tau: cfg.tau,
        l: cfg.l,
        p: cfg.p,
        r: None,
    })?;
    println!("{value}");
    Ok(())
}

fn run_selftest(cfg: &RunConfig) -> Result<()> {
    let results = selftest::run_all(cfg.seed);
    for result in &results {
        println!("{result}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Error::NumericalFailure(format!(
            "{failed} of {} self-test suites failed",
            results.len()
        )));
    }
    println!("selftest: all {} suites passed", results.len());
    Ok(())
}
