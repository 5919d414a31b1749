//! C ABI over the mvkl library: opaque handles, integer status codes, and
//! a thread-local error message. All matrices cross the boundary as
//! row-major `double` buffers with explicit dimensions; the caller owns
//! every buffer it passes in and must free handles with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use mvkl::driver::{
    fit, predict_batch, rademacher_bound, BoundInputs, Hyperparams, ModelState, Regularizer,
    SavedModel,
};
use mvkl::granger::{infer_causal_graph, CausalGraph, NodeKernelKind, TimeSeriesPanel};
use mvkl::kernels::{gaussian_dictionary_specs, KernelDictionary, ScalarKernelSpec};
use mvkl::matrix::DenseMatrix;
use mvkl::Error;

/// Result code returned by every fallible function. Anything other than
/// `MVKL_STATUS_OK` leaves a human-readable explanation in
/// `mvkl_last_error_message`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MvklStatus {
    Ok = 0,
    InvalidInput = 1,
    DimensionMismatch = 2,
    NumericalFailure = 3,
    InsufficientData = 4,
    UnsupportedPrediction = 5,
    Parse = 6,
    Config = 7,
    Io = 8,
    NullPointer = 9,
    InvalidUtf8 = 10,
    Panic = 11,
}

/// Scalar kernel family used to build the dictionary.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MvklKernelKind {
    /// Gaussian kernels, one per bandwidth-grid entry; each bandwidth is
    /// the grid multiplier times the median pairwise distance of the data.
    Gaussian = 0,
    /// A single linear kernel; the bandwidth grid is ignored.
    Linear = 1,
}

/// Solver configuration. Initialize with `mvkl_fit_options_default` and
/// override individual fields; a null options pointer means defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct MvklFitOptions {
    /// Ridge weight shared by both regularization terms.
    pub lambda: f64,
    /// Trace budget for the learned output kernel.
    pub tau: f64,
    /// Component-norm exponent in [1, 2]; 1 gives the sparsest weights.
    pub p: f64,
    /// Elastic-net mixing in [0, 1]; any negative value selects the
    /// p-norm regularizer instead.
    pub elastic_mu: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub fw_tol: f64,
    pub fw_max_iter: usize,
    pub outer_max_iter: usize,
    pub outer_tol: f64,
    pub seed: u64,
}

impl Default for MvklFitOptions {
    fn default() -> Self {
        let hp = Hyperparams::default();
        MvklFitOptions {
            lambda: hp.lambda,
            tau: hp.tau,
            p: 1.0,
            elastic_mu: -1.0,
            cg_tol: hp.cg_rel_tol,
            cg_max_iter: hp.cg_max_iter,
            fw_tol: hp.fw_tol,
            fw_max_iter: hp.fw_max_iter,
            outer_max_iter: hp.outer_max_iter,
            outer_tol: hp.outer_rel_tol,
            seed: hp.seed,
        }
    }
}

/// Opaque fitted-model handle.
pub struct MvklModel {
    saved: SavedModel,
    dict: KernelDictionary,
    state: ModelState,
}

/// Opaque causal-graph handle.
pub struct MvklGraph {
    graph: CausalGraph,
    // C-string copies of the node names, owned by the handle so the
    // pointers handed out stay valid until mvkl_graph_free
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_message(msg: impl Into<Vec<u8>>) {
    let text = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn fail(err: &Error) -> MvklStatus {
    set_message(err.to_string());
    match err {
        Error::InvalidInput(_) => MvklStatus::InvalidInput,
        Error::DimensionMismatch(_) => MvklStatus::DimensionMismatch,
        Error::NumericalFailure(_) => MvklStatus::NumericalFailure,
        Error::InsufficientData(_) => MvklStatus::InsufficientData,
        Error::UnsupportedPrediction(_) => MvklStatus::UnsupportedPrediction,
        Error::Parse { .. } => MvklStatus::Parse,
        Error::Config(_) => MvklStatus::Config,
        Error::Io(_) => MvklStatus::Io,
    }
}

fn null_arg(what: &str) -> MvklStatus {
    set_message(format!("{what} must not be null"));
    MvklStatus::NullPointer
}

// Catches panics so they never unwind across the C boundary.
fn guarded(f: impl FnOnce() -> MvklStatus) -> MvklStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_message("internal panic");
        MvklStatus::Panic
    })
}

unsafe fn float_slice<'a>(
    ptr: *const f64,
    len: usize,
    what: &str,
) -> Result<&'a [f64], MvklStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null_arg(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn matrix_arg(
    ptr: *const f64,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<DenseMatrix, MvklStatus> {
    let data = float_slice(ptr, rows.saturating_mul(cols), what)?;
    DenseMatrix::new(rows, cols, data.to_vec()).map_err(|e| fail(&e))
}

unsafe fn path_arg(ptr: *const c_char, what: &str) -> Result<PathBuf, MvklStatus> {
    if ptr.is_null() {
        return Err(null_arg(what));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_message(format!("{what} is not valid UTF-8"));
            Err(MvklStatus::InvalidUtf8)
        }
    }
}

fn hyperparams_from(opts: &MvklFitOptions) -> Hyperparams {
    let regularizer = if opts.elastic_mu >= 0.0 {
        Regularizer::ElasticNet { mu: opts.elastic_mu }
    } else {
        Regularizer::LpSquared { p: opts.p }
    };
    Hyperparams {
        lambda: opts.lambda,
        tau: opts.tau,
        regularizer,
        cg_rel_tol: opts.cg_tol,
        cg_max_iter: opts.cg_max_iter,
        fw_tol: opts.fw_tol,
        fw_max_iter: opts.fw_max_iter,
        outer_max_iter: opts.outer_max_iter,
        outer_rel_tol: opts.outer_tol,
        seed: opts.seed,
        ..Hyperparams::default()
    }
}

unsafe fn options_arg(opts: *const MvklFitOptions) -> MvklFitOptions {
    if opts.is_null() {
        MvklFitOptions::default()
    } else {
        *opts
    }
}

fn dictionary_specs(
    x: &DenseMatrix,
    kind: MvklKernelKind,
    grid: &[f64],
) -> mvkl::Result<Vec<ScalarKernelSpec>> {
    match kind {
        MvklKernelKind::Gaussian => {
            let grid = if grid.is_empty() {
                mvkl::kernels::default_bandwidth_grid()
            } else {
                grid.to_vec()
            };
            let all_features: Vec<usize> = (0..x.cols()).collect();
            gaussian_dictionary_specs(x, &[all_features], &grid)
        }
        MvklKernelKind::Linear => Ok(vec![ScalarKernelSpec::linear(Vec::new())]),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mvkl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on the calling thread.
/// The pointer stays valid until the next failing call on that thread.
#[no_mangle]
pub extern "C" fn mvkl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Fills `opts` with the default solver configuration.
#[no_mangle]
pub unsafe extern "C" fn mvkl_fit_options_default(opts: *mut MvklFitOptions) -> MvklStatus {
    guarded(|| {
        if opts.is_null() {
            return null_arg("options");
        }
        opts.write(MvklFitOptions::default());
        MvklStatus::Ok
    })
}

/// Fits a model to training inputs `x` (`rows` × `features`, row-major)
/// and targets `y` (`rows` × `outputs`, row-major). For Gaussian kernels,
/// `bandwidths` holds grid multipliers applied to the median pairwise
/// distance (pass `n_bandwidths = 0` for the built-in grid). On success
/// writes a handle to `out`; free it with `mvkl_model_free`.
#[no_mangle]
pub unsafe extern "C" fn mvkl_fit(
    x: *const f64,
    rows: usize,
    features: usize,
    y: *const f64,
    outputs: usize,
    kind: MvklKernelKind,
    bandwidths: *const f64,
    n_bandwidths: usize,
    opts: *const MvklFitOptions,
    out: *mut *mut MvklModel,
) -> MvklStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("output handle");
        }
        let x = match matrix_arg(x, rows, features, "x") {
            Ok(m) => m,
            Err(s) => return s,
        };
        let y = match matrix_arg(y, rows, outputs, "y") {
            Ok(m) => m,
            Err(s) => return s,
        };
        let grid = match float_slice(bandwidths, n_bandwidths, "bandwidths") {
            Ok(g) => g,
            Err(s) => return s,
        };
        let hp = hyperparams_from(&options_arg(opts));
        let result = (|| -> mvkl::Result<MvklModel> {
            let specs = dictionary_specs(&x, kind, grid)?;
            let dict = KernelDictionary::build(specs.clone(), &x)?;
            let state = fit(&y, &dict, &hp)?;
            let target_names: Vec<String> =
                (1..=outputs).map(|a| format!("y{a}")).collect();
            let saved = SavedModel::from_state(&state, &specs, &hp, &x, &target_names);
            Ok(MvklModel { saved, dict, state })
        })();
        match result {
            Ok(model) => {
                out.write(Box::into_raw(Box::new(model)));
                MvklStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Loads a model previously written by `mvkl_model_save_json`.
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_load_json(
    path: *const c_char,
    out: *mut *mut MvklModel,
) -> MvklStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("output handle");
        }
        let path = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let result = (|| -> mvkl::Result<MvklModel> {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let saved = SavedModel::from_json(&text)?;
            let (dict, state) = saved.restore()?;
            Ok(MvklModel { saved, dict, state })
        })();
        match result {
            Ok(model) => {
                out.write(Box::into_raw(Box::new(model)));
                MvklStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Serializes the model to a JSON file at `path`.
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_save_json(
    model: *const MvklModel,
    path: *const c_char,
) -> MvklStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return null_arg("model");
        };
        let path = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let result = (|| -> mvkl::Result<()> {
            let mut text = model.saved.to_json()?;
            text.push('\n');
            std::fs::write(&path, text)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
        })();
        match result {
            Ok(()) => MvklStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Predicts targets for `x_new` (`rows` × `features`, row-major). `values`
/// must hold `rows × mvkl_model_outputs(model)` doubles; predictions are
/// written row-major, `values_len` guards the buffer size.
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_predict(
    model: *const MvklModel,
    x_new: *const f64,
    rows: usize,
    features: usize,
    values: *mut f64,
    values_len: usize,
) -> MvklStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return null_arg("model");
        };
        let x_new = match matrix_arg(x_new, rows, features, "x_new") {
            Ok(m) => m,
            Err(s) => return s,
        };
        if features != model.saved.x_train.cols() {
            return fail(&Error::DimensionMismatch(format!(
                "model was trained on {} features, got {features}",
                model.saved.x_train.cols()
            )));
        }
        let outputs = model.state.c.cols();
        if values_len != rows.saturating_mul(outputs) {
            return fail(&Error::DimensionMismatch(format!(
                "prediction buffer holds {values_len} values, need {}",
                rows * outputs
            )));
        }
        if values.is_null() {
            return null_arg("values");
        }
        match predict_batch(&model.state, &model.dict, &model.saved.x_train, &x_new) {
            Ok(pred) => {
                let flat = std::slice::from_raw_parts_mut(values, values_len);
                for i in 0..rows {
                    flat[i * outputs..(i + 1) * outputs].copy_from_slice(pred.row(i));
                }
                MvklStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of training rows, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_train_rows(model: *const MvklModel) -> usize {
    model.as_ref().map_or(0, |m| m.saved.x_train.rows())
}

/// Number of input features, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_features(model: *const MvklModel) -> usize {
    model.as_ref().map_or(0, |m| m.saved.x_train.cols())
}

/// Number of output components, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_outputs(model: *const MvklModel) -> usize {
    model.as_ref().map_or(0, |m| m.state.c.cols())
}

/// Number of dictionary kernels, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_kernel_count(model: *const MvklModel) -> usize {
    model.as_ref().map_or(0, |m| m.state.eta.len())
}

/// 1 if the fit converged, 0 if it stopped early, -1 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_converged(model: *const MvklModel) -> i32 {
    model.as_ref().map_or(-1, |m| i32::from(m.saved.converged))
}

/// Final training objective; NaN for a model loaded from JSON, which
/// carries no optimization trace.
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_objective(model: *const MvklModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.state.final_objective())
}

/// Copies the learned kernel weights into `weights`
/// (`mvkl_model_kernel_count` doubles).
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_weights(
    model: *const MvklModel,
    weights: *mut f64,
    weights_len: usize,
) -> MvklStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return null_arg("model");
        };
        if weights_len != model.state.eta.len() {
            return fail(&Error::DimensionMismatch(format!(
                "weight buffer holds {weights_len} values, need {}",
                model.state.eta.len()
            )));
        }
        if weights.is_null() {
            return null_arg("weights");
        }
        std::slice::from_raw_parts_mut(weights, weights_len).copy_from_slice(&model.state.eta);
        MvklStatus::Ok
    })
}

/// Copies the learned output kernel row-major into `values`
/// (`outputs × outputs` doubles).
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_output_kernel(
    model: *const MvklModel,
    values: *mut f64,
    values_len: usize,
) -> MvklStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return null_arg("model");
        };
        let n = model.state.c.cols();
        if values_len != n * n {
            return fail(&Error::DimensionMismatch(format!(
                "kernel buffer holds {values_len} values, need {}",
                n * n
            )));
        }
        if values.is_null() {
            return null_arg("values");
        }
        let flat = std::slice::from_raw_parts_mut(values, values_len);
        for i in 0..n {
            for j in 0..n {
                flat[i * n + j] = model.state.l_out.get(i, j);
            }
        }
        MvklStatus::Ok
    })
}

/// Releases a model handle. A null pointer is a no-op.
#[no_mangle]
pub unsafe extern "C" fn mvkl_model_free(model: *mut MvklModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Infers a causal graph from a multivariate time-series panel. `values`
/// is `steps` × `total_dims` row-major with columns grouped by node;
/// `node_dims` gives each node's column count (summing to `total_dims`).
/// `names` may be null for automatic `x1..xN` labels. On success writes a
/// handle to `out`; free it with `mvkl_graph_free`.
#[no_mangle]
pub unsafe extern "C" fn mvkl_granger(
    values: *const f64,
    steps: usize,
    total_dims: usize,
    node_dims: *const usize,
    n_nodes: usize,
    names: *const *const c_char,
    lag: usize,
    kind: MvklKernelKind,
    bandwidths: *const f64,
    n_bandwidths: usize,
    opts: *const MvklFitOptions,
    out: *mut *mut MvklGraph,
) -> MvklStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("output handle");
        }
        let values = match matrix_arg(values, steps, total_dims, "values") {
            Ok(m) => m,
            Err(s) => return s,
        };
        if node_dims.is_null() {
            return null_arg("node_dims");
        }
        let dims = std::slice::from_raw_parts(node_dims, n_nodes).to_vec();
        let node_names = if names.is_null() {
            (1..=n_nodes).map(|i| format!("x{i}")).collect()
        } else {
            let mut parsed = Vec::with_capacity(n_nodes);
            for (i, &name) in std::slice::from_raw_parts(names, n_nodes).iter().enumerate() {
                if name.is_null() {
                    return null_arg(&format!("names[{i}]"));
                }
                match CStr::from_ptr(name).to_str() {
                    Ok(s) => parsed.push(s.to_string()),
                    Err(_) => {
                        set_message(format!("names[{i}] is not valid UTF-8"));
                        return MvklStatus::InvalidUtf8;
                    }
                }
            }
            parsed
        };
        let grid = match float_slice(bandwidths, n_bandwidths, "bandwidths") {
            Ok(g) if g.is_empty() => mvkl::kernels::default_bandwidth_grid(),
            Ok(g) => g.to_vec(),
            Err(s) => return s,
        };
        let node_kind = match kind {
            MvklKernelKind::Gaussian => NodeKernelKind::Gaussian,
            MvklKernelKind::Linear => NodeKernelKind::Linear,
        };
        let hp = hyperparams_from(&options_arg(opts));
        let result = (|| -> mvkl::Result<MvklGraph> {
            let times = (0..steps).map(|t| t as f64).collect();
            let panel = TimeSeriesPanel::new(node_names, dims, times, values)?;
            let graph = infer_causal_graph(&panel, lag, &grid, node_kind, &hp)?;
            let names = graph
                .node_names
                .iter()
                .map(|n| {
                    CString::new(n.as_str())
                        .map_err(|_| Error::InvalidInput(format!("node name {n:?} contains NUL")))
                })
                .collect::<mvkl::Result<Vec<_>>>()?;
            Ok(MvklGraph { graph, names })
        })();
        match result {
            Ok(graph) => {
                out.write(Box::into_raw(Box::new(graph)));
                MvklStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of nodes, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mvkl_graph_node_count(graph: *const MvklGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.node_names.len())
}

/// Name of node `index`, or null when out of range. The pointer stays
/// valid until `mvkl_graph_free`.
#[no_mangle]
pub unsafe extern "C" fn mvkl_graph_node_name(
    graph: *const MvklGraph,
    index: usize,
) -> *const c_char {
    graph
        .as_ref()
        .and_then(|g| g.names.get(index))
        .map_or(std::ptr::null(), |n| n.as_ptr())
}

/// Copies the adjacency matrix row-major into `values` (`n × n` doubles);
/// entry (i, j) is the influence of node j's history on node i.
#[no_mangle]
pub unsafe extern "C" fn mvkl_graph_adjacency(
    graph: *const MvklGraph,
    values: *mut f64,
    values_len: usize,
) -> MvklStatus {
    guarded(|| {
        let Some(handle) = graph.as_ref() else {
            return null_arg("graph");
        };
        let n = handle.graph.node_names.len();
        if values_len != n * n {
            return fail(&Error::DimensionMismatch(format!(
                "adjacency buffer holds {values_len} values, need {}",
                n * n
            )));
        }
        if values.is_null() {
            return null_arg("values");
        }
        let flat = std::slice::from_raw_parts_mut(values, values_len);
        for i in 0..n {
            flat[i * n..(i + 1) * n].copy_from_slice(handle.graph.g.row(i));
        }
        MvklStatus::Ok
    })
}

/// Copies each node model's held-out root-mean-square error into `values`
/// (`n` doubles).
#[no_mangle]
pub unsafe extern "C" fn mvkl_graph_holdout_rmse(
    graph: *const MvklGraph,
    values: *mut f64,
    values_len: usize,
) -> MvklStatus {
    guarded(|| {
        let Some(handle) = graph.as_ref() else {
            return null_arg("graph");
        };
        let rmse = &handle.graph.per_node_holdout_rmse;
        if values_len != rmse.len() {
            return fail(&Error::DimensionMismatch(format!(
                "rmse buffer holds {values_len} values, need {}",
                rmse.len()
            )));
        }
        if values.is_null() {
            return null_arg("values");
        }
        std::slice::from_raw_parts_mut(values, values_len).copy_from_slice(rmse);
        MvklStatus::Ok
    })
}

/// Releases a graph handle. A null pointer is a no-op.
#[no_mangle]
pub unsafe extern "C" fn mvkl_graph_free(graph: *mut MvklGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Expected-excess-risk complexity bound for a dictionary of `m` kernels
/// with diagonal bound `kappa`, trace budget `tau`, hypothesis radius
/// `norm_budget`, and `l` samples. `p` selects the regularizer exponent
/// and `rank` (0 for unknown) tightens the low-rank case.
#[no_mangle]
pub unsafe extern "C" fn mvkl_rademacher_bound(
    norm_budget: f64,
    m: usize,
    kappa: f64,
    tau: f64,
    l: usize,
    p: f64,
    rank: usize,
    out: *mut f64,
) -> MvklStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let inputs = BoundInputs {
            norm_budget,
            m,
            kappa,
            tau,
            l,
            p,
            r: if rank == 0 { None } else { Some(rank) },
        };
        match rademacher_bound(&inputs) {
            Ok(v) => {
                out.write(v);
                MvklStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
