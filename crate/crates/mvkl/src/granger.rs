//! Nonlinear graphical Granger inference on multivariate panels.
//!
//! Each node of the panel is modeled from the lagged history of every
//! node, with one scalar kernel (or one per bandwidth) confined to each
//! source node's lagged block. Fitting the sparse joint model per node
//! yields kernel weights whose block sums form a weighted causal graph:
//! `G[i][j]` aggregates the weight node i's model places on node j's
//! history, i.e. the edge j → i.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{fit, predict_batch, Hyperparams, ModelState, Termination, TraceRecord};
use crate::error::{Error, Result};
use crate::kernels::{gaussian_dictionary_specs, KernelDictionary, ScalarKernelSpec};
use crate::matrix::{DenseMatrix, SymmetricMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesPanel {
    pub node_names: Vec<String>,
    /// Per-node observation dimensions; values columns group by node.
    pub dims: Vec<usize>,
    pub times: Vec<f64>,
    pub values: DenseMatrix,
}

impl TimeSeriesPanel {
    pub fn new(
        node_names: Vec<String>,
        dims: Vec<usize>,
        times: Vec<f64>,
        values: DenseMatrix,
    ) -> Result<Self> {
        if node_names.is_empty() || node_names.len() != dims.len() {
            return Err(Error::InvalidInput(format!(
                "{} node names for {} dimension entries",
                node_names.len(),
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput("zero-dimensional node".into()));
        }
        let total: usize = dims.iter().sum();
        if total != values.cols() {
            return Err(Error::DimensionMismatch(format!(
                "node dimensions sum to {total} but the panel has {} columns",
                values.cols()
            )));
        }
        if times.len() != values.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} time stamps for {} observation rows",
                times.len(),
                values.rows()
            )));
        }
        for w in times.windows(2) {
            if !(w[0].is_finite() && w[1].is_finite() && w[0] < w[1]) {
                return Err(Error::InvalidInput(format!(
                    "time index must be finite and strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(TimeSeriesPanel {
            node_names,
            dims,
            times,
            values,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    /// Column range of node `j` in `values`.
    pub fn node_columns(&self, j: usize) -> std::ops::Range<usize> {
        let start: usize = self.dims[..j].iter().sum();
        start..start + self.dims[j]
    }
}

/// Lagged design aligned so that row `r` targets time `lag + r` and its
/// features are drawn exclusively from times strictly before it.
#[derive(Clone, Debug, PartialEq)]
pub struct LagDesign {
    pub lag: usize,
    pub node_names: Vec<String>,
    pub dims: Vec<usize>,
    /// (T−lag) × (lag·Σd_j); node blocks in panel order, lag-major
    /// inside each block: all of x^j_{t−1}, then x^j_{t−2}, …
    pub x: DenseMatrix,
    /// (T−lag) × Σd_i, the target-time observations for every node.
    pub current: DenseMatrix,
}

impl LagDesign {
    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    /// Feature-column range of node `j`'s lagged history.
    pub fn feature_block(&self, j: usize) -> std::ops::Range<usize> {
        let start: usize = self.dims[..j].iter().map(|d| d * self.lag).sum();
        start..start + self.dims[j] * self.lag
    }

    /// Target matrix for node `i`: its observation columns at the
    /// target times.
    pub fn target_columns(&self, i: usize) -> DenseMatrix {
        let start: usize = self.dims[..i].iter().sum();
        let cols: Vec<usize> = (start..start + self.dims[i]).collect();
        self.current.select_cols(&cols)
    }

    /// First `n` rows (the earliest target times).
    pub fn head(&self, n: usize) -> LagDesign {
        assert!(n <= self.rows());
        LagDesign {
            lag: self.lag,
            node_names: self.node_names.clone(),
            dims: self.dims.clone(),
            x: self.x.slice_rows(0..n),
            current: self.current.slice_rows(0..n),
        }
    }
}

/// Builds the lagged design: one row per target time `t = lag … T−1`,
/// features `x^j_{t−1} … x^j_{t−lag}` per node.
pub fn lag_embed(panel: &TimeSeriesPanel, lag: usize) -> Result<LagDesign> {
    if lag == 0 {
        return Err(Error::InvalidInput("lag must be at least 1".into()));
    }
    let t_len = panel.len();
    if t_len <= lag {
        return Err(Error::InsufficientData(format!(
            "{t_len} observations cannot support lag {lag}"
        )));
    }
    let rows = t_len - lag;
    let width: usize = panel.dims.iter().map(|d| d * lag).sum();
    let total: usize = panel.dims.iter().sum();
    let mut x = DenseMatrix::zeros(rows, width);
    let mut current = DenseMatrix::zeros(rows, total);
    for r in 0..rows {
        let t = lag + r;
        let mut col = 0;
        for j in 0..panel.node_count() {
            let block = panel.node_columns(j);
            for s in 1..=lag {
                for c in block.clone() {
                    x[(r, col)] = panel.values[(t - s, c)];
                    col += 1;
                }
            }
        }
        for c in 0..total {
            current[(r, c)] = panel.values[(t, c)];
        }
    }
    Ok(LagDesign {
        lag,
        node_names: panel.node_names.clone(),
        dims: panel.dims.clone(),
        x,
        current,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKernelKind {
    /// One kernel per (node, grid multiplier); bandwidth = multiplier ×
    /// the node block's median pairwise distance.
    Gaussian,
    /// One linear kernel per node block; the grid is ignored.
    Linear,
}

/// Per-node scalar kernel dictionary over the design's feature blocks.
/// Returns the dictionary plus the flat-index → source-node map; the
/// forward map is `flat = j·|grid| + s` (Gaussian) or `flat = j`
/// (Linear).
pub fn build_node_dictionary(
    design: &LagDesign,
    bandwidth_grid: &[f64],
    kind: NodeKernelKind,
) -> Result<(KernelDictionary, Vec<usize>)> {
    if design.rows() == 0 {
        return Err(Error::InsufficientData("empty lagged design".into()));
    }
    let n = design.node_count();
    let (specs, sources) = match kind {
        NodeKernelKind::Gaussian => {
            if bandwidth_grid.is_empty() {
                return Err(Error::InvalidInput(
                    "Gaussian dictionaries need a nonempty bandwidth grid".into(),
                ));
            }
            let groups: Vec<Vec<usize>> =
                (0..n).map(|j| design.feature_block(j).collect()).collect();
            let specs = gaussian_dictionary_specs(&design.x, &groups, bandwidth_grid)?;
            let sources = (0..n)
                .flat_map(|j| std::iter::repeat(j).take(bandwidth_grid.len()))
                .collect();
            (specs, sources)
        }
        NodeKernelKind::Linear => {
            let specs: Vec<ScalarKernelSpec> = (0..n)
                .map(|j| ScalarKernelSpec::linear(design.feature_block(j).collect()))
                .collect();
            (specs, (0..n).collect())
        }
    };
    let dict = KernelDictionary::build(specs, &design.x)?;
    Ok((dict, sources))
}

/// Fits node `i`'s vector-valued model on the design: targets are the
/// node's observation columns centered over the design rows. The
/// dictionary must have been built on the same design.
pub fn fit_node(
    design: &LagDesign,
    node_index: usize,
    dict: &KernelDictionary,
    hp: &Hyperparams,
) -> Result<ModelState> {
    if node_index >= design.node_count() {
        return Err(Error::InvalidInput(format!(
            "node index {node_index} out of range for {} nodes",
            design.node_count()
        )));
    }
    let mut y = design.target_columns(node_index);
    for c in 0..y.cols() {
        let mean: f64 = (0..y.rows()).map(|r| y[(r, c)]).sum::<f64>() / y.rows() as f64;
        for r in 0..y.rows() {
            y[(r, c)] -= mean;
        }
    }
    fit(&y, dict, hp)
}

#[derive(Clone, Debug)]
pub struct CausalGraph {
    /// N×N nonnegative weights; entry (i, j) is the mass node i's model
    /// puts on node j's history — the edge j → i.
    pub g: DenseMatrix,
    pub node_names: Vec<String>,
    pub per_node_output_kernels: Vec<SymmetricMatrix>,
    pub per_node_holdout_rmse: Vec<f64>,
    pub per_node_termination: Vec<Termination>,
    pub per_node_traces: Vec<Vec<TraceRecord>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Cause node index (column of `g`).
    pub source: usize,
    /// Effect node index (row of `g`).
    pub target: usize,
    pub weight: f64,
}

impl CausalGraph {
    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    /// Off-diagonal edges with weight strictly above the threshold,
    /// ordered by (source, target). Self-loops are diagnostics, not
    /// reported edges.
    pub fn edges(&self, threshold: f64) -> Vec<Edge> {
        let n = self.node_count();
        let mut out = Vec::new();
        for source in 0..n {
            for target in 0..n {
                if source == target {
                    continue;
                }
                let weight = self.g[(target, source)];
                if weight > threshold {
                    out.push(Edge {
                        source,
                        target,
                        weight,
                    });
                }
            }
        }
        out
    }

    /// Each row divided by its total mass (rows with zero mass stay
    /// zero); diagonal included in the normalizer.
    pub fn row_normalized(&self) -> DenseMatrix {
        let n = self.node_count();
        let mut out = self.g.clone();
        for i in 0..n {
            let sum: f64 = (0..n).map(|j| out[(i, j)]).sum();
            if sum > 0.0 {
                for j in 0..n {
                    out[(i, j)] /= sum;
                }
            }
        }
        out
    }
}

/// Column statistics over the first `head` rows; spread has a floor so
/// constant columns end up centered instead of amplified.
fn head_column_stats(x: &DenseMatrix, head: usize) -> (Vec<f64>, Vec<f64>) {
    let mut means = vec![0.0; x.cols()];
    let mut stds = vec![0.0; x.cols()];
    for c in 0..x.cols() {
        let mean: f64 = (0..head).map(|r| x[(r, c)]).sum::<f64>() / head as f64;
        let var: f64 =
            (0..head).map(|r| (x[(r, c)] - mean).powi(2)).sum::<f64>() / head as f64;
        means[c] = mean;
        stds[c] = var.sqrt().max(1e-12);
    }
    (means, stds)
}

/// Full pipeline: lag-embed, split off a trailing holdout (one fifth of
/// the design rows, at least one), standardize features on the training
/// split, fit every node's model on the training split in parallel, and
/// assemble the weighted graph with per-node holdout RMSE.
pub fn infer_causal_graph(
    panel: &TimeSeriesPanel,
    lag: usize,
    bandwidth_grid: &[f64],
    kind: NodeKernelKind,
    hp: &Hyperparams,
) -> Result<CausalGraph> {
    hp.validate()?;
    let full = lag_embed(panel, lag)?;
    let rows = full.rows();
    let holdout = (rows / 5).max(1);
    if rows <= holdout {
        return Err(Error::InsufficientData(format!(
            "{rows} design rows leave nothing to train on after a {holdout}-row holdout"
        )));
    }
    let train_rows = rows - holdout;

    let (means, stds) = head_column_stats(&full.x, train_rows);
    let mut x_std = full.x.clone();
    for r in 0..rows {
        for c in 0..x_std.cols() {
            x_std[(r, c)] = (x_std[(r, c)] - means[c]) / stds[c];
        }
    }
    let std_design = LagDesign { x: x_std, ..full };
    let train = std_design.head(train_rows);
    let x_hold = std_design.x.slice_rows(train_rows..rows);

    let (dict, sources) = build_node_dictionary(&train, bandwidth_grid, kind)?;
    let n = panel.node_count();

    let fits: Vec<Result<(ModelState, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let state = fit_node(&train, i, &dict, hp)?;
            // holdout predictions in original units: add the training
            // means back before comparing
            let target_means: Vec<f64> = {
                let y = train.target_columns(i);
                (0..y.cols())
                    .map(|c| (0..y.rows()).map(|r| y[(r, c)]).sum::<f64>() / y.rows() as f64)
                    .collect()
            };
            let pred = predict_batch(&state, &dict, &train.x, &x_hold)?;
            let actual = std_design.target_columns(i);
            let mut sq = 0.0;
            for r in 0..holdout {
                for (c, &mean) in target_means.iter().enumerate() {
                    let d = pred[(r, c)] + mean - actual[(train_rows + r, c)];
                    sq += d * d;
                }
            }
            let rmse = (sq / (holdout * target_means.len()) as f64).sqrt();
            Ok((state, rmse))
        })
        .collect();

    let mut g = DenseMatrix::zeros(n, n);
    let mut kernels = Vec::with_capacity(n);
    let mut rmses = Vec::with_capacity(n);
    let mut terminations = Vec::with_capacity(n);
    let mut traces = Vec::with_capacity(n);
    for (i, item) in fits.into_iter().enumerate() {
        let (state, rmse) = item?;
        for (flat, &src) in sources.iter().enumerate() {
            g[(i, src)] += state.eta[flat];
        }
        kernels.push(state.l_out);
        rmses.push(rmse);
        terminations.push(state.termination);
        traces.push(state.objective_trace);
    }
    debug_assert!(g.data().iter().all(|&v| v.is_finite() && v >= 0.0));
    Ok(CausalGraph {
        g,
        node_names: panel.node_names.clone(),
        per_node_output_kernels: kernels,
        per_node_holdout_rmse: rmses,
        per_node_termination: terminations,
        per_node_traces: traces,
    })
}
