//! Run configuration, CSV ingestion, and artifact emission.
//!
//! Every emitted float uses Rust's shortest round-trip decimal encoding
//! (`{}`), so re-ingesting an emitted file reproduces the exact bits.
//! Parse failures report 1-based `path:line:column` positions, counting
//! the header as line 1.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::driver::{Hyperparams, Regularizer, SavedModel, TraceRecord};
use crate::error::{Error, Result};
use crate::granger::{CausalGraph, TimeSeriesPanel};
use crate::kernels::default_bandwidth_grid;
use crate::matrix::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Fit,
    Predict,
    Granger,
    Bound,
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Gaussian,
    Linear,
    Precomputed,
}

impl FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelChoice::Gaussian),
            "linear" => Ok(KernelChoice::Linear),
            "precomputed" => Ok(KernelChoice::Precomputed),
            other => Err(Error::Config(format!(
                "unknown kernel kind `{other}` (expected gaussian, linear, or precomputed)"
            ))),
        }
    }
}

/// One run's full settings: solver hyperparameters plus data plumbing.
/// A JSON file supplies any subset of the fields; missing ones take the
/// defaults below, and command-line flags override both.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskKind,
    pub lambda: f64,
    pub tau: f64,
    /// ℓp exponent; ignored when `mu` selects the elastic-net penalty.
    pub p: f64,
    pub mu: Option<f64>,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub fw_tol: f64,
    pub fw_max_iter: usize,
    pub outer_max_iter: usize,
    pub outer_tol: f64,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub targets: Vec<String>,
    pub model: Option<PathBuf>,
    pub grams: Vec<PathBuf>,
    pub lag: usize,
    pub kernel: KernelChoice,
    /// Bandwidth multipliers for the Gaussian dictionary; empty takes
    /// the built-in grid.
    pub bandwidths: Vec<f64>,
    /// Worker threads; 0 keeps the machine default.
    pub threads: usize,
    pub out: PathBuf,
    /// Edges at or below this weight are dropped from graph.dot.
    pub threshold: f64,
    /// Record wall-clock per block in trace.csv; off keeps emitted
    /// artifacts byte-reproducible across runs.
    pub timing: bool,
    pub row_normalize: bool,
    pub norm_budget: f64,
    pub m: usize,
    pub kappa: f64,
    pub l: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: TaskKind::Fit,
            lambda: 1e-3,
            tau: 1.0,
            p: 1.0,
            mu: None,
            cg_tol: 1e-8,
            cg_max_iter: 500,
            fw_tol: 1e-7,
            fw_max_iter: 1000,
            outer_max_iter: 50,
            outer_tol: 1e-6,
            seed: 0,
            input: None,
            targets: Vec::new(),
            model: None,
            grams: Vec::new(),
            lag: 2,
            kernel: KernelChoice::Gaussian,
            bandwidths: Vec::new(),
            threads: 0,
            out: PathBuf::from("."),
            threshold: 1e-3,
            timing: false,
            row_normalize: false,
            norm_budget: 1.0,
            m: 1,
            kappa: 1.0,
            l: 1,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn regularizer(&self) -> Regularizer {
        match self.mu {
            Some(mu) => Regularizer::ElasticNet { mu },
            None => Regularizer::LpSquared { p: self.p },
        }
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            lambda: self.lambda,
            tau: self.tau,
            regularizer: self.regularizer(),
            cg_rel_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            fw_tol: self.fw_tol,
            fw_max_iter: self.fw_max_iter,
            outer_max_iter: self.outer_max_iter,
            outer_rel_tol: self.outer_tol,
            seed: self.seed,
            ..Hyperparams::default()
        }
    }

    pub fn bandwidth_grid(&self) -> Vec<f64> {
        if self.bandwidths.is_empty() {
            default_bandwidth_grid()
        } else {
            self.bandwidths.clone()
        }
    }

    /// Checks that every file the active task reads exists up front, so
    /// a bad invocation fails before any expensive work.
    pub fn validate(&self) -> Result<()> {
        match self.task {
            TaskKind::Fit => {
                require_readable(self.input.as_deref(), "--input")?;
                if self.targets.is_empty() {
                    return Err(Error::Config(
                        "fit needs --targets (comma-separated column names)".into(),
                    ));
                }
                if self.kernel == KernelChoice::Precomputed && self.grams.is_empty() {
                    return Err(Error::Config(
                        "kernel `precomputed` needs --grams (comma-separated CSV paths)".into(),
                    ));
                }
                for gram in &self.grams {
                    require_readable(Some(gram), "--grams")?;
                }
            }
            TaskKind::Predict => {
                require_readable(self.model.as_deref(), "--model")?;
                require_readable(self.input.as_deref(), "--input")?;
            }
            TaskKind::Granger => {
                require_readable(self.input.as_deref(), "--input")?;
                if self.kernel == KernelChoice::Precomputed {
                    return Err(Error::Config(
                        "granger supports gaussian or linear kernels, not precomputed".into(),
                    ));
                }
            }
            TaskKind::Bound | TaskKind::Selftest => {}
        }
        Ok(())
    }
}

fn require_readable(path: Option<&Path>, flag: &str) -> Result<()> {
    let path = path.ok_or_else(|| Error::Config(format!("{flag} is required")))?;
    match fs::metadata(path) {
        Ok(meta) if meta.is_file() => Ok(()),
        Ok(_) => Err(Error::Config(format!(
            "{flag} `{}` is not a regular file",
            path.display()
        ))),
        Err(_) => Err(Error::Config(format!(
            "{flag} `{}` does not exist",
            path.display()
        ))),
    }
}

/// Raw CSV table: trimmed header names plus all data records, each with
/// its 1-based file line number.
fn read_csv_table(path: &Path) -> Result<(Vec<String>, Vec<(usize, csv::StringRecord)>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::parse(path, line, 1, e.to_string()))?;
        rows.push((line, record));
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 1, 1, "missing header row"));
    }
    let (_, header) = rows.remove(0);
    let names: Vec<String> = header.iter().map(str::to_owned).collect();
    let mut seen = HashSet::new();
    for (c, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::parse(path, 1, c + 1, "empty column name"));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::parse(
                path,
                1,
                c + 1,
                format!("duplicate column name `{name}`"),
            ));
        }
    }
    for (line, record) in &rows {
        if record.len() != names.len() {
            let col = if record.len() < names.len() {
                record.len() + 1
            } else {
                names.len() + 1
            };
            return Err(Error::parse(
                path,
                *line,
                col,
                format!("expected {} fields, found {}", names.len(), record.len()),
            ));
        }
    }
    Ok((names, rows))
}

fn parse_field(path: &Path, line: usize, col: usize, field: &str) -> Result<f64> {
    if field.is_empty() {
        return Err(Error::parse(path, line, col, "missing value"));
    }
    let value: f64 = field
        .parse()
        .map_err(|_| Error::parse(path, line, col, format!("not a number: `{field}`")))?;
    if !value.is_finite() {
        return Err(Error::parse(path, line, col, "value must be finite"));
    }
    Ok(value)
}

/// Reads a multivariate panel. The header's first column must be `t`
/// (strictly increasing); every other column belongs to the node named
/// by its prefix before the first dot (a dotless name is a scalar node).
/// Nodes are ordered by first appearance and their columns keep file
/// order, even if interleaved with other nodes' columns.
pub fn ingest_timeseries_csv(path: &Path) -> Result<TimeSeriesPanel> {
    let (names, rows) = read_csv_table(path)?;
    if names[0] != "t" {
        return Err(Error::parse(
            path,
            1,
            1,
            format!("first column must be `t`, got `{}`", names[0]),
        ));
    }
    if names.len() < 2 {
        return Err(Error::parse(path, 1, 1, "no value columns after `t`"));
    }
    let mut node_names: Vec<String> = Vec::new();
    let mut node_cols: Vec<Vec<usize>> = Vec::new();
    for (c, name) in names.iter().enumerate().skip(1) {
        let node = name.split('.').next().unwrap_or(name);
        if node.is_empty() {
            return Err(Error::parse(
                path,
                1,
                c + 1,
                format!("column `{name}` has an empty node prefix"),
            ));
        }
        match node_names.iter().position(|n| n == node) {
            Some(i) => node_cols[i].push(c),
            None => {
                node_names.push(node.to_owned());
                node_cols.push(vec![c]);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    // node-contiguous column order: all of node 0's columns, then node 1's, …
    let order: Vec<usize> = node_cols.iter().flatten().copied().collect();
    let dims: Vec<usize> = node_cols.iter().map(Vec::len).collect();
    let mut times = Vec::with_capacity(rows.len());
    let mut data = Vec::with_capacity(rows.len() * order.len());
    for (line, record) in &rows {
        let t = parse_field(path, *line, 1, &record[0])?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::parse(
                    path,
                    *line,
                    1,
                    format!("time index must be strictly increasing ({prev} then {t})"),
                ));
            }
        }
        times.push(t);
        for &c in &order {
            data.push(parse_field(path, *line, c + 1, &record[c])?);
        }
    }
    let values = DenseMatrix::new(rows.len(), order.len(), data)?;
    TimeSeriesPanel::new(node_names, dims, times, values)
}

/// Writes a panel in the layout `ingest_timeseries_csv` reads: header
/// `t,<node>.0,<node>.1,…`, one row per time step. Round-trips bit-exactly.
pub fn emit_timeseries_csv(panel: &TimeSeriesPanel, path: &Path) -> Result<()> {
    let mut text = String::from("t");
    for (j, name) in panel.node_names.iter().enumerate() {
        for d in 0..panel.dims[j] {
            text.push_str(&format!(",{name}.{d}"));
        }
    }
    text.push('\n');
    for r in 0..panel.len() {
        text.push_str(&format!("{}", panel.times[r]));
        for v in panel.values.row(r) {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Splits a headered table into features and named targets. `Y`'s
/// columns follow `target_columns` order; `X` keeps the remaining
/// columns in file order. Row order is preserved.
pub fn ingest_regression_csv(
    path: &Path,
    target_columns: &[String],
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (names, rows) = read_csv_table(path)?;
    let mut target_idx = Vec::with_capacity(target_columns.len());
    for target in target_columns {
        match names.iter().position(|n| n == target) {
            Some(i) => target_idx.push(i),
            None => {
                return Err(Error::Config(format!(
                    "target column `{target}` not found in {}",
                    path.display()
                )))
            }
        }
    }
    let feature_idx: Vec<usize> =
        (0..names.len()).filter(|i| !target_idx.contains(i)).collect();
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    if feature_idx.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{}: every column is a target; no feature columns remain",
            path.display()
        )));
    }
    let mut x = Vec::with_capacity(rows.len() * feature_idx.len());
    let mut y = Vec::with_capacity(rows.len() * target_idx.len());
    for (line, record) in &rows {
        for &c in &feature_idx {
            x.push(parse_field(path, *line, c + 1, &record[c])?);
        }
        for &c in &target_idx {
            y.push(parse_field(path, *line, c + 1, &record[c])?);
        }
    }
    Ok((
        DenseMatrix::new(rows.len(), feature_idx.len(), x)?,
        DenseMatrix::new(rows.len(), target_idx.len(), y)?,
    ))
}

/// Reads a headerless numeric matrix (e.g. a precomputed Gram). All
/// rows must have the same length; positions are 1-based from line 1.
pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::parse(path, line, 1, e.to_string()))?;
        let width = *cols.get_or_insert(record.len());
        if record.len() != width {
            let col = record.len().min(width) + 1;
            return Err(Error::parse(
                path,
                line,
                col,
                format!("expected {} fields, found {}", width, record.len()),
            ));
        }
        for (c, field) in record.iter().enumerate() {
            data.push(parse_field(path, line, c + 1, field)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::InsufficientData(format!(
            "{}: empty matrix file",
            path.display()
        )));
    }
    DenseMatrix::new(rows, cols.unwrap_or(0), data)
}

/// What a finished run hands to `emit_outputs`.
#[derive(Clone, Debug)]
pub enum RunOutputs {
    Fit {
        model: SavedModel,
        trace: Vec<TraceRecord>,
    },
    Granger {
        graph: CausalGraph,
    },
    Predictions {
        target_names: Vec<String>,
        values: DenseMatrix,
    },
}

fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

fn dot_quote(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

fn write_artifact(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn trace_csv(records: &[(String, &TraceRecord)], timing: bool) -> String {
    let mut text = String::from("outer_iter,block_tag,objective,elapsed_ms\n");
    for (tag, rec) in records {
        let elapsed = if timing { rec.elapsed_ms } else { 0.0 };
        text.push_str(&format!(
            "{},{},{},{}\n",
            rec.outer_iter,
            csv_quote(tag),
            rec.objective,
            elapsed
        ));
    }
    text
}

fn matrix_csv(m: &DenseMatrix) -> String {
    let mut text = String::new();
    for r in 0..m.rows() {
        for (c, v) in m.row(r).iter().enumerate() {
            if c > 0 {
                text.push(',');
            }
            text.push_str(&format!("{v}"));
        }
        text.push('\n');
    }
    text
}

fn graph_dot(graph: &CausalGraph, threshold: f64) -> String {
    let mut text = String::from("digraph granger {\n");
    for name in &graph.node_names {
        text.push_str(&format!("  {};\n", dot_quote(name)));
    }
    for edge in graph.edges(threshold) {
        text.push_str(&format!(
            "  {} -> {} [label=\"{}\"];\n",
            dot_quote(&graph.node_names[edge.source]),
            dot_quote(&graph.node_names[edge.target]),
            edge.weight
        ));
    }
    text.push_str("}\n");
    text
}

/// Writes the run's artifacts into `config.out` (created if missing)
/// and returns the paths written.
///
/// - fit → model.json, trace.csv
/// - granger → adjacency.csv, graph.dot, trace.csv, L1.csv … LN.csv
///   (and adjacency_row_normalized.csv when requested)
/// - predict → predictions.csv
pub fn emit_outputs(results: &RunOutputs, config: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    let dir = &config.out;
    let mut written = Vec::new();
    match results {
        RunOutputs::Fit { model, trace } => {
            let mut json = model.to_json()?;
            json.push('\n');
            written.push(write_artifact(dir, "model.json", &json)?);
            let rows: Vec<(String, &TraceRecord)> =
                trace.iter().map(|r| (r.block.clone(), r)).collect();
            written.push(write_artifact(dir, "trace.csv", &trace_csv(&rows, config.timing))?);
        }
        RunOutputs::Granger { graph } => {
            let header: Vec<String> =
                graph.node_names.iter().map(|n| csv_quote(n)).collect();
            let mut adjacency = header.join(",");
            adjacency.push('\n');
            adjacency.push_str(&matrix_csv(&graph.g));
            written.push(write_artifact(dir, "adjacency.csv", &adjacency)?);
            if config.row_normalize {
                let mut normalized = header.join(",");
                normalized.push('\n');
                normalized.push_str(&matrix_csv(&graph.row_normalized()));
                written.push(write_artifact(
                    dir,
                    "adjacency_row_normalized.csv",
                    &normalized,
                )?);
            }
            written.push(write_artifact(
                dir,
                "graph.dot",
                &graph_dot(graph, config.threshold),
            )?);
            let mut rows: Vec<(String, &TraceRecord)> = Vec::new();
            for (i, trace) in graph.per_node_traces.iter().enumerate() {
                for rec in trace {
                    rows.push((format!("{}:{}", graph.node_names[i], rec.block), rec));
                }
            }
            written.push(write_artifact(dir, "trace.csv", &trace_csv(&rows, config.timing))?);
            for (i, l_out) in graph.per_node_output_kernels.iter().enumerate() {
                written.push(write_artifact(
                    dir,
                    &format!("L{}.csv", i + 1),
                    &matrix_csv(&l_out.to_dense()),
                )?);
            }
        }
        RunOutputs::Predictions {
            target_names,
            values,
        } => {
            let header: Vec<String> = target_names.iter().map(|n| csv_quote(n)).collect();
            let mut text = header.join(",");
            text.push('\n');
            text.push_str(&matrix_csv(values));
            written.push(write_artifact(dir, "predictions.csv", &text)?);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{fit, Termination};
    use crate::granger::infer_causal_graph;
    use crate::kernels::{KernelDictionary, ScalarKernelSpec};
    use crate::matrix::SymmetricMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write as _;

    fn temp_csv(name: &str, contents: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn timeseries_header_grouping_and_row_count() {
        let (_d, path) = temp_csv(
            "panel.csv",
            "t,a.0,a.1,b.0\n0,1,2,3\n1,4,5,6\n2,7,8,9\n3,10,11,12\n",
        );
        let panel = ingest_timeseries_csv(&path).unwrap();
        assert_eq!(panel.node_names, vec!["a", "b"]);
        assert_eq!(panel.dims, vec![2, 1]);
        assert_eq!(panel.len(), 4);
        assert_eq!(panel.values[(1, 2)], 6.0);
        assert_eq!(panel.times, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn interleaved_columns_regroup_and_dotless_names_are_scalar_nodes() {
        // a's columns stay in file order even though b interrupts them
        let (_d, path) = temp_csv("panel.csv", "t,a.0,b,a.1\n0,1,2,3\n1,4,5,6\n");
        let panel = ingest_timeseries_csv(&path).unwrap();
        assert_eq!(panel.node_names, vec!["a", "b"]);
        assert_eq!(panel.dims, vec![2, 1]);
        // row 0 reordered to (a.0, a.1, b)
        assert_eq!(panel.values.row(0), &[1.0, 3.0, 2.0]);
        assert_eq!(panel.values.row(1), &[4.0, 6.0, 5.0]);
    }

    #[test]
    fn timeseries_round_trips_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let rows = 23;
        let values = DenseMatrix::new(
            rows,
            3,
            (0..rows * 3).map(|_| rng.gen_range(-4.0..4.0)).collect(),
        )
        .unwrap();
        let times: Vec<f64> = (0..rows).map(|r| r as f64 * 0.31 + rng.gen::<f64>() * 0.2).collect();
        let panel = TimeSeriesPanel::new(
            vec!["u".into(), "v".into()],
            vec![2, 1],
            times,
            values,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roundtrip.csv");
        emit_timeseries_csv(&panel, &path).unwrap();
        let back = ingest_timeseries_csv(&path).unwrap();
        assert_eq!(back.node_names, panel.node_names);
        assert_eq!(back.dims, panel.dims);
        for (a, b) in back.times.iter().zip(&panel.times) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in back.values.data().iter().zip(panel.values.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn timeseries_parse_errors_carry_positions() {
        let (_d, dup) = temp_csv("dup.csv", "t,a.0,a.0\n0,1,2\n");
        let err = ingest_timeseries_csv(&dup).unwrap_err().to_string();
        assert!(err.starts_with("parse: "), "{err}");
        assert!(err.contains(":1:3:"), "{err}");
        assert!(err.contains("duplicate column name"), "{err}");

        let (_d, order) = temp_csv("order.csv", "t,a\n0,1\n2,2\n1,3\n");
        let err = ingest_timeseries_csv(&order).unwrap_err().to_string();
        assert!(err.contains(":4:1:"), "{err}");
        assert!(err.contains("strictly increasing"), "{err}");

        let (_d, missing) = temp_csv("missing.csv", "t,a\n0,1\n1,\n");
        let err = ingest_timeseries_csv(&missing).unwrap_err().to_string();
        assert!(err.contains(":3:2:"), "{err}");
        assert!(err.contains("missing value"), "{err}");

        let (_d, ragged) = temp_csv("ragged.csv", "t,a,b\n0,1,2\n1,3\n");
        let err = ingest_timeseries_csv(&ragged).unwrap_err().to_string();
        assert!(err.contains(":3:3:"), "{err}");
        assert!(err.contains("expected 3 fields, found 2"), "{err}");

        let (_d, word) = temp_csv("word.csv", "t,a\n0,one\n");
        let err = ingest_timeseries_csv(&word).unwrap_err().to_string();
        assert!(err.contains(":2:2:"), "{err}");
        assert!(err.contains("not a number"), "{err}");
    }

    #[test]
    fn regression_split_by_target_names() {
        let (_d, path) = temp_csv(
            "reg.csv",
            "f0,y,f1\n1,10,2\n3,20,4\n",
        );
        let (x, y) = ingest_regression_csv(&path, &["y".to_owned()]).unwrap();
        assert_eq!((x.rows(), x.cols()), (2, 2));
        assert_eq!((y.rows(), y.cols()), (2, 1));
        assert_eq!(x.row(0), &[1.0, 2.0]);
        assert_eq!(x.row(1), &[3.0, 4.0]);
        assert_eq!(y.row(0), &[10.0]);
        assert_eq!(y.row(1), &[20.0]);

        // target order follows the request, not the file
        let (x2, y2) =
            ingest_regression_csv(&path, &["f1".to_owned(), "y".to_owned()]).unwrap();
        assert_eq!(x2.cols(), 1);
        assert_eq!(y2.row(0), &[2.0, 10.0]);
    }

    #[test]
    fn regression_rejects_unknown_target_and_empty_file() {
        let (_d, path) = temp_csv("reg.csv", "f0,y\n1,2\n");
        let err = ingest_regression_csv(&path, &["z".to_owned()]).unwrap_err();
        assert!(err.to_string().starts_with("config: "), "{err}");

        let (_d, empty) = temp_csv("empty.csv", "");
        let err = ingest_regression_csv(&empty, &["y".to_owned()]).unwrap_err();
        assert!(err.to_string().starts_with("parse: "), "{err}");

        let (_d, headeronly) = temp_csv("headeronly.csv", "f0,y\n");
        let err = ingest_regression_csv(&headeronly, &["y".to_owned()]).unwrap_err();
        assert!(err.to_string().starts_with("insufficient-data: "), "{err}");
    }

    #[test]
    fn matrix_csv_reads_headerless_grid() {
        let (_d, path) = temp_csv("gram.csv", "1,0.5\n0.5,1\n");
        let m = read_matrix_csv(&path).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m[(0, 1)], 0.5);

        let (_d, ragged) = temp_csv("ragged.csv", "1,2\n3\n");
        let err = read_matrix_csv(&ragged).unwrap_err().to_string();
        assert!(err.contains(":2:2:"), "{err}");
    }

    #[test]
    fn config_defaults_fill_missing_fields_and_flags_parse() {
        let (_d, path) = temp_csv("cfg.json", r#"{"lambda": 0.5, "kernel": "linear"}"#);
        let cfg = RunConfig::from_json_file(&path).unwrap();
        assert_eq!(cfg.lambda, 0.5);
        assert_eq!(cfg.kernel, KernelChoice::Linear);
        assert_eq!(cfg.tau, 1.0);
        assert_eq!(cfg.cg_max_iter, 500);
        assert!("precomputed".parse::<KernelChoice>().unwrap() == KernelChoice::Precomputed);
        assert!("rbf".parse::<KernelChoice>().is_err());

        let (_d, bad) = temp_csv("bad.json", r#"{"lambduh": 0.5}"#);
        let err = RunConfig::from_json_file(&bad).unwrap_err();
        assert!(err.to_string().starts_with("config: "), "{err}");
    }

    #[test]
    fn empty_graph_dot_lists_nodes_without_edges() {
        let graph = CausalGraph {
            g: DenseMatrix::zeros(2, 2),
            node_names: vec!["a".into(), "b".into()],
            per_node_output_kernels: vec![SymmetricMatrix::identity(1); 2],
            per_node_holdout_rmse: vec![0.0; 2],
            per_node_termination: vec![Termination::Converged; 2],
            per_node_traces: vec![Vec::new(); 2],
        };
        let dot = graph_dot(&graph, 1e-3);
        assert!(dot.contains("\"a\";"));
        assert!(dot.contains("\"b\";"));
        assert!(!dot.contains("->"));
    }

    #[test]
    fn granger_artifacts_round_trip_adjacency_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = 80;
        let mut a = vec![0.0f64; t];
        let mut b = vec![0.0f64; t];
        for i in 1..t {
            a[i] = 0.9 * a[i - 1] + 0.3 * rng.gen_range(-1.0..1.0);
            b[i] = 0.8 * a[i - 1] + 0.05 * rng.gen_range(-1.0..1.0);
        }
        let mut data = Vec::with_capacity(2 * t);
        for i in 0..t {
            data.push(a[i]);
            data.push(b[i]);
        }
        let panel = TimeSeriesPanel::new(
            vec!["a".into(), "b".into()],
            vec![1, 1],
            (0..t).map(|i| i as f64).collect(),
            DenseMatrix::new(t, 2, data).unwrap(),
        )
        .unwrap();
        let hp = Hyperparams {
            lambda: 3e-2,
            ..Hyperparams::default()
        };
        let graph =
            infer_causal_graph(&panel, 2, &[1.0], crate::granger::NodeKernelKind::Linear, &hp)
                .unwrap();

        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            out: dir.path().to_path_buf(),
            row_normalize: true,
            ..RunConfig::default()
        };
        let outputs = RunOutputs::Granger {
            graph: graph.clone(),
        };
        let written = emit_outputs(&outputs, &config).unwrap();
        let expected = ["adjacency.csv", "adjacency_row_normalized.csv", "graph.dot", "trace.csv", "L1.csv", "L2.csv"];
        assert_eq!(written.len(), expected.len());
        for name in expected {
            assert!(dir.path().join(name).is_file(), "missing {name}");
        }

        let text = fs::read_to_string(dir.path().join("adjacency.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("a,b"));
        for (i, line) in lines.enumerate() {
            for (j, field) in line.split(',').enumerate() {
                let parsed: f64 = field.parse().unwrap();
                assert_eq!(parsed.to_bits(), graph.g[(i, j)].to_bits(), "({i},{j})");
            }
        }

        // trace rows: header + one per recorded block across both nodes
        let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        let rows: usize = graph.per_node_traces.iter().map(Vec::len).sum();
        assert_eq!(trace.lines().count(), rows + 1);
        assert!(trace.lines().nth(1).unwrap().starts_with("0,a:init,"));
        // timing off zeroes the elapsed column
        for line in trace.lines().skip(1) {
            assert!(line.ends_with(",0"), "{line}");
        }
    }

    #[test]
    fn fit_trace_row_count_matches_recorded_trace() {
        let x = DenseMatrix::new(8, 1, (0..8).map(|i| i as f64 / 4.0).collect()).unwrap();
        let y = DenseMatrix::new(8, 1, (0..8).map(|i| (i as f64 / 4.0).sin()).collect()).unwrap();
        let specs = vec![ScalarKernelSpec::gaussian(0.7, vec![])];
        let dict = KernelDictionary::build(specs.clone(), &x).unwrap();
        let hp = Hyperparams::default();
        let state = fit(&y, &dict, &hp).unwrap();
        let model = SavedModel::from_state(&state, &specs, &hp, &x, &["y".to_owned()]);

        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            out: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let written = emit_outputs(
            &RunOutputs::Fit {
                model,
                trace: state.objective_trace.clone(),
            },
            &config,
        )
        .unwrap();
        assert_eq!(written.len(), 2);
        let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert_eq!(trace.lines().count(), state.objective_trace.len() + 1);
        assert_eq!(
            trace.lines().next(),
            Some("outer_iter,block_tag,objective,elapsed_ms")
        );

        // the stored model reloads and verifies its fingerprint
        let json = fs::read_to_string(dir.path().join("model.json")).unwrap();
        let reloaded = SavedModel::from_json(&json).unwrap();
        assert_eq!(reloaded.target_names, vec!["y".to_owned()]);
    }

    #[test]
    fn validate_checks_paths_and_required_flags() {
        let cfg = RunConfig {
            task: TaskKind::Fit,
            input: Some(PathBuf::from("/nonexistent/data.csv")),
            targets: vec!["y".into()],
            ..RunConfig::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.starts_with("config: "), "{err}");
        assert!(err.contains("does not exist"), "{err}");

        let cfg = RunConfig {
            task: TaskKind::Bound,
            ..RunConfig::default()
        };
        cfg.validate().unwrap();

        let (_d, path) = temp_csv("in.csv", "t,a\n0,1\n");
        let cfg = RunConfig {
            task: TaskKind::Granger,
            input: Some(path),
            kernel: KernelChoice::Precomputed,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
