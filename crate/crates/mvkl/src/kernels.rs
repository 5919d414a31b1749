//! Scalar kernel dictionary: base kernels on feature subsets, cached
//! Gram matrices, and nonnegative weighted combinations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{extremal_eigenvector, min_eigenvalue, DenseMatrix, SymmetricMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelKind {
    Gaussian { bandwidth: f64 },
    Linear,
    /// Caller-supplied Gram over the training sample. Cannot be evaluated
    /// at new points, so prediction rejects dictionaries containing one.
    Precomputed { gram: SymmetricMatrix },
}

/// A base kernel restricted to a feature subset (empty = all features).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarKernelSpec {
    pub kind: KernelKind,
    pub feature_subset: Vec<usize>,
}

impl ScalarKernelSpec {
    pub fn gaussian(bandwidth: f64, feature_subset: Vec<usize>) -> Self {
        ScalarKernelSpec {
            kind: KernelKind::Gaussian { bandwidth },
            feature_subset,
        }
    }

    pub fn linear(feature_subset: Vec<usize>) -> Self {
        ScalarKernelSpec {
            kind: KernelKind::Linear,
            feature_subset,
        }
    }

    pub fn precomputed(gram: SymmetricMatrix) -> Self {
        ScalarKernelSpec {
            kind: KernelKind::Precomputed { gram },
            feature_subset: Vec::new(),
        }
    }

    fn validate(&self, feature_dim: usize) -> Result<()> {
        match &self.kind {
            KernelKind::Gaussian { bandwidth } => {
                if !(bandwidth.is_finite() && *bandwidth > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "Gaussian bandwidth must be positive, got {bandwidth}"
                    )));
                }
            }
            KernelKind::Linear | KernelKind::Precomputed { .. } => {}
        }
        if let Some(&bad) = self.feature_subset.iter().find(|&&f| f >= feature_dim) {
            return Err(Error::InvalidInput(format!(
                "feature index {bad} out of range for {feature_dim} features"
            )));
        }
        Ok(())
    }

    /// Pointwise evaluation; `Precomputed` has no closed form.
    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        let sq = |acc: f64, d: f64| acc + d * d;
        match &self.kind {
            KernelKind::Gaussian { bandwidth } => {
                let d2 = if self.feature_subset.is_empty() {
                    x.iter().zip(z).map(|(a, b)| a - b).fold(0.0, sq)
                } else {
                    self.feature_subset
                        .iter()
                        .map(|&f| x[f] - z[f])
                        .fold(0.0, sq)
                };
                Ok((-d2 / (2.0 * bandwidth * bandwidth)).exp())
            }
            KernelKind::Linear => {
                let dot = if self.feature_subset.is_empty() {
                    x.iter().zip(z).map(|(a, b)| a * b).sum()
                } else {
                    self.feature_subset.iter().map(|&f| x[f] * z[f]).sum()
                };
                Ok(dot)
            }
            KernelKind::Precomputed { .. } => Err(Error::UnsupportedPrediction(
                "precomputed kernels cannot be evaluated at new points".into(),
            )),
        }
    }
}

/// Gram matrix of one kernel over the sample rows of `x`.
pub fn gram_matrix(spec: &ScalarKernelSpec, x: &DenseMatrix) -> Result<SymmetricMatrix> {
    let l = x.rows();
    if l == 0 {
        return Err(Error::InvalidInput("empty sample list".into()));
    }
    spec.validate(x.cols())?;
    match &spec.kind {
        KernelKind::Precomputed { gram } => {
            if gram.dim() != l {
                return Err(Error::DimensionMismatch(format!(
                    "precomputed Gram is {}x{} but the sample has {l} rows",
                    gram.dim(),
                    gram.dim()
                )));
            }
            Ok(gram.clone())
        }
        _ => SymmetricMatrix::from_fn(l, |i, j| {
            spec.eval(x.row(i), x.row(j)).expect("closed-form kernel")
        }),
    }
}

/// Kernel dictionary with cached Grams over a fixed training sample.
#[derive(Clone, Debug)]
pub struct KernelDictionary {
    specs: Vec<ScalarKernelSpec>,
    grams: Vec<SymmetricMatrix>,
    low_rank: Option<Vec<DenseMatrix>>,
    sample_len: usize,
}

impl KernelDictionary {
    /// Evaluates and caches all Grams. Precomputed entries get a PSD
    /// check (closed-form kernels are PSD by construction).
    pub fn build(specs: Vec<ScalarKernelSpec>, x: &DenseMatrix) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidInput("empty kernel dictionary".into()));
        }
        let l = x.rows();
        if l == 0 {
            return Err(Error::InvalidInput("empty sample list".into()));
        }
        let mut grams = Vec::with_capacity(specs.len());
        for (j, spec) in specs.iter().enumerate() {
            let gram = gram_matrix(spec, x)?;
            if matches!(spec.kind, KernelKind::Precomputed { .. }) {
                check_psd(&gram).map_err(|e| match e {
                    Error::InvalidInput(msg) => {
                        Error::InvalidInput(format!("kernel {j}: {msg}"))
                    }
                    other => other,
                })?;
            }
            grams.push(gram);
        }
        Ok(KernelDictionary {
            specs,
            grams,
            low_rank: None,
            sample_len: l,
        })
    }

    /// Attaches low-rank factors `Z_j` with `Z_j Z_jᵀ ≈ K_j`; each factor
    /// must reproduce its Gram to 1e-8 relative Frobenius error.
    pub fn with_low_rank(mut self, factors: Vec<DenseMatrix>) -> Result<Self> {
        if factors.len() != self.specs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} factors for {} kernels",
                factors.len(),
                self.specs.len()
            )));
        }
        for (j, (z, k)) in factors.iter().zip(&self.grams).enumerate() {
            if z.rows() != self.sample_len {
                return Err(Error::DimensionMismatch(format!(
                    "factor {j} has {} rows, expected {}",
                    z.rows(),
                    self.sample_len
                )));
            }
            let zzt = z.mul(&z.transpose());
            let err = zzt.sub(&k.to_dense()).frob_norm();
            if err > 1e-8 * k.frob_norm().max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidInput(format!(
                    "factor {j} reproduces its Gram with relative error {:.3e}",
                    err / k.frob_norm().max(f64::MIN_POSITIVE)
                )));
            }
        }
        self.low_rank = Some(factors);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        self.sample_len
    }

    pub fn specs(&self) -> &[ScalarKernelSpec] {
        &self.specs
    }

    pub fn gram(&self, j: usize) -> &SymmetricMatrix {
        &self.grams[j]
    }

    pub fn has_low_rank(&self) -> bool {
        self.low_rank.is_some()
    }

    pub fn has_precomputed(&self) -> bool {
        self.specs
            .iter()
            .any(|s| matches!(s.kind, KernelKind::Precomputed { .. }))
    }
}

fn check_psd(gram: &SymmetricMatrix) -> Result<()> {
    let scale = gram.frob_norm().max(f64::MIN_POSITIVE);
    let min = if gram.dim() <= 128 {
        min_eigenvalue(gram)?
    } else {
        extremal_eigenvector(gram, 1e-9, 60 * gram.dim())?.value
    };
    if min < -1e-8 * scale {
        return Err(Error::InvalidInput(format!(
            "precomputed Gram has eigenvalue {min:.3e}, below the PSD tolerance"
        )));
    }
    Ok(())
}

/// Operators that can left-multiply a dense matrix; the conjugate
/// gradient Sylvester solver is generic over this.
pub trait KernelApply {
    fn dim(&self) -> usize;
    fn apply(&self, m: &DenseMatrix) -> DenseMatrix;
}

impl KernelApply for SymmetricMatrix {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, m: &DenseMatrix) -> DenseMatrix {
        self.mul_dense(m)
    }
}

/// A dictionary paired with nonnegative combination weights.
#[derive(Clone, Debug)]
pub struct WeightedKernel<'a> {
    dict: &'a KernelDictionary,
    eta: &'a [f64],
}

impl<'a> WeightedKernel<'a> {
    pub fn new(dict: &'a KernelDictionary, eta: &'a [f64]) -> Result<Self> {
        if eta.len() != dict.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} kernels",
                eta.len(),
                dict.len()
            )));
        }
        if let Some(&bad) = eta.iter().find(|&&e| !(e.is_finite() && e >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "kernel weights must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(WeightedKernel { dict, eta })
    }

    pub fn dictionary(&self) -> &KernelDictionary {
        self.dict
    }

    pub fn eta(&self) -> &[f64] {
        self.eta
    }

    /// `Σ_j η_j K_j` materialized. Zero-weight kernels are skipped.
    pub fn weighted_gram(&self) -> SymmetricMatrix {
        let mut out = SymmetricMatrix::zeros(self.dict.sample_len);
        for (j, &w) in self.eta.iter().enumerate() {
            if w != 0.0 {
                out.add_scaled(w, &self.dict.grams[j]);
            }
        }
        out
    }

    /// Evaluates the weighted kernel between a new point and every
    /// training row. Errors if the dictionary holds a precomputed Gram.
    pub fn cross_row(&self, x_train: &DenseMatrix, x_new: &[f64]) -> Result<Vec<f64>> {
        if self.dict.has_precomputed() {
            return Err(Error::UnsupportedPrediction(
                "dictionary contains a precomputed kernel".into(),
            ));
        }
        if x_new.len() != x_train.cols() {
            return Err(Error::DimensionMismatch(format!(
                "query point has {} features, training sample has {}",
                x_new.len(),
                x_train.cols()
            )));
        }
        let mut out = vec![0.0; x_train.rows()];
        for (j, &w) in self.eta.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let spec = &self.dict.specs[j];
            for (i, o) in out.iter_mut().enumerate() {
                *o += w * spec.eval(x_new, x_train.row(i))?;
            }
        }
        Ok(out)
    }
}

impl KernelApply for WeightedKernel<'_> {
    fn dim(&self) -> usize {
        self.dict.sample_len
    }

    /// `K_η M`. With low-rank factors this is `Σ η_j Z_j (Z_jᵀ M)` and
    /// never materializes `K_η`.
    fn apply(&self, m: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.dict.sample_len, m.cols());
        match &self.dict.low_rank {
            Some(factors) => {
                for (j, &w) in self.eta.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let inner = factors[j].t_mul(m);
                    let mut term = factors[j].mul(&inner);
                    term.scale(w);
                    out.axpy(1.0, &term);
                }
            }
            None => {
                for (j, &w) in self.eta.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    out.axpy(w, &self.dict.grams[j].mul_dense(m));
                }
            }
        }
        out
    }
}

/// Median of all pairwise Euclidean distances over the feature subset
/// (empty subset = all features). Returns 0 for fewer than two rows.
pub fn median_pairwise_distance(x: &DenseMatrix, subset: &[usize]) -> f64 {
    let l = x.rows();
    if l < 2 {
        return 0.0;
    }
    let cols: Vec<usize> = if subset.is_empty() {
        (0..x.cols()).collect()
    } else {
        subset.to_vec()
    };
    let mut dists = Vec::with_capacity(l * (l - 1) / 2);
    for i in 0..l {
        for j in (i + 1)..l {
            let d2: f64 = cols
                .iter()
                .map(|&c| {
                    let d = x[(i, c)] - x[(j, c)];
                    d * d
                })
                .sum();
            dists.push(d2.sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let n = dists.len();
    if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    }
}

/// Thirteen log-spaced bandwidth multipliers covering 2⁻³ … 2³.
pub fn default_bandwidth_grid() -> Vec<f64> {
    (0..13).map(|i| 2f64.powf(-3.0 + 0.5 * i as f64)).collect()
}

/// Gaussian specs per feature group: one kernel per (group, multiplier),
/// bandwidth = multiplier × the group's median pairwise distance (with a
/// fallback of 1 when the group is degenerate).
pub fn gaussian_dictionary_specs(
    x: &DenseMatrix,
    groups: &[Vec<usize>],
    grid: &[f64],
) -> Result<Vec<ScalarKernelSpec>> {
    if groups.is_empty() || grid.is_empty() {
        return Err(Error::InvalidInput(
            "need at least one feature group and one grid multiplier".into(),
        ));
    }
    let mut specs = Vec::with_capacity(groups.len() * grid.len());
    for group in groups {
        let mut med = median_pairwise_distance(x, group);
        if !(med.is_finite() && med > 0.0) {
            med = 1.0;
        }
        for &mult in grid {
            if !(mult.is_finite() && mult > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "bandwidth multiplier must be positive, got {mult}"
                )));
            }
            specs.push(ScalarKernelSpec::gaussian(mult * med, group.clone()));
        }
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseMatrix {
        DenseMatrix::new(3, 2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 0.0]).unwrap()
    }

    #[test]
    fn gaussian_gram_has_unit_diagonal() {
        let spec = ScalarKernelSpec::gaussian(0.7, vec![]);
        let k = gram_matrix(&spec, &sample()).unwrap();
        for i in 0..3 {
            assert_eq!(k.get(i, i), 1.0);
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!(k.get(i, j) > 0.0 && k.get(i, j) <= 1.0);
            }
        }
    }

    #[test]
    fn gaussian_off_diagonal_hand_value() {
        // points (0,0) and (1,1): squared distance 2, bandwidth 1 -> exp(-1)
        let spec = ScalarKernelSpec::gaussian(1.0, vec![]);
        let k = gram_matrix(&spec, &sample()).unwrap();
        assert!((k.get(0, 1) - (-1.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn linear_gram_is_xxt() {
        let x = sample();
        let spec = ScalarKernelSpec::linear(vec![]);
        let k = gram_matrix(&spec, &x).unwrap();
        let want = x.mul(&x.transpose());
        assert!(k.to_dense().sub(&want).frob_norm() < 1e-14);
    }

    #[test]
    fn feature_subset_restricts_evaluation() {
        let x = sample();
        let spec = ScalarKernelSpec::linear(vec![1]);
        let k = gram_matrix(&spec, &x).unwrap();
        // only the second feature: rows are 0, 1, 0
        assert_eq!(k.get(1, 1), 1.0);
        assert_eq!(k.get(0, 2), 0.0);
        assert_eq!(k.get(2, 2), 0.0);
    }

    #[test]
    fn out_of_range_subset_rejected() {
        let spec = ScalarKernelSpec::gaussian(1.0, vec![5]);
        assert!(matches!(
            gram_matrix(&spec, &sample()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn nonpositive_bandwidth_rejected() {
        let spec = ScalarKernelSpec::gaussian(0.0, vec![]);
        assert!(gram_matrix(&spec, &sample()).is_err());
    }

    #[test]
    fn empty_sample_rejected() {
        let x = DenseMatrix::zeros(0, 2);
        let spec = ScalarKernelSpec::linear(vec![]);
        assert!(gram_matrix(&spec, &x).is_err());
    }

    #[test]
    fn duplicate_points_keep_gram_psd() {
        let x = DenseMatrix::new(3, 1, vec![0.5, 0.5, 2.0]).unwrap();
        let spec = ScalarKernelSpec::gaussian(1.0, vec![]);
        let k = gram_matrix(&spec, &x).unwrap();
        let min = min_eigenvalue(&k).unwrap();
        assert!(min >= -1e-8 * k.frob_norm());
    }

    #[test]
    fn weighted_gram_is_linear_combination() {
        let x = sample();
        let dict = KernelDictionary::build(
            vec![
                ScalarKernelSpec::gaussian(1.0, vec![]),
                ScalarKernelSpec::linear(vec![]),
            ],
            &x,
        )
        .unwrap();
        let eta = [2.0, 0.5];
        let wk = WeightedKernel::new(&dict, &eta).unwrap();
        let got = wk.weighted_gram();
        for i in 0..3 {
            for j in 0..3 {
                let want = 2.0 * dict.gram(0).get(i, j) + 0.5 * dict.gram(1).get(i, j);
                assert!((got.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn apply_matches_materialized_gram() {
        let x = sample();
        let dict = KernelDictionary::build(
            vec![
                ScalarKernelSpec::gaussian(0.8, vec![0]),
                ScalarKernelSpec::gaussian(2.0, vec![]),
            ],
            &x,
        )
        .unwrap();
        let eta = [0.3, 0.7];
        let wk = WeightedKernel::new(&dict, &eta).unwrap();
        let m = DenseMatrix::new(3, 2, vec![1.0, 0.0, -1.0, 2.0, 0.5, 0.5]).unwrap();
        let got = wk.apply(&m);
        let want = wk.weighted_gram().mul_dense(&m);
        assert!(got.sub(&want).frob_norm() < 1e-13);
    }

    #[test]
    fn low_rank_apply_matches_dense_path() {
        let x = sample();
        let dict = KernelDictionary::build(
            vec![
                ScalarKernelSpec::linear(vec![0]),
                ScalarKernelSpec::linear(vec![]),
            ],
            &x,
        )
        .unwrap();
        // linear kernels factor exactly as K = Z Zᵀ with Z the feature slice
        let factors = vec![x.select_cols(&[0]), x.clone()];
        let dense = {
            let eta = [0.4, 1.1];
            let wk = WeightedKernel::new(&dict, &eta).unwrap();
            wk.apply(&DenseMatrix::identity(3))
        };
        let dict = dict.with_low_rank(factors).unwrap();
        let eta = [0.4, 1.1];
        let wk = WeightedKernel::new(&dict, &eta).unwrap();
        let low = wk.apply(&DenseMatrix::identity(3));
        assert!(low.sub(&dense).frob_norm() <= 1e-8 * dense.frob_norm());
    }

    #[test]
    fn bad_low_rank_factor_rejected() {
        let x = sample();
        let dict =
            KernelDictionary::build(vec![ScalarKernelSpec::gaussian(1.0, vec![])], &x).unwrap();
        let wrong = DenseMatrix::new(3, 1, vec![1.0, 1.0, 1.0]).unwrap();
        assert!(dict.with_low_rank(vec![wrong]).is_err());
    }

    #[test]
    fn zero_weight_kernels_are_skipped() {
        let x = sample();
        let dict = KernelDictionary::build(
            vec![
                ScalarKernelSpec::gaussian(1.0, vec![]),
                ScalarKernelSpec::linear(vec![]),
            ],
            &x,
        )
        .unwrap();
        let eta = [1.0, 0.0];
        let wk = WeightedKernel::new(&dict, &eta).unwrap();
        let got = wk.weighted_gram();
        assert!(got.to_dense().sub(&dict.gram(0).to_dense()).frob_norm() < 1e-15);
    }

    #[test]
    fn cross_row_matches_gram_at_training_points() {
        let x = sample();
        let dict = KernelDictionary::build(
            vec![
                ScalarKernelSpec::gaussian(0.9, vec![]),
                ScalarKernelSpec::linear(vec![1]),
            ],
            &x,
        )
        .unwrap();
        let eta = [0.6, 0.4];
        let wk = WeightedKernel::new(&dict, &eta).unwrap();
        let gram = wk.weighted_gram();
        for i in 0..3 {
            let row = wk.cross_row(&x, x.row(i)).unwrap();
            for j in 0..3 {
                assert!((row[j] - gram.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn precomputed_round_trip_and_prediction_rejection() {
        let x = sample();
        let gram = gram_matrix(&ScalarKernelSpec::gaussian(1.0, vec![]), &x).unwrap();
        let dict =
            KernelDictionary::build(vec![ScalarKernelSpec::precomputed(gram.clone())], &x)
                .unwrap();
        assert!(dict.gram(0).to_dense().sub(&gram.to_dense()).frob_norm() < 1e-15);
        let eta = [1.0];
        let wk = WeightedKernel::new(&dict, &eta).unwrap();
        assert!(matches!(
            wk.cross_row(&x, x.row(0)),
            Err(Error::UnsupportedPrediction(_))
        ));
    }

    #[test]
    fn precomputed_wrong_size_rejected() {
        let x = sample();
        let small = SymmetricMatrix::identity(2);
        assert!(matches!(
            gram_matrix(&ScalarKernelSpec::precomputed(small), &x),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn precomputed_non_psd_rejected() {
        let x = sample();
        let mut indefinite = SymmetricMatrix::zeros(3);
        indefinite.set(0, 1, 2.0); // eigenvalues -2, 0, 2
        assert!(KernelDictionary::build(
            vec![ScalarKernelSpec::precomputed(indefinite)],
            &x
        )
        .is_err());
    }

    #[test]
    fn negative_weights_rejected() {
        let x = sample();
        let dict =
            KernelDictionary::build(vec![ScalarKernelSpec::gaussian(1.0, vec![])], &x).unwrap();
        let eta = [-0.1];
        assert!(WeightedKernel::new(&dict, &eta).is_err());
    }

    #[test]
    fn median_distance_hand_case() {
        // points 0, 1, 3 -> distances 1, 3, 2 -> median 2
        let x = DenseMatrix::new(3, 1, vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(median_pairwise_distance(&x, &[]), 2.0);
    }

    #[test]
    fn default_grid_is_13_log_spaced() {
        let grid = default_bandwidth_grid();
        assert_eq!(grid.len(), 13);
        assert!((grid[0] - 0.125).abs() < 1e-15);
        assert!((grid[12] - 8.0).abs() < 1e-12);
        for w in grid.windows(2) {
            assert!((w[1] / w[0] - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn dictionary_specs_scale_grid_by_median() {
        let x = DenseMatrix::new(3, 1, vec![0.0, 1.0, 3.0]).unwrap();
        let specs = gaussian_dictionary_specs(&x, &[vec![0]], &[0.5, 1.0]).unwrap();
        assert_eq!(specs.len(), 2);
        match (&specs[0].kind, &specs[1].kind) {
            (KernelKind::Gaussian { bandwidth: a }, KernelKind::Gaussian { bandwidth: b }) => {
                assert!((a - 1.0).abs() < 1e-15); // 0.5 * median 2
                assert!((b - 2.0).abs() < 1e-15);
            }
            _ => panic!("expected Gaussian specs"),
        }
    }
}
