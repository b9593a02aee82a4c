//! Regression models mapping feature vectors to power in watts.
//!
//! Every model stores the z-score statistics of its training set and the
//! indices of the features it was trained on, so [`PowerModel::predict`]
//! accepts full-length feature vectors.

mod cv;
mod linear;
mod preprocess;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;

pub use cv::{kfold_cv, CvReport};
pub use linear::{fit_lasso, fit_least_squares, LassoFit};
pub use preprocess::{normalize_apply, normalize_fit, select_features, Normalization};
pub use tree::{Node, TreeParams};

/// Version tag written into every model file.
pub const MODEL_FORMAT: &str = "hlspower-model/1";

/// Deepest tree the nested JSON model format is allowed to carry.
pub const MAX_TREE_DEPTH: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("lasso did not converge within {iterations} sweeps")]
    NonConvergence { iterations: usize },
    #[error("feature layout mismatch: model expects {expected} features, got {got}")]
    LayoutMismatch { expected: usize, got: usize },
    #[error("length mismatch: {predictions} predictions vs {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("model file: {0}")]
    Format(String),
}

/// One training or test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub power_w: f64,
    pub app: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self, ModelError> {
        let n_features = samples.first().map_or(0, |s| s.features.len());
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != n_features {
                return Err(ModelError::InvalidDataset(format!(
                    "sample {i} has {} features, expected {n_features}",
                    s.features.len()
                )));
            }
            if !s.power_w.is_finite() || s.power_w <= 0.0 {
                return Err(ModelError::InvalidDataset(format!(
                    "sample {i} has non-positive power {}",
                    s.power_w
                )));
            }
            if let Some(v) = s.features.iter().find(|v| !v.is_finite()) {
                return Err(ModelError::InvalidDataset(format!("sample {i} has feature value {v}")));
            }
        }
        Ok(Self { n_features, samples })
    }

    pub fn from_xy(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(
            x.into_iter()
                .zip(y)
                .map(|(features, power_w)| Sample { features, power_w, app: String::new() })
                .collect(),
        )
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.power_w).collect()
    }

    /// Sorted distinct application names.
    pub fn apps(&self) -> Vec<String> {
        let mut apps: Vec<String> = self.samples.iter().map(|s| s.app.clone()).collect();
        apps.sort();
        apps.dedup();
        apps
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            n_features: self.n_features,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Splits by application: rows of `held_out` apps go to the second set.
    pub fn split_by_app(&self, held_out: &[String]) -> (Dataset, Dataset) {
        let (test, train): (Vec<_>, Vec<_>) =
            self.samples.iter().cloned().partition(|s| held_out.contains(&s.app));
        (
            Dataset { n_features: self.n_features, samples: train },
            Dataset { n_features: self.n_features, samples: test },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Lasso,
    Cart,
    Bagging,
    Gbdt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Linear, ModelKind::Lasso, ModelKind::Cart, ModelKind::Bagging, ModelKind::Gbdt];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Lasso => "lasso",
            ModelKind::Cart => "cart",
            ModelKind::Bagging => "bagging",
            ModelKind::Gbdt => "gbdt",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::InvalidHyperparameters(format!("unknown model kind {s:?}")))
    }
}

/// Regressor-specific settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regressor {
    Linear,
    Lasso { lambda: f64 },
    Cart { max_depth: usize, min_leaf: usize },
    Bagging { n_trees: usize, max_depth: usize, min_leaf: usize, seed: u64 },
    Gbdt { rounds: usize, shrinkage: f64, max_depth: usize, min_leaf: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    #[serde(flatten)]
    pub regressor: Regressor,
    /// Keep only the `k` features most correlated with power; `None` keeps
    /// every non-constant feature.
    #[serde(default)]
    pub select_k: Option<usize>,
}

impl Hyperparameters {
    pub fn new(regressor: Regressor) -> Self {
        Self { regressor, select_k: None }
    }

    pub fn with_select_k(mut self, k: usize) -> Self {
        self.select_k = Some(k);
        self
    }

    pub fn kind(&self) -> ModelKind {
        match self.regressor {
            Regressor::Linear => ModelKind::Linear,
            Regressor::Lasso { .. } => ModelKind::Lasso,
            Regressor::Cart { .. } => ModelKind::Cart,
            Regressor::Bagging { .. } => ModelKind::Bagging,
            Regressor::Gbdt { .. } => ModelKind::Gbdt,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidHyperparameters(m));
        if let Some(k) = self.select_k {
            if k == 0 || k > n_features {
                return bad(format!("select_k {k} outside [1, {n_features}]"));
            }
        }
        let depth_ok = |d: usize, min: usize| (min..=MAX_TREE_DEPTH).contains(&d);
        match self.regressor {
            Regressor::Linear => Ok(()),
            Regressor::Lasso { lambda } => {
                if lambda.is_finite() && lambda >= 0.0 {
                    Ok(())
                } else {
                    bad(format!("lasso lambda must be >= 0, got {lambda}"))
                }
            }
            Regressor::Cart { max_depth, min_leaf } | Regressor::Bagging { max_depth, min_leaf, .. } => {
                if !depth_ok(max_depth, 1) || min_leaf < 1 {
                    return bad(format!(
                        "trees need max_depth in [1, {MAX_TREE_DEPTH}] and min_leaf >= 1"
                    ));
                }
                if let Regressor::Bagging { n_trees: 0, .. } = self.regressor {
                    return bad("bagging needs at least one tree".into());
                }
                Ok(())
            }
            Regressor::Gbdt { rounds, shrinkage, max_depth, min_leaf } => {
                if rounds < 1 {
                    return bad("gbdt needs at least one round".into());
                }
                if !(shrinkage > 0.0 && shrinkage <= 1.0) {
                    return bad(format!("gbdt shrinkage must lie in (0, 1], got {shrinkage}"));
                }
                // Depth 0 is accepted and yields the constant mean model.
                if !depth_ok(max_depth, 0) || min_leaf < 1 {
                    return bad(format!("gbdt needs max_depth <= {MAX_TREE_DEPTH} and min_leaf >= 1"));
                }
                Ok(())
            }
        }
    }
}

/// Fitted regressor parameters, in normalized feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Params {
    Linear { intercept: f64, coefficients: Vec<f64> },
    Trees { base: f64, scale: f64, trees: Vec<Node> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub format: String,
    pub kind: ModelKind,
    pub hyperparameters: Hyperparameters,
    pub n_features: usize,
    pub normalization: Normalization,
    pub selected: Vec<usize>,
    pub params: Params,
}

impl PowerModel {
    /// Predicted power for one full-length feature vector.
    pub fn predict(&self, vector: &FeatureVector) -> Result<f64, ModelError> {
        self.predict_values(&vector.values)
    }

    pub fn predict_values(&self, values: &[f64]) -> Result<f64, ModelError> {
        if values.len() != self.n_features {
            return Err(ModelError::LayoutMismatch { expected: self.n_features, got: values.len() });
        }
        let z: Vec<f64> = self
            .selected
            .iter()
            .map(|&j| self.normalization.apply_one(j, values[j]))
            .collect();
        Ok(match &self.params {
            Params::Linear { intercept, coefficients } => {
                intercept + coefficients.iter().zip(&z).map(|(c, v)| c * v).sum::<f64>()
            }
            Params::Trees { base, scale, trees } => {
                base + scale * trees.iter().map(|t| t.predict(&z)).sum::<f64>()
            }
        })
    }

    /// Linear models only: intercept and per-feature slopes in raw
    /// (unnormalized) units, indexed over all features.
    pub fn raw_linear_coefficients(&self) -> Option<(f64, Vec<f64>)> {
        let Params::Linear { intercept, coefficients } = &self.params else {
            return None;
        };
        let mut slopes = vec![0.0; self.n_features];
        let mut b0 = *intercept;
        for (&j, &c) in self.selected.iter().zip(coefficients) {
            let sd = self.normalization.std[j];
            if sd > 0.0 {
                slopes[j] = c / sd;
                b0 -= c * self.normalization.mean[j] / sd;
            }
        }
        Some((b0, slopes))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let model: PowerModel =
            serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(ModelError::Format(format!(
                "unsupported format tag {:?}, expected {MODEL_FORMAT:?}",
                model.format
            )));
        }
        if model.normalization.mean.len() != model.n_features
            || model.normalization.std.len() != model.n_features
            || model.selected.iter().any(|&j| j >= model.n_features)
        {
            return Err(ModelError::Format("normalization or selection does not match n_features".into()));
        }
        Ok(model)
    }
}

/// Trains one model. The hyperparameters must belong to `kind`.
pub fn train(kind: ModelKind, data: &Dataset, hp: &Hyperparameters) -> Result<PowerModel, ModelError> {
    train_with_history(kind, data, hp).map(|(m, _)| m)
}

/// Like [`train`], also returning the training-set MSE after every boosting
/// round (empty for other kinds).
pub fn train_with_history(
    kind: ModelKind,
    data: &Dataset,
    hp: &Hyperparameters,
) -> Result<(PowerModel, Vec<f64>), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if hp.kind() != kind {
        return Err(ModelError::InvalidHyperparameters(format!(
            "{} hyperparameters given for a {kind} model",
            hp.kind()
        )));
    }
    hp.validate(data.n_features())?;

    let normalization = normalize_fit(data)?;
    let k = hp.select_k.unwrap_or(data.n_features());
    let selected = select_features(data, k)?;
    let columns: Vec<Vec<f64>> = selected
        .iter()
        .map(|&j| {
            data.samples()
                .iter()
                .map(|s| normalization.apply_one(j, s.features[j]))
                .collect()
        })
        .collect();
    let y = data.targets();

    let mut history = Vec::new();
    let params = match hp.regressor {
        Regressor::Linear => {
            let (intercept, coefficients) = fit_least_squares(&columns, &y);
            Params::Linear { intercept, coefficients }
        }
        Regressor::Lasso { lambda } => {
            let fit = fit_lasso(&columns, &y, lambda, &linear::LassoOptions::default())?;
            Params::Linear { intercept: fit.intercept, coefficients: fit.coefficients }
        }
        Regressor::Cart { max_depth, min_leaf } => {
            let builder = tree::TreeBuilder::new(&columns);
            let weights = vec![1.0; y.len()];
            let root = builder.fit(&y, &weights, TreeParams { max_depth, min_leaf });
            Params::Trees { base: 0.0, scale: 1.0, trees: vec![root] }
        }
        Regressor::Bagging { n_trees, max_depth, min_leaf, seed } => {
            let builder = tree::TreeBuilder::new(&columns);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = y.len();
            let mut trees = Vec::with_capacity(n_trees);
            for _ in 0..n_trees {
                let mut weights = vec![0.0; n];
                for _ in 0..n {
                    weights[rng.gen_range(0..n)] += 1.0;
                }
                trees.push(builder.fit(&y, &weights, TreeParams { max_depth, min_leaf }));
            }
            Params::Trees { base: 0.0, scale: 1.0 / n_trees as f64, trees }
        }
        Regressor::Gbdt { rounds, shrinkage, max_depth, min_leaf } => {
            let builder = tree::TreeBuilder::new(&columns);
            let n = y.len();
            let base = y.iter().sum::<f64>() / n as f64;
            let weights = vec![1.0; n];
            let mut fitted = vec![base; n];
            let mut residual = vec![0.0; n];
            let mut trees = Vec::with_capacity(rounds);
            let mut row = vec![0.0; columns.len()];
            for _ in 0..rounds {
                for i in 0..n {
                    residual[i] = y[i] - fitted[i];
                }
                let t = builder.fit(&residual, &weights, TreeParams { max_depth, min_leaf });
                for (i, f) in fitted.iter_mut().enumerate() {
                    for (r, c) in row.iter_mut().zip(&columns) {
                        *r = c[i];
                    }
                    *f += shrinkage * t.predict(&row);
                }
                history.push(
                    y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64,
                );
                trees.push(t);
            }
            Params::Trees { base, scale: shrinkage, trees }
        }
    };

    Ok((
        PowerModel {
            format: MODEL_FORMAT.to_string(),
            kind,
            hyperparameters: hp.clone(),
            n_features: data.n_features(),
            normalization,
            selected,
            params,
        },
        history,
    ))
}

/// Mean absolute percentage error.
pub fn mae_percent(predictions: &[f64], truths: &[f64]) -> Result<f64, ModelError> {
    if predictions.len() != truths.len() || truths.is_empty() {
        return Err(ModelError::LengthMismatch { predictions: predictions.len(), truths: truths.len() });
    }
    let sum: f64 = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t).abs() / t)
        .sum();
    Ok(sum / truths.len() as f64 * 100.0)
}

/// Predicts every sample of a dataset.
pub fn predict_dataset(model: &PowerModel, data: &Dataset) -> Result<Vec<f64>, ModelError> {
    data.samples().iter().map(|s| model.predict_values(&s.features)).collect()
}
