use serde::{Deserialize, Serialize};

use super::{Dataset, ModelError};

/// Per-feature z-score statistics (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    /// Zero for constant features.
    pub std: Vec<f64>,
}

impl Normalization {
    #[inline]
    pub fn apply_one(&self, j: usize, v: f64) -> f64 {
        let sd = self.std[j];
        if sd > 0.0 {
            (v - self.mean[j]) / sd
        } else {
            0.0
        }
    }
}

fn column(data: &Dataset, j: usize) -> impl Iterator<Item = f64> + '_ {
    data.samples().iter().map(move |s| s.features[j])
}

fn is_constant(data: &Dataset, j: usize) -> bool {
    let first = data.samples()[0].features[j];
    column(data, j).all(|v| v == first)
}

pub fn normalize_fit(train: &Dataset) -> Result<Normalization, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let n = train.len() as f64;
    let mut mean = Vec::with_capacity(train.n_features());
    let mut std = Vec::with_capacity(train.n_features());
    for j in 0..train.n_features() {
        let m = column(train, j).sum::<f64>() / n;
        let sd = if is_constant(train, j) {
            0.0
        } else {
            (column(train, j).map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
        };
        mean.push(m);
        std.push(sd);
    }
    Ok(Normalization { mean, std })
}

pub fn normalize_apply(stats: &Normalization, vector: &[f64]) -> Vec<f64> {
    vector.iter().enumerate().map(|(j, &v)| stats.apply_one(j, v)).collect()
}

/// Drops constant features, then keeps the `k` with the largest absolute
/// Pearson correlation to power. Returned indices are ascending.
pub fn select_features(train: &Dataset, k: usize) -> Result<Vec<usize>, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let n = train.len() as f64;
    let y = train.targets();
    let my = y.iter().sum::<f64>() / n;
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let mut scored: Vec<(f64, usize)> = (0..train.n_features())
        .filter(|&j| !is_constant(train, j))
        .map(|j| {
            let mx = column(train, j).sum::<f64>() / n;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (x, yv) in column(train, j).zip(&y) {
                sxy += (x - mx) * (yv - my);
                sxx += (x - mx) * (x - mx);
            }
            let r = if sxx > 0.0 && syy > 0.0 { sxy / (sxx * syy).sqrt() } else { 0.0 };
            (r.abs(), j)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut keep: Vec<usize> = scored.into_iter().take(k).map(|(_, j)| j).collect();
    keep.sort_unstable();
    Ok(keep)
}
