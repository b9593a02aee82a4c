use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{mae_percent, predict_dataset, train, Dataset, Hyperparameters, ModelError, ModelKind};

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub best_index: usize,
    pub best: Hyperparameters,
    /// Validation MAE (%) per grid point per fold.
    pub fold_mae: Vec<Vec<f64>>,
    /// Mean validation MAE (%) per grid point.
    pub mean_mae: Vec<f64>,
    /// Fold number of every row.
    pub assignment: Vec<usize>,
}

impl CvReport {
    pub fn best_fold_mae(&self) -> &[f64] {
        &self.fold_mae[self.best_index]
    }
}

/// Seeded fold number for each of `n` rows; fold sizes differ by at most one.
pub fn fold_assignment(n: usize, k_folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        fold[row] = pos % k_folds;
    }
    fold
}

/// Grid search by K-fold cross-validation. The grid point with the lowest
/// mean validation MAE wins; ties go to the earlier grid point.
pub fn kfold_cv(
    kind: ModelKind,
    data: &Dataset,
    k_folds: usize,
    grid: &[Hyperparameters],
    seed: u64,
) -> Result<CvReport, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if k_folds < 2 || data.len() < k_folds {
        return Err(ModelError::InvalidHyperparameters(format!(
            "{k_folds}-fold cross-validation needs k >= 2 and at least k rows (have {})",
            data.len()
        )));
    }
    if grid.is_empty() {
        return Err(ModelError::InvalidHyperparameters("empty hyperparameter grid".into()));
    }
    let assignment = fold_assignment(data.len(), k_folds, seed);
    let splits: Vec<(Dataset, Dataset)> = (0..k_folds)
        .map(|f| {
            let (val, tr): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| assignment[i] == f);
            (data.subset(&tr), data.subset(&val))
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..k_folds).map(move |f| (g, f))).collect();
    let results: Vec<Result<f64, ModelError>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (tr, val) = &splits[f];
            let model = train(kind, tr, &grid[g])?;
            mae_percent(&predict_dataset(&model, val)?, &val.targets())
        })
        .collect();

    let mut fold_mae = vec![Vec::with_capacity(k_folds); grid.len()];
    for ((g, _), r) in jobs.iter().zip(results) {
        fold_mae[*g].push(r?);
    }
    let mean_mae: Vec<f64> = fold_mae.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let mut best_index = 0;
    for (i, &m) in mean_mae.iter().enumerate() {
        if m < mean_mae[best_index] {
            best_index = i;
        }
    }
    Ok(CvReport { best_index, best: grid[best_index].clone(), fold_mae, mean_mae, assignment })
}
