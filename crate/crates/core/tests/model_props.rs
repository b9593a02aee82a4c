use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hlspower_core::model::{
    fit_least_squares, predict_dataset, train, train_with_history, Dataset, Hyperparameters, ModelKind, Params,
    PowerModel, Regressor,
};

/// Independent uniform features and a noisy nonlinear target.
fn dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lin: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
        y.push(20.0 + lin + 0.5 * (row[0] * 3.0).sin() + rng.gen_range(-0.1..0.1));
        x.push(row);
    }
    Dataset::from_xy(x, y).unwrap()
}

fn nonzero(model: &PowerModel) -> usize {
    match &model.params {
        Params::Linear { coefficients, .. } => coefficients.iter().filter(|c| **c != 0.0).count(),
        Params::Trees { .. } => unreachable!("linear model expected"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn boosting_never_raises_training_loss(seed in any::<u64>(), depth in 1usize..5, shrinkage in 0.05f64..1.0) {
        let data = dataset(seed, 80, 4);
        let hp = Hyperparameters::new(Regressor::Gbdt { rounds: 40, shrinkage, max_depth: depth, min_leaf: 2 });
        let (_, history) = train_with_history(ModelKind::Gbdt, &data, &hp).unwrap();
        prop_assert_eq!(history.len(), 40);
        for w in history.windows(2) {
            prop_assert!(w[1] <= w[0], "training MSE rose from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn lasso_path_drops_coefficients(seed in any::<u64>()) {
        let data = dataset(seed, 120, 6);
        let counts: Vec<usize> = [0.01, 0.1, 1.0, 5.0, 20.0, 50.0, 100.0, 200.0, 500.0, 2000.0]
            .iter()
            .map(|&lambda| nonzero(&train(ModelKind::Lasso, &data, &Hyperparameters::new(Regressor::Lasso { lambda })).unwrap()))
            .collect();
        prop_assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{:?}", counts);
        prop_assert_eq!(*counts.last().unwrap(), 0);
    }

    #[test]
    fn lasso_at_zero_is_least_squares(seed in any::<u64>()) {
        let data = dataset(seed, 60, 4);
        let lasso = train(ModelKind::Lasso, &data, &Hyperparameters::new(Regressor::Lasso { lambda: 0.0 })).unwrap();
        let (b0, slopes) = lasso.raw_linear_coefficients().unwrap();
        let columns: Vec<Vec<f64>> = (0..4).map(|j| data.samples().iter().map(|s| s.features[j]).collect()).collect();
        let (c0, ols) = fit_least_squares(&columns, &data.targets());
        prop_assert!((b0 - c0).abs() <= 1e-6 * c0.abs().max(1.0), "{} vs {}", b0, c0);
        for (a, b) in slopes.iter().zip(&ols) {
            prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn deep_cart_interpolates_distinct_rows(seed in any::<u64>()) {
        let data = dataset(seed, 50, 3);
        let model = train(ModelKind::Cart, &data, &Hyperparameters::new(Regressor::Cart { max_depth: 32, min_leaf: 1 })).unwrap();
        let pred = predict_dataset(&model, &data).unwrap();
        for (p, t) in pred.iter().zip(data.targets()) {
            prop_assert!((p - t).abs() <= 1e-9 * t.abs().max(1.0), "{} vs {}", p, t);
        }
    }

    #[test]
    fn serialization_preserves_predictions_bit_for_bit(seed in any::<u64>(), kind in 0usize..5) {
        let data = dataset(seed, 60, 3);
        let hp = Hyperparameters::new(match kind {
            0 => Regressor::Linear,
            1 => Regressor::Lasso { lambda: 0.05 },
            2 => Regressor::Cart { max_depth: 5, min_leaf: 2 },
            3 => Regressor::Bagging { n_trees: 8, max_depth: 4, min_leaf: 2, seed },
            _ => Regressor::Gbdt { rounds: 20, shrinkage: 0.3, max_depth: 3, min_leaf: 2 },
        });
        let model = train(hp.kind(), &data, &hp).unwrap();
        let back = PowerModel::from_json(&model.to_json()).unwrap();
        let probe = dataset(seed ^ 0x5eed, 40, 3);
        for s in probe.samples() {
            let a = model.predict_values(&s.features).unwrap();
            prop_assert_eq!(a.to_bits(), back.predict_values(&s.features).unwrap().to_bits());
            prop_assert_eq!(a.to_bits(), model.predict_values(&s.features).unwrap().to_bits());
        }
    }
}
