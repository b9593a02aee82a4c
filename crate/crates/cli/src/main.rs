//! `hlspower`: generate synthetic benchmarks, build feature tables, train
//! power models and run model-guided design-space exploration.

mod error;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hlspower_core::bench::{write_bench, Bench, Coverage};
use hlspower_core::dse::{DseConfig, DEFAULT_DELTA_PWR};
use hlspower_core::features::{read_feature_csv, write_feature_csv, FeatureRow, HistogramConfig};
use hlspower_core::model::{
    kfold_cv, mae_percent, predict_dataset, train, Hyperparameters, ModelKind, PowerModel, Regressor,
};
use hlspower_core::pipeline::{bench_feature_rows, bench_space, dataset_from_rows, score_dse, Calibration};
use hlspower_core::synth::GeneratorParams;

use error::Failure;

#[derive(Parser)]
#[command(name = "hlspower", version, about = "Activity-based power models and power-aware exploration for HLS designs")]
struct Cli {
    /// Worker threads for featurization, training and exploration.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic applications with oracle power labels.
    Gen(GenArgs),
    /// Build the feature table of one or more benchmark directories.
    Featurize(FeaturizeArgs),
    /// Cross-validate, train and test a power model.
    Train(TrainArgs),
    /// Predict power for every row of a feature table.
    Predict(PredictArgs),
    /// Model-guided exploration scored against the exhaustive front.
    Dse(DseArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Benchmark directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Number of applications.
    #[arg(long, default_value_t = 10)]
    apps: usize,
    /// Seed of the first application; application i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Loop nest depth.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Relative standard deviation of the oracle noise.
    #[arg(long, default_value_t = 0.03)]
    noise: f64,
    /// Kernel calls per stimulus file.
    #[arg(long, default_value_t = 16)]
    frames: u32,
    /// Write only pruning representatives.
    #[arg(long)]
    pruned: bool,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Benchmark directories (repeatable).
    #[arg(long, required = true)]
    bench: Vec<PathBuf>,
    /// Restrict to these applications.
    #[arg(long, value_delimiter = ',')]
    apps: Vec<String>,
    #[arg(long, default_value_t = 4)]
    bins: usize,
    /// Feature table to write.
    #[arg(long, default_value = "features.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Feature tables (repeatable); rows are concatenated.
    #[arg(long, required = true)]
    features: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Kind::Gbdt)]
    model: Kind,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Number of applications held out for testing, chosen by seed.
    #[arg(long, default_value_t = 3, conflicts_with = "test_apps")]
    holdout: usize,
    /// Explicit held-out applications.
    #[arg(long, value_delimiter = ',')]
    test_apps: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    max_depth: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    min_leaf: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    rounds: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    shrinkage: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    trees: Vec<usize>,
    /// Keep only the k features most correlated with power.
    #[arg(long)]
    select_k: Option<usize>,
    /// Output directory for model.json, cv_report.csv and cv_grid.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value = "predictions.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct DseArgs {
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long)]
    bench: PathBuf,
    /// Restrict to these applications.
    #[arg(long, value_delimiter = ',')]
    apps: Vec<String>,
    #[arg(long, default_value_t = 0.02)]
    initial_rate: f64,
    /// Evaluation budgets as fractions of the pruned space.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.4, 1.0])]
    budget: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_DELTA_PWR)]
    delta_pwr: f64,
    #[arg(long, value_enum, default_value_t = CalibrationArg::Ledger)]
    calibration: CalibrationArg,
    /// Let points inside the relaxation band guide the search too.
    #[arg(long)]
    relaxed_references: bool,
    /// Output directory for pareto.csv and adrs_curve.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Linear,
    Lasso,
    Cart,
    Bagging,
    Gbdt,
}

impl From<Kind> for ModelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Linear => ModelKind::Linear,
            Kind::Lasso => ModelKind::Lasso,
            Kind::Cart => ModelKind::Cart,
            Kind::Bagging => ModelKind::Bagging,
            Kind::Gbdt => ModelKind::Gbdt,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrationArg {
    /// True power for every evaluated design, front recomputed.
    Ledger,
    /// True power for the returned relaxed Pareto set only.
    ParetoSet,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new("Internal", e.to_string()))?;
    }
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Featurize(a) => featurize(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Dse(a) => dse(a),
    }
}

fn write_file(path: &Path, bytes: Vec<u8>) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn gen(a: GenArgs) -> Result<(), Failure> {
    let apps: Vec<GeneratorParams> = (0..a.apps as u64)
        .map(|i| {
            let mut p = GeneratorParams::new(a.seed + i, a.depth);
            p.noise = a.noise;
            p.frames = a.frames;
            p
        })
        .collect();
    let coverage = if a.pruned { Coverage::Pruned } else { Coverage::Full };
    let manifest = write_bench(&a.out, &apps, coverage)?;
    let points: usize = manifest.applications.iter().map(|m| m.points.len()).sum();
    println!("wrote {} applications, {points} design points to {}", manifest.applications.len(), a.out.display());
    Ok(())
}

fn featurize(a: FeaturizeArgs) -> Result<(), Failure> {
    let hist = HistogramConfig { n_bins: a.bins, ..HistogramConfig::default() };
    hist.validate()?;
    let wanted: BTreeSet<&str> = a.apps.iter().map(String::as_str).collect();
    let mut rows: Vec<FeatureRow> = Vec::new();
    for dir in &a.bench {
        let bench = Bench::open(dir)?;
        for app in &bench.manifest.applications {
            if wanted.is_empty() || wanted.contains(app.name.as_str()) {
                rows.extend(bench_feature_rows(&bench, app, &hist)?);
            }
        }
    }
    for name in &wanted {
        if !rows.iter().any(|r| r.app == *name) {
            return Err(Failure::usage(format!("application {name} not found")));
        }
    }
    rows.sort_by(|x, y| (&x.app, &x.point_id).cmp(&(&y.app, &y.point_id)));
    if let Some(w) = rows.windows(2).find(|w| w[0].app == w[1].app && w[0].point_id == w[1].point_id) {
        return Err(Failure::new("DuplicatePoint", format!("{}/{} appears twice", w[0].app, w[0].point_id)));
    }
    let mut buf = Vec::new();
    write_feature_csv(&rows, a.bins, &mut buf)?;
    write_file(&a.out, buf)?;
    println!("wrote {} rows to {}", rows.len(), a.out.display());
    Ok(())
}

fn load_features(paths: &[PathBuf]) -> Result<(usize, Vec<FeatureRow>), Failure> {
    let mut bins = None;
    let mut rows = Vec::new();
    for path in paths {
        let text = read_file(path)?;
        let (b, mut r) = read_feature_csv(text.as_bytes()).map_err(|e| Failure::from(e).at(path))?;
        if bins.is_some_and(|prev| prev != b) {
            return Err(Failure::usage(format!("{} uses {b} bins, earlier tables differ", path.display())));
        }
        bins = Some(b);
        rows.append(&mut r);
    }
    Ok((bins.unwrap_or(HistogramConfig::default().n_bins), rows))
}

fn or_default<T: Clone>(given: &[T], default: &[T]) -> Vec<T> {
    if given.is_empty() {
        default.to_vec()
    } else {
        given.to_vec()
    }
}

fn grid(a: &TrainArgs) -> Vec<Hyperparameters> {
    let mut out = Vec::new();
    match a.model {
        Kind::Linear => out.push(Regressor::Linear),
        Kind::Lasso => {
            for lambda in or_default(&a.lambda, &[1.0, 10.0, 100.0]) {
                out.push(Regressor::Lasso { lambda });
            }
        }
        Kind::Cart => {
            for max_depth in or_default(&a.max_depth, &[6, 8, 10]) {
                for min_leaf in or_default(&a.min_leaf, &[5]) {
                    out.push(Regressor::Cart { max_depth, min_leaf });
                }
            }
        }
        Kind::Bagging => {
            for n_trees in or_default(&a.trees, &[50]) {
                for max_depth in or_default(&a.max_depth, &[8, 10]) {
                    for min_leaf in or_default(&a.min_leaf, &[5]) {
                        out.push(Regressor::Bagging { n_trees, max_depth, min_leaf, seed: a.seed });
                    }
                }
            }
        }
        Kind::Gbdt => {
            for rounds in or_default(&a.rounds, &[300]) {
                for shrinkage in or_default(&a.shrinkage, &[0.1]) {
                    for max_depth in or_default(&a.max_depth, &[4, 6]) {
                        for min_leaf in or_default(&a.min_leaf, &[5]) {
                            out.push(Regressor::Gbdt { rounds, shrinkage, max_depth, min_leaf });
                        }
                    }
                }
            }
        }
    }
    out.into_iter()
        .map(|r| match a.select_k {
            Some(k) => Hyperparameters::new(r).with_select_k(k),
            None => Hyperparameters::new(r),
        })
        .collect()
}

fn held_out_apps(a: &TrainArgs, apps: &[String]) -> Result<Vec<String>, Failure> {
    if !a.test_apps.is_empty() {
        let mut held: Vec<String> = a.test_apps.clone();
        held.sort();
        held.dedup();
        if let Some(missing) = held.iter().find(|h| !apps.contains(h)) {
            return Err(Failure::usage(format!("held-out application {missing} is not in the features")));
        }
        if held.len() >= apps.len() {
            return Err(Failure::new("CannotHoldOut", "no application left for training"));
        }
        return Ok(held);
    }
    if a.holdout > 0 && a.holdout >= apps.len() {
        return Err(Failure::new(
            "CannotHoldOut",
            format!("cannot hold out {} of {} applications", a.holdout, apps.len()),
        ));
    }
    let mut shuffled = apps.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(a.seed));
    let mut held: Vec<String> = shuffled.into_iter().take(a.holdout).collect();
    held.sort();
    Ok(held)
}

fn train_cmd(a: TrainArgs) -> Result<(), Failure> {
    let (_, rows) = load_features(&a.features)?;
    let data = dataset_from_rows(&rows)?;
    let held = held_out_apps(&a, &data.apps())?;
    let (train_set, test_set) = data.split_by_app(&held);
    let kind = ModelKind::from(a.model);
    let grid = grid(&a);
    let cv = kfold_cv(kind, &train_set, a.folds, &grid, a.seed)?;
    let model = train(kind, &train_set, &cv.best)?;

    let mut report = Vec::new();
    if held.is_empty() {
        report.push(vec!["overall".into(), train_set.len().to_string(), cv.mean_mae[cv.best_index].to_string()]);
    } else {
        for app in &held {
            let (_, one) = test_set.split_by_app(std::slice::from_ref(app));
            let mae = mae_percent(&predict_dataset(&model, &one)?, &one.targets())?;
            report.push(vec![app.clone(), one.len().to_string(), mae.to_string()]);
        }
        let mae = mae_percent(&predict_dataset(&model, &test_set)?, &test_set.targets())?;
        report.push(vec!["overall".into(), test_set.len().to_string(), mae.to_string()]);
    }
    let grid_rows = grid
        .iter()
        .zip(&cv.mean_mae)
        .enumerate()
        .map(|(i, (hp, mae))| {
            let hp = serde_json::to_string(hp).expect("hyperparameters serialize");
            vec![i.to_string(), hp, mae.to_string(), (i == cv.best_index).to_string()]
        })
        .collect();

    write_file(&a.out.join("model.json"), model.to_json().into_bytes())?;
    write_file(&a.out.join("cv_report.csv"), csv_bytes(&["app", "rows", "mae_percent"], report))?;
    write_file(&a.out.join("cv_grid.csv"), csv_bytes(&["index", "hyperparameters", "mean_cv_mae_percent", "selected"], grid_rows))?;
    println!(
        "trained {kind} on {} rows, held out {} applications; wrote {}",
        train_set.len(),
        held.len(),
        a.out.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<PowerModel, Failure> {
    PowerModel::from_json(&read_file(path)?).map_err(|e| Failure::from(e).at(path))
}

fn predict(a: PredictArgs) -> Result<(), Failure> {
    let model = load_model(&a.model_file)?;
    let (_, rows) = load_features(std::slice::from_ref(&a.features))?;
    let out = rows
        .iter()
        .map(|r| {
            Ok(vec![
                r.app.clone(),
                r.point_id.clone(),
                model.predict(&r.features)?.to_string(),
                r.measured_power_w.map(|p| p.to_string()).unwrap_or_default(),
            ])
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    write_file(&a.out, csv_bytes(&["app", "point_id", "predicted_power_w", "measured_power_w"], out))?;
    println!("wrote {} predictions to {}", rows.len(), a.out.display());
    Ok(())
}

/// Bin count whose feature layout matches the model's input length.
fn bins_for(model: &PowerModel) -> Result<HistogramConfig, Failure> {
    (1..=64)
        .map(|n_bins| HistogramConfig { n_bins, ..HistogramConfig::default() })
        .find(|h| h.feature_len() == model.n_features)
        .ok_or_else(|| Failure::new("LayoutMismatch", format!("no histogram layout has {} features", model.n_features)))
}

fn dse(a: DseArgs) -> Result<(), Failure> {
    let model = load_model(&a.model_file)?;
    let hist = bins_for(&model)?;
    let bench = Bench::open(&a.bench)?;
    let apps: Vec<_> = if a.apps.is_empty() {
        bench.manifest.applications.iter().collect()
    } else {
        a.apps
            .iter()
            .map(|n| bench.app(n).ok_or_else(|| Failure::usage(format!("application {n} not found"))))
            .collect::<Result<_, _>>()?
    };
    let mut budgets = a.budget.clone();
    budgets.sort_by(f64::total_cmp);
    budgets.dedup();
    let calibration = match a.calibration {
        CalibrationArg::Ledger => Calibration::Ledger,
        CalibrationArg::ParetoSet => Calibration::ParetoSet,
    };

    let mut pareto_rows = Vec::new();
    let mut curve: BTreeMap<(usize, String), Vec<String>> = BTreeMap::new();
    for app in &apps {
        let space = bench_space(&bench, app, &model, &hist)?;
        for (bi, &budget) in budgets.iter().enumerate() {
            let cfg = DseConfig {
                initial_rate: a.initial_rate,
                budget,
                delta_pwr: a.delta_pwr,
                relaxed_references: a.relaxed_references,
            };
            let score = score_dse(&space, &cfg, calibration)?;
            let ledger: BTreeMap<_, _> =
                score.outcome.pareto.ledger.iter().map(|e| (&e.point.directives, e)).collect();
            for p in &score.calibrated {
                let entry = ledger[&p.directives];
                let relaxed = score.outcome.pareto.relaxed.iter().any(|r| r.directives == p.directives);
                pareto_rows.push(vec![
                    app.name.clone(),
                    budget.to_string(),
                    p.directives.point_id(),
                    p.latency_cycles.to_string(),
                    entry.point.power_w.to_string(),
                    p.power_w.to_string(),
                    entry.iteration.to_string(),
                    relaxed.to_string(),
                ]);
            }
            curve.insert(
                (bi, app.name.clone()),
                vec![
                    app.name.clone(),
                    budget.to_string(),
                    score.outcome.pruned_size.to_string(),
                    score.outcome.evaluations.to_string(),
                    score.outcome.iterations.to_string(),
                    score.adrs_percent.to_string(),
                ],
            );
        }
    }
    pareto_rows.sort_by(|x, y| {
        let budget = |r: &Vec<String>| r[1].parse::<f64>().unwrap_or(0.0);
        budget(x).total_cmp(&budget(y)).then_with(|| x[0].cmp(&y[0]))
    });
    write_file(
        &a.out.join("pareto.csv"),
        csv_bytes(
            &["app", "budget", "point_id", "latency_cycles", "predicted_power_w", "power_w", "iteration", "relaxed"],
            pareto_rows,
        ),
    )?;
    write_file(
        &a.out.join("adrs_curve.csv"),
        csv_bytes(
            &["app", "budget", "pruned_points", "evaluations", "iterations", "adrs_percent"],
            curve.into_values().collect(),
        ),
    )?;
    println!("explored {} applications at {} budgets; wrote {}", apps.len(), budgets.len(), a.out.display());
    Ok(())
}
