//! Glue between the stages: feature construction for descriptors and
//! synthetic points, datasets from feature rows, and DSE scoring against an
//! exhaustive reference.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::activity::{execute_trace, ActivityError, Stimuli};
use crate::bench::{Bench, BenchError, ManifestApp};
use crate::design::{DesignPoint, DirectiveConfig, HlsMetrics};
use crate::dse::{adrs, pareto_front, prune_design_space, run_dse, DseConfig, DseError, DseOutcome, EvaluatedPoint};
use crate::features::{assemble_features, FeatureError, FeatureRow, FeatureVector, HistogramConfig};
use crate::model::{Dataset, ModelError, PowerModel, Sample};
use crate::synth::{AppGenerator, SynthError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("{point}: {source}")]
    Activity { point: String, source: ActivityError },
    #[error("{point}: {source}")]
    Feature { point: String, source: FeatureError },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dse(#[from] DseError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("{0}")]
    Data(String),
}

/// Feature vector of one design point under its stimuli.
pub fn featurize(
    point: &DesignPoint,
    stimuli: &Stimuli,
    base: &HlsMetrics,
    cfg: &HistogramConfig,
) -> Result<FeatureVector, PipelineError> {
    let id = || format!("{}/{}", point.app, point.point_id());
    let traces = execute_trace(&point.fsmd, stimuli).map_err(|source| PipelineError::Activity { point: id(), source })?;
    assemble_features(point, base, &traces, cfg).map_err(|source| PipelineError::Feature { point: id(), source })
}

/// A synthetic design point reduced to what training and exploration need.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub directives: DirectiveConfig,
    pub latency_cycles: u64,
    pub features: FeatureVector,
    pub power_w: f64,
    pub noiseless_w: f64,
}

/// Generates, featurizes and labels `cfgs` of one synthetic application.
pub fn label_points(
    generator: &AppGenerator,
    cfgs: &[DirectiveConfig],
    cfg: &HistogramConfig,
) -> Result<Vec<LabeledPoint>, PipelineError> {
    let base_cfg = DirectiveConfig::identity(generator.params().loop_depth);
    let (base, _) = generator.design(&base_cfg)?;
    cfgs.par_iter()
        .map(|c| {
            let g = generator.point(c)?;
            let features = featurize(&g.point, &g.stimuli, &base.metrics, cfg)?;
            Ok(LabeledPoint {
                directives: c.clone(),
                latency_cycles: g.point.metrics.latency_cycles,
                features,
                power_w: g.oracle_power_w,
                noiseless_w: g.noiseless_w,
            })
        })
        .collect()
}

pub fn labeled_rows(app: &str, points: &[LabeledPoint]) -> Vec<FeatureRow> {
    points
        .iter()
        .map(|p| FeatureRow {
            app: app.to_string(),
            point_id: p.directives.point_id(),
            features: p.features.clone(),
            measured_power_w: Some(p.power_w),
        })
        .collect()
}

/// Training samples from feature rows; every row needs a power label.
pub fn dataset_from_rows(rows: &[FeatureRow]) -> Result<Dataset, PipelineError> {
    let samples = rows
        .iter()
        .map(|r| {
            let power_w = r
                .measured_power_w
                .ok_or_else(|| PipelineError::Data(format!("{}/{} has no power label", r.app, r.point_id)))?;
            Ok(Sample { features: r.features.values.clone(), power_w, app: r.app.clone() })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(Dataset::new(samples)?)
}

/// One configuration with its latency, estimated power and true power.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacePoint {
    pub directives: DirectiveConfig,
    pub latency_cycles: u64,
    pub predicted_w: f64,
    pub true_w: f64,
}

/// Predicted powers for labeled points.
pub fn predict_space(model: &PowerModel, points: &[LabeledPoint]) -> Result<Vec<SpacePoint>, PipelineError> {
    points
        .iter()
        .map(|p| {
            Ok(SpacePoint {
                directives: p.directives.clone(),
                latency_cycles: p.latency_cycles,
                predicted_w: model.predict(&p.features)?,
                true_w: p.power_w,
            })
        })
        .collect()
}

/// Exact Pareto front of the pruned space under true power.
pub fn reference_front(space: &[SpacePoint]) -> Vec<EvaluatedPoint> {
    let keep = prune_design_space(&space.iter().map(|p| p.directives.clone()).collect::<Vec<_>>());
    let reps: std::collections::HashSet<_> = keep.representatives.into_iter().collect();
    let truth: Vec<EvaluatedPoint> = space
        .iter()
        .filter(|p| reps.contains(&p.directives))
        .map(|p| EvaluatedPoint { directives: p.directives.clone(), latency_cycles: p.latency_cycles, power_w: p.true_w })
        .collect();
    pareto_front(&truth)
}

/// Which designs receive true powers before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Calibration {
    /// Every evaluated design; the approximate front is recomputed from
    /// the calibrated ledger.
    #[default]
    Ledger,
    /// Only the relaxed Pareto set returned by the search.
    ParetoSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DseScore {
    pub outcome: DseOutcome,
    /// Approximate set with true powers substituted.
    pub calibrated: Vec<EvaluatedPoint>,
    pub adrs_percent: f64,
}

/// Runs the exploration with model estimates, then calibrates with true
/// powers and scores against the exact front.
pub fn score_dse(space: &[SpacePoint], cfg: &DseConfig, calibration: Calibration) -> Result<DseScore, PipelineError> {
    let table: HashMap<&DirectiveConfig, &SpacePoint> = space.iter().map(|p| (&p.directives, p)).collect();
    let evaluator = |c: &DirectiveConfig| -> Result<(u64, f64), DseError> {
        let p = table.get(c).ok_or_else(|| DseError::Evaluation { point: c.point_id(), message: "not in the space".into() })?;
        Ok((p.latency_cycles, p.predicted_w.max(f64::MIN_POSITIVE)))
    };
    let configs: Vec<DirectiveConfig> = space.iter().map(|p| p.directives.clone()).collect();
    let outcome = run_dse(&configs, &evaluator, cfg)?;
    let truth = |p: &EvaluatedPoint| EvaluatedPoint { power_w: table[&p.directives].true_w, ..p.clone() };
    let calibrated: Vec<EvaluatedPoint> = match calibration {
        Calibration::Ledger => {
            pareto_front(&outcome.pareto.ledger.iter().map(|e| truth(&e.point)).collect::<Vec<_>>())
        }
        Calibration::ParetoSet => outcome.pareto.all().map(truth).collect(),
    };
    let objectives = |v: &[EvaluatedPoint]| v.iter().map(EvaluatedPoint::objectives).collect::<Vec<_>>();
    let adrs_percent = adrs(&objectives(&calibrated), &objectives(&reference_front(space)))?;
    Ok(DseScore { outcome, calibrated, adrs_percent })
}

/// Feature rows of every point of one benchmark application, in manifest
/// order, labeled with the recorded power when present.
pub fn bench_feature_rows(bench: &Bench, app: &ManifestApp, cfg: &HistogramConfig) -> Result<Vec<FeatureRow>, PipelineError> {
    let base_entry = app.base().ok_or_else(|| PipelineError::Data(format!("{} has no base point", app.name)))?;
    let (base, _) = bench.load_point(base_entry)?;
    app.points
        .par_iter()
        .map(|entry| {
            let (point, stimuli) = bench.load_point(entry)?;
            if point.app != app.name {
                return Err(PipelineError::Data(format!("{} belongs to {}, not {}", entry.descriptor, point.app, app.name)));
            }
            let features = featurize(&point, &stimuli, &base.metrics, cfg)?;
            Ok(FeatureRow {
                app: app.name.clone(),
                point_id: point.point_id(),
                features,
                measured_power_w: point.measured_power_w,
            })
        })
        .collect()
}

/// Pruned space of one benchmark application with model estimates and
/// recorded powers.
pub fn bench_space(bench: &Bench, app: &ManifestApp, model: &PowerModel, cfg: &HistogramConfig) -> Result<Vec<SpacePoint>, PipelineError> {
    let base_entry = app.base().ok_or_else(|| PipelineError::Data(format!("{} has no base point", app.name)))?;
    let (base, _) = bench.load_point(base_entry)?;
    let mut entries = Vec::new();
    for e in &app.points {
        let cfg: DirectiveConfig = e
            .point_id
            .parse()
            .map_err(|err| PipelineError::Data(format!("{}: {err}", e.descriptor)))?;
        entries.push((cfg, e));
    }
    let reps: std::collections::HashSet<DirectiveConfig> =
        prune_design_space(&entries.iter().map(|(c, _)| c.clone()).collect::<Vec<_>>()).representatives.into_iter().collect();
    entries
        .par_iter()
        .filter(|(c, _)| reps.contains(c))
        .map(|(_, entry)| {
            let (point, stimuli) = bench.load_point(entry)?;
            let features = featurize(&point, &stimuli, &base.metrics, cfg)?;
            let true_w = point
                .measured_power_w
                .ok_or_else(|| PipelineError::Data(format!("{} has no measured power", entry.descriptor)))?;
            Ok(SpacePoint {
                latency_cycles: point.metrics.latency_cycles,
                predicted_w: model.predict(&features)?,
                true_w,
                directives: point.directives,
            })
        })
        .collect()
}
