//! Directive-space exploration: pruning, region split, grid initial
//! sampling, ordered-sequence midpoint search and Pareto relaxation.

mod pareto;
mod sdr;
mod search;
mod space;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::DirectiveConfig;

pub use pareto::{adrs, dominates, pareto_front, relax_pareto};
pub use sdr::{attribute_sdr, sdr, sdr_by, AttributeSdr};
pub use search::{midpoint_candidate, select_candidates};
pub use space::{equivalence_key, initial_sampling, prune_design_space, split_regions, PrunedSpace, Region, RegionMember};

pub const DEFAULT_DELTA_PWR: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DseError {
    #[error("region with partition factor {0} is empty")]
    EmptyRegion(u32),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("reference set is empty")]
    EmptyReferenceSet,
    #[error("invalid exploration settings: {0}")]
    InvalidConfig(String),
    #[error("evaluating {point}: {message}")]
    Evaluation { point: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedPoint {
    pub directives: DirectiveConfig,
    pub latency_cycles: u64,
    pub power_w: f64,
}

impl EvaluatedPoint {
    pub fn objectives(&self) -> (u64, f64) {
        (self.latency_cycles, self.power_w)
    }
}

/// Latency and estimated power for one configuration; stands in for one
/// synthesis run followed by power prediction.
pub trait PointEvaluator: Sync {
    fn evaluate(&self, cfg: &DirectiveConfig) -> Result<(u64, f64), DseError>;
}

impl<F> PointEvaluator for F
where
    F: Fn(&DirectiveConfig) -> Result<(u64, f64), DseError> + Sync,
{
    fn evaluate(&self, cfg: &DirectiveConfig) -> Result<(u64, f64), DseError> {
        self(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DseConfig {
    pub initial_rate: f64,
    /// Fraction of the pruned space that may be evaluated.
    pub budget: f64,
    pub delta_pwr: f64,
    /// Also use points inside the relaxation band as search references,
    /// not only the strict front.
    pub relaxed_references: bool,
}

impl Default for DseConfig {
    fn default() -> Self {
        Self { initial_rate: 0.02, budget: 0.2, delta_pwr: DEFAULT_DELTA_PWR, relaxed_references: false }
    }
}

impl DseConfig {
    pub fn validate(&self) -> Result<(), DseError> {
        let ok = self.initial_rate > 0.0 && self.initial_rate <= self.budget && self.budget <= 1.0;
        if !ok {
            return Err(DseError::InvalidConfig(format!(
                "need 0 < initial rate ({}) <= budget ({}) <= 1",
                self.initial_rate, self.budget
            )));
        }
        if !(self.delta_pwr >= 0.0 && self.delta_pwr.is_finite()) {
            return Err(DseError::InvalidConfig(format!("relaxation band {} must be >= 0", self.delta_pwr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub point: EvaluatedPoint,
    /// 0 for the initial sample.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoSet {
    /// Nondominated sampled points, by ascending latency.
    pub members: Vec<EvaluatedPoint>,
    /// Sampled points admitted by the relaxation band.
    pub relaxed: Vec<EvaluatedPoint>,
    pub ledger: Vec<LedgerEntry>,
    pub delta_pwr: f64,
}

impl ParetoSet {
    /// Front members followed by relaxed extras.
    pub fn all(&self) -> impl Iterator<Item = &EvaluatedPoint> {
        self.members.iter().chain(&self.relaxed)
    }

    pub fn iteration_of(&self, cfg: &DirectiveConfig) -> Option<usize> {
        self.ledger.iter().find(|e| &e.point.directives == cfg).map(|e| e.iteration)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DseOutcome {
    pub pareto: ParetoSet,
    pub evaluations: usize,
    pub iterations: usize,
    pub pruned_size: usize,
}

fn evaluate_all<E: PointEvaluator>(
    evaluator: &E,
    cfgs: &[DirectiveConfig],
    iteration: usize,
) -> Result<Vec<LedgerEntry>, DseError> {
    cfgs.par_iter()
        .map(|c| {
            let (latency_cycles, power_w) = evaluator.evaluate(c)?;
            if latency_cycles == 0 || !(power_w.is_finite() && power_w > 0.0) {
                return Err(DseError::Evaluation {
                    point: c.point_id(),
                    message: format!("non-positive objectives ({latency_cycles}, {power_w})"),
                });
            }
            Ok(LedgerEntry { point: EvaluatedPoint { directives: c.clone(), latency_cycles, power_w }, iteration })
        })
        .collect()
}

/// Explores `space` until `budget * |pruned space|` points are evaluated or
/// no candidate is left. A budget of 1 evaluates the whole pruned space.
pub fn run_dse<E: PointEvaluator>(space: &[DirectiveConfig], evaluator: &E, cfg: &DseConfig) -> Result<DseOutcome, DseError> {
    cfg.validate()?;
    let pruned = prune_design_space(space).representatives;
    let n = pruned.len();
    let target = ((cfg.budget * n as f64).ceil() as usize).min(n);
    let regions = split_regions(&pruned);

    let initial: Vec<DirectiveConfig> = if target >= n {
        pruned.clone()
    } else {
        let mut v = Vec::new();
        for r in &regions {
            for pos in initial_sampling(r, cfg.initial_rate)? {
                v.push(r.members[pos].config.clone());
            }
        }
        v
    };
    let mut ledger = evaluate_all(evaluator, &initial, 0)?;
    let mut sampled: HashSet<DirectiveConfig> = initial.into_iter().collect();
    let mut iterations = 0;

    while ledger.len() < target {
        let points: Vec<EvaluatedPoint> = ledger.iter().map(|e| e.point.clone()).collect();
        let mut front = pareto_front(&points);
        if cfg.relaxed_references {
            let extra = relax_pareto(&front, &points, cfg.delta_pwr);
            front.extend(extra);
        }
        let mut candidates = select_candidates(&front, &regions, &sampled);
        candidates.truncate(target - ledger.len());
        if candidates.is_empty() {
            break;
        }
        iterations += 1;
        ledger.extend(evaluate_all(evaluator, &candidates, iterations)?);
        sampled.extend(candidates);
    }

    let points: Vec<EvaluatedPoint> = ledger.iter().map(|e| e.point.clone()).collect();
    let members = pareto_front(&points);
    let relaxed = relax_pareto(&members, &points, cfg.delta_pwr);
    let evaluations = ledger.len();
    Ok(DseOutcome {
        pareto: ParetoSet { members, relaxed, ledger, delta_pwr: cfg.delta_pwr },
        evaluations,
        iterations,
        pruned_size: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(depth: usize) -> Vec<DirectiveConfig> {
        let mut out = Vec::new();
        for p in [1u32, 2, 4, 8] {
            for l in 0..=depth as u32 {
                for code in 0..4usize.pow(depth as u32) {
                    let u = (0..depth).map(|d| [1, 2, 4, 8][(code >> (2 * (depth - 1 - d))) & 3]).collect();
                    out.push(DirectiveConfig { array_partition_factor: p, pipeline_level: l, unroll_factors: u });
                }
            }
        }
        out
    }

    fn toy(c: &DirectiveConfig) -> Result<(u64, f64), DseError> {
        let u = c.unroll_product() as f64;
        let pipe = if c.pipeline_level > 0 { 3.0 } else { 1.0 };
        let lat = (4000.0 / (u * pipe * (c.array_partition_factor as f64).sqrt())).ceil() as u64 + 5;
        let pwr = 0.2 + 0.01 * u * pipe + 0.003 * c.array_partition_factor as f64;
        Ok((lat, pwr))
    }

    #[test]
    fn full_budget_is_exhaustive() {
        let s = space(2);
        let out = run_dse(&s, &toy, &DseConfig { initial_rate: 0.02, budget: 1.0, delta_pwr: 0.0, ..Default::default() }).unwrap();
        assert_eq!(out.evaluations, out.pruned_size);
        let all: Vec<EvaluatedPoint> = prune_design_space(&s)
            .representatives
            .iter()
            .map(|c| {
                let (l, p) = toy(c).unwrap();
                EvaluatedPoint { directives: c.clone(), latency_cycles: l, power_w: p }
            })
            .collect();
        assert_eq!(out.pareto.members, pareto_front(&all));
    }

    #[test]
    fn budget_equal_to_rate_stops_after_initial_sample() {
        let out = run_dse(&space(3), &toy, &DseConfig { initial_rate: 0.05, budget: 0.05, delta_pwr: 0.05, ..Default::default() }).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.pareto.ledger.iter().all(|e| e.iteration == 0));
    }

    #[test]
    fn no_point_evaluated_twice_and_deterministic() {
        let s = space(3);
        let cfg = DseConfig { initial_rate: 0.02, budget: 0.2, delta_pwr: 0.05, ..Default::default() };
        let a = run_dse(&s, &toy, &cfg).unwrap();
        let b = run_dse(&s, &toy, &cfg).unwrap();
        assert_eq!(a, b);
        let uniq: HashSet<_> = a.pareto.ledger.iter().map(|e| &e.point.directives).collect();
        assert_eq!(uniq.len(), a.evaluations);
        assert_eq!(a.evaluations, a.pareto.ledger.len());
        assert!(a.pareto.members.iter().all(|m| uniq.contains(&m.directives)));
    }

    #[test]
    fn evaluations_stay_within_budget() {
        let s = space(3);
        for relaxed_references in [false, true] {
            for budget in [0.1, 0.2, 0.4] {
                let cfg = DseConfig { budget, relaxed_references, ..Default::default() };
                let out = run_dse(&s, &toy, &cfg).unwrap();
                assert!(out.evaluations <= (budget * out.pruned_size as f64).ceil() as usize);
            }
        }
    }

    #[test]
    fn invalid_settings() {
        let bad = DseConfig { initial_rate: 0.3, budget: 0.2, delta_pwr: 0.05, ..Default::default() };
        assert!(matches!(run_dse(&space(1), &toy, &bad), Err(DseError::InvalidConfig(_))));
    }

    #[test]
    fn evaluator_errors_propagate() {
        let fail = |c: &DirectiveConfig| -> Result<(u64, f64), DseError> {
            Err(DseError::Evaluation { point: c.point_id(), message: "boom".into() })
        };
        assert!(run_dse(&space(1), &fail, &DseConfig::default()).is_err());
    }
}
