use std::collections::BTreeMap;

use super::{DseError, EvaluatedPoint};

fn population_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Standard deviation reduction of splitting `values` into `subsets`, with
/// population standard deviations. The subsets must partition `values` as a
/// multiset.
pub fn sdr(values: &[f64], subsets: &[Vec<f64>]) -> Result<f64, DseError> {
    if values.is_empty() {
        return Err(DseError::InvalidPartition("no values".into()));
    }
    if subsets.iter().any(|s| s.is_empty()) {
        return Err(DseError::InvalidPartition("empty subset".into()));
    }
    let mut a: Vec<f64> = values.to_vec();
    let mut b: Vec<f64> = subsets.iter().flatten().copied().collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.to_bits() != y.to_bits()) {
        return Err(DseError::InvalidPartition("subsets do not partition the values".into()));
    }
    let n = values.len() as f64;
    let weighted: f64 = subsets.iter().map(|s| s.len() as f64 / n * population_sd(s)).sum();
    Ok(population_sd(values) - weighted)
}

/// SDR of `values` grouped by `labels`.
pub fn sdr_by<K: Ord>(values: &[f64], labels: &[K]) -> Result<f64, DseError> {
    if values.len() != labels.len() {
        return Err(DseError::InvalidPartition("one label per value required".into()));
    }
    let mut groups: BTreeMap<&K, Vec<f64>> = BTreeMap::new();
    for (v, k) in values.iter().zip(labels) {
        groups.entry(k).or_default().push(*v);
    }
    sdr(values, &groups.into_values().collect::<Vec<_>>())
}

/// SDR of latency and power when splitting by pipeline level versus by the
/// unroll factor of one loop. The unroll entries take the loop with the
/// largest reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttributeSdr {
    pub pipeline_latency: f64,
    pub unroll_latency: f64,
    pub pipeline_power: f64,
    pub unroll_power: f64,
}

pub fn attribute_sdr(points: &[EvaluatedPoint]) -> Result<AttributeSdr, DseError> {
    let lat: Vec<f64> = points.iter().map(|p| p.latency_cycles as f64).collect();
    let pwr: Vec<f64> = points.iter().map(|p| p.power_w).collect();
    let pipe: Vec<u32> = points.iter().map(|p| p.directives.pipeline_level).collect();
    let depth = points.iter().map(|p| p.directives.loop_depth()).max().unwrap_or(0);
    let (mut unroll_latency, mut unroll_power) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..depth {
        let labels: Vec<Option<u32>> = points.iter().map(|p| p.directives.unroll_factors.get(i).copied()).collect();
        unroll_latency = unroll_latency.max(sdr_by(&lat, &labels)?);
        unroll_power = unroll_power.max(sdr_by(&pwr, &labels)?);
    }
    Ok(AttributeSdr {
        pipeline_latency: sdr_by(&lat, &pipe)?,
        unroll_latency,
        pipeline_power: sdr_by(&pwr, &pipe)?,
        unroll_power,
    })
}
