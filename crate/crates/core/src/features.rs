//! Fixed-length feature vectors: 11 architecture features followed by one
//! activity-histogram block per opcode.
//!
//! Layout per opcode block (in [`Opcode::ALL`] order): the operator count,
//! then for every bin its count, its share of the opcode's operators and the
//! mean normalized activity of its members.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{scaled_activity, switching_activity, ValueTrace};
use crate::design::{DesignPoint, HlsMetrics, Opcode, MAX_WIDTH};

pub const ARCH_FEATURES: usize = 11;

pub const ARCH_NAMES: [&str; ARCH_FEATURES] = [
    "lut",
    "ff",
    "dsp",
    "bram",
    "clock_period_ns",
    "latency_cycles",
    "sf_lut",
    "sf_ff",
    "sf_dsp",
    "sf_bram",
    "sf_latency",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("baseline {metric} is zero; scaling factor undefined")]
    ZeroBaseline { metric: &'static str },
    #[error("invalid histogram configuration: {0}")]
    InvalidConfig(String),
    #[error("feature table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramConfig {
    pub n_bins: usize,
    /// Divide each scaled activity by the operator's widest signal before
    /// binning. When off, activities are divided by the 64-bit maximum.
    pub normalize_by_width: bool,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self { n_bins: 4, normalize_by_width: true }
    }
}

impl HistogramConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.n_bins < 1 {
            return Err(FeatureError::InvalidConfig("n_bins must be at least 1".into()));
        }
        Ok(())
    }

    /// Bin of a normalized activity in [0, 1]; the last bin is closed.
    pub fn bin_of(&self, v: f64) -> usize {
        ((v * self.n_bins as f64) as usize).min(self.n_bins - 1)
    }

    /// Half-open activity interval covered by a bin (closed for the last).
    pub fn bin_interval(&self, bin: usize) -> (f64, f64) {
        let n = self.n_bins as f64;
        (bin as f64 / n, (bin + 1) as f64 / n)
    }

    pub fn feature_len(&self) -> usize {
        ARCH_FEATURES + Opcode::COUNT * (1 + 3 * self.n_bins)
    }
}

/// Names of every feature index for a given bin count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    names: Vec<String>,
}

impl FeatureLayout {
    pub fn new(n_bins: usize) -> Self {
        let mut names: Vec<String> = ARCH_NAMES.iter().map(|s| s.to_string()).collect();
        for op in Opcode::ALL {
            names.push(format!("{op}_count"));
            for b in 0..n_bins {
                names.push(format!("{op}_bin{b}_count"));
                names.push(format!("{op}_bin{b}_pct"));
                names.push(format!("{op}_bin{b}_mean"));
            }
        }
        Self { names }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub n_bins: usize,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::new(self.n_bins)
    }
}

/// Raw metrics plus scaling factors against the no-directive baseline:
/// `[lut, ff, dsp, bram, clock_period_ns, latency_cycles, sf_lut, sf_ff,
/// sf_dsp, sf_bram, sf_latency]`.
pub fn architecture_features(
    current: &HlsMetrics,
    base: &HlsMetrics,
) -> Result<[f64; ARCH_FEATURES], FeatureError> {
    architecture_features_with(current, base, BaselinePolicy::Strict)
}

/// How to treat a baseline resource count of zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BaselinePolicy {
    /// Report [`FeatureError::ZeroBaseline`].
    #[default]
    Strict,
    /// Use a scaling factor of 1 for resources the baseline lacks.
    UnitRatio,
}

pub fn architecture_features_with(
    current: &HlsMetrics,
    base: &HlsMetrics,
    policy: BaselinePolicy,
) -> Result<[f64; ARCH_FEATURES], FeatureError> {
    let sf = |metric: &'static str, cur: u64, b: u64| -> Result<f64, FeatureError> {
        match (b, policy) {
            (0, BaselinePolicy::Strict) => Err(FeatureError::ZeroBaseline { metric }),
            (0, BaselinePolicy::UnitRatio) => Ok(1.0),
            _ => Ok(cur as f64 / b as f64),
        }
    };
    Ok([
        current.lut as f64,
        current.ff as f64,
        current.dsp as f64,
        current.bram as f64,
        current.clock_period_ns,
        current.latency_cycles as f64,
        sf("lut", current.lut, base.lut)?,
        sf("ff", current.ff, base.ff)?,
        sf("dsp", current.dsp, base.dsp)?,
        sf("bram", current.bram, base.bram)?,
        sf("latency", current.latency_cycles, base.latency_cycles)?,
    ])
}

/// Scaled activity of one RTL operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityRecord {
    pub opcode: Opcode,
    pub scaled_sa: f64,
    pub max_width: u8,
}

/// Turns traces into scaled activities using the design latency.
pub fn activity_records(
    traces: &BTreeMap<u32, ValueTrace>,
    latency: u64,
) -> Result<Vec<ActivityRecord>, crate::activity::ActivityError> {
    traces
        .values()
        .map(|t| {
            Ok(ActivityRecord {
                opcode: t.opcode,
                scaled_sa: scaled_activity(switching_activity(t), t.transitions(), latency)?,
                max_width: t.max_width(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BinStats {
    pub count: usize,
    pub percentage: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpcodeHistogram {
    pub total: usize,
    pub bins: Vec<BinStats>,
}

/// One histogram per opcode, indexed by [`Opcode::index`].
pub fn build_histograms(activities: &[ActivityRecord], cfg: &HistogramConfig) -> Vec<OpcodeHistogram> {
    let n = cfg.n_bins.max(1);
    let mut sums = vec![vec![(0usize, 0.0f64); n]; Opcode::COUNT];
    for a in activities {
        let denom = if cfg.normalize_by_width { a.max_width.max(1) } else { MAX_WIDTH };
        let v = (a.scaled_sa / denom as f64).clamp(0.0, 1.0);
        let slot = &mut sums[a.opcode.index()][cfg.bin_of(v)];
        slot.0 += 1;
        slot.1 += v;
    }
    sums.into_iter()
        .map(|bins| {
            let total: usize = bins.iter().map(|b| b.0).sum();
            let bins = bins
                .into_iter()
                .map(|(count, sum)| {
                    if count == 0 {
                        BinStats::default()
                    } else {
                        BinStats {
                            count,
                            percentage: count as f64 / total as f64,
                            mean: sum / count as f64,
                        }
                    }
                })
                .collect();
            OpcodeHistogram { total, bins }
        })
        .collect()
}

/// Builds the full feature vector of one design point.
pub fn assemble_features(
    point: &DesignPoint,
    base: &HlsMetrics,
    traces: &BTreeMap<u32, ValueTrace>,
    cfg: &HistogramConfig,
) -> Result<FeatureVector, FeatureError> {
    assemble_features_with(point, base, traces, cfg, BaselinePolicy::Strict)
}

pub fn assemble_features_with(
    point: &DesignPoint,
    base: &HlsMetrics,
    traces: &BTreeMap<u32, ValueTrace>,
    cfg: &HistogramConfig,
    policy: BaselinePolicy,
) -> Result<FeatureVector, FeatureError> {
    cfg.validate()?;
    let arch = architecture_features_with(&point.metrics, base, policy)?;
    let records = activity_records(traces, point.activity_window())
        .map_err(|e| FeatureError::InvalidConfig(e.to_string()))?;
    let hists = build_histograms(&records, cfg);
    let mut values = Vec::with_capacity(cfg.feature_len());
    values.extend_from_slice(&arch);
    for h in &hists {
        values.push(h.total as f64);
        for b in &h.bins {
            values.extend([b.count as f64, b.percentage, b.mean]);
        }
    }
    debug_assert_eq!(values.len(), cfg.feature_len());
    Ok(FeatureVector { n_bins: cfg.n_bins, values })
}

/// One row of an exported feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub app: String,
    pub point_id: String,
    pub features: FeatureVector,
    pub measured_power_w: Option<f64>,
}

pub fn write_feature_csv<W: Write>(rows: &[FeatureRow], n_bins: usize, writer: W) -> Result<(), FeatureError> {
    let err = |e: csv::Error| FeatureError::Table(e.to_string());
    let layout = FeatureLayout::new(n_bins);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["app".to_string(), "point_id".to_string()];
    header.extend(layout.names().iter().cloned());
    header.push("measured_power_w".into());
    w.write_record(&header).map_err(err)?;
    for row in rows {
        if row.features.n_bins != n_bins {
            return Err(FeatureError::Table(format!(
                "row {} has {} bins, table has {n_bins}",
                row.point_id, row.features.n_bins
            )));
        }
        let mut rec = vec![row.app.clone(), row.point_id.clone()];
        rec.extend(row.features.values.iter().map(|v| v.to_string()));
        rec.push(row.measured_power_w.map(|p| p.to_string()).unwrap_or_default());
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| FeatureError::Table(e.to_string()))?;
    Ok(())
}

/// Reads a table written by [`write_feature_csv`], recovering the bin count
/// from the header.
pub fn read_feature_csv<R: Read>(reader: R) -> Result<(usize, Vec<FeatureRow>), FeatureError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(|e| FeatureError::Table(e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 3 || names[0] != "app" || names[1] != "point_id" || names[names.len() - 1] != "measured_power_w" {
        return Err(FeatureError::Table("expected app, point_id, features..., measured_power_w".into()));
    }
    let n_features = names.len() - 3;
    let per_op = n_features
        .checked_sub(ARCH_FEATURES)
        .filter(|r| r % Opcode::COUNT == 0)
        .map(|r| r / Opcode::COUNT)
        .filter(|b| *b >= 1 && (b - 1) % 3 == 0)
        .ok_or_else(|| FeatureError::Table(format!("{n_features} feature columns match no layout")))?;
    let n_bins = (per_op - 1) / 3;
    let layout = FeatureLayout::new(n_bins);
    if layout.names().iter().map(String::as_str).ne(names[2..names.len() - 1].iter().copied()) {
        return Err(FeatureError::Table("feature header does not match the layout".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| FeatureError::Table(e.to_string()))?;
        let parse = |s: &str| -> Result<f64, FeatureError> {
            s.parse::<f64>()
                .map_err(|_| FeatureError::Table(format!("row {}: bad number {s:?}", i + 1)))
        };
        let values = (2..2 + n_features).map(|c| parse(&rec[c])).collect::<Result<Vec<_>, _>>()?;
        let power = match &rec[names.len() - 1] {
            "" => None,
            s => Some(parse(s)?),
        };
        rows.push(FeatureRow {
            app: rec[0].to_string(),
            point_id: rec[1].to_string(),
            features: FeatureVector { n_bins, values },
            measured_power_w: power,
        });
    }
    Ok((n_bins, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::tests::minimal_point;

    fn metrics(lut: u64, dsp: u64) -> HlsMetrics {
        HlsMetrics { lut, ff: 50, dsp, bram: 2, clock_period_ns: 9.0, latency_cycles: 40 }
    }

    #[test]
    fn identical_metrics_give_unit_scaling_factors() {
        let m = metrics(100, 3);
        let f = architecture_features(&m, &m).unwrap();
        assert_eq!(&f[..6], &[100.0, 50.0, 3.0, 2.0, 9.0, 40.0]);
        assert_eq!(&f[6..], &[1.0; 5]);
    }

    #[test]
    fn lut_ratio() {
        let f = architecture_features(&metrics(200, 3), &metrics(100, 3)).unwrap();
        assert_eq!(f[6], 2.0);
    }

    #[test]
    fn zero_baseline_dsp() {
        let err = architecture_features(&metrics(100, 4), &metrics(100, 0)).unwrap_err();
        assert_eq!(err, FeatureError::ZeroBaseline { metric: "dsp" });
        let f = architecture_features_with(&metrics(100, 4), &metrics(100, 0), BaselinePolicy::UnitRatio)
            .unwrap();
        assert_eq!(f[8], 1.0);
    }

    fn rec(opcode: Opcode, v: f64) -> ActivityRecord {
        ActivityRecord { opcode, scaled_sa: v * 8.0, max_width: 8 }
    }

    #[test]
    fn three_adds_hand_binned() {
        let acts = [rec(Opcode::Add, 0.1), rec(Opcode::Add, 0.3), rec(Opcode::Add, 0.3)];
        let h = &build_histograms(&acts, &HistogramConfig::default())[Opcode::Add.index()];
        assert_eq!(h.total, 3);
        assert_eq!(h.bins[0].count, 1);
        assert!((h.bins[0].percentage - 1.0 / 3.0).abs() < 1e-12);
        assert!((h.bins[0].mean - 0.1).abs() < 1e-12);
        assert_eq!(h.bins[1].count, 2);
        assert!((h.bins[1].percentage - 2.0 / 3.0).abs() < 1e-12);
        assert!((h.bins[1].mean - 0.3).abs() < 1e-12);
        assert_eq!(h.bins[2], BinStats::default());
        assert_eq!(h.bins[3], BinStats::default());
    }

    #[test]
    fn no_operators_gives_zero_blocks() {
        let hs = build_histograms(&[], &HistogramConfig::default());
        assert_eq!(hs.len(), Opcode::COUNT);
        assert!(hs.iter().all(|h| h.total == 0 && h.bins.iter().all(|b| *b == BinStats::default())));
    }

    #[test]
    fn activity_of_one_lands_in_last_bin() {
        let h = &build_histograms(&[rec(Opcode::Mul, 1.0)], &HistogramConfig::default())[Opcode::Mul.index()];
        assert_eq!(h.bins[3].count, 1);
        assert_eq!(h.bins[3].mean, 1.0);
    }

    #[test]
    fn layout_lengths() {
        assert_eq!(FeatureLayout::new(4).len(), 284);
        assert_eq!(HistogramConfig::default().feature_len(), 284);
        assert_eq!(FeatureLayout::new(1).len(), 95);
        let names = FeatureLayout::new(2);
        let unique: std::collections::BTreeSet<_> = names.names().iter().collect();
        assert_eq!(unique.len(), names.len());
    }

    #[test]
    fn baseline_point_with_quiet_traces() {
        let p = minimal_point();
        let f = assemble_features(&p, &p.metrics, &BTreeMap::new(), &HistogramConfig::default()).unwrap();
        assert_eq!(f.values.len(), 284);
        assert_eq!(&f.values[6..11], &[1.0; 5]);
        assert!(f.values[11..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn feature_csv_round_trip() {
        let p = minimal_point();
        let f = assemble_features(&p, &p.metrics, &BTreeMap::new(), &HistogramConfig { n_bins: 2, normalize_by_width: true })
            .unwrap();
        let rows = vec![FeatureRow { app: "a".into(), point_id: "p".into(), features: f, measured_power_w: Some(0.123456789) }];
        let mut buf = Vec::new();
        write_feature_csv(&rows, 2, &mut buf).unwrap();
        let (bins, back) = read_feature_csv(buf.as_slice()).unwrap();
        assert_eq!(bins, 2);
        assert_eq!(back, rows);
    }
}
