//! Benchmark directories: a manifest plus one descriptor JSON and one
//! stimulus CSV per design point.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/<app>/<point_id>.json
//! <dir>/<app>/<point_id>.csv
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{ActivityError, Stimuli};
use crate::design::{parse_design_point_with, DesignError, DesignPoint, DirectiveConfig, DirectiveOptions};
use crate::dse::prune_design_space;
use crate::synth::{AppGenerator, GeneratorParams, SynthError};

pub const BENCH_FORMAT: &str = "hlspower-bench/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Design { path: String, source: DesignError },
    #[error("{path}: {source}")]
    Stimuli { path: String, source: ActivityError },
    #[error(transparent)]
    Synth(#[from] SynthError),
}

fn io_err(path: &Path, e: impl ToString) -> BenchError {
    BenchError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestPoint {
    pub point_id: String,
    /// Descriptor path relative to the benchmark directory.
    pub descriptor: String,
    pub latency_cycles: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_power_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestApp {
    pub name: String,
    pub loop_depth: usize,
    /// Point id of the no-directive configuration.
    pub base_point: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorParams>,
    pub points: Vec<ManifestPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub applications: Vec<ManifestApp>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self { format: BENCH_FORMAT.into(), applications: Vec::new() }
    }
}

impl ManifestApp {
    pub fn base(&self) -> Option<&ManifestPoint> {
        self.points.iter().find(|p| p.point_id == self.base_point)
    }
}

/// Which configurations of each application to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coverage {
    #[default]
    Full,
    /// Pruning representatives only (the baseline is always one).
    Pruned,
}

/// Generates one application and writes its points under `dir/<name>/`.
pub fn write_application(dir: &Path, params: &GeneratorParams, coverage: Coverage) -> Result<ManifestApp, BenchError> {
    let generator = AppGenerator::new(params.clone())?;
    let mut cfgs = generator.space();
    if coverage == Coverage::Pruned {
        cfgs = prune_design_space(&cfgs).representatives;
    }
    let app_dir = dir.join(&params.name);
    fs::create_dir_all(&app_dir).map_err(|e| io_err(&app_dir, e))?;
    let points = cfgs
        .par_iter()
        .map(|cfg| {
            let g = generator.point(cfg)?;
            let id = cfg.point_id();
            let json_path = app_dir.join(format!("{id}.json"));
            fs::write(&json_path, g.point.to_json()).map_err(|e| io_err(&json_path, e))?;
            let csv_path = app_dir.join(&g.point.stimuli);
            let file = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
            g.stimuli.write_csv(file).map_err(|e| io_err(&csv_path, e))?;
            Ok(ManifestPoint {
                point_id: id.clone(),
                descriptor: format!("{}/{id}.json", params.name),
                latency_cycles: g.point.metrics.latency_cycles,
                measured_power_w: g.point.measured_power_w,
            })
        })
        .collect::<Result<Vec<_>, BenchError>>()?;
    Ok(ManifestApp {
        name: params.name.clone(),
        loop_depth: params.loop_depth,
        base_point: DirectiveConfig::identity(params.loop_depth).point_id(),
        generator: Some(params.clone()),
        points,
    })
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

/// Writes every application and the manifest listing them.
pub fn write_bench(dir: &Path, apps: &[GeneratorParams], coverage: Coverage) -> Result<Manifest, BenchError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut manifest = Manifest::default();
    for params in apps {
        manifest.applications.push(write_application(dir, params, coverage)?);
    }
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// An opened benchmark directory; points are loaded on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Bench {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Bench {
    pub fn open(dir: &Path) -> Result<Self, BenchError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| BenchError::Format { path: path.display().to_string(), message: e.to_string() })?;
        if manifest.format != BENCH_FORMAT {
            return Err(BenchError::Format {
                path: path.display().to_string(),
                message: format!("unsupported format {:?}, expected {BENCH_FORMAT:?}", manifest.format),
            });
        }
        for app in &manifest.applications {
            if app.base().is_none() {
                return Err(BenchError::Format {
                    path: path.display().to_string(),
                    message: format!("application {} lists no base point {}", app.name, app.base_point),
                });
            }
        }
        Ok(Self { root: dir.to_path_buf(), manifest })
    }

    pub fn app(&self, name: &str) -> Option<&ManifestApp> {
        self.manifest.applications.iter().find(|a| a.name == name)
    }

    /// Parses a descriptor and its stimulus file.
    pub fn load_point(&self, entry: &ManifestPoint) -> Result<(DesignPoint, Stimuli), BenchError> {
        let path = self.root.join(&entry.descriptor);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let point = parse_design_point_with(&text, &DirectiveOptions::default())
            .map_err(|source| BenchError::Design { path: path.display().to_string(), source })?;
        let csv_path = path.parent().unwrap_or(&self.root).join(&point.stimuli);
        let file = fs::File::open(&csv_path).map_err(|e| io_err(&csv_path, e))?;
        let stimuli = Stimuli::read_csv(file, &point.fsmd)
            .map_err(|source| BenchError::Stimuli { path: csv_path.display().to_string(), source })?;
        Ok((point, stimuli))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> GeneratorParams {
        let mut p = GeneratorParams::new(seed, 1);
        p.trip_counts = vec![8];
        p.frames = 2;
        p
    }

    #[test]
    fn round_trip() {
        let dir = std::env::temp_dir().join(format!("hlspower-bench-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let manifest = write_bench(&dir, &[params(3)], Coverage::Full).unwrap();
        assert_eq!(manifest.applications[0].points.len(), 32);
        let bench = Bench::open(&dir).unwrap();
        assert_eq!(bench.manifest, manifest);
        let g = AppGenerator::new(params(3)).unwrap();
        for entry in bench.manifest.applications[0].points.iter().take(5) {
            let (point, stimuli) = bench.load_point(entry).unwrap();
            let again = g.point(&point.directives).unwrap();
            assert_eq!(point, again.point);
            assert_eq!(stimuli, again.stimuli);
        }
        fs::remove_dir_all(&dir).unwrap();
    }
}
