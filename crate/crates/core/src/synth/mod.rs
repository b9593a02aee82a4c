//! Synthetic applications with complete directive spaces and an analytical
//! ground-truth power oracle.

mod kernel;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{execute_trace, ActivityError, Stimuli};
use crate::design::{Application, DesignError, DesignPoint, DirectiveConfig, DirectiveOptions, Opcode};
use crate::features::{activity_records, ActivityRecord};

pub use kernel::{Effective, Kernel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Activity(#[from] ActivityError),
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// Hidden coefficients of the power oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub static_base_w: f64,
    pub voltage: f64,
    pub frequency: f64,
    /// Effective switched capacitance per opcode.
    pub capacitance: BTreeMap<Opcode, f64>,
}

impl Default for OracleParams {
    fn default() -> Self {
        let c = |op| match op {
            Opcode::Add | Opcode::Sub => 0.0008,
            Opcode::Mul => 0.0030,
            Opcode::Div => 0.0080,
            Opcode::Sqrt => 0.0055,
            Opcode::Fadd | Opcode::Fsub => 0.0040,
            Opcode::Fmul => 0.0035,
            Opcode::Fdiv => 0.0075,
            Opcode::Fsqrt => 0.0060,
            Opcode::And | Opcode::Or | Opcode::Xor => 0.0003,
            Opcode::Icmp => 0.0004,
            Opcode::Fcmp => 0.0008,
            Opcode::Store => 0.0020,
            Opcode::Load => 0.0024,
            Opcode::Read | Opcode::Write => 0.0002,
            Opcode::Mux | Opcode::Select => 0.0004,
        };
        Self {
            static_base_w: 0.25,
            voltage: 0.85,
            frequency: 1.0,
            capacitance: Opcode::ALL.iter().map(|&op| (op, c(op))).collect(),
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidParams(m));
        if !(self.static_base_w > 0.0 && self.voltage > 0.0 && self.frequency > 0.0) {
            return bad("static power, voltage and frequency must be positive".into());
        }
        for op in Opcode::ALL {
            match self.capacitance.get(&op) {
                Some(&c) if c > 0.0 && c.is_finite() => {}
                _ => return bad(format!("capacitance of {op} missing or not positive")),
            }
        }
        Ok(())
    }

    /// `static + sum(scaled_sa * C * V^2 * f)` without noise.
    pub fn power(&self, records: &[ActivityRecord]) -> f64 {
        let v2f = self.voltage * self.voltage * self.frequency;
        self.static_base_w + records.iter().map(|r| r.scaled_sa * self.capacitance[&r.opcode] * v2f).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub seed: u64,
    pub name: String,
    pub loop_depth: usize,
    /// Loop trip counts, outermost first; empty picks a default per depth.
    pub trip_counts: Vec<u32>,
    /// Kernel calls simulated back to back on fresh data.
    pub frames: u32,
    /// `None` draws integer or float data from the seed.
    pub float_data: Option<bool>,
    /// Inclusive range of input arrays.
    pub inputs: (usize, usize),
    /// Inclusive range of arithmetic operations in the body.
    pub ops: (usize, usize),
    pub oracle: OracleParams,
    /// Relative standard deviation of the multiplicative oracle noise.
    pub noise: f64,
    /// Non-pipelined designs bind this many operations per expensive unit.
    pub share_ratio: u32,
    /// Memory ports per partition bank.
    pub ports_per_bank: u32,
    pub options: DirectiveOptions,
}

impl GeneratorParams {
    pub fn new(seed: u64, loop_depth: usize) -> Self {
        Self {
            seed,
            name: format!("synth{seed}"),
            loop_depth,
            trip_counts: Vec::new(),
            frames: 16,
            float_data: None,
            inputs: (1, 3),
            ops: (3, 8),
            oracle: OracleParams::default(),
            noise: 0.0,
            share_ratio: 2,
            ports_per_bank: 2,
            options: DirectiveOptions::default(),
        }
    }

    pub fn trips(&self) -> Vec<u32> {
        if !self.trip_counts.is_empty() {
            return self.trip_counts.clone();
        }
        match self.loop_depth {
            1 => vec![32],
            2 => vec![16, 8],
            d => vec![8; d],
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidParams(m));
        if self.name.is_empty() {
            return bad("empty application name".into());
        }
        if self.loop_depth == 0 {
            return bad("loop depth must be at least 1".into());
        }
        let trips = self.trips();
        if trips.len() != self.loop_depth || trips.iter().any(|&t| t == 0) {
            return bad(format!("need {} positive trip counts, got {trips:?}", self.loop_depth));
        }
        if trips.iter().any(|t| !t.is_power_of_two()) {
            return bad(format!("trip counts must be powers of two, got {trips:?}"));
        }
        let words = self.frames as u64 * trips.iter().map(|&t| t as u64).product::<u64>();
        if self.frames == 0 || words > 1 << kernel::ADDR_WIDTH {
            return bad(format!("{words} data words do not fit the address space"));
        }
        if self.inputs.0 == 0 || self.inputs.0 > self.inputs.1 || self.ops.0 == 0 || self.ops.0 > self.ops.1 {
            return bad("input and operation ranges must be non-empty and start at 1".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise {} must be >= 0", self.noise));
        }
        if self.share_ratio == 0 || self.ports_per_bank == 0 {
            return bad("share ratio and ports per bank must be positive".into());
        }
        if self.options.unroll_factors.iter().chain(&self.options.partition_factors).any(|&f| f == 0) {
            return bad("directive factors must be positive".into());
        }
        self.oracle.validate()
    }
}

/// Every directive configuration of a loop nest: partition factor x
/// pipeline level (none or one loop) x one unroll factor per loop.
pub fn design_space(loop_depth: usize, options: &DirectiveOptions) -> Vec<DirectiveConfig> {
    let mut unrolls: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..loop_depth {
        unrolls = unrolls
            .iter()
            .flat_map(|u| options.unroll_factors.iter().map(move |&f| [u.as_slice(), &[f]].concat()))
            .collect();
    }
    let mut out = Vec::new();
    for &p in &options.partition_factors {
        for level in 0..=loop_depth as u32 {
            for u in &unrolls {
                out.push(DirectiveConfig { array_partition_factor: p, pipeline_level: level, unroll_factors: u.clone() });
            }
        }
    }
    out
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Multiplicative noise factor of one point, fixed by seed and point id.
pub fn noise_factor(seed: u64, app: &str, point_id: &str, noise: f64) -> f64 {
    if noise == 0.0 {
        return 1.0;
    }
    let s = splitmix64(seed ^ fnv1a(app).rotate_left(17) ^ fnv1a(point_id));
    let z: f64 = Normal::new(0.0, noise).expect("valid sd").sample(&mut ChaCha8Rng::seed_from_u64(s));
    (1.0 + z).max(1e-3)
}

/// Ground-truth power of a design point before measurement noise.
pub fn noiseless_power(point: &DesignPoint, stimuli: &Stimuli, oracle: &OracleParams) -> Result<f64, SynthError> {
    let traces = execute_trace(&point.fsmd, stimuli)?;
    let records = activity_records(&traces, point.activity_window())?;
    Ok(oracle.power(&records))
}

/// Ground-truth power of a design point under the given stimuli.
pub fn oracle_power(point: &DesignPoint, stimuli: &Stimuli, params: &GeneratorParams) -> Result<f64, SynthError> {
    let clean = noiseless_power(point, stimuli, &params.oracle)?;
    Ok(clean * noise_factor(params.seed, &point.app, &point.point_id(), params.noise))
}

/// A generated design point with its stimuli and oracle power.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPoint {
    pub point: DesignPoint,
    pub stimuli: Stimuli,
    pub oracle_power_w: f64,
    pub noiseless_w: f64,
}

/// Builds points of one synthetic application on demand.
#[derive(Debug, Clone)]
pub struct AppGenerator {
    params: GeneratorParams,
    kernel: Kernel,
}

impl AppGenerator {
    pub fn new(params: GeneratorParams) -> Result<Self, SynthError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let kernel = Kernel::random(&params, &mut rng);
        Ok(Self { params, kernel })
    }

    pub fn params(&self) -> &GeneratorParams {
        &self.params
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn space(&self) -> Vec<DirectiveConfig> {
        design_space(self.params.loop_depth, &self.params.options)
    }

    pub fn effective(&self, cfg: &DirectiveConfig) -> Effective {
        Effective::of(cfg, &self.kernel.trip_counts)
    }

    /// Descriptor and stimuli without evaluating the oracle.
    pub fn design(&self, cfg: &DirectiveConfig) -> Result<(DesignPoint, Stimuli), SynthError> {
        cfg.validate(&self.params.options)?;
        if cfg.loop_depth() != self.params.loop_depth {
            return Err(SynthError::InvalidParams(format!(
                "{cfg} has {} unroll factors for a depth-{} nest",
                cfg.loop_depth(),
                self.params.loop_depth
            )));
        }
        let built = kernel::build(&self.kernel, &self.effective(cfg), &self.params);
        let point = DesignPoint {
            app: self.params.name.clone(),
            directives: cfg.clone(),
            metrics: built.metrics,
            fsmd: built.fsmd,
            stimuli: format!("{}.csv", cfg.point_id()),
            stimulus_calls: self.params.frames,
            measured_power_w: None,
        };
        Ok((point, built.stimuli))
    }

    pub fn point(&self, cfg: &DirectiveConfig) -> Result<GeneratedPoint, SynthError> {
        let (mut point, stimuli) = self.design(cfg)?;
        let clean = noiseless_power(&point, &stimuli, &self.params.oracle)?;
        let p = clean * noise_factor(self.params.seed, &point.app, &point.point_id(), self.params.noise);
        point.measured_power_w = Some(p);
        Ok(GeneratedPoint { point, stimuli, oracle_power_w: p, noiseless_w: clean })
    }

    pub fn points(&self, cfgs: &[DirectiveConfig]) -> Result<Vec<GeneratedPoint>, SynthError> {
        cfgs.par_iter().map(|c| self.point(c)).collect()
    }
}

/// A complete synthetic application: every configuration of its design
/// space, each with stimuli and oracle power.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthApp {
    pub application: Application,
    pub stimuli: BTreeMap<String, Stimuli>,
    pub oracle_power: BTreeMap<String, f64>,
}

pub fn generate_application(params: &GeneratorParams) -> Result<SynthApp, SynthError> {
    let generator = AppGenerator::new(params.clone())?;
    let generated = generator.points(&generator.space())?;
    let base_cfg = DirectiveConfig::identity(params.loop_depth);
    let mut stimuli = BTreeMap::new();
    let mut oracle_power = BTreeMap::new();
    let mut points = Vec::with_capacity(generated.len());
    for g in generated {
        let id = g.point.point_id();
        stimuli.insert(id.clone(), g.stimuli);
        oracle_power.insert(id, g.oracle_power_w);
        points.push(g.point);
    }
    let base_point = points
        .iter()
        .find(|p| p.directives == base_cfg)
        .cloned()
        .ok_or_else(|| SynthError::InvalidParams("option lists must include factor 1".into()))?;
    Ok(SynthApp {
        application: Application { name: params.name.clone(), loop_depth: params.loop_depth, base_point, points },
        stimuli,
        oracle_power,
    })
}
