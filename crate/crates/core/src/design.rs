//! Descriptor types for applications, design points and the scheduled
//! FSMD-lite hardware description, plus RTL-to-IR back tracing.
//!
//! A design point is stored as one JSON document with the top-level keys
//! `app`, `directives`, `metrics`, `fsmd`, `stimuli` and an optional
//! `measured_power_w`. See `docs/descriptor.md` for the full schema.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Widest signal an operator may carry.
pub const MAX_WIDTH: u8 = 64;

/// Default directive option list: cyclic partition factors and unroll factors.
pub const DEFAULT_FACTORS: [u32; 4] = [1, 2, 4, 8];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("RTL operator {rtl_id} references undefined IR operator {ir_id}")]
    DanglingIrReference { rtl_id: u32, ir_id: u32 },
}

/// The trackable IR opcodes, in the canonical feature-layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Opcode {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
    Fadd,
    Fsub,
    Fmul,
    Fdiv,
    Fsqrt,
    And,
    Or,
    Xor,
    Icmp,
    Fcmp,
    Store,
    Load,
    Read,
    Write,
    Mux,
    Select,
}

impl Opcode {
    pub const ALL: [Opcode; 21] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::Mul,
        Opcode::Div,
        Opcode::Sqrt,
        Opcode::Fadd,
        Opcode::Fsub,
        Opcode::Fmul,
        Opcode::Fdiv,
        Opcode::Fsqrt,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::Icmp,
        Opcode::Fcmp,
        Opcode::Store,
        Opcode::Load,
        Opcode::Read,
        Opcode::Write,
        Opcode::Mux,
        Opcode::Select,
    ];

    pub const COUNT: usize = 21;

    /// Position in [`Opcode::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::Mul => "mul",
            Opcode::Div => "div",
            Opcode::Sqrt => "sqrt",
            Opcode::Fadd => "fadd",
            Opcode::Fsub => "fsub",
            Opcode::Fmul => "fmul",
            Opcode::Fdiv => "fdiv",
            Opcode::Fsqrt => "fsqrt",
            Opcode::And => "and",
            Opcode::Or => "or",
            Opcode::Xor => "xor",
            Opcode::Icmp => "icmp",
            Opcode::Fcmp => "fcmp",
            Opcode::Store => "store",
            Opcode::Load => "load",
            Opcode::Read => "read",
            Opcode::Write => "write",
            Opcode::Mux => "mux",
            Opcode::Select => "select",
        }
    }

    /// Opcodes evaluated in IEEE-754 arithmetic.
    pub fn is_float(self) -> bool {
        matches!(
            self,
            Opcode::Fadd | Opcode::Fsub | Opcode::Fmul | Opcode::Fdiv | Opcode::Fsqrt | Opcode::Fcmp
        )
    }

    /// Allowed operand counts (inclusive range).
    fn arity(self) -> (usize, usize) {
        match self {
            Opcode::Sqrt | Opcode::Fsqrt | Opcode::Load | Opcode::Read | Opcode::Write => (1, 1),
            Opcode::Store => (2, 2),
            Opcode::Select => (3, 3),
            Opcode::Mux => (3, usize::MAX),
            _ => (2, 2),
        }
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Directive option lists of the target platform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectiveOptions {
    pub partition_factors: Vec<u32>,
    pub unroll_factors: Vec<u32>,
}

impl Default for DirectiveOptions {
    fn default() -> Self {
        Self {
            partition_factors: DEFAULT_FACTORS.to_vec(),
            unroll_factors: DEFAULT_FACTORS.to_vec(),
        }
    }
}

/// One directive configuration. `pipeline_level` 0 means no pipelining,
/// 1 the innermost loop and `loop_depth` the outermost loop. Unroll factors
/// are listed outermost loop first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectiveConfig {
    pub array_partition_factor: u32,
    pub pipeline_level: u32,
    pub unroll_factors: Vec<u32>,
}

impl DirectiveConfig {
    /// Partition 1, no pipelining, every loop unrolled by 1.
    pub fn identity(loop_depth: usize) -> Self {
        Self {
            array_partition_factor: 1,
            pipeline_level: 0,
            unroll_factors: vec![1; loop_depth],
        }
    }

    pub fn loop_depth(&self) -> usize {
        self.unroll_factors.len()
    }

    pub fn is_identity(&self) -> bool {
        self.array_partition_factor == 1
            && self.pipeline_level == 0
            && self.unroll_factors.iter().all(|&u| u == 1)
    }

    /// Index (outermost first) of the pipelined loop, if any.
    pub fn pipelined_loop(&self) -> Option<usize> {
        if self.pipeline_level == 0 {
            None
        } else {
            Some(self.loop_depth() - self.pipeline_level as usize)
        }
    }

    pub fn unroll_product(&self) -> u64 {
        self.unroll_factors.iter().map(|&u| u as u64).product()
    }

    /// Stable textual identifier, e.g. `p2-l1-u4.1`.
    pub fn point_id(&self) -> String {
        let unroll: Vec<String> = self.unroll_factors.iter().map(|u| u.to_string()).collect();
        format!(
            "p{}-l{}-u{}",
            self.array_partition_factor,
            self.pipeline_level,
            unroll.join(".")
        )
    }

    pub fn validate(&self, options: &DirectiveOptions) -> Result<(), DesignError> {
        let fail = |msg: String| Err(DesignError::InvariantViolation(msg));
        if self.unroll_factors.is_empty() {
            return fail("unroll_factors must list at least one loop level".into());
        }
        if !options.partition_factors.contains(&self.array_partition_factor) {
            return fail(format!(
                "array_partition_factor {} not in option list {:?}",
                self.array_partition_factor, options.partition_factors
            ));
        }
        for &u in &self.unroll_factors {
            if !options.unroll_factors.contains(&u) {
                return fail(format!(
                    "unroll factor {u} not in option list {:?}",
                    options.unroll_factors
                ));
            }
        }
        if self.pipeline_level as usize > self.loop_depth() {
            return fail(format!(
                "pipeline_level {} exceeds loop depth {}",
                self.pipeline_level,
                self.loop_depth()
            ));
        }
        Ok(())
    }
}

/// Parses the [`DirectiveConfig::point_id`] form; structure only, option
/// membership is left to `validate`.
impl std::str::FromStr for DirectiveConfig {
    type Err = DesignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DesignError::MalformedDocument(format!("bad point id {s:?}, expected p<P>-l<L>-u<U1>.<U2>..."));
        let mut parts = s.splitn(3, '-');
        let mut field = |prefix: char| parts.next().and_then(|p| p.strip_prefix(prefix)).ok_or_else(bad);
        let p = field('p')?;
        let l = field('l')?;
        let u = field('u')?;
        // Canonical decimal only, so ids and configurations map one to one.
        let num = |t: &str| {
            let canonical = t.bytes().all(|b| b.is_ascii_digit()) && (t == "0" || !t.starts_with('0'));
            if canonical {
                t.parse::<u32>().map_err(|_| bad())
            } else {
                Err(bad())
            }
        };
        Ok(Self {
            array_partition_factor: num(p)?,
            pipeline_level: num(l)?,
            unroll_factors: u.split('.').map(num).collect::<Result<_, _>>()?,
        })
    }
}

impl fmt::Display for DirectiveConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.point_id())
    }
}

/// Resource, timing and latency estimates of one HLS run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HlsMetrics {
    pub lut: u64,
    pub ff: u64,
    pub dsp: u64,
    pub bram: u64,
    pub clock_period_ns: f64,
    pub latency_cycles: u64,
}

impl HlsMetrics {
    pub fn validate(&self) -> Result<(), DesignError> {
        if !self.clock_period_ns.is_finite() || self.clock_period_ns <= 0.0 {
            return Err(DesignError::InvariantViolation(format!(
                "clock_period_ns must be finite and positive, got {}",
                self.clock_period_ns
            )));
        }
        if self.latency_cycles < 1 {
            return Err(DesignError::InvariantViolation(
                "latency_cycles must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Where an operand value comes from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operand {
    /// Result of another IR operator in the same invocation.
    Op(u32),
    /// Stimulus input port.
    Port(String),
    /// Constant, given as a raw bit pattern.
    Const(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrOperator {
    pub id: u32,
    pub opcode: Opcode,
    pub operand_widths: Vec<u8>,
    pub result_width: u8,
    pub state: u32,
    pub inputs: Vec<Operand>,
    /// Memory name for `load`/`store`, output port name for `write`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RtlOperator {
    pub id: u32,
    pub opcode: Opcode,
    pub ir_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortDecl {
    pub name: String,
    pub width: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryDecl {
    pub name: String,
    pub depth: u32,
    pub width: u8,
    /// Initial contents from address 0; remaining words start at zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub init: Vec<u64>,
}

/// Scheduled and bound datapath for one pass of the kernel body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsmdDesign {
    pub n_states: u32,
    #[serde(default)]
    pub input_ports: Vec<PortDecl>,
    #[serde(default)]
    pub output_ports: Vec<PortDecl>,
    #[serde(default)]
    pub memories: Vec<MemoryDecl>,
    pub ir_operators: Vec<IrOperator>,
    pub rtl_operators: Vec<RtlOperator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignPoint {
    pub app: String,
    pub directives: DirectiveConfig,
    pub metrics: HlsMetrics,
    pub fsmd: FsmdDesign,
    /// Path of the stimulus CSV, relative to the descriptor's directory.
    pub stimuli: String,
    /// Complete kernel calls covered by the stimulus file. Activity is
    /// amortized over `latency_cycles * stimulus_calls` cycles.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub stimulus_calls: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_power_w: Option<f64>,
}

fn one() -> u32 {
    1
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

impl DesignPoint {
    pub fn point_id(&self) -> String {
        self.directives.point_id()
    }

    /// Cycles simulated by the stimulus file.
    pub fn activity_window(&self) -> u64 {
        self.metrics.latency_cycles * u64::from(self.stimulus_calls)
    }

    pub fn validate(&self, options: &DirectiveOptions) -> Result<(), DesignError> {
        if self.app.is_empty() {
            return Err(DesignError::InvariantViolation("app name is empty".into()));
        }
        self.directives.validate(options)?;
        self.metrics.validate()?;
        self.fsmd.validate()?;
        if self.stimulus_calls == 0 {
            return Err(DesignError::InvariantViolation("stimulus_calls must be at least 1".into()));
        }
        if let Some(p) = self.measured_power_w {
            if !p.is_finite() || p <= 0.0 {
                return Err(DesignError::InvariantViolation(format!(
                    "measured_power_w must be finite and positive, got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design point serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Application {
    pub name: String,
    pub loop_depth: usize,
    pub base_point: DesignPoint,
    pub points: Vec<DesignPoint>,
}

/// One failed check reported by [`validate_application`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

fn check_width(what: &str, w: u8) -> Result<(), DesignError> {
    if w == 0 || w > MAX_WIDTH {
        Err(DesignError::InvariantViolation(format!(
            "{what}: width {w} outside [1, {MAX_WIDTH}]"
        )))
    } else {
        Ok(())
    }
}

impl FsmdDesign {
    pub fn ir_operator(&self, id: u32) -> Option<&IrOperator> {
        self.ir_operators.iter().find(|op| op.id == id)
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let fail = |msg: String| Err(DesignError::InvariantViolation(msg));
        if self.n_states < 1 {
            return fail("n_states must be at least 1".into());
        }

        let mut names = BTreeSet::new();
        for p in self.input_ports.iter().chain(&self.output_ports) {
            check_width(&format!("port {}", p.name), p.width)?;
            if !names.insert(p.name.as_str()) {
                return fail(format!("duplicate port name {}", p.name));
            }
        }
        for m in &self.memories {
            check_width(&format!("memory {}", m.name), m.width)?;
            if m.depth == 0 {
                return fail(format!("memory {} has zero depth", m.name));
            }
            if m.init.len() > m.depth as usize {
                return fail(format!("memory {} init exceeds depth", m.name));
            }
            if !names.insert(m.name.as_str()) {
                return fail(format!("duplicate memory name {}", m.name));
            }
        }
        let inputs: BTreeSet<&str> = self.input_ports.iter().map(|p| p.name.as_str()).collect();
        let outputs: BTreeSet<&str> = self.output_ports.iter().map(|p| p.name.as_str()).collect();
        let memories: BTreeSet<&str> = self.memories.iter().map(|m| m.name.as_str()).collect();

        let mut ids = BTreeSet::new();
        for op in &self.ir_operators {
            let who = format!("IR operator {}", op.id);
            if !ids.insert(op.id) {
                return fail(format!("duplicate IR operator id {}", op.id));
            }
            if op.state >= self.n_states {
                return fail(format!("{who}: state {} >= n_states {}", op.state, self.n_states));
            }
            let (lo, hi) = op.opcode.arity();
            if op.inputs.len() < lo || op.inputs.len() > hi {
                return fail(format!("{who}: {} takes {} operands", op.opcode, op.inputs.len()));
            }
            if op.operand_widths.len() != op.inputs.len() {
                return fail(format!("{who}: operand_widths length differs from inputs"));
            }
            for &w in &op.operand_widths {
                check_width(&who, w)?;
            }
            check_width(&who, op.result_width)?;
            if op.opcode.is_float() {
                let widths_ok = op.operand_widths.iter().all(|&w| w == 32 || w == 64)
                    && op.operand_widths.windows(2).all(|w| w[0] == w[1]);
                let result_ok = if op.opcode == Opcode::Fcmp {
                    true
                } else {
                    op.result_width == op.operand_widths[0]
                };
                if !widths_ok || !result_ok {
                    return fail(format!("{who}: float operators need matching 32- or 64-bit widths"));
                }
            }
            for input in &op.inputs {
                if let Operand::Port(name) = input {
                    if !inputs.contains(name.as_str()) {
                        return fail(format!("{who}: unknown input port {name}"));
                    }
                }
            }
            match op.opcode {
                Opcode::Read => {
                    if !matches!(op.inputs[0], Operand::Port(_)) {
                        return fail(format!("{who}: read must take an input port"));
                    }
                }
                Opcode::Load | Opcode::Store => match op.target.as_deref() {
                    Some(m) if memories.contains(m) => {}
                    _ => return fail(format!("{who}: {} needs a declared memory target", op.opcode)),
                },
                Opcode::Write => match op.target.as_deref() {
                    Some(p) if outputs.contains(p) => {}
                    _ => return fail(format!("{who}: write needs a declared output port target")),
                },
                _ => {}
            }
        }
        for op in &self.ir_operators {
            for input in &op.inputs {
                if let Operand::Op(src) = input {
                    if !ids.contains(src) {
                        return fail(format!("IR operator {}: unknown producer {src}", op.id));
                    }
                }
            }
        }
        // Acyclicity.
        self.schedule_order()?;

        let by_id: HashMap<u32, &IrOperator> = self.ir_operators.iter().map(|o| (o.id, o)).collect();
        let mut rtl_ids = BTreeSet::new();
        let mut bound: HashMap<u32, u32> = HashMap::new();
        for rtl in &self.rtl_operators {
            if !rtl_ids.insert(rtl.id) {
                return fail(format!("duplicate RTL operator id {}", rtl.id));
            }
            if rtl.ir_ids.is_empty() {
                return fail(format!("RTL operator {} has no IR operators", rtl.id));
            }
            let mut states = BTreeSet::new();
            let mut arity = None;
            for &ir in &rtl.ir_ids {
                let Some(op) = by_id.get(&ir) else {
                    return Err(DesignError::DanglingIrReference { rtl_id: rtl.id, ir_id: ir });
                };
                if op.opcode != rtl.opcode {
                    return fail(format!(
                        "RTL operator {} ({}) shares IR operator {ir} with opcode {}",
                        rtl.id, rtl.opcode, op.opcode
                    ));
                }
                if let Some(prev) = bound.insert(ir, rtl.id) {
                    return fail(format!("IR operator {ir} bound to RTL operators {prev} and {}", rtl.id));
                }
                if !states.insert(op.state) {
                    return fail(format!(
                        "RTL operator {} fires twice in state {}",
                        rtl.id, op.state
                    ));
                }
                if *arity.get_or_insert(op.inputs.len()) != op.inputs.len() {
                    return fail(format!("RTL operator {} shares operators of different arity", rtl.id));
                }
            }
        }
        if let Some(op) = self.ir_operators.iter().find(|op| !bound.contains_key(&op.id)) {
            return fail(format!("IR operator {} is not bound to any RTL operator", op.id));
        }
        Ok(())
    }

    /// Indices into `ir_operators` in firing order: a topological order of
    /// the operand graph that prefers lower states, then lower ids.
    pub fn schedule_order(&self) -> Result<Vec<usize>, DesignError> {
        let index: HashMap<u32, usize> = self
            .ir_operators
            .iter()
            .enumerate()
            .map(|(i, op)| (op.id, i))
            .collect();
        let n = self.ir_operators.len();
        let mut pending = vec![0usize; n];
        let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, op) in self.ir_operators.iter().enumerate() {
            for input in &op.inputs {
                if let Operand::Op(src) = input {
                    let Some(&s) = index.get(src) else {
                        return Err(DesignError::InvariantViolation(format!(
                            "IR operator {}: unknown producer {src}",
                            op.id
                        )));
                    };
                    pending[i] += 1;
                    consumers[s].push(i);
                }
            }
        }
        let key = |i: usize| Reverse((self.ir_operators[i].state, self.ir_operators[i].id, i));
        let mut ready: BinaryHeap<_> = (0..n).filter(|&i| pending[i] == 0).map(key).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse((_, _, i))) = ready.pop() {
            order.push(i);
            for &c in &consumers[i] {
                pending[c] -= 1;
                if pending[c] == 0 {
                    ready.push(key(c));
                }
            }
        }
        if order.len() != n {
            return Err(DesignError::InvariantViolation(
                "operator inputs form a cycle".into(),
            ));
        }
        Ok(order)
    }
}

/// Parses and validates one design-point descriptor against the default
/// directive options.
pub fn parse_design_point(text: &str) -> Result<DesignPoint, DesignError> {
    parse_design_point_with(text, &DirectiveOptions::default())
}

pub fn parse_design_point_with(
    text: &str,
    options: &DirectiveOptions,
) -> Result<DesignPoint, DesignError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| DesignError::MalformedDocument(e.to_string()))?;
    let point: DesignPoint =
        serde_json::from_value(value).map_err(|e| DesignError::SchemaViolation(e.to_string()))?;
    point.validate(options)?;
    Ok(point)
}

/// Maps every RTL operator to the IR operators it executes, as
/// `(ir_id, state)` pairs in state order.
pub fn back_trace(design: &FsmdDesign) -> Result<BTreeMap<u32, Vec<(u32, u32)>>, DesignError> {
    let states: HashMap<u32, u32> = design.ir_operators.iter().map(|o| (o.id, o.state)).collect();
    let mut map = BTreeMap::new();
    for rtl in &design.rtl_operators {
        let mut list = Vec::with_capacity(rtl.ir_ids.len());
        for &ir in &rtl.ir_ids {
            let state = *states
                .get(&ir)
                .ok_or(DesignError::DanglingIrReference { rtl_id: rtl.id, ir_id: ir })?;
            list.push((ir, state));
        }
        list.sort_by_key(|&(ir, state)| (state, ir));
        map.insert(rtl.id, list);
    }
    Ok(map)
}

/// Checks every point invariant plus application-level consistency.
pub fn validate_application(app: &Application) -> Vec<Violation> {
    validate_application_with(app, &DirectiveOptions::default())
}

pub fn validate_application_with(app: &Application, options: &DirectiveOptions) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |subject: String, point: &DesignPoint| {
        if let Err(e) = point.validate(options) {
            out.push(Violation { subject: subject.clone(), message: e.to_string() });
        }
        if point.app != app.name {
            out.push(Violation {
                subject: subject.clone(),
                message: format!("app name {:?} differs from application {:?}", point.app, app.name),
            });
        }
        if point.directives.loop_depth() != app.loop_depth {
            out.push(Violation {
                subject,
                message: format!(
                    "{} unroll factors for a loop nest of depth {}",
                    point.directives.loop_depth(),
                    app.loop_depth
                ),
            });
        }
    };
    check("base_point".to_string(), &app.base_point);
    for p in &app.points {
        check(format!("point {}", p.point_id()), p);
    }
    if !app.base_point.directives.is_identity() {
        out.push(Violation {
            subject: "base_point".into(),
            message: format!(
                "baseline must use identity directives, found {}",
                app.base_point.directives
            ),
        });
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn add_design() -> FsmdDesign {
        FsmdDesign {
            n_states: 1,
            input_ports: vec![
                PortDecl { name: "a".into(), width: 4 },
                PortDecl { name: "b".into(), width: 4 },
            ],
            output_ports: vec![],
            memories: vec![],
            ir_operators: vec![IrOperator {
                id: 1,
                opcode: Opcode::Add,
                operand_widths: vec![4, 4],
                result_width: 4,
                state: 0,
                inputs: vec![Operand::Port("a".into()), Operand::Port("b".into())],
                target: None,
            }],
            rtl_operators: vec![RtlOperator { id: 1, opcode: Opcode::Add, ir_ids: vec![1] }],
        }
    }

    pub(crate) fn minimal_point() -> DesignPoint {
        DesignPoint {
            app: "demo".into(),
            directives: DirectiveConfig::identity(1),
            metrics: HlsMetrics {
                lut: 100,
                ff: 80,
                dsp: 1,
                bram: 1,
                clock_period_ns: 8.5,
                latency_cycles: 10,
            },
            fsmd: add_design(),
            stimuli: "demo.csv".into(),
            stimulus_calls: 1,
            measured_power_w: None,
        }
    }

    fn shared_adds() -> FsmdDesign {
        let add = |id, state| IrOperator {
            id,
            opcode: Opcode::Add,
            operand_widths: vec![8, 8],
            result_width: 8,
            state,
            inputs: vec![Operand::Port("x".into()), Operand::Const(1)],
            target: None,
        };
        FsmdDesign {
            n_states: 6,
            input_ports: vec![PortDecl { name: "x".into(), width: 8 }],
            output_ports: vec![],
            memories: vec![],
            ir_operators: vec![add(11, 5), add(10, 2)],
            rtl_operators: vec![RtlOperator { id: 7, opcode: Opcode::Add, ir_ids: vec![11, 10] }],
        }
    }

    #[test]
    fn minimal_document_has_identity_directives() {
        let text = minimal_point().to_json();
        let p = parse_design_point(&text).unwrap();
        assert!(p.directives.is_identity());
        assert_eq!(p.directives.unroll_factors, vec![1]);
    }

    #[test]
    fn unroll_factor_three_is_rejected() {
        let mut p = minimal_point();
        p.directives.unroll_factors = vec![3];
        let err = parse_design_point(&p.to_json()).unwrap_err();
        assert!(matches!(err, DesignError::InvariantViolation(_)), "{err}");
    }

    #[test]
    fn zero_latency_is_rejected() {
        let mut p = minimal_point();
        p.metrics.latency_cycles = 0;
        let err = parse_design_point(&p.to_json()).unwrap_err();
        assert!(matches!(err, DesignError::InvariantViolation(_)));
    }

    #[test]
    fn syntax_and_schema_errors_are_distinguished() {
        assert!(matches!(
            parse_design_point("{not json").unwrap_err(),
            DesignError::MalformedDocument(_)
        ));
        let mut v: serde_json::Value = serde_json::from_str(&minimal_point().to_json()).unwrap();
        v.as_object_mut().unwrap().remove("metrics");
        assert!(matches!(
            parse_design_point(&v.to_string()).unwrap_err(),
            DesignError::SchemaViolation(_)
        ));
        let mut v: serde_json::Value = serde_json::from_str(&minimal_point().to_json()).unwrap();
        v.as_object_mut().unwrap().insert("extra".into(), 1.into());
        assert!(matches!(
            parse_design_point(&v.to_string()).unwrap_err(),
            DesignError::SchemaViolation(_)
        ));
    }

    #[test]
    fn back_trace_one_to_one() {
        let map = back_trace(&add_design()).unwrap();
        assert_eq!(map.len(), 1);
        assert_eq!(map[&1], vec![(1, 0)]);
    }

    #[test]
    fn back_trace_orders_shared_operators_by_state() {
        let d = shared_adds();
        d.validate().unwrap();
        let map = back_trace(&d).unwrap();
        assert_eq!(map[&7], vec![(10, 2), (11, 5)]);
    }

    #[test]
    fn back_trace_dangling_reference() {
        let mut d = add_design();
        d.rtl_operators[0].ir_ids.push(99);
        assert_eq!(
            back_trace(&d).unwrap_err(),
            DesignError::DanglingIrReference { rtl_id: 1, ir_id: 99 }
        );
    }

    #[test]
    fn cycles_are_rejected() {
        let mut d = add_design();
        d.ir_operators[0].inputs[1] = Operand::Op(1);
        assert!(d.validate().is_err());
    }

    #[test]
    fn sharing_within_one_state_is_rejected() {
        let mut d = shared_adds();
        d.ir_operators[0].state = 2;
        assert!(d.validate().is_err());
    }

    fn app_of(points: Vec<DesignPoint>) -> Application {
        let base = minimal_point();
        Application { name: "demo".into(), loop_depth: 1, base_point: base, points }
    }

    #[test]
    fn consistent_application_has_no_violations() {
        let mut p = minimal_point();
        p.directives.unroll_factors = vec![4];
        assert!(validate_application(&app_of(vec![minimal_point(), p])).is_empty());
    }

    #[test]
    fn pipelined_baseline_is_reported() {
        let mut app = app_of(vec![]);
        app.base_point.directives.pipeline_level = 1;
        let v = validate_application(&app);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].subject, "base_point");
    }

    #[test]
    fn app_name_mismatch_is_reported() {
        let mut p = minimal_point();
        p.app = "other".into();
        let v = validate_application(&app_of(vec![p]));
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("other"));
    }
}
