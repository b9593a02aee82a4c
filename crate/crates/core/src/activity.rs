//! Value tracing over an [`FsmdDesign`] and per-operator switching activity.
//!
//! The interpreter runs the scheduled datapath once per stimulus row. Every
//! time an IR operator fires, its operand values and its result are appended
//! to the trace of the RTL operator it is bound to. Loads record the address
//! and the loaded word, stores record address, data and the stored word.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use thiserror::Error;

use crate::design::{FsmdDesign, Opcode, Operand};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActivityError {
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
    #[error("unsupported opcode {opcode} at width {width}")]
    UnsupportedOpcode { opcode: Opcode, width: u8 },
    #[error("division by zero in IR operator {ir_id} (invocation {invocation})")]
    DivisionByZero { ir_id: u32, invocation: usize },
    #[error("invalid latency {0}: must be at least 1")]
    InvalidLatency(u64),
    #[error("stimuli: {0}")]
    InvalidStimuli(String),
    #[error("design: {0}")]
    InvalidDesign(String),
}

/// A value together with its declared bit width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitVector {
    pub bits: u64,
    pub width: u8,
}

impl BitVector {
    pub fn new(bits: u64, width: u8) -> Self {
        Self { bits: mask(bits, width), width }
    }
}

#[inline]
pub(crate) fn mask(v: u64, width: u8) -> u64 {
    if width >= 64 {
        v
    } else {
        v & ((1u64 << width) - 1)
    }
}

/// Number of differing bit positions.
pub fn hamming(a: BitVector, b: BitVector) -> Result<u32, ActivityError> {
    if a.width != b.width {
        return Err(ActivityError::WidthMismatch(format!(
            "hamming distance between {}-bit and {}-bit vectors",
            a.width, b.width
        )));
    }
    Ok((a.bits ^ b.bits).count_ones())
}

/// Recorded samples of one RTL operator: one sequence per operand, then the
/// result sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueTrace {
    pub rtl_id: u32,
    pub opcode: Opcode,
    pub widths: Vec<u8>,
    pub signals: Vec<Vec<u64>>,
}

impl ValueTrace {
    /// Number of recorded samples per signal.
    pub fn len(&self) -> usize {
        self.signals.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Transitions between consecutive samples.
    pub fn transitions(&self) -> u64 {
        self.len().saturating_sub(1) as u64
    }

    pub fn max_width(&self) -> u8 {
        self.widths.iter().copied().max().unwrap_or(1)
    }
}

/// Average Hamming distance per signal per transition. Zero when fewer than
/// two samples were recorded.
pub fn switching_activity(trace: &ValueTrace) -> f64 {
    let transitions = trace.transitions();
    if transitions == 0 || trace.signals.is_empty() {
        return 0.0;
    }
    let toggles: u64 = trace
        .signals
        .iter()
        .map(|s| s.windows(2).map(|w| (w[0] ^ w[1]).count_ones() as u64).sum::<u64>())
        .sum();
    toggles as f64 / (trace.signals.len() as f64 * transitions as f64)
}

/// Amortizes an activity over the design latency by the operator's
/// activation rate `n_op / latency`.
pub fn scaled_activity(sa: f64, n_op: u64, latency: u64) -> Result<f64, ActivityError> {
    if latency < 1 {
        return Err(ActivityError::InvalidLatency(latency));
    }
    Ok(n_op as f64 / latency as f64 * sa)
}

/// Named input sequences, one value per kernel-body invocation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Stimuli {
    ports: BTreeMap<String, Vec<u64>>,
    invocations: usize,
}

impl Stimuli {
    pub fn new(ports: BTreeMap<String, Vec<u64>>) -> Result<Self, ActivityError> {
        let mut lens = ports.values().map(Vec::len);
        let invocations = lens.next().unwrap_or(0);
        if lens.any(|l| l != invocations) {
            return Err(ActivityError::InvalidStimuli(
                "port sequences have different lengths".into(),
            ));
        }
        Ok(Self { ports, invocations })
    }

    /// Stimuli for a design without input ports, repeated `invocations` times.
    pub fn empty(invocations: usize) -> Self {
        Self { ports: BTreeMap::new(), invocations }
    }

    pub fn invocations(&self) -> usize {
        self.invocations
    }

    pub fn port(&self, name: &str) -> Option<&[u64]> {
        self.ports.get(name).map(Vec::as_slice)
    }

    pub fn ports(&self) -> impl Iterator<Item = (&str, &[u64])> {
        self.ports.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Reads a column-per-port CSV table. Values may be decimal integers
    /// (negative values are stored in two's complement at the port width) or
    /// decimal floats for 32- and 64-bit ports.
    pub fn read_csv<R: Read>(reader: R, design: &FsmdDesign) -> Result<Self, ActivityError> {
        let widths: HashMap<&str, u8> =
            design.input_ports.iter().map(|p| (p.name.as_str(), p.width)).collect();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| ActivityError::InvalidStimuli(e.to_string()))?
            .clone();
        let mut columns: Vec<(String, u8, Vec<u64>)> = Vec::new();
        for h in headers.iter() {
            let w = *widths
                .get(h)
                .ok_or_else(|| ActivityError::InvalidStimuli(format!("unknown port {h}")))?;
            columns.push((h.to_string(), w, Vec::new()));
        }
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| ActivityError::InvalidStimuli(e.to_string()))?;
            for (col, field) in columns.iter_mut().zip(record.iter()) {
                let v = parse_value(field, col.1).map_err(|msg| match msg {
                    ValueError::Width(m) => {
                        ActivityError::WidthMismatch(format!("row {}, port {}: {m}", row + 1, col.0))
                    }
                    ValueError::Syntax(m) => {
                        ActivityError::InvalidStimuli(format!("row {}, port {}: {m}", row + 1, col.0))
                    }
                })?;
                col.2.push(v);
            }
        }
        let invocations = columns.first().map_or(0, |c| c.2.len());
        let ports = columns.into_iter().map(|(n, _, v)| (n, v)).collect();
        let mut s = Self::new(ports)?;
        if s.ports.is_empty() {
            s.invocations = invocations;
        }
        Ok(s)
    }

    /// Writes the table with raw bit patterns as unsigned decimal integers.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.ports.keys())?;
        for i in 0..self.invocations {
            w.write_record(self.ports.values().map(|v| v[i].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

enum ValueError {
    Width(String),
    Syntax(String),
}

fn parse_value(field: &str, width: u8) -> Result<u64, ValueError> {
    if let Ok(v) = field.parse::<u64>() {
        if mask(v, width) != v {
            return Err(ValueError::Width(format!("{v} does not fit in {width} bits")));
        }
        return Ok(v);
    }
    if let Ok(v) = field.parse::<i64>() {
        let min = if width >= 64 { i64::MIN } else { -(1i64 << (width - 1)) };
        if v < min {
            return Err(ValueError::Width(format!("{v} does not fit in {width} bits")));
        }
        return Ok(mask(v as u64, width));
    }
    if let Ok(f) = field.parse::<f64>() {
        return match width {
            32 => Ok((f as f32).to_bits() as u64),
            64 => Ok(f.to_bits()),
            _ => Err(ValueError::Width(format!("float value {field} on a {width}-bit port"))),
        };
    }
    Err(ValueError::Syntax(format!("cannot parse {field:?}")))
}

fn float_op(opcode: Opcode, width: u8, a: u64, b: u64) -> Result<u64, ActivityError> {
    match width {
        32 => {
            let (x, y) = (f32::from_bits(a as u32), f32::from_bits(b as u32));
            let r = match opcode {
                Opcode::Fadd => x + y,
                Opcode::Fsub => x - y,
                Opcode::Fmul => x * y,
                Opcode::Fdiv => x / y,
                Opcode::Fsqrt => x.sqrt(),
                Opcode::Fcmp => return Ok((x < y) as u64),
                _ => unreachable!("not a float opcode"),
            };
            Ok(r.to_bits() as u64)
        }
        64 => {
            let (x, y) = (f64::from_bits(a), f64::from_bits(b));
            let r = match opcode {
                Opcode::Fadd => x + y,
                Opcode::Fsub => x - y,
                Opcode::Fmul => x * y,
                Opcode::Fdiv => x / y,
                Opcode::Fsqrt => x.sqrt(),
                Opcode::Fcmp => return Ok((x < y) as u64),
                _ => unreachable!("not a float opcode"),
            };
            Ok(r.to_bits())
        }
        _ => Err(ActivityError::UnsupportedOpcode { opcode, width }),
    }
}

/// Runs the datapath over every stimulus row and returns one trace per RTL
/// operator that fired at least once.
pub fn execute_trace(
    design: &FsmdDesign,
    stimuli: &Stimuli,
) -> Result<BTreeMap<u32, ValueTrace>, ActivityError> {
    let order = design
        .schedule_order()
        .map_err(|e| ActivityError::InvalidDesign(e.to_string()))?;

    // Port columns, in declaration order.
    let mut port_index: HashMap<&str, usize> = HashMap::new();
    let mut port_values: Vec<&[u64]> = Vec::new();
    for p in &design.input_ports {
        let values = stimuli
            .port(&p.name)
            .ok_or_else(|| ActivityError::InvalidStimuli(format!("missing port {}", p.name)))?;
        if let Some(v) = values.iter().find(|&&v| mask(v, p.width) != v) {
            return Err(ActivityError::WidthMismatch(format!(
                "port {} is {} bits wide but stimulus value {v} needs more",
                p.name, p.width
            )));
        }
        port_index.insert(p.name.as_str(), port_values.len());
        port_values.push(values);
    }
    if let Some((name, _)) = stimuli.ports().find(|(n, _)| !port_index.contains_key(n)) {
        return Err(ActivityError::InvalidStimuli(format!("unknown port {name}")));
    }
    if stimuli.invocations() == 0 {
        return Err(ActivityError::InvalidStimuli("no invocations".into()));
    }

    let op_index: HashMap<u32, usize> =
        design.ir_operators.iter().enumerate().map(|(i, o)| (o.id, i)).collect();
    let mem_index: HashMap<&str, usize> =
        design.memories.iter().enumerate().map(|(i, m)| (m.name.as_str(), i)).collect();

    // Pre-resolve operands and bindings.
    enum Src {
        Op(usize),
        Port(usize),
        Const(u64),
    }
    let mut sources: Vec<Vec<Src>> = Vec::with_capacity(design.ir_operators.len());
    for op in &design.ir_operators {
        let mut srcs = Vec::with_capacity(op.inputs.len());
        for input in &op.inputs {
            srcs.push(match input {
                Operand::Op(id) => Src::Op(op_index[id]),
                Operand::Port(name) => Src::Port(*port_index.get(name.as_str()).ok_or_else(|| {
                    ActivityError::InvalidDesign(format!("undeclared port {name}"))
                })?),
                Operand::Const(c) => Src::Const(*c),
            });
        }
        sources.push(srcs);
    }
    let mut memory_of = vec![usize::MAX; design.ir_operators.len()];
    for (i, op) in design.ir_operators.iter().enumerate() {
        if matches!(op.opcode, Opcode::Load | Opcode::Store) {
            let name = op.target.as_deref().unwrap_or_default();
            memory_of[i] = *mem_index.get(name).ok_or_else(|| {
                ActivityError::InvalidDesign(format!("IR operator {}: unknown memory {name}", op.id))
            })?;
        }
    }

    let mut slot_of: Vec<Option<usize>> = vec![None; design.ir_operators.len()];
    let mut traces: Vec<ValueTrace> = Vec::with_capacity(design.rtl_operators.len());
    for rtl in &design.rtl_operators {
        let mut widths: Vec<u8> = Vec::new();
        for ir in &rtl.ir_ids {
            let &i = op_index.get(ir).ok_or_else(|| {
                ActivityError::InvalidDesign(format!(
                    "RTL operator {} references undefined IR operator {ir}",
                    rtl.id
                ))
            })?;
            let op = &design.ir_operators[i];
            let sig = op.operand_widths.iter().chain(std::iter::once(&op.result_width));
            if widths.is_empty() {
                widths = sig.copied().collect();
            } else if widths.len() != op.operand_widths.len() + 1 {
                return Err(ActivityError::InvalidDesign(format!(
                    "RTL operator {} shares operators of different arity",
                    rtl.id
                )));
            } else {
                for (w, &x) in widths.iter_mut().zip(sig) {
                    *w = (*w).max(x);
                }
            }
            slot_of[i] = Some(traces.len());
        }
        let n = widths.len();
        traces.push(ValueTrace { rtl_id: rtl.id, opcode: rtl.opcode, widths, signals: vec![Vec::new(); n] });
    }

    let mut memories: Vec<Vec<u64>> = design
        .memories
        .iter()
        .map(|m| {
            let mut words = vec![0u64; m.depth as usize];
            for (w, &v) in words.iter_mut().zip(&m.init) {
                *w = mask(v, m.width);
            }
            words
        })
        .collect();
    let mut values = vec![0u64; design.ir_operators.len()];
    let mut operands: Vec<u64> = Vec::with_capacity(8);

    for inv in 0..stimuli.invocations() {
        for &i in &order {
            let op = &design.ir_operators[i];
            operands.clear();
            for (src, &w) in sources[i].iter().zip(&op.operand_widths) {
                let raw = match *src {
                    Src::Op(j) => values[j],
                    Src::Port(p) => port_values[p][inv],
                    Src::Const(c) => c,
                };
                operands.push(mask(raw, w));
            }
            let rw = op.result_width;
            let result = match op.opcode {
                Opcode::Add => operands[0].wrapping_add(operands[1]),
                Opcode::Sub => operands[0].wrapping_sub(operands[1]),
                Opcode::Mul => operands[0].wrapping_mul(operands[1]),
                Opcode::Div => {
                    if operands[1] == 0 {
                        return Err(ActivityError::DivisionByZero { ir_id: op.id, invocation: inv });
                    }
                    operands[0] / operands[1]
                }
                Opcode::Sqrt => operands[0].isqrt(),
                Opcode::And => operands[0] & operands[1],
                Opcode::Or => operands[0] | operands[1],
                Opcode::Xor => operands[0] ^ operands[1],
                Opcode::Icmp => (operands[0] < operands[1]) as u64,
                Opcode::Fadd | Opcode::Fsub | Opcode::Fmul | Opcode::Fdiv | Opcode::Fcmp => {
                    float_op(op.opcode, op.operand_widths[0], operands[0], operands[1])?
                }
                Opcode::Fsqrt => float_op(op.opcode, op.operand_widths[0], operands[0], 0)?,
                Opcode::Load => {
                    let mem = &memories[memory_of[i]];
                    mem[(operands[0] % mem.len() as u64) as usize]
                }
                Opcode::Store => {
                    let m = memory_of[i];
                    let width = design.memories[m].width;
                    let mem = &mut memories[m];
                    let addr = (operands[0] % mem.len() as u64) as usize;
                    mem[addr] = mask(operands[1], width);
                    mem[addr]
                }
                Opcode::Read | Opcode::Write => operands[0],
                Opcode::Mux => {
                    let choices = operands.len() as u64 - 1;
                    operands[1 + (operands[0] % choices) as usize]
                }
                Opcode::Select => {
                    if operands[0] != 0 {
                        operands[1]
                    } else {
                        operands[2]
                    }
                }
            };
            let result = mask(result, rw);
            values[i] = result;
            if let Some(slot) = slot_of[i] {
                let trace = &mut traces[slot];
                for (sig, &v) in trace.signals.iter_mut().zip(&operands) {
                    sig.push(v);
                }
                trace.signals.last_mut().expect("result signal").push(result);
            }
        }
    }

    Ok(traces
        .into_iter()
        .filter(|t| !t.is_empty())
        .map(|t| (t.rtl_id, t))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::tests::add_design;
    use crate::design::{IrOperator, PortDecl, RtlOperator};

    fn stim(pairs: &[(&str, &[u64])]) -> Stimuli {
        Stimuli::new(pairs.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()).unwrap()
    }

    #[test]
    fn two_additions_are_traced() {
        let traces = execute_trace(&add_design(), &stim(&[("a", &[1, 3]), ("b", &[2, 4])])).unwrap();
        let t = &traces[&1];
        assert_eq!(t.signals, vec![vec![0b0001, 0b0011], vec![0b0010, 0b0100], vec![0b0011, 0b0111]]);
        assert_eq!(t.widths, vec![4, 4, 4]);
    }

    #[test]
    fn four_bit_addition_wraps() {
        let traces = execute_trace(&add_design(), &stim(&[("a", &[15]), ("b", &[3])])).unwrap();
        assert_eq!(traces[&1].signals[2], vec![2]);
    }

    #[test]
    fn empty_design_yields_empty_map() {
        let d = FsmdDesign {
            n_states: 1,
            input_ports: vec![],
            output_ports: vec![],
            memories: vec![],
            ir_operators: vec![],
            rtl_operators: vec![],
        };
        assert!(execute_trace(&d, &Stimuli::empty(3)).unwrap().is_empty());
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let mut d = add_design();
        d.ir_operators[0].opcode = Opcode::Div;
        d.rtl_operators[0].opcode = Opcode::Div;
        let err = execute_trace(&d, &stim(&[("a", &[6, 6]), ("b", &[3, 0])])).unwrap_err();
        assert_eq!(err, ActivityError::DivisionByZero { ir_id: 1, invocation: 1 });
    }

    #[test]
    fn oversized_stimulus_is_a_width_mismatch() {
        let err = execute_trace(&add_design(), &stim(&[("a", &[16]), ("b", &[0])])).unwrap_err();
        assert!(matches!(err, ActivityError::WidthMismatch(_)));
    }

    #[test]
    fn float_ops_record_raw_bits() {
        let d = FsmdDesign {
            n_states: 1,
            input_ports: vec![PortDecl { name: "x".into(), width: 32 }],
            output_ports: vec![],
            memories: vec![],
            ir_operators: vec![IrOperator {
                id: 0,
                opcode: Opcode::Fmul,
                operand_widths: vec![32, 32],
                result_width: 32,
                state: 0,
                inputs: vec![Operand::Port("x".into()), Operand::Const(2.0f32.to_bits() as u64)],
                target: None,
            }],
            rtl_operators: vec![RtlOperator { id: 0, opcode: Opcode::Fmul, ir_ids: vec![0] }],
        };
        d.validate().unwrap();
        let s = Stimuli::read_csv("x\n1.5\n".as_bytes(), &d).unwrap();
        let t = execute_trace(&d, &s).unwrap();
        assert_eq!(t[&0].signals[2], vec![3.0f32.to_bits() as u64]);
    }

    #[test]
    fn csv_accepts_negative_integers() {
        let s = Stimuli::read_csv("a,b\n-1,2\n".as_bytes(), &add_design()).unwrap();
        assert_eq!(s.port("a").unwrap(), &[15]);
        assert!(Stimuli::read_csv("a,b\n-9,2\n".as_bytes(), &add_design()).is_err());
    }

    #[test]
    fn hamming_cases() {
        let bv = |b, w| BitVector::new(b, w);
        assert_eq!(hamming(bv(0b1010, 4), bv(0b0110, 4)).unwrap(), 2);
        assert_eq!(hamming(bv(0b1011, 4), bv(0b1011, 4)).unwrap(), 0);
        assert_eq!(hamming(bv(0b1111, 4), bv(0, 4)).unwrap(), 4);
        assert!(hamming(bv(1, 4), bv(1, 5)).is_err());
    }

    fn trace_of(signals: Vec<Vec<u64>>, width: u8) -> ValueTrace {
        ValueTrace { rtl_id: 0, opcode: Opcode::Add, widths: vec![width; signals.len()], signals }
    }

    #[test]
    fn switching_activity_hand_example() {
        let t = trace_of(vec![vec![0b0000, 0b1111, 0b1111], vec![0b0000, 0b0001, 0b1110]], 4);
        assert_eq!(switching_activity(&t), 2.25);
    }

    #[test]
    fn switching_activity_degenerate_cases() {
        assert_eq!(switching_activity(&trace_of(vec![vec![5, 5, 5], vec![1, 1, 1]], 4)), 0.0);
        assert_eq!(switching_activity(&trace_of(vec![vec![5], vec![9]], 4)), 0.0);
    }

    #[test]
    fn scaled_activity_cases() {
        assert!((scaled_activity(2.25, 2, 10).unwrap() - 0.45).abs() < 1e-12);
        assert_eq!(scaled_activity(1.7, 10, 10).unwrap(), 1.7);
        assert_eq!(scaled_activity(0.0, 3, 7).unwrap(), 0.0);
        assert_eq!(scaled_activity(1.0, 1, 0), Err(ActivityError::InvalidLatency(0)));
    }
}
