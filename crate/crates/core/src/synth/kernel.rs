//! Loop-body templates and their scheduled, bound datapaths.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::GeneratorParams;
use crate::activity::Stimuli;
use crate::design::{
    DirectiveConfig, FsmdDesign, HlsMetrics, IrOperator, MemoryDecl, Opcode, Operand, PortDecl, RtlOperator,
};

pub(crate) const ADDR_WIDTH: u8 = 16;
pub(crate) const IDX_PORT: &str = "idx";
pub(crate) const RESULT_PORT: &str = "res";
pub(crate) const OUT_ARRAY: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Arg {
    Val(usize),
    Const(u64),
}

#[derive(Debug, Clone)]
struct Node {
    opcode: Opcode,
    args: Vec<Arg>,
    arg_widths: Vec<u8>,
    width: u8,
}

/// One loop-body template. Value `i < n_inputs` is the load from input
/// array `i`; later values are `nodes[i - n_inputs]`. The last value is
/// stored to the output array.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub trip_counts: Vec<u32>,
    pub frames: u32,
    pub n_inputs: usize,
    pub float: bool,
    pub data_width: u8,
    nodes: Vec<Node>,
    init: Vec<Vec<u64>>,
}

/// Issue-to-result delay in states.
pub(crate) fn delay(op: Opcode) -> u32 {
    match op {
        Opcode::Mul | Opcode::Load | Opcode::Fcmp => 2,
        Opcode::Fmul => 3,
        Opcode::Fadd | Opcode::Fsub => 4,
        Opcode::Div | Opcode::Sqrt => 8,
        Opcode::Fdiv | Opcode::Fsqrt => 10,
        _ => 1,
    }
}

/// Operators that a non-pipelined schedule shares between IR operations.
fn is_expensive(op: Opcode) -> bool {
    matches!(
        op,
        Opcode::Mul
            | Opcode::Div
            | Opcode::Sqrt
            | Opcode::Fadd
            | Opcode::Fsub
            | Opcode::Fmul
            | Opcode::Fdiv
            | Opcode::Fsqrt
    )
}

/// (LUT, DSP) of one functional unit at 32 bits.
fn unit_cost(op: Opcode) -> (u64, u64) {
    match op {
        Opcode::Add | Opcode::Sub | Opcode::And | Opcode::Or | Opcode::Xor | Opcode::Select => (32, 0),
        Opcode::Mul => (40, 3),
        Opcode::Div => (1150, 0),
        Opcode::Sqrt => (620, 0),
        Opcode::Fadd | Opcode::Fsub => (390, 2),
        Opcode::Fmul => (150, 3),
        Opcode::Fdiv => (780, 0),
        Opcode::Fsqrt => (520, 0),
        Opcode::Icmp => (18, 0),
        Opcode::Fcmp => (66, 0),
        Opcode::Mux => (48, 0),
        Opcode::Load | Opcode::Store => (8, 0),
        Opcode::Read | Opcode::Write => (2, 0),
    }
}

fn pick_operand(rng: &mut ChaCha8Rng, n_values: usize) -> usize {
    if rng.gen_bool(0.6) {
        n_values - 1
    } else {
        rng.gen_range(0..n_values)
    }
}

impl Kernel {
    pub(crate) fn random(params: &GeneratorParams, rng: &mut ChaCha8Rng) -> Self {
        let trip_counts = params.trips();
        let float = params.float_data.unwrap_or_else(|| rng.gen_bool(0.4));
        let n_inputs = rng.gen_range(params.inputs.0..=params.inputs.1);
        let n_ops = rng.gen_range(params.ops.0..=params.ops.1);
        let w: u8 = 32;
        let mut nodes: Vec<Node> = Vec::new();
        let bin = |opcode, a, b| Node { opcode, args: vec![a, b], arg_widths: vec![w, w], width: w };
        let choices: &[(Opcode, u32)] = if float {
            &[(Opcode::Fadd, 3), (Opcode::Fsub, 2), (Opcode::Fmul, 3), (Opcode::Fdiv, 1), (Opcode::Fsqrt, 1), (Opcode::Fcmp, 1)]
        } else {
            &[
                (Opcode::Add, 3),
                (Opcode::Sub, 2),
                (Opcode::Mul, 3),
                (Opcode::Div, 1),
                (Opcode::Sqrt, 1),
                (Opcode::And, 1),
                (Opcode::Or, 1),
                (Opcode::Xor, 2),
                (Opcode::Icmp, 1),
                (Opcode::Mux, 1),
            ]
        };
        let total: u32 = choices.iter().map(|c| c.1).sum();
        for k in 0..n_ops {
            let n_values = n_inputs + nodes.len();
            let opcode = if k == 0 {
                if float { Opcode::Fmul } else { Opcode::Mul }
            } else {
                let mut r = rng.gen_range(0..total);
                let mut chosen = choices[0].0;
                for &(op, wt) in choices {
                    if r < wt {
                        chosen = op;
                        break;
                    }
                    r -= wt;
                }
                chosen
            };
            let a = Arg::Val(pick_operand(rng, n_values));
            let b = if rng.gen_bool(0.25) {
                Arg::Const(if float {
                    (rng.gen_range(0.5f32..4.0)).to_bits() as u64
                } else {
                    rng.gen_range(1..256)
                })
            } else {
                Arg::Val(rng.gen_range(0..n_values))
            };
            match opcode {
                Opcode::Sqrt | Opcode::Fsqrt => {
                    nodes.push(Node { opcode, args: vec![a], arg_widths: vec![w], width: w });
                }
                Opcode::Div => {
                    // Divisor forced odd so it is never zero.
                    nodes.push(bin(Opcode::Or, b, Arg::Const(1)));
                    let d = n_inputs + nodes.len() - 1;
                    nodes.push(bin(Opcode::Div, a, Arg::Val(d)));
                }
                Opcode::Icmp | Opcode::Fcmp => {
                    let c = rng.gen_range(0..n_values);
                    nodes.push(Node { opcode, args: vec![a, b], arg_widths: vec![w, w], width: 1 });
                    let cond = n_inputs + nodes.len() - 1;
                    let other = match a {
                        Arg::Val(v) if v == c => Arg::Val((c + 1) % n_values),
                        _ => Arg::Val(c),
                    };
                    nodes.push(Node {
                        opcode: Opcode::Select,
                        args: vec![Arg::Val(cond), a, other],
                        arg_widths: vec![1, w, w],
                        width: w,
                    });
                }
                Opcode::Mux => {
                    let c = Arg::Val(rng.gen_range(0..n_values));
                    nodes.push(Node { opcode, args: vec![b, a, c], arg_widths: vec![w, w, w], width: w });
                }
                _ => nodes.push(bin(opcode, a, b)),
            }
        }

        let words = params.frames as usize * trip_counts.iter().map(|&t| t as usize).product::<usize>();
        let init = (0..n_inputs)
            .map(|_| {
                if float {
                    let sd = rng.gen_range(0.5f64..100.0);
                    let normal = Normal::new(0.0, sd).expect("positive sd");
                    (0..words).map(|_| (normal.sample(rng) as f32).to_bits() as u64).collect()
                } else {
                    let bits = rng.gen_range(8..=24u32);
                    (0..words).map(|_| rng.gen_range(0..1u64 << bits)).collect()
                }
            })
            .collect();
        Kernel { trip_counts, frames: params.frames, n_inputs, float, data_width: w, nodes, init }
    }

    fn words(&self) -> u32 {
        self.frames * self.trip_counts.iter().product::<u32>()
    }
}

/// Directive configuration after applying the implied transformations:
/// unroll factors are capped at the trip count and loops inside the
/// pipelined loop are fully unrolled.  A pipelined loop left with a single
/// iteration behaves as if it were not pipelined.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Effective {
    pub partition: u32,
    pub pipelined: Option<usize>,
    pub unroll: Vec<u32>,
}

impl Effective {
    pub fn of(cfg: &DirectiveConfig, trips: &[u32]) -> Self {
        let k = cfg.pipelined_loop();
        let unroll = cfg
            .unroll_factors
            .iter()
            .zip(trips)
            .enumerate()
            .map(|(i, (&u, &t))| if k.is_some_and(|k| i > k) { t } else { u.min(t) })
            .collect::<Vec<u32>>();
        Effective { partition: cfg.array_partition_factor, pipelined: k, unroll }
    }
}

pub(crate) struct Built {
    pub fsmd: FsmdDesign,
    pub metrics: HlsMetrics,
    pub stimuli: Stimuli,
}

struct Op {
    ir: IrOperator,
    /// Memory index for loads and stores.
    mem: Option<usize>,
}

pub(crate) fn build(kernel: &Kernel, eff: &Effective, params: &GeneratorParams) -> Built {
    let trips = &kernel.trip_counts;
    let depth = trips.len();
    let w = kernel.data_width;
    let strides: Vec<u32> = (0..depth).map(|i| trips[i + 1..].iter().product()).collect();

    // Unrolled copies, each with its constant address offset.
    let mut offsets = vec![0u32];
    for i in 0..depth {
        let (u, st) = (eff.unroll[i], strides[i]);
        offsets = offsets
            .iter()
            .flat_map(|&o| (0..u).map(move |a| o + a * st))
            .collect();
    }

    let mut ops: Vec<Op> = Vec::new();
    let mut push = |opcode, inputs: Vec<Operand>, operand_widths: Vec<u8>, result_width, target: Option<&str>, mem| {
        let id = ops.len() as u32;
        ops.push(Op {
            ir: IrOperator { id, opcode, operand_widths, result_width, state: 0, inputs, target: target.map(String::from) },
            mem,
        });
        id
    };
    let read = push(Opcode::Read, vec![Operand::Port(IDX_PORT.into())], vec![ADDR_WIDTH], ADDR_WIDTH, None, None);
    let in_names: Vec<String> = (0..kernel.n_inputs).map(|j| format!("in{j}")).collect();
    let mut last = read;
    for &off in &offsets {
        let addr = push(
            Opcode::Add,
            vec![Operand::Op(read), Operand::Const(off as u64)],
            vec![ADDR_WIDTH, ADDR_WIDTH],
            ADDR_WIDTH,
            None,
            None,
        );
        let mut vals: Vec<u32> = Vec::with_capacity(kernel.n_inputs + kernel.nodes.len());
        for (j, name) in in_names.iter().enumerate() {
            vals.push(push(Opcode::Load, vec![Operand::Op(addr)], vec![ADDR_WIDTH], w, Some(name), Some(j)));
        }
        for n in &kernel.nodes {
            let inputs = n
                .args
                .iter()
                .map(|a| match *a {
                    Arg::Val(v) => Operand::Op(vals[v]),
                    Arg::Const(c) => Operand::Const(c),
                })
                .collect();
            vals.push(push(n.opcode, inputs, n.arg_widths.clone(), n.width, None, None));
        }
        last = *vals.last().expect("kernel has values");
        push(
            Opcode::Store,
            vec![Operand::Op(addr), Operand::Op(last)],
            vec![ADDR_WIDTH, w],
            w,
            Some(OUT_ARRAY),
            Some(kernel.n_inputs),
        );
    }
    push(Opcode::Write, vec![Operand::Op(last)], vec![w], w, Some(RESULT_PORT), None);

    let pipelined = eff.pipelined.is_some();
    let ports = params.ports_per_bank * eff.partition;
    let n_mem = kernel.n_inputs + 1;

    // Unit limits for shared operator types.
    let mut counts: HashMap<Opcode, u32> = HashMap::new();
    for op in &ops {
        *counts.entry(op.ir.opcode).or_default() += 1;
    }
    let limit_of = |op: Opcode| -> Option<u32> {
        (!pipelined && is_expensive(op)).then(|| counts[&op].div_ceil(params.share_ratio).max(1))
    };

    // List scheduling in ASAP order under port and unit limits.
    let producers = |op: &Op| -> Vec<usize> {
        op.ir.inputs.iter().filter_map(|i| if let Operand::Op(s) = i { Some(*s as usize) } else { None }).collect()
    };
    let mut asap = vec![0u32; ops.len()];
    for i in 0..ops.len() {
        asap[i] = producers(&ops[i]).iter().map(|&s| asap[s] + delay(ops[s].ir.opcode)).max().unwrap_or(0);
    }
    let mut order: Vec<usize> = (0..ops.len()).collect();
    order.sort_by_key(|&i| (asap[i], i));
    let mut mem_use: Vec<Vec<u32>> = vec![Vec::new(); n_mem];
    let mut unit_use: HashMap<Opcode, Vec<u32>> = HashMap::new();
    let bump = |v: &mut Vec<u32>, s: usize| {
        if v.len() <= s {
            v.resize(s + 1, 0);
        }
        v[s] += 1;
    };
    let used = |v: &Vec<u32>, s: usize| v.get(s).copied().unwrap_or(0);
    let mut state = vec![0u32; ops.len()];
    for &i in &order {
        let earliest =
            producers(&ops[i]).iter().map(|&s| state[s] + delay(ops[s].ir.opcode)).max().unwrap_or(0) as usize;
        let opcode = ops[i].ir.opcode;
        let limit = limit_of(opcode);
        let mut s = earliest;
        loop {
            let mem_ok = ops[i].mem.map_or(true, |m| used(&mem_use[m], s) < ports);
            let unit_ok = limit.map_or(true, |l| unit_use.get(&opcode).map_or(0, |v| used(v, s)) < l);
            if mem_ok && unit_ok {
                break;
            }
            s += 1;
        }
        if let Some(m) = ops[i].mem {
            bump(&mut mem_use[m], s);
        }
        if limit.is_some() {
            bump(unit_use.entry(opcode).or_default(), s);
        }
        state[i] = s as u32;
    }
    for (op, &s) in ops.iter_mut().zip(&state) {
        op.ir.state = s;
    }
    let n_states = ops.iter().map(|o| o.ir.state + delay(o.ir.opcode)).max().unwrap_or(1).max(1);

    // Binding: shared types and memory accesses go first-fit onto units
    // that are idle in the operation's state; everything else gets its own.
    let mut bind_order: Vec<usize> = (0..ops.len()).collect();
    bind_order.sort_by_key(|&i| (ops[i].ir.state, i));
    let mut rtl: Vec<(RtlOperator, Vec<u32>)> = Vec::new();
    let mut pools: BTreeMap<(Opcode, usize), Vec<usize>> = BTreeMap::new();
    for &i in &bind_order {
        let op = &ops[i].ir;
        let shared = ops[i].mem.is_some() || limit_of(op.opcode).is_some();
        let slot = if shared {
            let pool = pools.entry((op.opcode, ops[i].mem.unwrap_or(usize::MAX))).or_default();
            pool.iter().copied().find(|&u| !rtl[u].1.contains(&op.state)).unwrap_or_else(|| {
                pool.push(rtl.len());
                rtl.len()
            })
        } else {
            rtl.len()
        };
        if slot == rtl.len() {
            rtl.push((RtlOperator { id: slot as u32, opcode: op.opcode, ir_ids: Vec::new() }, Vec::new()));
        }
        rtl[slot].0.ir_ids.push(op.id);
        rtl[slot].1.push(op.state);
    }

    // Resource and timing estimates.
    let mut lut = 0u64;
    let mut dsp = 0u64;
    let mut ff = 0u64;
    let mut max_fanin = 1usize;
    for (unit, _) in &rtl {
        let first = &ops[unit.ir_ids[0] as usize].ir;
        let (l, d) = unit_cost(unit.opcode);
        let scale = (first.result_width as u64).max(8) as f64 / 32.0;
        lut += (l as f64 * scale).ceil() as u64;
        dsp += d;
        let fanin = unit.ir_ids.len();
        max_fanin = max_fanin.max(fanin);
        let in_bits: u64 = first.operand_widths.iter().map(|&x| x as u64).sum();
        lut += (fanin as u64 - 1) * in_bits / 2;
        ff += first.result_width as u64 * (delay(unit.opcode) as u64 - 1);
    }
    ff += ops.iter().map(|o| o.ir.result_width as u64).sum::<u64>();
    lut += 4 * n_states as u64 + 20;
    ff += (32 - n_states.leading_zeros()) as u64 + 16;
    if pipelined {
        ff += ops.iter().map(|o| o.ir.result_width as u64).sum::<u64>() / 2;
        lut += 2 * n_states as u64;
    }
    let words = kernel.words() as u64;
    let bank_words = words.div_ceil(eff.partition as u64);
    let bram = n_mem as u64 * eff.partition as u64 * (bank_words * w as u64).div_ceil(18 * 1024).max(1);
    let clock_period_ns = (5.0
        + 0.35 * (max_fanin as f64).log2()
        + if kernel.float { 1.1 } else { 0.0 }
        + 0.02 * (offsets.len() as f64).sqrt())
    .min(9.9);

    // Latency of one kernel call.
    let passes_per: Vec<u32> = (0..depth).map(|i| trips[i] / eff.unroll[i]).collect();
    let passes: u64 = passes_per.iter().map(|&p| p as u64).product();
    let s = n_states as u64;
    let latency_cycles = match eff.pipelined {
        None => passes * s + 1,
        Some(k) => {
            let accesses: Vec<u32> = (0..n_mem)
                .map(|m| ops.iter().filter(|o| o.mem == Some(m)).count() as u32)
                .collect();
            let ii = accesses.iter().map(|a| a.div_ceil(ports)).max().unwrap_or(1).max(1) as u64;
            let outer: u64 = passes_per[..k].iter().map(|&p| p as u64).product();
            let iters = passes_per[k] as u64;
            outer * ((iters - 1) * ii + s) + 1
        }
    };

    // One stimulus row per pass, frames back to back.
    let mut bases = vec![0u32];
    for i in 0..depth {
        let (n, step) = (passes_per[i], eff.unroll[i] * strides[i]);
        bases = bases
            .iter()
            .flat_map(|&b| (0..n).map(move |o| b + o * step))
            .collect();
    }
    let per_frame: u32 = trips.iter().product();
    let idx: Vec<u64> =
        (0..kernel.frames).flat_map(|f| bases.iter().map(move |&b| (f * per_frame + b) as u64)).collect();
    let stimuli = Stimuli::new(BTreeMap::from([(IDX_PORT.to_string(), idx)])).expect("single port");

    let mut memories: Vec<MemoryDecl> = in_names
        .iter()
        .zip(&kernel.init)
        .map(|(name, init)| MemoryDecl { name: name.clone(), depth: words as u32, width: w, init: init.clone() })
        .collect();
    memories.push(MemoryDecl { name: OUT_ARRAY.into(), depth: words as u32, width: w, init: Vec::new() });

    let fsmd = FsmdDesign {
        n_states,
        input_ports: vec![PortDecl { name: IDX_PORT.into(), width: ADDR_WIDTH }],
        output_ports: vec![PortDecl { name: RESULT_PORT.into(), width: w }],
        memories,
        ir_operators: ops.into_iter().map(|o| o.ir).collect(),
        rtl_operators: rtl.into_iter().map(|(r, _)| r).collect(),
    };
    Built {
        fsmd,
        metrics: HlsMetrics { lut, ff, dsp, bram, clock_period_ns, latency_cycles },
        stimuli,
    }
}
