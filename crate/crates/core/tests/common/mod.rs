//! Random small datapaths and an independent reference for their traces.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hlspower_core::activity::Stimuli;
use hlspower_core::design::{FsmdDesign, IrOperator, Opcode, Operand, PortDecl, RtlOperator};

const OPCODES: [Opcode; 9] = [
    Opcode::Add,
    Opcode::Sub,
    Opcode::Mul,
    Opcode::And,
    Opcode::Or,
    Opcode::Xor,
    Opcode::Icmp,
    Opcode::Select,
    Opcode::Read,
];

fn arity(op: Opcode) -> usize {
    match op {
        Opcode::Read => 1,
        Opcode::Select => 3,
        _ => 2,
    }
}

pub struct Case {
    pub design: FsmdDesign,
    pub stimuli: Stimuli,
}

/// Up to 8 integer operators, one per state, randomly bound onto shared RTL
/// operators, driven for up to 4 invocations.
pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=8usize);
    let invocations = rng.gen_range(1..=4usize);
    let mut ir = Vec::new();
    let mut rtl: Vec<RtlOperator> = Vec::new();
    for i in 0..n {
        let opcode = OPCODES[rng.gen_range(0..OPCODES.len())];
        let inputs = (0..arity(opcode))
            .map(|_| match rng.gen_range(0..3) {
                0 if i > 0 => Operand::Op(rng.gen_range(0..i) as u32),
                1 => Operand::Const(rng.gen()),
                _ => Operand::Port(if rng.gen() { "a".into() } else { "b".into() }),
            })
            .collect::<Vec<_>>();
        let operand_widths = inputs.iter().map(|_| rng.gen_range(1..=64u8)).collect();
        ir.push(IrOperator {
            id: i as u32,
            opcode,
            operand_widths,
            result_width: rng.gen_range(1..=64),
            state: i as u32,
            inputs,
            target: None,
        });
        let shared = rtl.iter().position(|r| r.opcode == opcode).filter(|_| rng.gen_bool(0.5));
        match shared {
            Some(r) => rtl[r].ir_ids.push(i as u32),
            None => rtl.push(RtlOperator { id: 100 + rtl.len() as u32, opcode, ir_ids: vec![i as u32] }),
        }
    }
    let design = FsmdDesign {
        n_states: n as u32,
        input_ports: vec![PortDecl { name: "a".into(), width: 64 }, PortDecl { name: "b".into(), width: 64 }],
        output_ports: Vec::new(),
        memories: Vec::new(),
        ir_operators: ir,
        rtl_operators: rtl,
    };
    let mut ports = BTreeMap::new();
    for name in ["a", "b"] {
        ports.insert(name.to_string(), (0..invocations).map(|_| rng.gen()).collect());
    }
    Case { design, stimuli: Stimuli::new(ports).unwrap() }
}

pub fn keep(v: u64, width: u8) -> u64 {
    if width == 64 {
        v
    } else {
        v % (1u64 << width)
    }
}

/// Straight-line evaluation in state order, recording every firing.
pub fn reference_signals(case: &Case) -> BTreeMap<u32, Vec<Vec<u64>>> {
    let d = &case.design;
    let owner: BTreeMap<u32, u32> =
        d.rtl_operators.iter().flat_map(|r| r.ir_ids.iter().map(move |&i| (i, r.id))).collect();
    let mut out: BTreeMap<u32, Vec<Vec<u64>>> = BTreeMap::new();
    for inv in 0..case.stimuli.invocations() {
        let mut results: Vec<u64> = Vec::new();
        for op in &d.ir_operators {
            let vals: Vec<u64> = op
                .inputs
                .iter()
                .zip(&op.operand_widths)
                .map(|(src, &w)| {
                    let raw = match src {
                        Operand::Op(j) => results[*j as usize],
                        Operand::Const(c) => *c,
                        Operand::Port(p) => case.stimuli.port(p).unwrap()[inv],
                    };
                    keep(raw, w)
                })
                .collect();
            let r = match op.opcode {
                Opcode::Add => vals[0].wrapping_add(vals[1]),
                Opcode::Sub => vals[0].wrapping_sub(vals[1]),
                Opcode::Mul => vals[0].wrapping_mul(vals[1]),
                Opcode::And => vals[0] & vals[1],
                Opcode::Or => vals[0] | vals[1],
                Opcode::Xor => vals[0] ^ vals[1],
                Opcode::Icmp => u64::from(vals[0] < vals[1]),
                Opcode::Select => {
                    if vals[0] != 0 {
                        vals[1]
                    } else {
                        vals[2]
                    }
                }
                Opcode::Read => vals[0],
                other => unreachable!("{other:?} not generated"),
            };
            let r = keep(r, op.result_width);
            results.push(r);
            let signals = out.entry(owner[&op.id]).or_insert_with(|| vec![Vec::new(); vals.len() + 1]);
            for (s, v) in signals.iter_mut().zip(vals.iter().chain(std::iter::once(&r))) {
                s.push(*v);
            }
        }
    }
    out
}

/// Toggle count by comparing every bit position of every consecutive pair.
pub fn explicit_activity(signals: &[Vec<u64>]) -> f64 {
    let samples = signals[0].len();
    if samples < 2 {
        return 0.0;
    }
    let mut toggles = 0u64;
    for s in signals {
        for k in 1..samples {
            let x = s[k - 1] ^ s[k];
            for bit in 0..64 {
                toggles += (x >> bit) & 1;
            }
        }
    }
    toggles as f64 / (signals.len() as f64 * (samples - 1) as f64)
}
