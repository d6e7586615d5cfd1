//! Recurrent spiking network: ALIF hidden layer, leaky-accumulator readout.
//!
//! Each timestep runs two marked code regions:
//!
//! * `spike_processing` adds one weight row per input event due this step
//!   into the hidden synaptic accumulators, then walks the previous step's
//!   hidden spike masks bit by bit and adds each spiking neuron's combined
//!   recurrent/readout row into the hidden and output accumulators. Every
//!   row vector costs two loads, one saturating add and one store.
//! * `neuron_update` applies the ALIF update to each hidden vector, stores
//!   its spike mask, clears the accumulators and advances the readout
//!   `Y = alpha*Y + I_out`.
//!
//! Accumulators hold raw weight-format values; the update rescales them to
//! the state format with one `vmul` when the two formats differ. With
//! stochastic rounding each hidden vector draws entropy in the order
//! rescale, `beta*A`, `alpha*V`, `rho*A`, and the readout draws rescale,
//! `alpha*Y`.
//!
//! Memory: the state trace is a sequence of slots of `2M + 1` vectors
//! (`V_0..V_M`, `A_0..A_M`, `Y`, with `M = hidden / 32`). Slot 0 is the
//! initial state and step `t` reads slot `t` and writes slot `t + 1`. Spike
//! masks use the same scheme with rows of `M` words in scalar memory. When
//! recording is off a single slot and row are updated in place.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembler::{Assembler, Program};
use crate::fixedpoint::{fx_mul_raw, sat_add_raw, QFormat, RoundingMode};
use crate::isa::{
    v, x, BranchCond, ImmOp, Instruction, LoadWidth, RegOp, StoreWidth, VArithOp, VCompareCond, VReg, XReg,
};
use crate::machine::{Machine, Vector};
use crate::memory::VECTOR_BYTES;
use crate::rng::VectorRngState;
use crate::LANES;

use super::alif::AlifConstants;
use super::files::{InputEvent, WeightMatrix};
use super::{emit_rng_seed, seeded_rng, splat, KernelError, NumericConfig};

pub const SPIKE_PROCESSING: &str = "spike_processing";
pub const NEURON_UPDATE: &str = "neuron_update";

const EVENT_SENTINEL: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsnnTopology {
    pub n_input: usize,
    pub n_hidden: usize,
    pub n_output: usize,
    /// `n_input x n_hidden`.
    pub w_in: WeightMatrix,
    /// `n_hidden x n_hidden`, row = presynaptic neuron.
    pub w_rec: WeightMatrix,
    /// `n_hidden x n_output`.
    pub w_out: WeightMatrix,
}

impl RsnnTopology {
    /// Uniform random weights in `[-scale, scale]` for each matrix.
    pub fn random(
        n_input: usize,
        n_hidden: usize,
        n_output: usize,
        scales: [f64; 3],
        format: QFormat,
        seed: u64,
    ) -> RsnnTopology {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut matrix = |rows: usize, cols: usize, scale: f64| {
            let limit = (scale / format.ulp()).round().clamp(0.0, i16::MAX as f64) as i16;
            WeightMatrix {
                rows,
                cols,
                format,
                data: (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect(),
            }
        };
        RsnnTopology {
            n_input,
            n_hidden,
            n_output,
            w_in: matrix(n_input, n_hidden, scales[0]),
            w_rec: matrix(n_hidden, n_hidden, scales[1]),
            w_out: matrix(n_hidden, n_output, scales[2]),
        }
    }

    pub fn hidden_vectors(&self) -> usize {
        self.n_hidden / LANES
    }

    pub fn validate(&self, weight_format: QFormat) -> Result<(), KernelError> {
        let fail = |msg: String| Err(KernelError::Topology(msg));
        if self.n_hidden == 0 || !self.n_hidden.is_multiple_of(LANES) {
            return fail(format!("hidden size {} is not a positive multiple of {LANES}", self.n_hidden));
        }
        if self.n_output == 0 || self.n_output > LANES {
            return fail(format!("output size {} is outside 1..={LANES}", self.n_output));
        }
        for (name, m, rows, cols) in [
            ("w_in", &self.w_in, self.n_input, self.n_hidden),
            ("w_rec", &self.w_rec, self.n_hidden, self.n_hidden),
            ("w_out", &self.w_out, self.n_hidden, self.n_output),
        ] {
            if (m.rows, m.cols) != (rows, cols) || m.data.len() != rows * cols {
                return fail(format!("{name} is {}x{}, expected {rows}x{cols}", m.rows, m.cols));
            }
            if m.format != weight_format {
                return fail(format!("{name} is in {}, expected {weight_format}", m.format));
            }
        }
        Ok(())
    }

    /// Input row `i` as vectors.
    fn input_row(&self, i: usize) -> Vec<Vector> {
        self.w_in.row(i).chunks(LANES).map(|c| c.try_into().expect("full vector")).collect()
    }

    /// Recurrent row `j` followed by its readout weights, zero-padded.
    fn hidden_row(&self, j: usize) -> Vec<Vector> {
        let mut row =
            self.w_rec.row(j).chunks(LANES).map(|c| c.try_into().expect("full vector")).collect::<Vec<Vector>>();
        let mut out = [0i16; LANES];
        out[..self.n_output].copy_from_slice(self.w_out.row(j));
        row.push(out);
        row
    }
}

/// How accumulators are brought from the weight format to the state format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rescale {
    factor: i16,
    shift: u8,
}

fn rescale_for(num: &NumericConfig) -> Option<Rescale> {
    let (w, s) = (num.weight_format.frac_bits(), num.state_format.frac_bits());
    match w.cmp(&s) {
        std::cmp::Ordering::Equal => None,
        std::cmp::Ordering::Greater => Some(Rescale { factor: 1, shift: w - s }),
        std::cmp::Ordering::Less => Some(Rescale { factor: 1 << (s - w), shift: 0 }),
    }
}

/// Recorded state per timestep: after step `t`, `v[t]`/`a[t]` hold the
/// hidden vectors, `y[t]` the readout and `masks[t]` the spikes emitted
/// by the update in step `t`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RsnnTrace {
    pub v: Vec<Vec<Vector>>,
    pub a: Vec<Vec<Vector>>,
    pub y: Vec<Vector>,
    pub masks: Vec<Vec<u32>>,
}

impl RsnnTrace {
    /// Total hidden spikes per timestep.
    pub fn spike_counts(&self) -> Vec<u32> {
        self.masks.iter().map(|row| row.iter().map(|m| m.count_ones()).sum()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RsnnKernel {
    pub program: Program,
    pub steps: usize,
    pub hidden_vectors: usize,
    pub n_output: usize,
    pub recording: bool,
    trace_addr: u32,
    mask_addr: u32,
}

impl RsnnKernel {
    fn slot_addr(&self, slot: usize) -> u32 {
        self.trace_addr + (slot * (2 * self.hidden_vectors + 1) * VECTOR_BYTES) as u32
    }

    /// Readout vector after the final step; lanes beyond `n_output` are zero.
    pub fn read_output(&self, machine: &Machine) -> Result<Vector, KernelError> {
        let slot = if self.recording { self.steps } else { 0 };
        Ok(machine.read_vector(self.slot_addr(slot) + (2 * self.hidden_vectors * VECTOR_BYTES) as u32)?)
    }

    /// Full per-step trace; empty unless built with recording on.
    pub fn read_trace(&self, machine: &Machine) -> Result<RsnnTrace, KernelError> {
        let mut trace = RsnnTrace::default();
        if !self.recording {
            return Ok(trace);
        }
        let m = self.hidden_vectors;
        for t in 1..=self.steps {
            let slot = machine.read_vectors(self.slot_addr(t), 2 * m + 1)?;
            trace.v.push(slot[..m].to_vec());
            trace.a.push(slot[m..2 * m].to_vec());
            trace.y.push(slot[2 * m]);
            let row = self.mask_addr + (4 * m * t) as u32;
            trace.masks.push(
                machine
                    .read_u32s(row, m)
                    .ok_or_else(|| KernelError::InvalidParams("mask trace outside scalar memory".into()))?,
            );
        }
        Ok(trace)
    }
}

/// Index of the largest readout among the first `n_output` lanes; ties go
/// to the lowest index.
pub fn argmax(y: &Vector, n_output: usize) -> usize {
    (0..n_output).fold(0, |best, i| if y[i] > y[best] { i } else { best })
}

/// Register assignment for the generated code.
struct Regs;

impl Regs {
    const T: XReg = x(3);
    const STEPS: XReg = x(4);
    const SPIKE: XReg = x(5);
    const EVENT: XReg = x(6);
    const ACC: XReg = x(7);
    const W_IN: XReg = x(8);
    const W_HID: XReg = x(9);
    const WORD: XReg = x(10);
    const NEURON: XReg = x(11);
    const BIT: XReg = x(12);
    const ROW: XReg = x(13);
    const IN_ROW_BYTES: XReg = x(14);
    const HID_ROW_BYTES: XReg = x(15);
    const MASK_ROW: XReg = x(16);
    const SLOT: XReg = x(17);
    const MASK_PTR: XReg = x(18);
    const MASK_END: XReg = x(19);
    const EV_TIME: XReg = x(20);
    const EV_NEURON: XReg = x(21);
    const STATE_PTR: XReg = x(22);
    const ACC_PTR: XReg = x(23);
    const MASK_OUT: XReg = x(24);
    const STATE_END: XReg = x(25);
    const SLOT_STRIDE: XReg = x(26);
    const ROW_STRIDE: XReg = x(27);
    const WORD_BASE: XReg = x(28);
    const HIDDEN_BYTES: XReg = x(29);
}

const fn vr(i: u8) -> VReg {
    v(i)
}

/// Adds `count` weight vectors at `row` into accumulators at `acc`, with
/// loads for vector `k + 1` issued before the add of vector `k`.
fn emit_row_add(asm: &mut Assembler, acc: XReg, row: XReg, count: usize) {
    let pair = |k: usize| (vr(1 + 2 * (k % 4) as u8), vr(2 + 2 * (k % 4) as u8));
    let load = |asm: &mut Assembler, k: usize| {
        let (a, w) = pair(k);
        asm.emit(Instruction::VLoad { vd: a, rs1: acc, offset: k as i16 });
        asm.emit(Instruction::VLoad { vd: w, rs1: row, offset: k as i16 });
    };
    let finish = |asm: &mut Assembler, k: usize| {
        let (a, w) = pair(k);
        asm.emit(Instruction::VArith { op: VArithOp::AddSat, vd: a, vs1: a, vs2: w });
        asm.emit(Instruction::VStore { vs2: a, rs1: acc, offset: k as i16 });
    };
    load(asm, 0);
    for k in 0..count {
        if k + 1 < count {
            load(asm, k + 1);
        }
        finish(asm, k);
    }
}

fn addi(rd: XReg, rs1: XReg, imm: i32) -> Instruction {
    Instruction::OpImm { op: ImmOp::Addi, rd, rs1, imm }
}

fn op(op: RegOp, rd: XReg, rs1: XReg, rs2: XReg) -> Instruction {
    Instruction::Op { op, rd, rs1, rs2 }
}

/// Builds the network program for `steps` timesteps driven by `events`.
pub fn build_rsnn(
    topology: &RsnnTopology,
    num: &NumericConfig,
    params: &super::AlifParams,
    events: &[InputEvent],
    steps: usize,
    seed: u64,
    record: bool,
) -> Result<RsnnKernel, KernelError> {
    topology.validate(num.weight_format)?;
    if let Some(e) = events.iter().find(|e| e.neuron as usize >= topology.n_input) {
        return Err(KernelError::Topology(format!("event for input {} of {}", e.neuron, topology.n_input)));
    }
    if events.windows(2).any(|w| w[1].time < w[0].time) || events.iter().any(|e| e.time == EVENT_SENTINEL) {
        return Err(KernelError::InvalidParams("events must be time-sorted with times below u32::MAX".into()));
    }
    let sf = num.state_format;
    let k = AlifConstants::new(params, sf)?;
    let rescale = rescale_for(num);
    let m = topology.hidden_vectors();
    let slot_vectors = 2 * m + 1;
    let slots = if record { steps + 1 } else { 1 };
    if slot_vectors > 1000 {
        return Err(KernelError::Topology(format!("hidden size {} is too large", topology.n_hidden)));
    }
    let back = if record { -(slot_vectors as i16) } else { 0 };

    let mut asm = Assembler::new();
    let consts = asm.vectors(&[
        splat(k.alpha),
        splat(k.rho),
        splat(k.beta),
        splat(k.v_th),
        splat(k.one),
        splat(0),
        splat(rescale.map_or(0, |r| r.factor)),
    ]);
    let acc_addr = asm.alloc_vectors(m + 1);
    let w_in_addr = asm.alloc_vectors(0);
    for i in 0..topology.n_input {
        asm.vectors(&topology.input_row(i));
    }
    let w_hid_addr = asm.alloc_vectors(0);
    for j in 0..topology.n_hidden {
        asm.vectors(&topology.hidden_row(j));
    }
    let trace_addr = asm.alloc_vectors(slots * slot_vectors);

    let mut event_words = Vec::with_capacity(2 * events.len() + 2);
    for e in events {
        event_words.extend([e.time, e.neuron]);
    }
    event_words.extend([EVENT_SENTINEL, 0]);
    let events_addr = asm.scalar_words(&event_words);
    let mask_addr = asm.alloc_scalar(4 * m * slots, 4);

    let (c_alpha, c_rho, c_beta, c_vth, c_one, c_zero, c_scale) =
        (vr(20), vr(21), vr(22), vr(23), vr(24), vr(25), vr(26));
    let mul = |vd, vs1, vs2| Instruction::VMul { vd, vs1, vs2, shift: sf.frac_bits(), rounding: num.rounding };
    let add = |vd, vs1, vs2| Instruction::VArith { op: num.add_mode.add_op(), vd, vs1, vs2 };
    let sub = |vd, vs1, vs2| Instruction::VArith { op: num.add_mode.sub_op(), vd, vs1, vs2 };
    let rescale_insn = |reg| {
        rescale.map(|r| Instruction::VMul { vd: reg, vs1: reg, vs2: c_scale, shift: r.shift, rounding: num.rounding })
    };

    if num.rounding == RoundingMode::Stochastic {
        emit_rng_seed(&mut asm, seed, x(1));
    }
    asm.li(x(2), consts);
    for (i, reg) in [c_alpha, c_rho, c_beta, c_vth, c_one, c_zero, c_scale].into_iter().enumerate() {
        asm.emit(Instruction::VLoad { vd: reg, rs1: x(2), offset: i as i16 });
    }
    asm.li(Regs::T, 0);
    asm.li(Regs::STEPS, steps as u32);
    asm.li(Regs::EVENT, events_addr);
    asm.li(Regs::ACC, acc_addr);
    asm.li(Regs::W_IN, w_in_addr);
    asm.li(Regs::W_HID, w_hid_addr);
    asm.li(Regs::IN_ROW_BYTES, (m * VECTOR_BYTES) as u32);
    asm.li(Regs::HID_ROW_BYTES, ((m + 1) * VECTOR_BYTES) as u32);
    asm.li(Regs::HIDDEN_BYTES, (m * VECTOR_BYTES) as u32);
    let (slot_stride, row_stride) = if record { (slot_vectors * VECTOR_BYTES, 4 * m) } else { (0, 0) };
    asm.li(Regs::SLOT_STRIDE, slot_stride as u32);
    asm.li(Regs::ROW_STRIDE, row_stride as u32);
    asm.li(Regs::SLOT, trace_addr + slot_stride as u32);
    asm.li(Regs::MASK_ROW, mask_addr + row_stride as u32);
    let done = asm.label();
    asm.branch(BranchCond::Eq, Regs::T, Regs::STEPS, done);

    // Spike processing.
    let step_top = asm.bound_label();
    let ev_loop = asm.bound_label();
    let ev_done = asm.label();
    asm.emit(Instruction::Load { width: LoadWidth::Word, rd: Regs::EV_TIME, rs1: Regs::EVENT, offset: 0 });
    asm.branch(BranchCond::Ne, Regs::EV_TIME, Regs::T, ev_done);
    asm.emit(Instruction::Load { width: LoadWidth::Word, rd: Regs::EV_NEURON, rs1: Regs::EVENT, offset: 4 });
    asm.emit(op(RegOp::Mul, Regs::ROW, Regs::EV_NEURON, Regs::IN_ROW_BYTES));
    asm.emit(op(RegOp::Add, Regs::ROW, Regs::ROW, Regs::W_IN));
    emit_row_add(&mut asm, Regs::ACC, Regs::ROW, m);
    asm.emit(addi(Regs::EVENT, Regs::EVENT, 8));
    asm.jump(ev_loop);
    asm.bind(ev_done)?;

    asm.emit(op(RegOp::Sub, Regs::MASK_PTR, Regs::MASK_ROW, Regs::ROW_STRIDE));
    asm.emit(addi(Regs::MASK_END, Regs::MASK_PTR, (4 * m) as i32));
    asm.emit(addi(Regs::WORD_BASE, XReg::ZERO, 0));
    let word_loop = asm.bound_label();
    let word_done = asm.label();
    let bit_skip = asm.label();
    asm.emit(Instruction::Load { width: LoadWidth::Word, rd: Regs::WORD, rs1: Regs::MASK_PTR, offset: 0 });
    asm.emit(addi(Regs::NEURON, Regs::WORD_BASE, 0));
    let bit_loop = asm.bound_label();
    asm.branch(BranchCond::Eq, Regs::WORD, XReg::ZERO, word_done);
    asm.emit(Instruction::OpImm { op: ImmOp::Andi, rd: Regs::BIT, rs1: Regs::WORD, imm: 1 });
    asm.branch(BranchCond::Eq, Regs::BIT, XReg::ZERO, bit_skip);
    asm.emit(op(RegOp::Mul, Regs::ROW, Regs::NEURON, Regs::HID_ROW_BYTES));
    asm.emit(op(RegOp::Add, Regs::ROW, Regs::ROW, Regs::W_HID));
    emit_row_add(&mut asm, Regs::ACC, Regs::ROW, m + 1);
    asm.bind(bit_skip)?;
    asm.emit(Instruction::OpImm { op: ImmOp::Srli, rd: Regs::WORD, rs1: Regs::WORD, imm: 1 });
    asm.emit(addi(Regs::NEURON, Regs::NEURON, 1));
    asm.jump(bit_loop);
    asm.bind(word_done)?;
    asm.emit(addi(Regs::MASK_PTR, Regs::MASK_PTR, 4));
    asm.emit(addi(Regs::WORD_BASE, Regs::WORD_BASE, LANES as i32));
    asm.branch(BranchCond::Ne, Regs::MASK_PTR, Regs::MASK_END, word_loop);

    // Neuron update.
    let update_top = asm.bound_label();
    asm.mark_region(SPIKE_PROCESSING, step_top, update_top)?;
    let (vv, va, vi) = (vr(1), vr(2), vr(3));
    let (t_beta, t_thr, t_alpha, t_in, t_reset, t_rho, t_bump) = (vr(4), vr(5), vr(6), vr(7), vr(8), vr(9), vr(10));
    let hidden = m as i16;
    asm.emit(addi(Regs::STATE_PTR, Regs::SLOT, 0));
    asm.emit(addi(Regs::ACC_PTR, Regs::ACC, 0));
    asm.emit(addi(Regs::MASK_OUT, Regs::MASK_ROW, 0));
    asm.emit(op(RegOp::Add, Regs::STATE_END, Regs::SLOT, Regs::HIDDEN_BYTES));
    let nu_loop = asm.bound_label();
    asm.emit(Instruction::VLoad { vd: vi, rs1: Regs::ACC_PTR, offset: 0 });
    asm.emit(Instruction::VLoad { vd: va, rs1: Regs::STATE_PTR, offset: back + hidden });
    asm.emit(Instruction::VLoad { vd: vv, rs1: Regs::STATE_PTR, offset: back });
    if let Some(insn) = rescale_insn(vi) {
        asm.emit(insn);
    }
    asm.emit(mul(t_beta, c_beta, va));
    asm.emit(add(t_thr, c_vth, t_beta));
    asm.emit(Instruction::VCompare { cond: VCompareCond::Ge, rd: Regs::SPIKE, vs1: vv, vs2: t_thr });
    asm.emit(mul(t_alpha, c_alpha, vv));
    asm.emit(add(t_in, t_alpha, vi));
    asm.emit(sub(t_reset, t_in, c_vth));
    asm.emit(Instruction::VSel { vd: vv, vs1: t_reset, vs2: t_in, rs1: Regs::SPIKE });
    asm.emit(mul(t_rho, c_rho, va));
    asm.emit(add(t_bump, t_rho, c_one));
    asm.emit(Instruction::VSel { vd: va, vs1: t_bump, vs2: t_rho, rs1: Regs::SPIKE });
    asm.emit(Instruction::VStore { vs2: vv, rs1: Regs::STATE_PTR, offset: 0 });
    asm.emit(Instruction::VStore { vs2: va, rs1: Regs::STATE_PTR, offset: hidden });
    asm.emit(Instruction::VStore { vs2: c_zero, rs1: Regs::ACC_PTR, offset: 0 });
    asm.emit(Instruction::Store { width: StoreWidth::Word, rs1: Regs::MASK_OUT, rs2: Regs::SPIKE, offset: 0 });
    asm.emit(addi(Regs::STATE_PTR, Regs::STATE_PTR, VECTOR_BYTES as i32));
    asm.emit(addi(Regs::ACC_PTR, Regs::ACC_PTR, VECTOR_BYTES as i32));
    asm.emit(addi(Regs::MASK_OUT, Regs::MASK_OUT, 4));
    asm.branch(BranchCond::Ne, Regs::STATE_PTR, Regs::STATE_END, nu_loop);

    // Readout; STATE_PTR now points at A_0, so Y sits `hidden` vectors on.
    let (vy, vo, t_y) = (vr(11), vr(12), vr(13));
    match rescale_insn(vo) {
        Some(insn) => {
            asm.emit(Instruction::VLoad { vd: vo, rs1: Regs::ACC_PTR, offset: 0 });
            asm.emit(Instruction::VLoad { vd: vy, rs1: Regs::STATE_PTR, offset: back + hidden });
            asm.emit(insn);
        }
        None => {
            asm.emit(Instruction::VLoad { vd: vy, rs1: Regs::STATE_PTR, offset: back + hidden });
            asm.emit(Instruction::VLoad { vd: vo, rs1: Regs::ACC_PTR, offset: 0 });
        }
    }
    asm.emit(mul(t_y, c_alpha, vy));
    asm.emit(add(vy, t_y, vo));
    asm.emit(Instruction::VStore { vs2: vy, rs1: Regs::STATE_PTR, offset: hidden });
    asm.emit(Instruction::VStore { vs2: c_zero, rs1: Regs::ACC_PTR, offset: 0 });
    let update_end = asm.bound_label();
    asm.mark_region(NEURON_UPDATE, update_top, update_end)?;

    asm.emit(op(RegOp::Add, Regs::SLOT, Regs::SLOT, Regs::SLOT_STRIDE));
    asm.emit(op(RegOp::Add, Regs::MASK_ROW, Regs::MASK_ROW, Regs::ROW_STRIDE));
    asm.emit(addi(Regs::T, Regs::T, 1));
    asm.branch(BranchCond::Ne, Regs::T, Regs::STEPS, step_top);
    asm.bind(done)?;
    asm.emit(Instruction::Ecall);

    Ok(RsnnKernel {
        program: asm.finalize()?,
        steps,
        hidden_vectors: m,
        n_output: topology.n_output,
        recording: record,
        trace_addr,
        mask_addr,
    })
}

/// Host-side restatement of the kernel's arithmetic, step for step.
#[derive(Debug, Clone)]
pub struct RsnnOracle {
    topology: RsnnTopology,
    num: NumericConfig,
    consts: AlifConstants,
    rescale: Option<Rescale>,
    rng: VectorRngState,
    events: Vec<InputEvent>,
    next_event: usize,
    t: u32,
    acc: Vec<Vector>,
    v: Vec<Vector>,
    a: Vec<Vector>,
    y: Vector,
    masks: Vec<u32>,
}

impl RsnnOracle {
    pub fn new(
        topology: &RsnnTopology,
        num: &NumericConfig,
        params: &super::AlifParams,
        events: &[InputEvent],
        seed: u64,
    ) -> Result<Self, KernelError> {
        topology.validate(num.weight_format)?;
        let m = topology.hidden_vectors();
        Ok(RsnnOracle {
            topology: topology.clone(),
            num: *num,
            consts: AlifConstants::new(params, num.state_format)?,
            rescale: rescale_for(num),
            rng: seeded_rng(seed),
            events: events.to_vec(),
            next_event: 0,
            t: 0,
            acc: vec![[0; LANES]; m + 1],
            v: vec![[0; LANES]; m],
            a: vec![[0; LANES]; m],
            y: [0; LANES],
            masks: vec![0; m],
        })
    }

    fn entropy(&mut self) -> [u16; LANES] {
        if self.num.rounding == RoundingMode::Stochastic {
            self.rng.next_vector()
        } else {
            [0; LANES]
        }
    }

    fn accumulate(acc: &mut [Vector], row: &[Vector]) {
        for (dst, src) in acc.iter_mut().zip(row) {
            for lane in 0..LANES {
                dst[lane] = sat_add_raw(dst[lane], src[lane]);
            }
        }
    }

    fn rescaled(&mut self, raw: Vector) -> Vector {
        match self.rescale {
            None => raw,
            Some(r) => {
                let e = self.entropy();
                std::array::from_fn(|l| fx_mul_raw(raw[l], r.factor, r.shift, self.num.rounding, e[l]))
            }
        }
    }

    /// Advances one timestep.
    pub fn step(&mut self) {
        let m = self.topology.hidden_vectors();
        while let Some(e) = self.events.get(self.next_event).filter(|e| e.time == self.t).copied() {
            let row = self.topology.input_row(e.neuron as usize);
            Self::accumulate(&mut self.acc[..m], &row);
            self.next_event += 1;
        }
        for word in 0..m {
            for bit in 0..LANES {
                if self.masks[word] >> bit & 1 == 1 {
                    let row = self.topology.hidden_row(word * LANES + bit);
                    Self::accumulate(&mut self.acc, &row);
                }
            }
        }

        let (n, mode, add) = (self.num.state_format.frac_bits(), self.num.rounding, self.num.add_mode);
        let k = self.consts;
        for i in 0..m {
            let input = self.rescaled(self.acc[i]);
            let e_beta = self.entropy();
            let e_alpha = self.entropy();
            let e_rho = self.entropy();
            let mut mask = 0u32;
            for l in 0..LANES {
                let (vv, va) = (self.v[i][l], self.a[i][l]);
                let thr = add.add(k.v_th, fx_mul_raw(k.beta, va, n, mode, e_beta[l]));
                let spike = vv >= thr;
                let kept = add.add(fx_mul_raw(k.alpha, vv, n, mode, e_alpha[l]), input[l]);
                let decayed = fx_mul_raw(k.rho, va, n, mode, e_rho[l]);
                self.v[i][l] = if spike { add.sub(kept, k.v_th) } else { kept };
                self.a[i][l] = if spike { add.add(decayed, k.one) } else { decayed };
                mask |= (spike as u32) << l;
            }
            self.masks[i] = mask;
            self.acc[i] = [0; LANES];
        }
        let out = self.rescaled(self.acc[m]);
        let e = self.entropy();
        self.y = std::array::from_fn(|l| add.add(fx_mul_raw(k.alpha, self.y[l], n, mode, e[l]), out[l]));
        self.acc[m] = [0; LANES];
        self.t += 1;
    }

    /// Runs `steps` timesteps and records the trace.
    pub fn run(&mut self, steps: usize) -> RsnnTrace {
        let mut trace = RsnnTrace::default();
        for _ in 0..steps {
            self.step();
            trace.v.push(self.v.clone());
            trace.a.push(self.a.clone());
            trace.y.push(self.y);
            trace.masks.push(self.masks.clone());
        }
        trace
    }

    pub fn output(&self) -> Vector {
        self.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{execute, AlifParams};

    fn events(n_input: usize, steps: usize, per_step: usize, seed: u64) -> Vec<InputEvent> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for t in 0..steps {
            let mut ids: Vec<u32> = (0..per_step).map(|_| rng.random_range(0..n_input as u32)).collect();
            ids.sort_unstable();
            out.extend(ids.into_iter().map(|neuron| InputEvent { time: t as u32, neuron }));
        }
        out
    }

    #[test]
    fn zero_weights_stay_silent() {
        let topo = RsnnTopology::random(16, 64, 4, [0.0; 3], QFormat::S1_14, 1);
        let ev = events(16, 20, 5, 2);
        let kernel = build_rsnn(&topo, &NumericConfig::default(), &AlifParams::default(), &ev, 20, 3, true).unwrap();
        let m = execute(&kernel.program, 10_000_000).unwrap();
        let trace = kernel.read_trace(&m).unwrap();
        assert_eq!(trace.spike_counts(), vec![0; 20]);
        assert_eq!(kernel.read_output(&m).unwrap(), [0; LANES]);
    }

    #[test]
    fn single_input_spike_lands_in_accumulator() {
        let mut topo = RsnnTopology::random(4, 32, 2, [0.0; 3], QFormat::S3_12, 0);
        let w: Vector = std::array::from_fn(|i| (i as i16 - 16) * 37);
        topo.w_in.data[2 * 32..3 * 32].copy_from_slice(&w);
        let num = NumericConfig { weight_format: QFormat::S3_12, ..Default::default() };
        let params = AlifParams { beta: 0.0, v_th: 7.0, ..Default::default() };
        let ev = [InputEvent { time: 0, neuron: 2 }];
        let kernel = build_rsnn(&topo, &num, &params, &ev, 1, 0, true).unwrap();
        let m = execute(&kernel.program, 1_000_000).unwrap();
        // V starts at zero, so V[1] = alpha * 0 + w exactly.
        assert_eq!(kernel.read_trace(&m).unwrap().v[0][0], w);
    }

    #[test]
    fn matches_oracle_across_configs() {
        let params = AlifParams { tau_a: 200.0, beta: 0.05, ..Default::default() };
        for (hidden, rounding, wf, record) in [
            (32, RoundingMode::Stochastic, QFormat::S1_14, true),
            (64, RoundingMode::RoundToZero, QFormat::S1_14, true),
            (64, RoundingMode::RoundToNearest, QFormat::S3_12, false),
            (96, RoundingMode::Stochastic, QFormat::new(10).unwrap(), true),
        ] {
            let num = NumericConfig { weight_format: wf, rounding, ..Default::default() };
            let topo = RsnnTopology::random(20, hidden, 5, [0.6, 0.15, 0.3], wf, hidden as u64);
            let ev = events(20, 40, 3, 7);
            let kernel = build_rsnn(&topo, &num, &params, &ev, 40, 5, record).unwrap();
            let m = execute(&kernel.program, 50_000_000).unwrap();
            let mut oracle = RsnnOracle::new(&topo, &num, &params, &ev, 5).unwrap();
            let want = oracle.run(40);
            if record {
                let got = kernel.read_trace(&m).unwrap();
                assert_eq!(got, want, "hidden {hidden} {rounding:?}");
                assert!(got.spike_counts().iter().sum::<u32>() > 0);
            }
            assert_eq!(kernel.read_output(&m).unwrap(), oracle.output());
        }
    }

    #[test]
    fn topology_checks() {
        let num = NumericConfig::default();
        let p = AlifParams::default();
        let bad = RsnnTopology::random(4, 48, 2, [0.1; 3], QFormat::S1_14, 0);
        assert!(matches!(build_rsnn(&bad, &num, &p, &[], 1, 0, false), Err(KernelError::Topology(_))));
        let topo = RsnnTopology::random(4, 32, 2, [0.1; 3], QFormat::S1_14, 0);
        let ev = [InputEvent { time: 0, neuron: 4 }];
        assert!(matches!(build_rsnn(&topo, &num, &p, &ev, 1, 0, false), Err(KernelError::Topology(_))));
        let wrong_format = RsnnTopology::random(4, 32, 2, [0.1; 3], QFormat::S3_12, 0);
        assert!(build_rsnn(&wrong_format, &num, &p, &[], 1, 0, false).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        let mut y = [0i16; LANES];
        y[3] = 5;
        y[7] = 5;
        y[20] = 99;
        assert_eq!(argmax(&y, 10), 3);
        assert_eq!(argmax(&y, 32), 20);
    }
}
