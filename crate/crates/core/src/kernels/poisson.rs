//! Poisson variates by Knuth's multiplication method, one per lane.
//!
//! Each lane keeps a running product `p` of uniform draws in S0.15 and
//! counts how many products stay above `L = e^-lambda`. Draws come straight
//! from `vrng` as signed values, so `p` carries a random sign and the loop
//! tests `|p| > L`. With `Loff = L - 2^15` and `thr = 2L - 2^15` (both
//! wrapped to 16 bits) that test is the single signed comparison
//! `thr < p + Loff`. `|p|` never grows, so the lane mask only ever loses
//! bits and a finished lane's count is frozen by `vsel`.

use crate::assembler::{Assembler, Program};
use crate::fixedpoint::RoundingMode;
use crate::isa::{v, x, BranchCond, Instruction, VArithOp, VCompareCond};
use crate::machine::Machine;
use crate::memory::VECTOR_BYTES;
use crate::LANES;

use super::{emit_rng_seed, splat, KernelError};

/// Largest rate whose `e^-lambda` is at least one S0.15 ulp.
pub const MAX_LAMBDA: f64 = 15.0 * std::f64::consts::LN_2;

const UNROLL: usize = 3;

#[derive(Debug, Clone)]
pub struct PoissonKernel {
    pub program: Program,
    pub output_addr: u32,
    pub n_vectors: usize,
    pub n_variates: usize,
}

impl PoissonKernel {
    /// The first `n_variates` counts, vector by vector, lane 0 first.
    pub fn read_variates(&self, machine: &Machine) -> Result<Vec<u32>, KernelError> {
        let vectors = machine.read_vectors(self.output_addr, self.n_vectors)?;
        Ok(vectors.iter().flatten().take(self.n_variates).map(|&k| k as u16 as u32).collect())
    }
}

/// Threshold `floor(e^-lambda * 2^15)`, capped at the largest S0.15 value.
pub(crate) fn threshold_raw(lambda: f64) -> i16 {
    ((-lambda).exp() * 32768.0).floor().min(32767.0) as i16
}

pub fn build_poisson(lambda: f64, n_variates: usize, seed: u64) -> Result<PoissonKernel, KernelError> {
    if !(lambda > 0.0 && lambda <= MAX_LAMBDA) {
        return Err(KernelError::LambdaOutOfRange(lambda));
    }
    let n_vectors = n_variates.div_ceil(LANES);
    let l = threshold_raw(lambda);
    let l_off = l.wrapping_sub(i16::MIN);
    let thr = l.wrapping_mul(2).wrapping_sub(i16::MIN);

    let mut asm = Assembler::new();
    let consts = asm.vectors(&[splat(i16::MAX), splat(0), splat(1), splat(l_off), splat(thr)]);
    let output_addr = asm.alloc_vectors(n_vectors);

    let (p, k, u, shifted, incremented) = (v(1), v(2), v(3), v(4), v(5));
    let (p_init, zero, one, v_loff, v_thr) = (v(10), v(11), v(12), v(13), v(14));
    let (ptr, end, mask) = (x(3), x(4), x(5));

    emit_rng_seed(&mut asm, seed, x(1));
    asm.li(x(2), consts);
    for (i, reg) in [p_init, zero, one, v_loff, v_thr].into_iter().enumerate() {
        asm.emit(Instruction::VLoad { vd: reg, rs1: x(2), offset: i as i16 });
    }
    asm.li(ptr, output_addr);
    asm.li(end, output_addr + (n_vectors * VECTOR_BYTES) as u32);
    let done = asm.label();
    asm.branch(BranchCond::Eq, ptr, end, done);

    let outer = asm.bound_label();
    asm.emit(Instruction::VArith { op: VArithOp::Add, vd: p, vs1: p_init, vs2: zero });
    asm.emit(Instruction::VArith { op: VArithOp::Add, vd: k, vs1: zero, vs2: zero });
    let inner = asm.bound_label();
    for _ in 0..UNROLL {
        asm.emit(Instruction::VRng { vd: u });
        asm.emit(Instruction::VMul { vd: p, vs1: p, vs2: u, shift: 15, rounding: RoundingMode::RoundToZero });
        asm.emit(Instruction::VArith { op: VArithOp::Add, vd: shifted, vs1: p, vs2: v_loff });
        asm.emit(Instruction::VCompare { cond: VCompareCond::Lt, rd: mask, vs1: v_thr, vs2: shifted });
        asm.emit(Instruction::VArith { op: VArithOp::Add, vd: incremented, vs1: k, vs2: one });
        asm.emit(Instruction::VSel { vd: k, vs1: incremented, vs2: k, rs1: mask });
    }
    asm.branch(BranchCond::Ne, mask, x(0), inner);
    asm.emit(Instruction::VStore { vs2: k, rs1: ptr, offset: 0 });
    asm.emit(Instruction::OpImm { op: crate::isa::ImmOp::Addi, rd: ptr, rs1: ptr, imm: VECTOR_BYTES as i32 });
    asm.branch(BranchCond::Ne, ptr, end, outer);
    asm.bind(done)?;
    asm.emit(Instruction::Ecall);

    Ok(PoissonKernel { program: asm.finalize()?, output_addr, n_vectors, n_variates })
}
