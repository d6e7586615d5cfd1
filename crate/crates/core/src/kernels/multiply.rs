//! Batched S0.15 multiplication under every rounding mode.

use crate::assembler::{Assembler, Program};
use crate::fixedpoint::RoundingMode;
use crate::isa::{v, x, BranchCond, ImmOp, Instruction};
use crate::machine::{Machine, Vector};
use crate::memory::VECTOR_BYTES;
use crate::LANES;

use super::{emit_rng_seed, KernelError};

/// A program that multiplies `a[i] * b[i] >> 15` lane-wise in each mode of
/// [`RoundingMode::ALL`].
#[derive(Debug, Clone)]
pub struct MultiplyBatch {
    pub program: Program,
    pub n_pairs: usize,
    /// Output block per vector: one product per mode, in `RoundingMode::ALL` order.
    pub output_addr: u32,
    pub n_vectors: usize,
}

impl MultiplyBatch {
    /// Products in pair order for `mode`.
    pub fn read_products(&self, machine: &Machine, mode: RoundingMode) -> Result<Vec<i16>, KernelError> {
        let slot = RoundingMode::ALL.iter().position(|&m| m == mode).expect("mode listed");
        let modes = RoundingMode::ALL.len();
        let mut out = Vec::with_capacity(self.n_pairs);
        for i in 0..self.n_vectors {
            let addr = self.output_addr + ((i * modes + slot) * VECTOR_BYTES) as u32;
            out.extend(machine.read_vector(addr)?);
        }
        out.truncate(self.n_pairs);
        Ok(out)
    }
}

pub fn build_multiply_batch(a: &[i16], b: &[i16], seed: u64) -> Result<MultiplyBatch, KernelError> {
    if a.len() != b.len() {
        return Err(KernelError::InvalidParams(format!("operand lengths differ: {} vs {}", a.len(), b.len())));
    }
    let n_pairs = a.len();
    let n_vectors = n_pairs.div_ceil(LANES);
    let pack = |src: &[i16]| -> Vec<Vector> {
        src.chunks(LANES)
            .map(|c| {
                let mut lanes = [0i16; LANES];
                lanes[..c.len()].copy_from_slice(c);
                lanes
            })
            .collect()
    };
    let mut interleaved = Vec::with_capacity(2 * n_vectors);
    for (va, vb) in pack(a).into_iter().zip(pack(b)) {
        interleaved.push(va);
        interleaved.push(vb);
    }

    let mut asm = Assembler::new();
    let input = asm.vectors(&interleaved);
    let modes = RoundingMode::ALL.len();
    let output_addr = asm.alloc_vectors(n_vectors * modes);

    emit_rng_seed(&mut asm, seed, x(1));
    let (src, dst, end) = (x(2), x(3), x(4));
    asm.li(src, input);
    asm.li(dst, output_addr);
    asm.li(end, input + (2 * n_vectors * VECTOR_BYTES) as u32);
    let done = asm.label();
    asm.branch(BranchCond::Eq, src, end, done);
    let top = asm.bound_label();
    asm.emit(Instruction::VLoad { vd: v(1), rs1: src, offset: 0 });
    asm.emit(Instruction::VLoad { vd: v(2), rs1: src, offset: 1 });
    for (i, mode) in RoundingMode::ALL.into_iter().enumerate() {
        asm.emit(Instruction::VMul { vd: v(3 + i as u8), vs1: v(1), vs2: v(2), shift: 15, rounding: mode });
    }
    for i in 0..modes {
        asm.emit(Instruction::VStore { vs2: v(3 + i as u8), rs1: dst, offset: i as i16 });
    }
    asm.emit(Instruction::OpImm { op: ImmOp::Addi, rd: src, rs1: src, imm: 2 * VECTOR_BYTES as i32 });
    asm.emit(Instruction::OpImm { op: ImmOp::Addi, rd: dst, rs1: dst, imm: (modes * VECTOR_BYTES) as i32 });
    asm.branch(BranchCond::Ne, src, end, top);
    asm.bind(done)?;
    asm.emit(Instruction::Ecall);

    Ok(MultiplyBatch { program: asm.finalize()?, n_pairs, output_addr, n_vectors })
}
