#![allow(dead_code)]

use fenn::fixedpoint::RoundingMode;
use fenn::isa::{
    v, x, BranchCond, ImmOp, Instruction, LoadWidth, RegOp, RngHalf, StoreWidth, VArithOp, VCompareCond, VReg, XReg,
};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const DMEM_BASE: u32 = 0x1000_0000;
/// Scalar data window touched by generated loads and stores.
pub const WINDOW: usize = 2048;
/// Holds `DMEM_BASE` in generated programs and is never written.
pub const BASE_REG: XReg = x(31);

fn any_x(rng: &mut impl Rng) -> XReg {
    x(rng.random_range(0..32))
}

fn any_v(rng: &mut impl Rng) -> VReg {
    v(rng.random_range(0..32))
}

fn signed(rng: &mut impl Rng, bits: u32) -> i32 {
    rng.random_range(-(1i32 << (bits - 1))..(1i32 << (bits - 1)))
}

/// Any encodable instruction, every format equally likely.
pub fn random_instruction(rng: &mut impl Rng) -> Instruction {
    use Instruction::*;
    match rng.random_range(0..20) {
        0 => Lui { rd: any_x(rng), imm20: rng.random_range(0..1 << 20) },
        1 => Auipc { rd: any_x(rng), imm20: rng.random_range(0..1 << 20) },
        2 => Jal { rd: any_x(rng), offset: signed(rng, 21) & !1 },
        3 => Jalr { rd: any_x(rng), rs1: any_x(rng), offset: signed(rng, 12) },
        4 => Branch {
            cond: *BranchCond::ALL.choose(rng).unwrap(),
            rs1: any_x(rng),
            rs2: any_x(rng),
            offset: signed(rng, 13) & !1,
        },
        5 => Load {
            width: *LoadWidth::ALL.choose(rng).unwrap(),
            rd: any_x(rng),
            rs1: any_x(rng),
            offset: signed(rng, 12),
        },
        6 => Store {
            width: *StoreWidth::ALL.choose(rng).unwrap(),
            rs1: any_x(rng),
            rs2: any_x(rng),
            offset: signed(rng, 12),
        },
        7 => {
            let op = *ImmOp::ALL.choose(rng).unwrap();
            let imm = if op.is_shift() { rng.random_range(0..32) } else { signed(rng, 12) };
            OpImm { op, rd: any_x(rng), rs1: any_x(rng), imm }
        }
        8 => Op { op: *RegOp::ALL.choose(rng).unwrap(), rd: any_x(rng), rs1: any_x(rng), rs2: any_x(rng) },
        9 => Ecall,
        10 => VArith { op: *VArithOp::ALL.choose(rng).unwrap(), vd: any_v(rng), vs1: any_v(rng), vs2: any_v(rng) },
        11 => VMul {
            vd: any_v(rng),
            vs1: any_v(rng),
            vs2: any_v(rng),
            shift: rng.random_range(0..16),
            rounding: *RoundingMode::ALL.choose(rng).unwrap(),
        },
        12 => VLoad { vd: any_v(rng), rs1: any_x(rng), offset: signed(rng, 11) as i16 },
        13 => VStore { vs2: any_v(rng), rs1: any_x(rng), offset: signed(rng, 11) as i16 },
        14 => VLoadRng {
            half: if rng.random() { RngHalf::S0 } else { RngHalf::S1 },
            rs1: any_x(rng),
            offset: signed(rng, 11) as i16,
        },
        15 => VBcast { vd: any_v(rng), rs1: any_x(rng) },
        16 => VExtract { rd: any_x(rng), vs1: any_v(rng), lane: rng.random_range(0..32) },
        17 => VRng { vd: any_v(rng) },
        18 => {
            VCompare { cond: *VCompareCond::ALL.choose(rng).unwrap(), rd: any_x(rng), vs1: any_v(rng), vs2: any_v(rng) }
        }
        _ => VSel { vd: any_v(rng), vs1: any_v(rng), vs2: any_v(rng), rs1: any_x(rng) },
    }
}

/// A destination register other than `BASE_REG`.
fn dest(rng: &mut impl Rng) -> XReg {
    x(rng.random_range(0..31))
}

/// A scalar straight-line instruction. Memory accesses are aligned and go
/// through `BASE_REG` into the first `WINDOW` bytes of scalar memory.
pub fn random_scalar(rng: &mut impl Rng) -> Instruction {
    use Instruction::*;
    match rng.random_range(0..6) {
        0 => Lui { rd: dest(rng), imm20: rng.random_range(0..1 << 20) },
        1 => Auipc { rd: dest(rng), imm20: rng.random_range(0..1 << 20) },
        2 => {
            let op = *ImmOp::ALL.choose(rng).unwrap();
            let imm = if op.is_shift() { rng.random_range(0..32) } else { signed(rng, 12) };
            OpImm { op, rd: dest(rng), rs1: any_x(rng), imm }
        }
        3 => Op { op: *RegOp::ALL.choose(rng).unwrap(), rd: dest(rng), rs1: any_x(rng), rs2: any_x(rng) },
        4 => {
            let width = *LoadWidth::ALL.choose(rng).unwrap();
            let n = width.bytes() as i32;
            let offset = rng.random_range(0..WINDOW as i32 / n) * n;
            Load { width, rd: dest(rng), rs1: BASE_REG, offset }
        }
        _ => {
            let width = *StoreWidth::ALL.choose(rng).unwrap();
            let n = width.bytes() as i32;
            let offset = rng.random_range(0..WINDOW as i32 / n) * n;
            Store { width, rs1: BASE_REG, rs2: any_x(rng), offset }
        }
    }
}

/// Minimal RV32I+MUL interpreter working directly on instruction words.
#[derive(Debug, Clone)]
pub struct RefCpu {
    pub x: [u32; 32],
    pub pc: u32,
    /// Scalar memory starting at `DMEM_BASE`.
    pub mem: Vec<u8>,
}

fn bits(w: u32, lo: u32, n: u32) -> u32 {
    (w >> lo) & ((1 << n) - 1)
}

fn sext(value: u32, width: u32) -> u32 {
    (((value << (32 - width)) as i32) >> (32 - width)) as u32
}

impl RefCpu {
    pub fn new(mem_bytes: usize) -> Self {
        RefCpu { x: [0; 32], pc: 0, mem: vec![0; mem_bytes] }
    }

    fn addr(&self, base: u32, imm: u32, n: usize) -> usize {
        let a = base.wrapping_add(imm).wrapping_sub(DMEM_BASE) as usize;
        assert!(a + n <= self.mem.len(), "reference access outside its memory");
        a
    }

    /// Executes one word; panics on anything outside the straight-line subset.
    pub fn step(&mut self, w: u32) {
        let rd = bits(w, 7, 5) as usize;
        let f3 = bits(w, 12, 3);
        let a = self.x[bits(w, 15, 5) as usize];
        let b = self.x[bits(w, 20, 5) as usize];
        let imm_i = sext(w >> 20, 12);
        let result = match bits(w, 0, 7) {
            0x37 => Some(w & 0xFFFF_F000),
            0x17 => Some(self.pc.wrapping_add(w & 0xFFFF_F000)),
            0x13 => {
                let sh = imm_i & 31;
                Some(match f3 {
                    0 => a.wrapping_add(imm_i),
                    1 => a << sh,
                    2 => ((a as i32) < imm_i as i32) as u32,
                    3 => (a < imm_i) as u32,
                    4 => a ^ imm_i,
                    5 if w >> 30 & 1 == 1 => ((a as i32) >> sh) as u32,
                    5 => a >> sh,
                    6 => a | imm_i,
                    _ => a & imm_i,
                })
            }
            0x33 => Some(match (bits(w, 25, 7), f3) {
                (0, 0) => a.wrapping_add(b),
                (0x20, 0) => a.wrapping_sub(b),
                (0, 1) => a << (b & 31),
                (0, 2) => ((a as i32) < b as i32) as u32,
                (0, 3) => (a < b) as u32,
                (0, 4) => a ^ b,
                (0, 5) => a >> (b & 31),
                (0x20, 5) => ((a as i32) >> (b & 31)) as u32,
                (0, 6) => a | b,
                (0, 7) => a & b,
                (1, 0) => a.wrapping_mul(b),
                other => panic!("unsupported op {other:?}"),
            }),
            0x03 => {
                let n = [1, 2, 4, 0, 1, 2][f3 as usize];
                let at = self.addr(a, imm_i, n);
                let mut raw = [0u8; 4];
                raw[..n].copy_from_slice(&self.mem[at..at + n]);
                let v = u32::from_le_bytes(raw);
                Some(match f3 {
                    0 => sext(v, 8),
                    1 => sext(v, 16),
                    _ => v,
                })
            }
            0x23 => {
                let imm = sext(bits(w, 25, 7) << 5 | bits(w, 7, 5), 12);
                let n = 1usize << f3;
                let at = self.addr(a, imm, n);
                self.mem[at..at + n].copy_from_slice(&b.to_le_bytes()[..n]);
                None
            }
            other => panic!("reference interpreter does not handle opcode {other:#x}"),
        };
        if let Some(value) = result {
            if rd != 0 {
                self.x[rd] = value;
            }
        }
        self.pc = self.pc.wrapping_add(4);
    }
}

/// Lane-wise oracle for `fx_mul`: floor((a*b + R) / 2^shift) wrapped to 16 bits.
pub fn mul_oracle(a: i16, b: i16, shift: u8, mode: RoundingMode, entropy: u16) -> i16 {
    let r = match mode {
        RoundingMode::RoundToZero => 0,
        RoundingMode::RoundToNearest if shift > 0 => 1i64 << (shift - 1),
        RoundingMode::RoundToNearest => 0,
        RoundingMode::Stochastic => (entropy as i64) & ((1i64 << shift) - 1),
    };
    ((a as i64 * b as i64 + r).div_euclid(1i64 << shift)) as i16
}

/// Exact float64 ALIF dynamics; entry `t` holds `V[t+1]` and `A[t+1]`.
pub fn alif_f64(alpha: f64, rho: f64, v_th: f64, beta: f64, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (mut v, mut a) = (0.0f64, 0.0f64);
    let (mut vs, mut as_) = (Vec::with_capacity(input.len()), Vec::with_capacity(input.len()));
    for &i in input {
        let s = if v >= v_th + beta * a { 1.0 } else { 0.0 };
        v = alpha * v + i - s * v_th;
        a = rho * a + s;
        vs.push(v);
        as_.push(a);
    }
    (vs, as_)
}

/// RMS error normalised by the range of `reference`.
pub fn nrmse_range(sim: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(sim.len(), reference.len());
    let mse = sim.iter().zip(reference).map(|(s, r)| (s - r) * (s - r)).sum::<f64>() / sim.len() as f64;
    let (lo, hi) = reference.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &r| (l.min(r), h.max(r)));
    assert!(hi > lo, "reference series is constant");
    mse.sqrt() / (hi - lo)
}

/// Pearson chi-square of `samples` against `pmf`, pooling adjacent bins
/// until each expected count reaches 5. Returns `(statistic, dof)`.
pub fn chi_square(samples: &[u64], pmf: impl Fn(u64) -> f64) -> (f64, usize) {
    let n = samples.len() as f64;
    let max = *samples.iter().max().unwrap();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut exp, mut obs, mut mass) = (0.0, 0.0, 0.0);
    for k in 0..=max {
        let p = pmf(k);
        mass += p;
        exp += p * n;
        obs += samples.iter().filter(|&&s| s == k).count() as f64;
        if exp >= 5.0 {
            bins.push((obs, exp));
            exp = 0.0;
            obs = 0.0;
        }
    }
    // The upper tail beyond the largest sample joins the last bin.
    exp += (1.0 - mass) * n;
    let last = bins.last_mut().expect("at least one bin");
    last.0 += obs;
    last.1 += exp;
    let stat = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    (stat, bins.len() - 1)
}
