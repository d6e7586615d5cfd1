//! Thirty-two adaptive leaky integrate-and-fire neurons, one per lane.
//!
//! Per timestep, with `thr = V_th + beta*A`:
//!
//! ```text
//! S  = V >= thr
//! V' = alpha*V + I           then V' - V_th where S
//! A' = rho*A                 then A' + 1    where S
//! ```
//!
//! Products are `vmul` with shift equal to the state format's fractional
//! bits, so every constant lives in the state format. With stochastic
//! rounding the three products per step draw entropy in the order
//! `beta*A`, `alpha*V`, `rho*A`.

use crate::assembler::{Assembler, Program};
use crate::fixedpoint::{Fix16, QFormat, RoundingMode};
use crate::isa::{v, x, BranchCond, ImmOp, Instruction, VCompareCond};
use crate::machine::{Machine, Vector};
use crate::memory::VECTOR_BYTES;
use crate::LANES;

use super::{constant, emit_rng_seed, splat, AddMode, KernelError, NumericConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlifParams {
    /// Membrane time constant in timesteps.
    pub tau_m: f64,
    /// Adaptation time constant in timesteps.
    pub tau_a: f64,
    pub v_th: f64,
    pub beta: f64,
}

impl Default for AlifParams {
    fn default() -> Self {
        AlifParams { tau_m: 20.0, tau_a: 2000.0, v_th: 0.6, beta: 0.0174 }
    }
}

impl AlifParams {
    pub fn alpha(&self) -> f64 {
        (-1.0 / self.tau_m).exp()
    }

    pub fn rho(&self) -> f64 {
        (-1.0 / self.tau_a).exp()
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let ok = self.tau_m > 0.0
            && self.tau_a > 0.0
            && self.tau_m.is_finite()
            && self.tau_a.is_finite()
            && self.v_th.is_finite()
            && self.beta.is_finite();
        if !ok {
            return Err(KernelError::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Quantized ALIF constants in the state format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct AlifConstants {
    pub alpha: i16,
    pub rho: i16,
    pub beta: i16,
    pub v_th: i16,
    pub one: i16,
}

impl AlifConstants {
    pub(crate) fn new(params: &AlifParams, format: QFormat) -> Result<Self, KernelError> {
        params.validate()?;
        Ok(AlifConstants {
            alpha: constant("alpha", params.alpha(), format)?,
            rho: constant("rho", params.rho(), format)?,
            beta: constant("beta", params.beta, format)?,
            v_th: constant("v_th", params.v_th, format)?,
            one: constant("one", 1.0, format)?,
        })
    }
}

/// Synaptic current per step: `counts[t][lane]` input spikes of weight
/// `weight_raw`, summed under `add_mode` starting from zero.
pub fn input_currents(counts: &[[u16; LANES]], weight_raw: i16, add_mode: AddMode) -> Vec<Vector> {
    counts.iter().map(|step| step.map(|n| (0..n).fold(0i16, |acc, _| add_mode.add(acc, weight_raw)))).collect()
}

#[derive(Debug, Clone)]
pub struct AlifKernel {
    pub program: Program,
    pub steps: usize,
    pub format: QFormat,
    /// Input weight after quantization to the state format.
    pub weight: Fix16,
    block_addr: u32,
    mask_addr: u32,
}

/// Recorded trajectories. Entry `t` holds `V[t+1]`, `A[t+1]` and the
/// spike mask `S[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlifRun {
    pub format: QFormat,
    pub v: Vec<Vector>,
    pub a: Vec<Vector>,
    pub spikes: Vec<u32>,
}

impl AlifRun {
    pub fn lane_v(&self, lane: usize) -> Vec<f64> {
        self.v.iter().map(|s| Fix16::from_raw(s[lane], self.format).to_real()).collect()
    }

    pub fn lane_a(&self, lane: usize) -> Vec<f64> {
        self.a.iter().map(|s| Fix16::from_raw(s[lane], self.format).to_real()).collect()
    }

    pub fn lane_spikes(&self, lane: usize) -> Vec<bool> {
        self.spikes.iter().map(|m| m >> lane & 1 == 1).collect()
    }
}

impl AlifKernel {
    pub fn read_run(&self, machine: &Machine) -> Result<AlifRun, KernelError> {
        let mut v = Vec::with_capacity(self.steps);
        let mut a = Vec::with_capacity(self.steps);
        for t in 0..self.steps {
            let block = self.block_addr + (3 * t * VECTOR_BYTES) as u32;
            v.push(machine.read_vector(block + VECTOR_BYTES as u32)?);
            a.push(machine.read_vector(block + 2 * VECTOR_BYTES as u32)?);
        }
        let spikes = machine
            .read_u32s(self.mask_addr, self.steps)
            .ok_or_else(|| KernelError::InvalidParams("mask trace outside scalar memory".into()))?;
        Ok(AlifRun { format: self.format, v, a, spikes })
    }
}

/// Builds the kernel for `counts.len()` timesteps of input spike counts
/// arriving through a synapse of real weight `weight`.
pub fn build_alif(
    params: &AlifParams,
    num: &NumericConfig,
    weight: f64,
    counts: &[[u16; LANES]],
    seed: u64,
) -> Result<AlifKernel, KernelError> {
    let format = num.state_format;
    let k = AlifConstants::new(params, format)?;
    let weight_raw = constant("weight", weight, format)?;
    let currents = input_currents(counts, weight_raw, num.add_mode);
    let steps = counts.len();
    let shift = format.frac_bits();

    let mut asm = Assembler::new();
    let consts = asm.vectors(&[splat(k.alpha), splat(k.rho), splat(k.beta), splat(k.v_th), splat(k.one)]);
    let block_addr = asm.alloc_vectors(3 * steps);
    for (t, current) in currents.iter().enumerate() {
        asm.write_vector(block_addr + (3 * t * VECTOR_BYTES) as u32, current);
    }
    let mask_addr = asm.alloc_scalar(4 * steps, 4);

    let (vv, va, vi) = (v(1), v(2), v(3));
    let (t_beta, t_thr, t_alpha, t_in, t_reset, t_rho, t_bump) = (v(4), v(5), v(6), v(7), v(8), v(9), v(10));
    let (c_alpha, c_rho, c_beta, c_vth, c_one) = (v(20), v(21), v(22), v(23), v(24));
    let (block, end, masks, spike) = (x(3), x(4), x(6), x(5));
    let mul = |vd, vs1, vs2| Instruction::VMul { vd, vs1, vs2, shift, rounding: num.rounding };
    let add = |vd, vs1, vs2| Instruction::VArith { op: num.add_mode.add_op(), vd, vs1, vs2 };
    let sub = |vd, vs1, vs2| Instruction::VArith { op: num.add_mode.sub_op(), vd, vs1, vs2 };

    if num.rounding == RoundingMode::Stochastic {
        emit_rng_seed(&mut asm, seed, x(1));
    }
    asm.li(x(2), consts);
    for (i, reg) in [c_alpha, c_rho, c_beta, c_vth, c_one].into_iter().enumerate() {
        asm.emit(Instruction::VLoad { vd: reg, rs1: x(2), offset: i as i16 });
    }
    for reg in [vv, va] {
        asm.emit(Instruction::VArith { op: crate::isa::VArithOp::Sub, vd: reg, vs1: reg, vs2: reg });
    }
    asm.li(block, block_addr);
    asm.li(end, block_addr + (3 * steps * VECTOR_BYTES) as u32);
    asm.li(masks, mask_addr);
    let done = asm.label();
    asm.branch(BranchCond::Eq, block, end, done);

    let top = asm.bound_label();
    asm.emit(Instruction::VLoad { vd: vi, rs1: block, offset: 0 });
    asm.emit(mul(t_beta, c_beta, va));
    asm.emit(add(t_thr, c_vth, t_beta));
    asm.emit(Instruction::VCompare { cond: VCompareCond::Ge, rd: spike, vs1: vv, vs2: t_thr });
    asm.emit(mul(t_alpha, c_alpha, vv));
    asm.emit(add(t_in, t_alpha, vi));
    asm.emit(sub(t_reset, t_in, c_vth));
    asm.emit(Instruction::VSel { vd: vv, vs1: t_reset, vs2: t_in, rs1: spike });
    asm.emit(mul(t_rho, c_rho, va));
    asm.emit(add(t_bump, t_rho, c_one));
    asm.emit(Instruction::VSel { vd: va, vs1: t_bump, vs2: t_rho, rs1: spike });
    asm.emit(Instruction::VStore { vs2: vv, rs1: block, offset: 1 });
    asm.emit(Instruction::VStore { vs2: va, rs1: block, offset: 2 });
    asm.emit(Instruction::Store { width: crate::isa::StoreWidth::Word, rs1: masks, rs2: spike, offset: 0 });
    asm.emit(Instruction::OpImm { op: ImmOp::Addi, rd: block, rs1: block, imm: 3 * VECTOR_BYTES as i32 });
    asm.emit(Instruction::OpImm { op: ImmOp::Addi, rd: masks, rs1: masks, imm: 4 });
    asm.branch(BranchCond::Ne, block, end, top);
    asm.bind(done)?;
    asm.emit(Instruction::Ecall);

    Ok(AlifKernel {
        program: asm.finalize()?,
        steps,
        format,
        weight: Fix16::from_raw(weight_raw, format),
        block_addr,
        mask_addr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::fx_mul_raw;
    use crate::kernels::{execute, seeded_rng};

    /// Lane-wise host restatement of the kernel.
    fn host_run(params: &AlifParams, num: &NumericConfig, currents: &[Vector], seed: u64) -> AlifRun {
        let k = AlifConstants::new(params, num.state_format).unwrap();
        let n = num.state_format.frac_bits();
        let mut rng = seeded_rng(seed);
        let mut draw = || {
            if num.rounding == RoundingMode::Stochastic {
                rng.next_vector()
            } else {
                [0; LANES]
            }
        };
        let (mut vv, mut va) = ([0i16; LANES], [0i16; LANES]);
        let mut run = AlifRun { format: num.state_format, v: vec![], a: vec![], spikes: vec![] };
        for current in currents {
            let e_beta = draw();
            let e_alpha = draw();
            let e_rho = draw();
            let mut mask = 0u32;
            for lane in 0..LANES {
                let thr = num.add_mode.add(k.v_th, fx_mul_raw(k.beta, va[lane], n, num.rounding, e_beta[lane]));
                let spike = vv[lane] >= thr;
                let mut nv =
                    num.add_mode.add(fx_mul_raw(k.alpha, vv[lane], n, num.rounding, e_alpha[lane]), current[lane]);
                let mut na = fx_mul_raw(k.rho, va[lane], n, num.rounding, e_rho[lane]);
                if spike {
                    nv = num.add_mode.sub(nv, k.v_th);
                    na = num.add_mode.add(na, k.one);
                    mask |= 1 << lane;
                }
                vv[lane] = nv;
                va[lane] = na;
            }
            run.v.push(vv);
            run.a.push(va);
            run.spikes.push(mask);
        }
        run
    }

    fn counts(steps: usize, seed: u64) -> Vec<[u16; LANES]> {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..steps).map(|_| std::array::from_fn(|_| r.random_range(0..4))).collect()
    }

    #[test]
    fn matches_host_in_every_mode() {
        let params = AlifParams::default();
        let c = counts(300, 1);
        for rounding in RoundingMode::ALL {
            for add_mode in [AddMode::Wrap, AddMode::Saturate] {
                let num = NumericConfig { rounding, add_mode, ..Default::default() };
                let kernel = build_alif(&params, &num, 0.3, &c, 9).unwrap();
                let m = execute(&kernel.program, 10_000_000).unwrap();
                let got = kernel.read_run(&m).unwrap();
                let currents = input_currents(&c, kernel.weight.raw, add_mode);
                assert_eq!(got, host_run(&params, &num, &currents, 9), "{rounding:?} {add_mode:?}");
                assert!(got.spikes.iter().any(|&s| s != 0));
            }
        }
    }

    #[test]
    fn zero_input_stays_at_rest() {
        let kernel = build_alif(&AlifParams::default(), &NumericConfig::default(), 0.5, &[[0; LANES]; 50], 3).unwrap();
        let m = execute(&kernel.program, 1_000_000).unwrap();
        let run = kernel.read_run(&m).unwrap();
        assert!(run.v.iter().chain(&run.a).all(|s| s.iter().all(|&x| x == 0)));
        assert!(run.spikes.iter().all(|&s| s == 0));
    }

    #[test]
    fn unrepresentable_constant_rejected() {
        let num = NumericConfig { state_format: QFormat::S0_15, ..Default::default() };
        let err = build_alif(&AlifParams::default(), &num, 0.1, &[[0; LANES]; 2], 0).unwrap_err();
        assert!(matches!(err, KernelError::NotRepresentable { name: "one", .. }));
    }
}
