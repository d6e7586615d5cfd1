//! Programs for the vector unit, built with the [`crate::assembler::Assembler`].
//!
//! Every builder is pure: it returns a [`Program`] together with the
//! addresses needed to read results back after a run.

mod alif;
mod files;
mod multiply;
mod poisson;
mod rsnn;

pub use alif::{build_alif, input_currents, AlifKernel, AlifParams, AlifRun};
pub use files::{read_events, read_weights, write_events, write_weights, InputEvent, WeightMatrix};
pub use multiply::{build_multiply_batch, MultiplyBatch};
pub use poisson::{build_poisson, PoissonKernel, MAX_LAMBDA};
pub use rsnn::{argmax, build_rsnn, RsnnKernel, RsnnOracle, RsnnTopology, RsnnTrace, NEURON_UPDATE, SPIKE_PROCESSING};

use thiserror::Error;

use crate::assembler::{AsmError, Assembler, Program};
use crate::fixedpoint::{quantize, FixedError, QFormat, RoundingMode};
use crate::isa::{Instruction, RngHalf, VArithOp, XReg};
use crate::machine::{HaltReason, Machine, MachineConfig, MachineError};
use crate::rng;
use crate::LANES;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("lambda {0} is outside (0, {MAX_LAMBDA:.4}]")]
    LambdaOutOfRange(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("{name} = {value} is not representable in {format}")]
    NotRepresentable { name: &'static str, value: f64, format: QFormat },
    #[error(transparent)]
    Asm(#[from] AsmError),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Fixed(#[from] FixedError),
    #[error("kernel halted abnormally: {0}")]
    Halted(HaltReason),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How vector additions in a neuron update treat overflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AddMode {
    Wrap,
    Saturate,
}

impl AddMode {
    pub fn name(self) -> &'static str {
        match self {
            AddMode::Wrap => "wrap",
            AddMode::Saturate => "saturate",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [AddMode::Wrap, AddMode::Saturate].into_iter().find(|m| m.name() == s)
    }

    pub fn add(self, a: i16, b: i16) -> i16 {
        match self {
            AddMode::Wrap => a.wrapping_add(b),
            AddMode::Saturate => a.saturating_add(b),
        }
    }

    pub fn sub(self, a: i16, b: i16) -> i16 {
        match self {
            AddMode::Wrap => a.wrapping_sub(b),
            AddMode::Saturate => a.saturating_sub(b),
        }
    }

    fn add_op(self) -> VArithOp {
        match self {
            AddMode::Wrap => VArithOp::Add,
            AddMode::Saturate => VArithOp::AddSat,
        }
    }

    fn sub_op(self) -> VArithOp {
        match self {
            AddMode::Wrap => VArithOp::Sub,
            AddMode::Saturate => VArithOp::SubSat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NumericConfig {
    /// Format of V and A.
    pub state_format: QFormat,
    pub weight_format: QFormat,
    pub rounding: RoundingMode,
    pub add_mode: AddMode,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            state_format: QFormat::S3_12,
            weight_format: QFormat::S1_14,
            rounding: RoundingMode::Stochastic,
            add_mode: AddMode::Saturate,
        }
    }
}

/// Round-to-nearest conversion that reports which constant failed.
fn constant(name: &'static str, value: f64, format: QFormat) -> Result<i16, KernelError> {
    quantize(value, format, RoundingMode::RoundToNearest, 0).map(|f| f.raw).map_err(|_| KernelError::NotRepresentable {
        name,
        value,
        format,
    })
}

/// Emits code that loads the RNG state registers from a seed image
/// derived from `seed`, clobbering `scratch`.
fn emit_rng_seed(asm: &mut Assembler, seed: u64, scratch: XReg) {
    let (s0, s1) = rng::seed_image(seed);
    let addr = asm.vectors(&[s0.map(|h| h as i16), s1.map(|h| h as i16)]);
    asm.li(scratch, addr);
    asm.emit(Instruction::VLoadRng { half: RngHalf::S0, rs1: scratch, offset: 0 });
    asm.emit(Instruction::VLoadRng { half: RngHalf::S1, rs1: scratch, offset: 1 });
}

/// The RNG state a kernel seeded with `seed` starts from.
pub fn seeded_rng(seed: u64) -> rng::VectorRngState {
    rng::VectorRngState::from_seed(seed)
}

/// Loads and runs `program`, requiring a clean `ecall` halt.
pub fn execute(program: &Program, max_cycles: u64) -> Result<Machine, KernelError> {
    let mut machine = Machine::load(program, &MachineConfig::default())?;
    let outcome = machine.run(max_cycles);
    if !outcome.halt.is_clean() {
        return Err(KernelError::Halted(outcome.halt));
    }
    Ok(machine)
}

/// One 32-lane vector broadcast from a scalar.
fn splat(value: i16) -> [i16; LANES] {
    [value; LANES]
}
