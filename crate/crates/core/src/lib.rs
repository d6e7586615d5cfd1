//! Simulator for a RISC-V core with a 32-lane, 16-bit fixed-point vector
//! co-processor, with the spiking-network kernels that run on it.
//!
//! The layers build on each other:
//!
//! - [`fixedpoint`] and [`rng`]: lane arithmetic and per-lane Xoroshiro32++.
//! - [`isa`], [`assembler`], [`memory`], [`machine`]: encoding, program
//!   construction and cycle-approximate execution.
//! - [`kernels`]: Poisson, ALIF and recurrent-network programs plus host
//!   oracles that reproduce them bit for bit.
//! - [`mod@reference`]: float64 dynamics and statistics.
//! - [`harness`]: experiment drivers behind the `fenn-sim` binary.

/// Lanes per vector register.
pub const LANES: usize = 32;

pub mod fixedpoint;
pub mod rng;

pub mod assembler;
pub mod isa;
pub mod machine;
pub mod memory;

pub mod kernels;
pub mod reference;

pub mod harness;
