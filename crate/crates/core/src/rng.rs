//! Per-lane Xoroshiro32++ generators.
//!
//! Each vector lane owns a 32-bit state split into two 16-bit halves. The
//! vector unit keeps all `s0` halves in one 512-bit register and all `s1`
//! halves in another, so a single step produces 16 random bits per lane.
//!
//! Rotation/shift constants are `(13, 5, 10)` with an output rotation of
//! 9, the parameter set used by the Propeller 2.

use thiserror::Error;

use crate::LANES;

const ROT_A: u32 = 13;
const SHIFT_B: u32 = 5;
const ROT_C: u32 = 10;
const ROT_OUT: u32 = 9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RngError {
    #[error("lane {0} would be seeded with the all-zero state")]
    ZeroLaneSeed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LaneRngState {
    s0: u16,
    s1: u16,
}

impl LaneRngState {
    /// Fails on `(0, 0)`, which the generator can never leave.
    pub fn new(s0: u16, s1: u16) -> Result<Self, RngError> {
        if s0 == 0 && s1 == 0 {
            return Err(RngError::ZeroLaneSeed(0));
        }
        Ok(LaneRngState { s0, s1 })
    }

    pub fn halves(self) -> (u16, u16) {
        (self.s0, self.s1)
    }

    pub fn next16(&mut self) -> u16 {
        let (out, s0, s1) = step(self.s0, self.s1);
        self.s0 = s0;
        self.s1 = s1;
        out
    }
}

/// One generator step on raw halves: `(output, s0', s1')`.
#[inline]
pub fn step(s0: u16, s1: u16) -> (u16, u16, u16) {
    let out = s0.wrapping_add(s1).rotate_left(ROT_OUT).wrapping_add(s0);
    let s1 = s1 ^ s0;
    let s0 = s0.rotate_left(ROT_A) ^ s1 ^ (s1 << SHIFT_B);
    (out, s0, s1.rotate_left(ROT_C))
}

/// The two RNG state registers of the vector unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VectorRngState {
    s0: [u16; LANES],
    s1: [u16; LANES],
}

impl VectorRngState {
    /// Builds the state from the two register images, lane 0 first.
    pub fn from_image(s0: [u16; LANES], s1: [u16; LANES]) -> Result<Self, RngError> {
        if let Some(lane) = (0..LANES).find(|&i| s0[i] == 0 && s1[i] == 0) {
            return Err(RngError::ZeroLaneSeed(lane));
        }
        Ok(VectorRngState { s0, s1 })
    }

    /// Replaces the state with a new image.
    pub fn seed(&mut self, s0: [u16; LANES], s1: [u16; LANES]) -> Result<(), RngError> {
        *self = Self::from_image(s0, s1)?;
        Ok(())
    }

    /// Deterministic per-lane seeding from one 64-bit seed.
    pub fn from_seed(seed: u64) -> Self {
        let (s0, s1) = seed_image(seed);
        VectorRngState { s0, s1 }
    }

    pub fn image(&self) -> ([u16; LANES], [u16; LANES]) {
        (self.s0, self.s1)
    }

    pub fn lane(&self, i: usize) -> LaneRngState {
        LaneRngState { s0: self.s0[i], s1: self.s1[i] }
    }

    pub fn set_lane(&mut self, i: usize, lane: LaneRngState) {
        self.s0[i] = lane.s0;
        self.s1[i] = lane.s1;
    }

    pub fn next_vector(&mut self) -> [u16; LANES] {
        std::array::from_fn(|i| {
            let (o, s0, s1) = step(self.s0[i], self.s1[i]);
            self.s0[i] = s0;
            self.s1[i] = s1;
            o
        })
    }
}

impl Default for VectorRngState {
    fn default() -> Self {
        Self::from_seed(0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed image for the two state registers derived from `seed`.
///
/// Lane `i` draws `s0` and `s1` from separate SplitMix64 streams keyed by
/// `(seed, i)`; a lane that comes out all-zero is re-mixed until it is not.
pub fn seed_image(seed: u64) -> ([u16; LANES], [u16; LANES]) {
    let mut s0 = [0u16; LANES];
    let mut s1 = [0u16; LANES];
    for lane in 0..LANES {
        let mut key = seed ^ splitmix64(lane as u64);
        loop {
            let a = splitmix64(key ^ 0x5330_0000_0000_0000) as u16;
            let b = splitmix64(key ^ 0x5331_0000_0000_0000) as u16;
            if a != 0 || b != 0 {
                s0[lane] = a;
                s1[lane] = b;
                break;
            }
            key = splitmix64(key);
        }
    }
    (s0, s1)
}
