//! 16-bit two's-complement fixed-point arithmetic.
//!
//! A value is a raw `i16` paired with a [`QFormat`] giving its number of
//! fractional bits `N`; the real value is `raw * 2^-N`. Formats are written
//! `S(15-N).N`, so `S0.15` covers `[-1, 1)` and `S3.12` covers `[-8, 8)`.
//!
//! The multiply primitive mirrors a DSP multiply-accumulate followed by a
//! barrel shift: `((a * b) + R) >> shift`, with `R` chosen by the
//! [`RoundingMode`]:
//!
//! | mode             | `R`                                   |
//! |------------------|---------------------------------------|
//! | `RoundToZero`    | `0`                                   |
//! | `RoundToNearest` | `2^(shift-1)` (`0` when `shift == 0`) |
//! | `Stochastic`     | low `shift` bits of an entropy word   |
//!
//! The shift is arithmetic, so "round-to-zero" is really floor for negative
//! products. The name is kept because it is what the hardware calls the
//! plain truncating shift. Results that do not fit in 16 bits after the
//! shift wrap; only addition and subtraction have saturating variants.
//!
//! Every operation here comes in two flavours: a `*_raw` function on bare
//! `i16` values (what the vector lanes use) and a checked method on
//! [`Fix16`] that rejects mismatched formats.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixedError {
    #[error("fractional bit count {0} outside 0..=15")]
    InvalidFormat(u8),
    #[error("operand formats differ: {0} vs {1}")]
    FormatMismatch(QFormat, QFormat),
    #[error("shift {0} outside 0..=15")]
    InvalidShift(u8),
    #[error("{value} is outside the range of {format}")]
    OutOfRange { value: f64, format: QFormat },
}

/// Number of fractional bits of a signed 16-bit fixed-point layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QFormat(u8);

impl QFormat {
    pub const S0_15: QFormat = QFormat(15);
    pub const S1_14: QFormat = QFormat(14);
    pub const S3_12: QFormat = QFormat(12);

    pub fn new(frac_bits: u8) -> Result<Self, FixedError> {
        if frac_bits > 15 {
            return Err(FixedError::InvalidFormat(frac_bits));
        }
        Ok(QFormat(frac_bits))
    }

    pub fn frac_bits(self) -> u8 {
        self.0
    }

    pub fn int_bits(self) -> u8 {
        15 - self.0
    }

    /// Size of one unit in the last place.
    pub fn ulp(self) -> f64 {
        (-(self.0 as f64)).exp2()
    }

    pub fn min_value(self) -> f64 {
        i16::MIN as f64 * self.ulp()
    }

    pub fn max_value(self) -> f64 {
        i16::MAX as f64 * self.ulp()
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}.{}", self.int_bits(), self.frac_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoundingMode {
    RoundToZero,
    RoundToNearest,
    /// Requires an entropy word per operation.
    Stochastic,
}

impl RoundingMode {
    pub const ALL: [RoundingMode; 3] =
        [RoundingMode::RoundToZero, RoundingMode::RoundToNearest, RoundingMode::Stochastic];

    /// Short lowercase name used in disassembly and CSV output.
    pub fn mnemonic(self) -> &'static str {
        match self {
            RoundingMode::RoundToZero => "rz",
            RoundingMode::RoundToNearest => "rn",
            RoundingMode::Stochastic => "sr",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.mnemonic() == s)
    }

    /// The value added to the full product before shifting.
    pub fn addend(self, shift: u8, entropy: u16) -> i32 {
        match self {
            RoundingMode::RoundToZero => 0,
            RoundingMode::RoundToNearest if shift == 0 => 0,
            RoundingMode::RoundToNearest => 1 << (shift - 1),
            RoundingMode::Stochastic => (entropy as u32 & low_mask(shift)) as i32,
        }
    }
}

impl fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

fn low_mask(shift: u8) -> u32 {
    (1u32 << shift) - 1
}

pub fn sat_add_raw(a: i16, b: i16) -> i16 {
    a.saturating_add(b)
}

pub fn sat_sub_raw(a: i16, b: i16) -> i16 {
    a.saturating_sub(b)
}

pub fn wrap_add_raw(a: i16, b: i16) -> i16 {
    a.wrapping_add(b)
}

pub fn wrap_sub_raw(a: i16, b: i16) -> i16 {
    a.wrapping_sub(b)
}

/// Fused multiply-round-shift on raw values.
///
/// `shift` must be at most 15; `entropy` is only read for
/// [`RoundingMode::Stochastic`].
pub fn fx_mul_raw(a: i16, b: i16, shift: u8, mode: RoundingMode, entropy: u16) -> i16 {
    debug_assert!(shift <= 15);
    // |a*b| <= 2^30 and R < 2^15, so the sum fits in i32.
    let product = a as i32 * b as i32;
    ((product + mode.addend(shift, entropy)) >> shift) as i16
}

/// A raw 16-bit value tagged with its fixed-point format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fix16 {
    pub raw: i16,
    pub format: QFormat,
}

impl Fix16 {
    pub fn from_raw(raw: i16, format: QFormat) -> Self {
        Fix16 { raw, format }
    }

    pub fn zero(format: QFormat) -> Self {
        Fix16 { raw: 0, format }
    }

    /// Exact real value.
    pub fn to_real(self) -> f64 {
        self.raw as f64 * self.format.ulp()
    }

    fn same_format(self, other: Fix16) -> Result<QFormat, FixedError> {
        if self.format != other.format {
            return Err(FixedError::FormatMismatch(self.format, other.format));
        }
        Ok(self.format)
    }

    pub fn sat_add(self, other: Fix16) -> Result<Fix16, FixedError> {
        let format = self.same_format(other)?;
        Ok(Fix16::from_raw(sat_add_raw(self.raw, other.raw), format))
    }

    pub fn sat_sub(self, other: Fix16) -> Result<Fix16, FixedError> {
        let format = self.same_format(other)?;
        Ok(Fix16::from_raw(sat_sub_raw(self.raw, other.raw), format))
    }

    pub fn wrap_add(self, other: Fix16) -> Result<Fix16, FixedError> {
        let format = self.same_format(other)?;
        Ok(Fix16::from_raw(wrap_add_raw(self.raw, other.raw), format))
    }

    pub fn wrap_sub(self, other: Fix16) -> Result<Fix16, FixedError> {
        let format = self.same_format(other)?;
        Ok(Fix16::from_raw(wrap_sub_raw(self.raw, other.raw), format))
    }

    /// Multiplies by `other` and shifts right by `shift`.
    ///
    /// The result carries `self`'s format when `shift` equals `other`'s
    /// fractional bits; for mixed-format arithmetic the caller picks the
    /// shift and the result format explicitly via [`Fix16::mul_into`].
    pub fn mul(self, other: Fix16, shift: u8, mode: RoundingMode, entropy: u16) -> Result<Fix16, FixedError> {
        let format = QFormat::new(
            (self.format.frac_bits() + other.format.frac_bits())
                .checked_sub(shift)
                .ok_or(FixedError::InvalidShift(shift))?,
        )
        .map_err(|_| FixedError::InvalidShift(shift))?;
        self.mul_into(other, shift, mode, entropy, format)
    }

    /// Multiplies and reinterprets the shifted result in `result_format`.
    pub fn mul_into(
        self,
        other: Fix16,
        shift: u8,
        mode: RoundingMode,
        entropy: u16,
        result_format: QFormat,
    ) -> Result<Fix16, FixedError> {
        if shift > 15 {
            return Err(FixedError::InvalidShift(shift));
        }
        let raw = fx_mul_raw(self.raw, other.raw, shift, mode, entropy);
        Ok(Fix16::from_raw(raw, result_format))
    }
}

impl fmt::Display for Fix16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.to_real(), self.format)
    }
}

/// Converts a real number to fixed point.
///
/// `RoundToZero` floors (matching the arithmetic-shift behaviour of the
/// multiplier), `RoundToNearest` rounds half away from zero, and
/// `Stochastic` rounds up with probability equal to the discarded fraction
/// as judged against `entropy / 2^16`.
pub fn quantize(x: f64, format: QFormat, mode: RoundingMode, entropy: u16) -> Result<Fix16, FixedError> {
    if !x.is_finite() || x < format.min_value() || x > format.max_value() {
        return Err(FixedError::OutOfRange { value: x, format });
    }
    let scaled = x * (format.frac_bits() as f64).exp2();
    let raw = match mode {
        RoundingMode::RoundToZero => scaled.floor(),
        RoundingMode::RoundToNearest => scaled.round(),
        RoundingMode::Stochastic => {
            let floor = scaled.floor();
            let threshold = entropy as f64 / 65536.0;
            if scaled - floor > threshold {
                floor + 1.0
            } else {
                floor
            }
        }
    };
    // x <= max_value keeps every mode inside i16, but clamp for the
    // half-ulp just below the rails.
    let raw = raw.clamp(i16::MIN as f64, i16::MAX as f64) as i16;
    Ok(Fix16::from_raw(raw, format))
}

/// Round-to-nearest conversion, saturating at the format limits.
pub fn quantize_saturating(x: f64, format: QFormat) -> Fix16 {
    let scaled = (x * (format.frac_bits() as f64).exp2()).round();
    Fix16::from_raw(scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s015(raw: i16) -> Fix16 {
        Fix16::from_raw(raw, QFormat::S0_15)
    }

    #[test]
    fn qformat_bounds() {
        assert!(QFormat::new(16).is_err());
        let f = QFormat::new(12).unwrap();
        assert_eq!(f.to_string(), "S3.12");
        assert_eq!(f.min_value(), -8.0);
        assert_eq!(f.max_value(), 8.0 - f.ulp());
        assert_eq!(QFormat::new(0).unwrap().ulp(), 1.0);
    }

    #[test]
    fn saturating_rails() {
        assert_eq!(sat_add_raw(0x7FFF, 1), 0x7FFF);
        assert_eq!(sat_add_raw(i16::MIN, -1), i16::MIN);
        assert_eq!(sat_add_raw(100, 200), 300);
        assert_eq!(sat_sub_raw(i16::MIN, 1), i16::MIN);
        assert_eq!(sat_sub_raw(0, 0), 0);
        assert_eq!(sat_sub_raw(0x7FFF, -1), 0x7FFF);
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_add_raw(0x7FFF, 1), i16::MIN);
        assert_eq!(wrap_sub_raw(i16::MIN, 1), 0x7FFF);
        assert_eq!(wrap_add_raw(5, 7), 12);
    }

    #[test]
    fn mismatched_formats_are_rejected() {
        let a = Fix16::from_raw(1, QFormat::S0_15);
        let b = Fix16::from_raw(1, QFormat::S3_12);
        assert!(matches!(a.sat_add(b), Err(FixedError::FormatMismatch(..))));
        assert!(matches!(a.wrap_sub(b), Err(FixedError::FormatMismatch(..))));
    }

    #[test]
    fn multiply_examples() {
        let half = s015(16384);
        let r = half.mul(half, 15, RoundingMode::RoundToZero, 0).unwrap();
        assert_eq!(r, s015(8192));
        assert_eq!(fx_mul_raw(1, 1, 15, RoundingMode::RoundToZero, 0), 0);
        assert_eq!(fx_mul_raw(1, 1, 15, RoundingMode::RoundToNearest, 0), 0);
        assert_eq!(fx_mul_raw(3, 0x4000, 15, RoundingMode::RoundToNearest, 0), 2);
        // Arithmetic shift floors negative products.
        assert_eq!(fx_mul_raw(-1, 1, 15, RoundingMode::RoundToZero, 0), -1);
        // Post-shift overflow wraps.
        assert_eq!(fx_mul_raw(i16::MIN, i16::MIN, 15, RoundingMode::RoundToZero, 0), i16::MIN);
    }

    #[test]
    fn shift_zero_nearest_adds_nothing() {
        assert_eq!(RoundingMode::RoundToNearest.addend(0, 0xFFFF), 0);
        assert_eq!(fx_mul_raw(3, 5, 0, RoundingMode::RoundToNearest, 0), 15);
        assert_eq!(fx_mul_raw(3, 5, 0, RoundingMode::Stochastic, 0xFFFF), 15);
    }

    #[test]
    fn stochastic_tiny_product_sweep() {
        // 1 * 1 >> 15: exactly one of the 2^15 residues rounds up.
        let ones = (0..1u32 << 15).filter(|&e| fx_mul_raw(1, 1, 15, RoundingMode::Stochastic, e as u16) == 1).count();
        assert_eq!(ones, 1);
    }

    #[test]
    fn quantize_examples() {
        let f = QFormat::S3_12;
        // 0.6 * 4096 = 2457.6
        assert_eq!(quantize(0.6, f, RoundingMode::RoundToNearest, 0).unwrap().raw, 2458);
        assert_eq!(quantize(0.6, f, RoundingMode::RoundToZero, 0).unwrap().raw, 2457);
        assert_eq!(quantize(0.0, QFormat::S0_15, RoundingMode::RoundToNearest, 0).unwrap().raw, 0);
        // e^-5 * 32768 = 220.79...
        let v = quantize((-5.0f64).exp(), QFormat::S0_15, RoundingMode::RoundToNearest, 0).unwrap();
        assert_eq!(v.raw, 221);
        assert!(matches!(
            quantize(1.0, QFormat::S0_15, RoundingMode::RoundToNearest, 0),
            Err(FixedError::OutOfRange { .. })
        ));
        assert!(quantize(-1.0, QFormat::S0_15, RoundingMode::RoundToNearest, 0).is_ok());
        assert!(quantize(f64::NAN, f, RoundingMode::RoundToNearest, 0).is_err());
    }

    #[test]
    fn quantize_stochastic_threshold() {
        // 0.25 ulp above an integer: rounds up only for entropy below a quarter.
        let x = 10.25 * QFormat::S3_12.ulp();
        let up = quantize(x, QFormat::S3_12, RoundingMode::Stochastic, 0x3FFF).unwrap();
        let down = quantize(x, QFormat::S3_12, RoundingMode::Stochastic, 0x4000).unwrap();
        assert_eq!((up.raw, down.raw), (11, 10));
    }

    proptest! {
        #[test]
        fn sat_add_matches_wrap_when_representable(a: i16, b: i16) {
            let exact = a as i32 + b as i32;
            let s = sat_add_raw(a, b);
            prop_assert_eq!(s as i32, exact.clamp(-32768, 32767));
            if (-32768..=32767).contains(&exact) {
                prop_assert_eq!(s, wrap_add_raw(a, b));
            }
            prop_assert_eq!(s, sat_add_raw(b, a));
        }

        #[test]
        fn multiply_is_symmetric(a: i16, b: i16, shift in 0u8..=15, e: u16, m in 0usize..3) {
            let mode = RoundingMode::ALL[m];
            prop_assert_eq!(fx_mul_raw(a, b, shift, mode, e), fx_mul_raw(b, a, shift, mode, e));
        }

        #[test]
        fn rounding_error_bracket(a: i16, b: i16, shift in 1u8..=15, e: u16) {
            let exact = (a as f64 * b as f64) / (shift as f64).exp2();
            // Skip products that wrap after the shift.
            prop_assume!(exact.abs() < 32767.0);
            let rz = fx_mul_raw(a, b, shift, RoundingMode::RoundToZero, 0) as f64 - exact;
            let rn = fx_mul_raw(a, b, shift, RoundingMode::RoundToNearest, 0) as f64 - exact;
            let sr = fx_mul_raw(a, b, shift, RoundingMode::Stochastic, e) as f64 - exact;
            prop_assert!(rz <= 0.0 && rz > -1.0);
            prop_assert!((-0.5..=0.5).contains(&rn));
            prop_assert!(sr > -1.0 && sr < 1.0);
        }

        #[test]
        fn quantize_round_trip(x in -7.99f64..7.99, m in 0usize..3, e: u16) {
            let mode = RoundingMode::ALL[m];
            let q = quantize(x, QFormat::S3_12, mode, e).unwrap();
            let err = (q.to_real() - x).abs();
            let bound = if mode == RoundingMode::RoundToNearest { 0.5 } else { 1.0 };
            prop_assert!(err <= bound * QFormat::S3_12.ulp());
        }
    }
}
