//! Software bfloat16: the top 16 bits of an IEEE 754 single.
//!
//! ```text
//! f32:  SEEEEEEE EMMMMMMM MMMMMMMM MMMMMMMM
//! bf16: SEEEEEEE EMMMMMMM
//! ```
//!
//! Narrowing uses round-to-nearest-even on the 32-bit pattern; widening is
//! exact. Subnormals are kept (no flush-to-zero). All arithmetic upcasts to
//! f32, computes, and rounds back — one rounding per operation.

use std::fmt;
use std::ops::{Add, Mul};

/// A bfloat16 value stored as its raw 16-bit pattern.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Default)]
#[repr(transparent)]
pub struct Bf16(u16);

impl Bf16 {
    pub const ZERO: Self = Self(0x0000);
    pub const ONE: Self = Self(0x3F80);
    /// 0.25, the 5-point stencil scale factor. Exact in bf16.
    pub const QUARTER: Self = Self(0x3E80);

    #[inline]
    pub const fn from_bits(bits: u16) -> Self {
        Self(bits)
    }

    #[inline]
    pub const fn to_bits(self) -> u16 {
        self.0
    }

    /// Round an f32 to the nearest bf16, ties to even mantissa.
    ///
    /// NaN payloads that survive truncation are preserved; a NaN whose
    /// significand lives entirely in the discarded bits is quieted instead of
    /// collapsing to infinity.
    #[inline]
    pub fn from_f32(x: f32) -> Self {
        let bits = x.to_bits();
        if x.is_nan() {
            let hi = (bits >> 16) as u16;
            return if hi & 0x007F != 0 {
                Self(hi)
            } else {
                Self(hi | 0x0040)
            };
        }
        // Adding 0x7FFF plus the lowest kept bit implements round-to-nearest
        // with ties going to the even (lsb zero) neighbor. Carries propagate
        // into the exponent, which also yields the correct overflow to Inf.
        let round = 0x7FFF + ((bits >> 16) & 1);
        Self(((bits.wrapping_add(round)) >> 16) as u16)
    }

    /// Widen to f32. Exact: the mantissa is zero-extended.
    #[inline]
    pub const fn to_f32(self) -> f32 {
        f32::from_bits((self.0 as u32) << 16)
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.to_f32() as f64
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.0 & 0x7F80 != 0x7F80
    }

    #[inline]
    pub fn is_nan(self) -> bool {
        self.0 & 0x7F80 == 0x7F80 && self.0 & 0x007F != 0
    }

    /// Spacing between consecutive bf16 values at this magnitude.
    ///
    /// Used as the accuracy unit when comparing the two pipelines, whose
    /// accumulation schedules legitimately differ by one rounding.
    pub fn ulp(self) -> f64 {
        let mag = self.to_f32().abs();
        if !mag.is_finite() {
            return f64::INFINITY;
        }
        let bits = Bf16::from_f32(mag).to_bits() & 0x7FFF;
        let next = Bf16::from_bits(bits + 1).to_f64();
        next - Bf16::from_bits(bits).to_f64()
    }
}

impl Add for Bf16 {
    type Output = Bf16;

    /// Single-precision intermediate, one rounding.
    #[inline]
    fn add(self, rhs: Bf16) -> Bf16 {
        Bf16::from_f32(self.to_f32() + rhs.to_f32())
    }
}

impl Mul for Bf16 {
    type Output = Bf16;

    #[inline]
    fn mul(self, rhs: Bf16) -> Bf16 {
        Bf16::from_f32(self.to_f32() * rhs.to_f32())
    }
}

impl fmt::Debug for Bf16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bf16({} = {:#06x})", self.to_f32(), self.0)
    }
}

impl fmt::Display for Bf16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f32())
    }
}
