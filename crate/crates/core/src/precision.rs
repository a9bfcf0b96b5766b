//! Software emulation of IEEE 754 binary16, binary32 and binary64 rounding.
//!
//! Every value in this crate lives in binary64 storage. A value "in precision
//! `fmt`" is a binary64 number that lies on the `fmt` grid, and an operation
//! "in precision `fmt`" is the exact binary64 operation followed by
//! [`round_to`]. Rounding is always round-to-nearest, ties-to-even, with
//! gradual underflow and overflow to infinity.
//!
//! Double rounding: binary64 carries 53 significand bits. For a target format
//! with `p` bits, the result of `+ - * /` computed in binary64 and then rounded
//! to `p` bits equals the correctly rounded `p`-bit result whenever
//! `53 >= 2p + 2` (Figueroa, "When is double rounding innocuous?"). That holds
//! for binary32 (`p = 24`) and binary16 (`p = 11`), so [`rounded_binop`] is
//! correctly rounded arithmetic in those formats. The same argument with
//! binary32 as the wide format (`24 >= 2 * 11 + 2`) backs the [`Half`] fast
//! path used by the vector kernels.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::GadiError;

/// An emulated IEEE binary floating-point format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FloatFormat {
    Half,
    Single,
    Double,
}

impl FloatFormat {
    pub const ALL: [FloatFormat; 3] = [FloatFormat::Half, FloatFormat::Single, FloatFormat::Double];

    pub fn name(self) -> &'static str {
        match self {
            FloatFormat::Half => "half",
            FloatFormat::Single => "single",
            FloatFormat::Double => "double",
        }
    }

    /// Significand bits, including the implicit leading bit.
    pub fn precision_bits(self) -> u32 {
        match self {
            FloatFormat::Half => 11,
            FloatFormat::Single => 24,
            FloatFormat::Double => 53,
        }
    }

    /// Explicitly stored fraction bits.
    pub fn mantissa_bits(self) -> u32 {
        self.precision_bits() - 1
    }

    pub fn exponent_bits(self) -> u32 {
        match self {
            FloatFormat::Half => 5,
            FloatFormat::Single => 8,
            FloatFormat::Double => 11,
        }
    }

    pub fn emax(self) -> i32 {
        (1 << (self.exponent_bits() - 1)) - 1
    }

    pub fn emin(self) -> i32 {
        1 - self.emax()
    }

    /// `u = 2^-p`.
    pub fn unit_roundoff(self) -> f64 {
        pow2(-(self.precision_bits() as i32))
    }

    pub fn max_normal(self) -> f64 {
        (2.0 - pow2(1 - self.precision_bits() as i32)) * pow2(self.emax())
    }

    pub fn min_normal(self) -> f64 {
        pow2(self.emin())
    }

    pub fn min_subnormal(self) -> f64 {
        pow2(self.emin() + 1 - self.precision_bits() as i32)
    }
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FloatFormat {
    type Err = GadiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "half" | "fp16" | "binary16" => Ok(FloatFormat::Half),
            "single" | "fp32" | "binary32" => Ok(FloatFormat::Single),
            "double" | "fp64" | "binary64" => Ok(FloatFormat::Double),
            other => Err(GadiError::Parse(format!("unknown precision `{other}`"))),
        }
    }
}

/// `2^e` for `e` in the binary64 normal exponent range, built from bits.
#[inline]
fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Round `x` to `p` significand bits with exponent range `[emin, emax]`.
#[inline]
fn round_generic(x: f64, p: u32, emin: i32, emax: i32) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        // binary64 subnormals sit far below half of the smallest
        // binary16/binary32 subnormal.
        return if negative { -0.0 } else { 0.0 };
    }
    let e = biased - 1023;
    let significand = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
    let quantum_exp = e.max(emin) - (p as i32 - 1);
    let shift = (quantum_exp - (e - 52)) as u32;
    let q = if shift >= 64 {
        0
    } else {
        let mut q = significand >> shift;
        let rem = significand & ((1u64 << shift) - 1);
        let halfway = 1u64 << (shift - 1);
        if rem > halfway || (rem == halfway && q & 1 == 1) {
            q += 1;
        }
        q
    };
    let max_normal = (2.0 - pow2(1 - p as i32)) * pow2(emax);
    let magnitude = q as f64 * pow2(quantum_exp);
    let magnitude = if magnitude > max_normal { f64::INFINITY } else { magnitude };
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

/// Nearest `fmt` value to `x` (ties to even), expressed in binary64.
#[inline]
pub fn round_to(x: f64, fmt: FloatFormat) -> f64 {
    match fmt {
        FloatFormat::Double => x,
        // the conversion is IEEE round-to-nearest-even, subnormals and
        // overflow included
        FloatFormat::Single => x as f32 as f64,
        FloatFormat::Half => round_generic(x, 11, -14, 15),
    }
}

/// [`round_to`] that also records overflow and underflow events.
pub fn round_to_tracked(x: f64, fmt: FloatFormat, stats: &mut RoundingStats) -> f64 {
    let r = round_to(x, fmt);
    stats.observe(x, r, fmt);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// `op(a, b)` evaluated in binary64 and rounded to `fmt`.
///
/// Callers are expected to pass operands that are already representable in
/// `fmt`; the result is then the correctly rounded `fmt` result.
#[inline]
pub fn rounded_binop(op: BinOp, a: f64, b: f64, fmt: FloatFormat) -> f64 {
    let exact = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
    };
    round_to(exact, fmt)
}

/// Counters for range events observed while rounding.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundingStats {
    pub overflow_count: u64,
    pub underflow_to_zero_count: u64,
    pub subnormal_count: u64,
    pub op_count_by_format: BTreeMap<FloatFormat, u64>,
}

impl RoundingStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Classify one rounding of `exact` to `rounded` in `fmt`.
    #[inline]
    pub fn observe(&mut self, exact: f64, rounded: f64, fmt: FloatFormat) {
        if rounded.is_infinite() && exact.is_finite() {
            self.overflow_count += 1;
        } else if rounded == 0.0 && exact != 0.0 {
            self.underflow_to_zero_count += 1;
        } else if rounded != 0.0 && rounded.abs() < fmt.min_normal() {
            self.subnormal_count += 1;
        }
    }

    /// Scan kernel outputs that are already on the `fmt` grid.
    pub fn observe_output(&mut self, values: &[f64], fmt: FloatFormat) {
        let min_normal = fmt.min_normal();
        for &v in values {
            if v.is_infinite() {
                self.overflow_count += 1;
            } else if v != 0.0 && v.abs() < min_normal {
                self.subnormal_count += 1;
            }
        }
    }

    pub fn add_ops(&mut self, fmt: FloatFormat, count: u64) {
        *self.op_count_by_format.entry(fmt).or_insert(0) += count;
    }

    pub fn merge(&mut self, other: &RoundingStats) {
        self.overflow_count += other.overflow_count;
        self.underflow_to_zero_count += other.underflow_to_zero_count;
        self.subnormal_count += other.subnormal_count;
        for (fmt, n) in &other.op_count_by_format {
            self.add_ops(*fmt, *n);
        }
    }
}

/// Scalar type whose arithmetic is exact-then-rounded in a fixed format.
///
/// The vector kernels and factorizations are generic over this trait and are
/// dispatched from a runtime [`FloatFormat`]. `f64` and `f32` use native
/// arithmetic, which coincides with [`rounded_binop`] in those formats.
pub trait Real:
    Copy
    + Default
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const FORMAT: FloatFormat;
    const ZERO: Self;
    const ONE: Self;

    /// Round a binary64 value into this format.
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;

    fn abs(self) -> Self;

    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }
}

impl Real for f64 {
    const FORMAT: FloatFormat = FloatFormat::Double;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline(always)]
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

impl Real for f32 {
    const FORMAT: FloatFormat = FloatFormat::Single;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn abs(self) -> Self {
        f32::abs(self)
    }
}

/// A binary16 value carried in a binary32 register.
///
/// Arithmetic runs in binary32 and is rounded back onto the binary16 grid
/// after every operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd)]
#[repr(transparent)]
pub struct Half(f32);

impl Half {
    /// Wrap a binary32 value, rounding it to binary16.
    #[inline(always)]
    pub fn from_f32(x: f32) -> Self {
        Half(round_f32_to_half(x))
    }

    #[inline(always)]
    pub fn to_f32(self) -> f32 {
        self.0
    }
}

/// Round a binary32 value to the nearest binary16 value, kept in binary32.
///
/// Branch-free so that loops over it vectorize.
#[inline(always)]
pub fn round_f32_to_half(x: f32) -> f32 {
    let bits = x.to_bits();
    let sign = bits & 0x8000_0000;
    let abs = bits & 0x7fff_ffff;
    // Normal binary16 range: drop 13 fraction bits, ties to even.
    let normal = (abs + 0x0fff + ((abs >> 13) & 1)) & 0xffff_e000;
    // Below 2^-14 the binary16 quantum is 2^-24, which is the binary32 ulp
    // on [0.5, 1).
    let a = f32::from_bits(abs);
    let sub = ((a + 0.5f32) - 0.5f32).to_bits();
    let r = if abs < 0x3880_0000 { sub } else { normal };
    let r = if abs >= 0x7f80_0000 {
        abs
    } else if r > 0x477f_e000 {
        0x7f80_0000
    } else {
        r
    };
    f32::from_bits(r | sign)
}

impl Add for Half {
    type Output = Half;
    #[inline(always)]
    fn add(self, rhs: Half) -> Half {
        Half::from_f32(self.0 + rhs.0)
    }
}

impl Sub for Half {
    type Output = Half;
    #[inline(always)]
    fn sub(self, rhs: Half) -> Half {
        Half::from_f32(self.0 - rhs.0)
    }
}

impl Mul for Half {
    type Output = Half;
    #[inline(always)]
    fn mul(self, rhs: Half) -> Half {
        Half::from_f32(self.0 * rhs.0)
    }
}

impl Div for Half {
    type Output = Half;
    #[inline(always)]
    fn div(self, rhs: Half) -> Half {
        Half::from_f32(self.0 / rhs.0)
    }
}

impl Neg for Half {
    type Output = Half;
    #[inline(always)]
    fn neg(self) -> Half {
        Half(-self.0)
    }
}

impl Real for Half {
    const FORMAT: FloatFormat = FloatFormat::Half;
    const ZERO: Self = Half(0.0);
    const ONE: Self = Half(1.0);

    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        // Going through binary32 first would double round; round directly.
        Half(round_to(x, FloatFormat::Half) as f32)
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self.0 as f64
    }
    #[inline(always)]
    fn abs(self) -> Self {
        Half(self.0.abs())
    }
}

/// Round every entry of `values` in place.
pub fn round_slice(values: &mut [f64], fmt: FloatFormat) {
    if fmt == FloatFormat::Double {
        return;
    }
    for v in values {
        *v = round_to(*v, fmt);
    }
}
