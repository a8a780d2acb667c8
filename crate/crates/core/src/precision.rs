//! Precision lattice and interprecision transfers.
//!
//! Three IEEE binary formats are supported: binary64 (`f64`), binary32
//! (`f32`) and binary16 ([`half::f16`]). Binary16 arithmetic is done by
//! widening to binary32, operating and rounding back; for `+ - * /` the
//! double rounding through binary32 is innocuous, so the results are the
//! correctly rounded binary16 values.

use std::fmt::{self, Debug, Display};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{MpError, Result};
use crate::matrix::Matrix;

/// A floating point format in the precision lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Precision {
    B64,
    B32,
    B16,
}

impl Precision {
    pub const ALL: [Precision; 3] = [Precision::B64, Precision::B32, Precision::B16];

    /// Unit roundoff `u = 2^-t` for a `t`-bit significand.
    pub const fn unit_roundoff(self) -> f64 {
        match self {
            Precision::B64 => 1.1102230246251565e-16, // 2^-53
            Precision::B32 => 5.960464477539063e-8,   // 2^-24
            Precision::B16 => 4.8828125e-4,           // 2^-11
        }
    }

    /// Machine epsilon, twice the unit roundoff.
    pub const fn epsilon(self) -> f64 {
        2.0 * self.unit_roundoff()
    }

    pub const fn max_finite(self) -> f64 {
        match self {
            Precision::B64 => f64::MAX,
            Precision::B32 => f32::MAX as f64,
            Precision::B16 => 65504.0,
        }
    }

    /// Smallest positive normal number.
    pub const fn min_positive(self) -> f64 {
        match self {
            Precision::B64 => f64::MIN_POSITIVE,
            Precision::B32 => f32::MIN_POSITIVE as f64,
            Precision::B16 => 6.103515625e-5, // 2^-14
        }
    }

    pub const fn bytes(self) -> usize {
        match self {
            Precision::B64 => 8,
            Precision::B32 => 4,
            Precision::B16 => 2,
        }
    }

    /// `true` if `self` carries at least as many significand bits as `other`.
    pub fn at_least(self, other: Precision) -> bool {
        self.unit_roundoff() <= other.unit_roundoff()
    }

    pub fn name(self) -> &'static str {
        match self {
            Precision::B64 => "f64",
            Precision::B32 => "f32",
            Precision::B16 => "f16",
        }
    }
}

impl Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Precision {
    type Err = MpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f64" | "b64" | "double" | "float64" => Ok(Precision::B64),
            "f32" | "b32" | "single" | "float32" => Ok(Precision::B32),
            "f16" | "b16" | "half" | "float16" => Ok(Precision::B16),
            other => Err(MpError::InvalidConfig(format!("unknown precision `{other}`"))),
        }
    }
}

/// Working, factorization and residual precisions, plus the derived solver
/// precision used by the triangular solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    pub tw: Precision,
    pub tf: Precision,
    pub tr: Precision,
    pub ts: Precision,
}

impl PrecisionConfig {
    pub fn new(tw: Precision, tf: Precision, tr: Precision, on_the_fly: bool) -> Result<Self> {
        if tw == Precision::B16 {
            return Err(MpError::InvalidConfig(
                "working precision must be f64 or f32".into(),
            ));
        }
        if !tw.at_least(tf) {
            return Err(MpError::InvalidConfig(format!(
                "factorization precision {tf} is higher than working precision {tw}"
            )));
        }
        if !tr.at_least(tw) {
            return Err(MpError::InvalidConfig(format!(
                "residual precision {tr} is lower than working precision {tw}"
            )));
        }
        if tf == tw && !on_the_fly {
            return Err(MpError::InvalidConfig(
                "in-place solves need TF lower than TW".into(),
            ));
        }
        let ts = if on_the_fly { tr } else { tf };
        Ok(PrecisionConfig { tw, tf, tr, ts })
    }

    /// Residuals are evaluated in a wider format than the data.
    pub fn extended_residual(&self) -> bool {
        self.tr != self.tw
    }
}

mod sealed {
    pub trait Sealed {}
    impl Sealed for f64 {}
    impl Sealed for f32 {}
    impl Sealed for half::f16 {}
}

/// Scalar types of the precision lattice.
pub trait Real:
    sealed::Sealed
    + Copy
    + Send
    + Sync
    + Default
    + PartialEq
    + PartialOrd
    + Debug
    + Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    const PRECISION: Precision;
    const ZERO: Self;
    const ONE: Self;

    fn to_f64(self) -> f64;
    /// Round to nearest, ties to even. Out-of-range values become infinite.
    fn from_f64(x: f64) -> Self;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn is_finite(self) -> bool;

    /// Convert between formats. Exact when `T` is at least as wide as `Self`.
    #[inline(always)]
    fn cast<T: Real>(self) -> T {
        T::from_f64(self.to_f64())
    }

    #[doc(hidden)]
    fn factor_in_place(
        a: &mut [Self],
        n: usize,
        pivots: &mut [usize],
        block: usize,
    ) -> Result<()>;
}

impl Real for f64 {
    const PRECISION: Precision = Precision::B64;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline(always)]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline(always)]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn factor_in_place(a: &mut [Self], n: usize, piv: &mut [usize], block: usize) -> Result<()> {
        crate::lu::kernel::factor_gemm(a, n, piv, block)
    }
}

impl Real for f32 {
    const PRECISION: Precision = Precision::B32;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline(always)]
    fn abs(self) -> Self {
        f32::abs(self)
    }
    #[inline(always)]
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    fn factor_in_place(a: &mut [Self], n: usize, piv: &mut [usize], block: usize) -> Result<()> {
        crate::lu::kernel::factor_gemm(a, n, piv, block)
    }
}

impl Real for f16 {
    const PRECISION: Precision = Precision::B16;
    const ZERO: Self = f16::ZERO;
    const ONE: Self = f16::ONE;

    #[inline(always)]
    fn to_f64(self) -> f64 {
        f16::to_f64(self)
    }
    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        f16::from_f64(x)
    }
    #[inline(always)]
    fn abs(self) -> Self {
        f16::from_bits(self.to_bits() & 0x7fff)
    }
    #[inline(always)]
    fn sqrt(self) -> Self {
        f16::from_f32(self.to_f32().sqrt())
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        f16::is_finite(self)
    }
    fn factor_in_place(a: &mut [Self], n: usize, piv: &mut [usize], block: usize) -> Result<()> {
        crate::lu::kernel::factor_half(a, n, piv, block)
    }
}

/// Round an `f32` to the nearest binary16 value (ties to even) and return it
/// widened back to `f32`. Overflow gives a signed infinity, values below the
/// binary16 normal range are rounded to the subnormal grid `2^-24`.
///
/// Branch-free so that the emulated half-precision kernels vectorize.
#[inline(always)]
pub fn round_to_f16(x: f32) -> f32 {
    let bits = x.to_bits();
    let sign = bits & 0x8000_0000;
    let mag = bits & 0x7fff_ffff;
    // Normal range: drop 13 significand bits with round-half-even.
    let normal = (mag + 0x0fff + ((mag >> 13) & 1)) & !0x1fff;
    // Subnormal range: spacing 2^-24 is the f32 spacing on [0.5, 1).
    let a = f32::from_bits(mag);
    let sub = ((a + 0.5) - 0.5).to_bits();
    let r = if mag < 0x3880_0000 { sub } else { normal };
    let r = if r > 0x477f_e000 { 0x7f80_0000 } else { r };
    let r = if mag > 0x7f80_0000 { mag | 0x0040_0000 } else { r };
    f32::from_bits(r | sign)
}

/// Exact widening copy `I_p^q` with `q` at least as wide as `p`.
pub fn promote_vector<P: Real, Q: Real>(v: &[P]) -> Result<Vec<Q>> {
    if !Q::PRECISION.at_least(P::PRECISION) {
        return Err(MpError::InvalidConfig(format!(
            "promotion from {} to narrower {}",
            P::PRECISION,
            Q::PRECISION
        )));
    }
    Ok(v.iter().map(|&x| x.cast::<Q>()).collect())
}

/// Result of a narrowing copy.
#[derive(Debug, Clone)]
pub struct Demoted<T> {
    pub matrix: Matrix<T>,
    /// Number of nonzero entries that rounded to zero or into the subnormal range.
    pub underflows: usize,
}

impl<T> Demoted<T> {
    pub fn underflowed(&self) -> bool {
        self.underflows > 0
    }
}

/// Rounded copy of `a` in the narrower format `Q`.
///
/// Fails with [`MpError::OverflowDetected`] if any entry exceeds the largest
/// finite value of `Q`; such a copy is unusable for factorization.
pub fn demote_matrix<P: Real, Q: Real>(a: &Matrix<P>) -> Result<Demoted<Q>> {
    let mut out = Matrix::zeros(a.nrows(), a.ncols());
    let underflows = demote_into(a, &mut out)?;
    Ok(Demoted {
        matrix: out,
        underflows,
    })
}

/// In-place variant of [`demote_matrix`]; returns the underflow count.
pub fn demote_into<P: Real, Q: Real>(a: &Matrix<P>, out: &mut Matrix<Q>) -> Result<usize> {
    check_same_shape(a, out)?;
    let qmax = Q::PRECISION.max_finite();
    let qmin = Q::PRECISION.min_positive();
    let nrows = a.nrows();
    let mut underflows = 0;
    for (idx, (dst, &src)) in out.as_mut_slice().iter_mut().zip(a.as_slice()).enumerate() {
        let v = src.to_f64();
        let q = Q::from_f64(v);
        if !q.is_finite() && v.is_finite() || v.abs() > qmax {
            return Err(MpError::OverflowDetected {
                row: idx % nrows,
                col: idx / nrows,
                value: v,
            });
        }
        if v != 0.0 && q.to_f64().abs() < qmin {
            underflows += 1;
        }
        *dst = q;
    }
    Ok(underflows)
}

fn check_same_shape<P, Q>(a: &Matrix<P>, b: &Matrix<Q>) -> Result<()> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(MpError::DimensionMismatch {
            expected: a.nrows() * a.ncols(),
            found: b.nrows() * b.ncols(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundoff_ordering() {
        let u = |p: Precision| p.unit_roundoff();
        assert!(u(Precision::B64) < u(Precision::B32));
        assert!(u(Precision::B32) < u(Precision::B16));
        assert_eq!(u(Precision::B64), 2f64.powi(-53));
        assert_eq!(u(Precision::B32), 2f64.powi(-24));
        assert_eq!(u(Precision::B16), 2f64.powi(-11));
        assert_eq!(Precision::B16.max_finite(), 65504.0);
        assert_eq!(f16::MAX.to_f64(), 65504.0);
        assert_eq!(Precision::B32.epsilon(), f32::EPSILON as f64);
    }

    #[test]
    fn config_rules() {
        use Precision::*;
        assert!(PrecisionConfig::new(B64, B32, B64, false).is_ok());
        assert!(PrecisionConfig::new(B32, B64, B32, true).is_err());
        assert!(PrecisionConfig::new(B64, B32, B32, true).is_err());
        assert!(PrecisionConfig::new(B16, B16, B16, true).is_err());
        // TF == TW requires on-the-fly solves
        assert!(PrecisionConfig::new(B32, B32, B64, false).is_err());
        let c = PrecisionConfig::new(B32, B32, B64, true).unwrap();
        assert_eq!(c.ts, B64);
        let c = PrecisionConfig::new(B64, B32, B64, false).unwrap();
        assert_eq!(c.ts, B32);
    }

    #[test]
    fn promote_is_exact() {
        let v: Vec<f64> = promote_vector(&[1.0f32, 0.5]).unwrap();
        assert_eq!(v, vec![1.0, 0.5]);
        let t = 2f32.powi(-24);
        let v: Vec<f64> = promote_vector(&[t]).unwrap();
        assert_eq!(v[0], 2f64.powi(-24));
        assert!(promote_vector::<f64, f32>(&[1.0]).is_err());
    }

    #[test]
    fn half_bit_patterns_round_trip() {
        for bits in 0..=u16::MAX {
            let h = f16::from_bits(bits);
            let wide: f32 = h.cast();
            let back: f16 = wide.cast();
            if h.is_nan() {
                assert!(back.is_nan());
            } else {
                assert_eq!(back.to_bits(), bits, "pattern {bits:#06x}");
            }
        }
    }

    #[test]
    fn demote_identity_and_overflow() {
        let eye = Matrix::<f64>::identity(3);
        let d = demote_matrix::<f64, f16>(&eye).unwrap();
        assert!(!d.underflowed());
        assert_eq!(d.matrix, Matrix::<f16>::identity(3));

        let mut a = Matrix::<f64>::identity(2);
        a[(1, 0)] = 70000.0;
        match demote_matrix::<f64, f16>(&a) {
            Err(MpError::OverflowDetected { row: 1, col: 0, .. }) => {}
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn demote_flags_underflow() {
        let mut a = Matrix::<f64>::identity(2);
        a[(0, 1)] = 1e-9;
        let d = demote_matrix::<f64, f16>(&a).unwrap();
        assert_eq!(d.underflows, 1);
        assert_eq!(d.matrix[(0, 1)], f16::ZERO);
        // subnormal but nonzero is flagged too
        a[(0, 1)] = 1e-6;
        let d = demote_matrix::<f64, f16>(&a).unwrap();
        assert_eq!(d.underflows, 1);
        assert!(d.matrix[(0, 1)] != f16::ZERO);
    }

    #[test]
    fn round_to_f16_special_values() {
        let cases = [
            0.0f32,
            -0.0,
            1.0,
            65504.0,
            65519.99,
            65520.0,
            -65520.0,
            f32::INFINITY,
            f32::NEG_INFINITY,
            6.0e-8,
            2.9802322e-8, // 2^-25, tie to zero
            8.940697e-8,  // 1.5 * 2^-24, tie to even 2^-23
            6.1035156e-5,
            6.1e-5,
        ];
        for &x in &cases {
            let want = f16::from_f32(x).to_f32();
            let got = round_to_f16(x);
            assert_eq!(got.to_bits(), want.to_bits(), "x = {x:e}");
        }
        assert!(round_to_f16(f32::NAN).is_nan());
    }

    #[test]
    fn round_to_f16_matches_reference_on_sampled_patterns() {
        // stride coprime to 2^32 walks every exponent and low-bit pattern
        let mut bits: u32 = 0;
        for _ in 0..(1u32 << 22) {
            bits = bits.wrapping_add(1021);
            let x = f32::from_bits(bits);
            if x.is_nan() {
                continue;
            }
            let want = f16::from_f32(x).to_f32();
            assert_eq!(round_to_f16(x).to_bits(), want.to_bits(), "x = {x:e}");
        }
    }
}
