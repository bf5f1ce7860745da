//! Big-float plumbing: the `Real` type, precision policy and a small complex type.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::IBig;
use serde::{Deserialize, Serialize};

/// Binary big float with round-half-even arithmetic.
pub type Real = FBig<HalfEven, 2>;

pub const MIN_BITS: usize = 64;
pub const DEFAULT_GUARD: usize = 128;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PrecisionError {
    #[error("precision of {0} bits is below the floor of 64")]
    TooLow(usize),
    #[error("computation needs {required} bits but only {available} are configured")]
    Exhausted { required: usize, available: usize },
    #[error("value is not finite")]
    NonFinite,
}

/// Working precision in bits plus the guard policy used for power computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precision {
    bits: usize,
    guard: usize,
}

impl Precision {
    pub fn new(bits: usize) -> Result<Self, PrecisionError> {
        if bits < MIN_BITS {
            return Err(PrecisionError::TooLow(bits));
        }
        Ok(Precision { bits, guard: DEFAULT_GUARD })
    }

    pub fn with_guard(mut self, guard: usize) -> Self {
        self.guard = guard;
        self
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn guard(&self) -> usize {
        self.guard
    }

    /// Bits needed to follow `steps` multiplications by a number of size `2^log2_growth`.
    pub fn required_for(steps: usize, log2_growth: f64, guard: usize) -> usize {
        let raw = (steps as f64 * log2_growth.max(0.0)).ceil() as usize + guard;
        raw.max(MIN_BITS).div_ceil(64) * 64
    }

    /// Precision for `steps` powers of the growth factor, never below the current setting.
    pub fn for_powers(&self, steps: usize, log2_growth: f64) -> Precision {
        let need = Self::required_for(steps, log2_growth, self.guard);
        Precision { bits: self.bits.max(need), guard: self.guard }
    }

    /// Errors unless the configured bits cover `steps` powers.
    pub fn check_powers(&self, steps: usize, log2_growth: f64) -> Result<(), PrecisionError> {
        let need = Self::required_for(steps, log2_growth, self.guard);
        if need > self.bits {
            Err(PrecisionError::Exhausted { required: need, available: self.bits })
        } else {
            Ok(())
        }
    }

    /// 2^{-bits/k}, the tolerance family used for certification.
    pub fn tol(&self, k: usize) -> Real {
        pow2(self.bits, -((self.bits / k) as isize))
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision { bits: 256, guard: DEFAULT_GUARD }
    }
}

pub fn int(p: usize, v: i64) -> Real {
    Real::from(v).with_precision(p).value()
}

pub fn big(p: usize, v: &IBig) -> Real {
    Real::from(v.clone()).with_precision(p).value()
}

pub fn from_f64(p: usize, v: f64) -> Real {
    Real::try_from(v).expect("finite f64").with_precision(p).value()
}

pub fn ratio(p: usize, num: i64, den: i64) -> Real {
    int(p, num) / int(p, den)
}

/// 2^e at precision p.
pub fn pow2(p: usize, e: isize) -> Real {
    let one = int(p, 1);
    if e >= 0 {
        one * Real::from(IBig::ONE << e as usize)
    } else {
        one / Real::from(IBig::ONE << (-e) as usize)
    }
}

pub fn to_f64(x: &Real) -> f64 {
    x.to_f64().value()
}

/// Rounds with ties going up: floor(x + 1/2).
pub fn round_half_up(x: &Real) -> IBig {
    let half = ratio(x.precision().max(MIN_BITS), 1, 2);
    (x + &half).floor().to_int().value()
}

/// Signed distance to the nearest integer, in [-1/2, 1/2).
pub fn signed_frac(x: &Real) -> Real {
    let n = round_half_up(x);
    x - big(x.precision().max(MIN_BITS), &n)
}

pub fn abs(x: &Real) -> Real {
    if x.sign() == dashu_int::Sign::Negative {
        -x.clone()
    } else {
        x.clone()
    }
}

pub fn max(a: &Real, b: &Real) -> Real {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

/// pi by Machin's formula.
pub fn pi(p: usize) -> Real {
    let wp = p + 32;
    let a = atan_inv(wp, 5);
    let b = atan_inv(wp, 239);
    let pi = (a * int(wp, 16)) - (b * int(wp, 4));
    pi.with_precision(p).value()
}

// atan(1/m) by its Taylor series.
fn atan_inv(p: usize, m: i64) -> Real {
    let m2 = int(p, m * m);
    let mut term = int(p, 1) / int(p, m);
    let mut sum = term.clone();
    let eps = pow2(p, -(p as isize) - 4);
    let mut k = 1i64;
    loop {
        term /= &m2;
        let t = &term / int(p, 2 * k + 1);
        if abs(&t) < eps {
            break;
        }
        if k % 2 == 1 {
            sum -= t;
        } else {
            sum += t;
        }
        k += 1;
    }
    sum
}

pub fn log2(x: &Real) -> Real {
    let p = x.precision();
    x.ln() / int(p, 2).ln()
}

/// Decimal string with enough digits to round-trip `bits` of precision.
pub fn to_decimal(x: &Real, bits: usize) -> String {
    let digits = (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1;
    format_sci(x, digits)
}

fn format_sci(x: &Real, digits: usize) -> String {
    if x.repr().significand().is_zero() {
        return "0".to_string();
    }
    let neg = x.sign() == dashu_int::Sign::Negative;
    let ax = abs(x);
    let p = ax.precision().max(MIN_BITS) + 16;
    let ax = ax.with_precision(p).value();
    let e10 = to_f64(&ax).abs().log10().floor() as i64;
    // scale to an integer with `digits` significant digits
    let shift = digits as i64 - 1 - e10;
    let ten = int(p, 10);
    let scaled = if shift >= 0 { &ax * ten.powi(IBig::from(shift)) } else { &ax / ten.powi(IBig::from(-shift)) };
    let mut m = round_half_up(&scaled).to_string();
    let mut exp = e10;
    if m.len() > digits {
        m.truncate(digits);
        exp += 1;
    }
    let trimmed = m.trim_end_matches('0');
    let trimmed = if trimmed.is_empty() { "0" } else { trimmed };
    let (head, tail) = trimmed.split_at(1);
    let mut s = String::new();
    if neg {
        s.push('-');
    }
    s.push_str(head);
    if !tail.is_empty() {
        s.push('.');
        s.push_str(tail);
    }
    if exp != 0 {
        s.push_str(&format!("e{exp}"));
    }
    s
}

#[derive(Clone, PartialEq)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl fmt::Debug for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {:+}i)", to_f64(&self.re), to_f64(&self.im))
    }
}

impl Complex {
    pub fn new(re: Real, im: Real) -> Self {
        Complex { re, im }
    }

    pub fn zero(p: usize) -> Self {
        Complex { re: int(p, 0), im: int(p, 0) }
    }

    pub fn one(p: usize) -> Self {
        Complex { re: int(p, 1), im: int(p, 0) }
    }

    pub fn real(x: Real) -> Self {
        let p = x.precision();
        Complex { re: x, im: int(p, 0) }
    }

    pub fn from_f64(p: usize, re: f64, im: f64) -> Self {
        Complex { re: from_f64(p, re), im: from_f64(p, im) }
    }

    pub fn precision(&self) -> usize {
        self.re.precision().max(self.im.precision())
    }

    pub fn with_precision(&self, p: usize) -> Self {
        Complex { re: self.re.clone().with_precision(p).value(), im: self.im.clone().with_precision(p).value() }
    }

    pub fn conj(&self) -> Self {
        Complex { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn norm_sqr(&self) -> Real {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn abs(&self) -> Real {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, k: &Real) -> Self {
        Complex { re: &self.re * k, im: &self.im * k }
    }

    pub fn inv(&self) -> Self {
        let n = self.norm_sqr();
        Complex { re: &self.re / &n, im: -(&self.im / &n) }
    }

    pub fn div(&self, other: &Complex) -> Self {
        self * &other.inv()
    }

    pub fn powu(&self, mut n: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Complex::one(self.precision());
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            n >>= 1;
        }
        acc
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (to_f64(&self.re), to_f64(&self.im))
    }

    /// e^{2 pi i x} for real x (x in turns).
    pub fn cis_turns(x: &Real) -> Self {
        let p = x.precision().max(MIN_BITS);
        let two = int(p, 2);
        let (s, c) = (x * &two).sin_cos_pi();
        Complex { re: c, im: s }
    }
}

impl Add for &Complex {
    type Output = Complex;
    fn add(self, o: &Complex) -> Complex {
        Complex { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}

impl Sub for &Complex {
    type Output = Complex;
    fn sub(self, o: &Complex) -> Complex {
        Complex { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}

impl Mul for &Complex {
    type Output = Complex;
    fn mul(self, o: &Complex) -> Complex {
        Complex { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }
}

impl Neg for &Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex { re: -self.re.clone(), im: -self.im.clone() }
    }
}
