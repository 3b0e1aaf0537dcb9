use std::fmt;
use std::ops::{Add, Mul};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::rational::Rational;

/// Outward nudge applied (in log2 units) after every bound update so that
/// floating-point rounding inside the bookkeeping never understates an error.
const NUDGE: f64 = 1e-9;

/// A non-negative error bound stored as its base-2 logarithm.
///
/// Orbits of length a few thousand carry absolute errors around 2^-4000,
/// far below the smallest positive double, so the bound lives in log space.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct ErrBound {
    log2: f64,
}

impl ErrBound {
    pub const ZERO: ErrBound = ErrBound {
        log2: f64::NEG_INFINITY,
    };

    pub fn pow2(e: f64) -> Self {
        ErrBound { log2: e }
    }

    pub fn from_f64(v: f64) -> Self {
        assert!(v >= 0.0, "negative error bound {v}");
        if v == 0.0 {
            Self::ZERO
        } else {
            ErrBound {
                log2: v.log2() + NUDGE,
            }
        }
    }

    pub fn log2(self) -> f64 {
        self.log2
    }

    pub fn is_zero(self) -> bool {
        self.log2 == f64::NEG_INFINITY
    }

    /// The bound as a double, rounded up to the smallest positive normal
    /// instead of underflowing to zero.
    pub fn to_f64(self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.log2.exp2().max(f64::MIN_POSITIVE)
        }
    }

    /// Multiplies by `2^factor_log2`.
    pub fn scale_log2(self, factor_log2: f64) -> ErrBound {
        if self.is_zero() || factor_log2 == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        ErrBound {
            log2: self.log2 + factor_log2 + NUDGE,
        }
    }
}

impl Add for ErrBound {
    type Output = ErrBound;

    fn add(self, other: ErrBound) -> ErrBound {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (hi, lo) = if self.log2 >= other.log2 {
            (self.log2, other.log2)
        } else {
            (other.log2, self.log2)
        };
        ErrBound {
            log2: hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2 + NUDGE,
        }
    }
}

impl Mul for ErrBound {
    type Output = ErrBound;

    fn mul(self, other: ErrBound) -> ErrBound {
        self.scale_log2(other.log2)
    }
}

impl fmt::Debug for ErrBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "2^{:.3}", self.log2)
    }
}

/// Fixed-point real `mantissa / 2^frac_bits` with a certified absolute error.
///
/// Every arithmetic operation widens `err` so that the true value is always
/// within `err` of the represented one.
#[derive(Clone, PartialEq)]
pub struct FixedReal {
    mantissa: BigInt,
    frac_bits: u32,
    err: ErrBound,
}

impl fmt::Debug for FixedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "FixedReal({:.17e} ± {:?}, {} bits)",
            self.to_f64(),
            self.err,
            self.frac_bits
        )
    }
}

impl FixedReal {
    pub fn from_parts(mantissa: BigInt, frac_bits: u32, err: ErrBound) -> Self {
        FixedReal {
            mantissa,
            frac_bits,
            err,
        }
    }

    pub fn from_int(v: i64, frac_bits: u32) -> Self {
        FixedReal {
            mantissa: BigInt::from(v) << frac_bits as usize,
            frac_bits,
            err: ErrBound::ZERO,
        }
    }

    /// Rounds `q` down onto the grid; exact values carry no error.
    pub fn from_rational(q: &Rational, frac_bits: u32) -> Self {
        let num = q.numer() << frac_bits as usize;
        let (quot, rem) = num.div_mod_floor(q.denom());
        let err = if rem.is_zero() {
            ErrBound::ZERO
        } else {
            ErrBound::pow2(-(frac_bits as f64))
        };
        FixedReal {
            mantissa: quot,
            frac_bits,
            err,
        }
    }

    /// Conversion of a double; exact whenever the double fits on the grid.
    pub fn from_f64(x: f64, frac_bits: u32) -> Self {
        let q = Rational::from_float(x).expect("finite input");
        Self::from_rational(&q, frac_bits)
    }

    pub fn with_err(mut self, extra: ErrBound) -> Self {
        self.err = self.err.add(extra);
        self
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn err(&self) -> ErrBound {
        self.err
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(self.mantissa.clone(), BigInt::one() << self.frac_bits as usize)
    }

    pub fn to_f64(&self) -> f64 {
        crate::rational::to_f64(&self.to_rational())
    }

    /// Upper bound on `log2 |represented value|`.
    pub fn magnitude_log2(&self) -> f64 {
        mantissa_log2_upper(&self.mantissa) - self.frac_bits as f64
    }

    /// Upper bound on `log2 |true value|`.
    pub fn true_magnitude_log2(&self) -> f64 {
        let m = ErrBound::pow2(self.magnitude_log2());
        m.add(self.err).log2()
    }

    fn ulp(&self) -> ErrBound {
        ErrBound::pow2(-(self.frac_bits as f64))
    }

    fn check_bits(&self, other: &FixedReal) {
        assert_eq!(
            self.frac_bits, other.frac_bits,
            "mixed-precision fixed-point arithmetic"
        );
    }

    pub fn add(&self, other: &FixedReal) -> FixedReal {
        self.check_bits(other);
        FixedReal {
            mantissa: &self.mantissa + &other.mantissa,
            frac_bits: self.frac_bits,
            err: self.err.add(other.err),
        }
    }

    pub fn sub(&self, other: &FixedReal) -> FixedReal {
        self.check_bits(other);
        FixedReal {
            mantissa: &self.mantissa - &other.mantissa,
            frac_bits: self.frac_bits,
            err: self.err.add(other.err),
        }
    }

    pub fn add_int(&self, v: i64) -> FixedReal {
        FixedReal {
            mantissa: &self.mantissa + (BigInt::from(v) << self.frac_bits as usize),
            frac_bits: self.frac_bits,
            err: self.err,
        }
    }

    pub fn add_rational(&self, q: &Rational) -> FixedReal {
        self.add(&FixedReal::from_rational(q, self.frac_bits))
    }

    /// Product truncated to the common precision.
    ///
    /// `|ab - AB| <= |A| e_b + |B| e_a + e_a e_b`, plus one unit of truncation.
    pub fn mul(&self, other: &FixedReal) -> FixedReal {
        self.check_bits(other);
        let prod = &self.mantissa * &other.mantissa;
        let mantissa = floor_shift(prod, self.frac_bits);
        let err = ErrBound::ZERO
            .add(other.err.scale_log2(self.magnitude_log2()))
            .add(self.err.scale_log2(other.magnitude_log2()))
            .add(self.err.mul(other.err))
            .add(self.ulp());
        FixedReal {
            mantissa,
            frac_bits: self.frac_bits,
            err,
        }
    }

    pub fn mul_int(&self, k: i64) -> FixedReal {
        let abs = (k as f64).abs();
        FixedReal {
            mantissa: &self.mantissa * BigInt::from(k),
            frac_bits: self.frac_bits,
            err: if k == 0 {
                ErrBound::ZERO
            } else {
                self.err.scale_log2(abs.log2())
            },
        }
    }

    pub fn mul_rational(&self, q: &Rational) -> FixedReal {
        if q.denom().is_one() {
            return self.mul_int_big(q.numer());
        }
        let (quot, rem) = (&self.mantissa * q.numer()).div_mod_floor(q.denom());
        let q_log2 = if q.is_zero() {
            f64::NEG_INFINITY
        } else {
            crate::rational::ln(&q.abs()) / std::f64::consts::LN_2
        };
        let mut err = self.err.scale_log2(q_log2);
        if !rem.is_zero() {
            err = err.add(self.ulp());
        }
        FixedReal {
            mantissa: quot,
            frac_bits: self.frac_bits,
            err,
        }
    }

    fn mul_int_big(&self, k: &BigInt) -> FixedReal {
        let err = if k.is_zero() {
            ErrBound::ZERO
        } else {
            self.err.scale_log2(mantissa_log2_upper(k))
        };
        FixedReal {
            mantissa: &self.mantissa * k,
            frac_bits: self.frac_bits,
            err,
        }
    }

    /// Fractional part of the represented value, as a double in `[0, 1)`.
    ///
    /// The double is obtained by truncation, so it undershoots the
    /// fixed-point fractional part by less than 2^-53.
    pub fn frac_f64(&self) -> f64 {
        let modulus = BigInt::one() << self.frac_bits as usize;
        let low = self.mantissa.mod_floor(&modulus);
        let b = self.frac_bits as i64;
        let v = if b > 60 {
            let top = low >> (b - 60) as usize;
            top.to_f64().unwrap() * 2f64.powi(-60)
        } else {
            low.to_f64().unwrap() * 2f64.powi(-(b as i32))
        };
        if v >= 1.0 {
            // only reachable through f64 rounding of 2^60 - 1
            1.0 - f64::EPSILON / 2.0
        } else {
            v
        }
    }

    /// Re-grids the value to `frac_bits` fractional bits.
    pub fn with_frac_bits(&self, frac_bits: u32) -> FixedReal {
        if frac_bits >= self.frac_bits {
            FixedReal {
                mantissa: &self.mantissa << (frac_bits - self.frac_bits) as usize,
                frac_bits,
                err: self.err,
            }
        } else {
            let shift = self.frac_bits - frac_bits;
            FixedReal {
                mantissa: floor_shift(self.mantissa.clone(), shift),
                frac_bits,
                err: self.err.add(ErrBound::pow2(-(frac_bits as f64))),
            }
        }
    }

    /// Certified natural logarithm of a positive value.
    ///
    /// Works at `frac_bits + 32` internally: `x = 2^k y` with `y` in `[1, 2)`,
    /// `ln y = 2 atanh((y-1)/(y+1))` and `ln 2 = 2 atanh(1/3)`.
    pub fn ln(&self) -> FixedReal {
        assert!(self.mantissa.sign() == Sign::Plus, "ln of non-positive value");
        let work = self.frac_bits + 32;
        let x = self.with_frac_bits(work);
        let one = BigInt::one() << work as usize;
        // x = 2^k * y
        let k = x.mantissa.bits() as i64 - 1 - work as i64;
        let y_mant = if k >= 0 {
            floor_shift(x.mantissa.clone(), k as u32)
        } else {
            &x.mantissa << (-k) as usize
        };
        let mut err = ErrBound::pow2(-(work as f64)).scale_log2(8.0);
        // ln(y) by atanh series
        let z = {
            let num = (&y_mant - &one) << work as usize;
            let den = &y_mant + &one;
            num.div_floor(&den)
        };
        let (ln_y, e1) = atanh_series(&z, work);
        err = err.add(e1);
        let ln2 = {
            let third = (BigInt::one() << work as usize) / BigInt::from(3);
            atanh_series(&third, work)
        };
        let mut m = ln_y;
        if k != 0 {
            m += &ln2.0 * BigInt::from(k);
            err = err.add(ln2.1.scale_log2((k.unsigned_abs() as f64).log2()));
        }
        // propagated input error: |ln a - ln b| <= |a - b| / min(a, b)
        if !self.err.is_zero() {
            let lower = self.to_f64() - self.err.to_f64();
            assert!(lower > 0.0, "ln argument not certified positive");
            err = err.add(self.err.scale_log2(-lower.log2()));
        }
        FixedReal {
            mantissa: m,
            frac_bits: work,
            err,
        }
        .with_frac_bits(self.frac_bits)
    }
}

/// `2 * atanh(z)` for fixed-point `0 <= z < 1/2`, plus a bound on its error.
fn atanh_series(z: &BigInt, bits: u32) -> (BigInt, ErrBound) {
    let z2 = floor_shift(z * z, bits);
    let mut power = z.clone();
    let mut sum = BigInt::zero();
    let mut j: u64 = 0;
    let mut terms = 0u64;
    while !power.is_zero() {
        sum += &power / BigInt::from(2 * j + 1);
        power = floor_shift(&power * &z2, bits);
        j += 1;
        terms += 1;
    }
    // each term truncated twice; the remaining tail is below one unit
    let err = ErrBound::pow2(-(bits as f64)).scale_log2(((3 * terms + 2) as f64).log2() + 1.0);
    (sum << 1usize, err)
}

fn floor_shift(v: BigInt, shift: u32) -> BigInt {
    if v.sign() == Sign::Minus {
        let d = BigInt::one() << shift as usize;
        v.div_floor(&d)
    } else {
        v >> shift as usize
    }
}

/// Upper bound on `log2 |m|` for a big integer, using the top 64 bits.
fn mantissa_log2_upper(m: &BigInt) -> f64 {
    if m.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = m.bits() as i64;
    let mag = m.magnitude();
    if bits <= 64 {
        return (mag.to_f64().unwrap()).log2() + NUDGE;
    }
    let top = (mag >> (bits - 64) as usize).to_u64().unwrap();
    ((top as f64) + 1.0).log2() + (bits - 64) as f64 + NUDGE
}
