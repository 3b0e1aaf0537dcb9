use serde::{Deserialize, Serialize};

use super::fixed::{ErrBound, FixedReal};
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::sequences::SequenceFamily;

pub const GUARD_BITS: u32 = 8;

/// Default per-term tolerance for certified orbits.
pub const DEFAULT_TOL: f64 = 9.094947017729282e-13; // 2^-40

/// Default ceiling on the working precision.
pub const DEFAULT_BIT_CEILING: u64 = 1 << 22;

/// Statistics refuse orbits whose certificate is looser than this.
pub const STATISTICS_MAX_ERR: f64 = 9.313225746154785e-10; // 2^-30

/// Error added by down-converting a fixed-point fractional part to `f64`.
const CONVERSION_ERR: f64 = 2.220446049250313e-16; // 2^-52

/// Fractional bits that keep `x^n mod 1` within `tol` for every `n <= big_n`.
///
/// Iterating `y <- y x` at `B` bits gives `e_(n+1) <= x_upper e_n + x_upper^n 2^-B`,
/// hence `e_N <= N x_upper^(N-1) 2^-B` from an input with error `2^-B`.
pub fn required_bits(big_n: u32, x_upper: f64, tol: f64) -> Result<u32> {
    required_bits_with_ceiling(big_n, x_upper, tol, DEFAULT_BIT_CEILING)
}

pub fn required_bits_with_ceiling(
    big_n: u32,
    x_upper: f64,
    tol: f64,
    ceiling: u64,
) -> Result<u32> {
    if big_n == 0 {
        return Err(Error::Config("orbit length must be >= 1".into()));
    }
    if !(x_upper >= 1.0 && x_upper.is_finite()) {
        return Err(Error::Config(format!("x_upper must be >= 1, got {x_upper}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let n = big_n as f64;
    let lx = x_upper.log2();
    let inv_tol = -tol.log2();
    // log2(N x^(N-1) + sum_{k<N} x^k), with the geometric sum bounded by N x^(N-1)
    let growth = (n.log2() + (n - 1.0) * lx) + 1.0;
    let recurrence = growth + inv_tol;
    let contract = n * lx + inv_tol;
    let bits = recurrence.max(contract).ceil() + GUARD_BITS as f64;
    if bits > ceiling as f64 {
        return Err(Error::Resource(format!(
            "orbit of length {big_n} at x <= {x_upper} needs {bits} bits (ceiling {ceiling})"
        )));
    }
    Ok(bits as u32)
}

/// Bits needed for `family` on `[1, x_upper]`.
pub fn family_bits(family: &SequenceFamily, big_n: u32, x_upper: f64, tol: f64) -> Result<u32> {
    let base = required_bits(big_n, x_upper, tol)?;
    let bits = base as u64 + family.extra_bits(big_n, x_upper) as u64;
    if bits > DEFAULT_BIT_CEILING {
        return Err(Error::Resource(format!(
            "family {} needs {bits} bits (ceiling {DEFAULT_BIT_CEILING})",
            family.label()
        )));
    }
    Ok(bits as u32)
}

/// Fractional parts `f_n(x) mod 1` for `n = 1..=N`, each within `max_err`
/// (circle distance) of the true value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitFragment {
    pub values: Vec<f64>,
    pub n_range: (u32, u32),
    pub max_err: f64,
    pub tol: f64,
    pub frac_bits: u32,
    pub family: String,
}

impl OrbitFragment {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The first `n` values.
    pub fn prefix(&self, n: usize) -> &[f64] {
        &self.values[..n.min(self.values.len())]
    }

    /// Values for statistics; refuses certificates looser than 2^-30.
    pub fn certified_values(&self) -> Result<&[f64]> {
        if self.max_err > STATISTICS_MAX_ERR {
            return Err(Error::Precision(format!(
                "orbit certificate {:.3e} exceeds the statistics limit 2^-30",
                self.max_err
            )));
        }
        Ok(&self.values)
    }

    /// CSV with a commented header describing the point and the certificate.
    pub fn to_csv(&self, x_desc: &str) -> String {
        let mut out = String::with_capacity(self.values.len() * 28 + 200);
        out.push_str(&format!("# x: {x_desc}\n"));
        out.push_str(&format!("# family: {}\n", self.family));
        out.push_str(&format!("# precision: {} bits\n", self.frac_bits));
        out.push_str(&format!("# max_err: {:.16e}\n", self.max_err));
        out.push_str("n,frac_value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{:.16e}\n", self.n_range.0 as usize + i, v));
        }
        out
    }
}

/// `frac(x^n)` for `n = 1..=big_n` by repeated multiplication at `x`'s precision.
pub fn powers_mod_one(x: &FixedReal, big_n: u32, tol: f64) -> Result<OrbitFragment> {
    eval_family_mod_one(&SequenceFamily::PurePower, x, big_n, tol)
}

/// `frac(f_n(x))` for `n = 1..=big_n`; refuses if the certificate exceeds `tol`.
pub fn eval_family_mod_one(
    family: &SequenceFamily,
    x: &FixedReal,
    big_n: u32,
    tol: f64,
) -> Result<OrbitFragment> {
    let (values, err) = raw_orbit(family, x, big_n);
    let max_err = err.to_f64() + CONVERSION_ERR;
    if !(max_err <= tol) {
        return Err(Error::Precision(format!(
            "certified error {:.3e} (2^{:.1}) exceeds tolerance {:.3e} at {} bits",
            max_err,
            err.log2(),
            tol,
            x.frac_bits()
        )));
    }
    Ok(OrbitFragment {
        values,
        n_range: (1, big_n),
        max_err,
        tol,
        frac_bits: x.frac_bits(),
        family: family.label(),
    })
}

/// Orbit of an exact rational point with automatically sized precision.
pub fn rational_orbit(
    family: &SequenceFamily,
    x: &Rational,
    big_n: u32,
    tol: f64,
) -> Result<OrbitFragment> {
    let x_upper = crate::rational::to_f64(x).max(1.0) * (1.0 + 1e-12);
    let bits = family_bits(family, big_n, x_upper, tol)?;
    eval_family_mod_one(family, &FixedReal::from_rational(x, bits), big_n, tol)
}

fn raw_orbit(family: &SequenceFamily, x: &FixedReal, big_n: u32) -> (Vec<f64>, ErrBound) {
    let mut values = Vec::with_capacity(big_n as usize);
    let mut worst = ErrBound::ZERO;
    let mut push = |v: &FixedReal, values: &mut Vec<f64>| {
        values.push(v.frac_f64());
        if v.err() > worst {
            worst = v.err();
        }
    };
    match family {
        SequenceFamily::LogAugmented { base } => {
            let log_x = x.ln();
            for (i, b) in base_orbit(base, x, big_n).into_iter().enumerate() {
                let v = b.add(&log_x.mul_int(i as i64 + 1));
                push(&v, &mut values);
            }
        }
        _ => {
            for v in &base_orbit(family, x, big_n) {
                push(v, &mut values);
            }
        }
    }
    (values, worst)
}

/// Fixed-point values `f_n(x)` for a polynomial-in-`x^n` family.
fn base_orbit(family: &SequenceFamily, x: &FixedReal, big_n: u32) -> Vec<FixedReal> {
    let bits = x.frac_bits();
    let mut out = Vec::with_capacity(big_n as usize);
    let mut y = x.clone();
    match family {
        SequenceFamily::PurePower => {
            for n in 1..=big_n {
                if n > 1 {
                    y = y.mul(x);
                }
                out.push(y.clone());
            }
        }
        SequenceFamily::PolyCoeff { g } => {
            let gx = g.eval_fixed(x);
            for n in 1..=big_n {
                if n > 1 {
                    y = y.mul(x);
                }
                out.push(gx.mul(&y));
            }
        }
        SequenceFamily::PolyScale { g } => {
            for n in 1..=big_n {
                if n > 1 {
                    y = y.mul(x);
                }
                let gn = g.eval(&Rational::from_integer(n.into()));
                out.push(y.mul_rational(&gn));
            }
        }
        SequenceFamily::PowerSum => {
            let mut s = FixedReal::from_int(1, bits);
            for n in 1..=big_n {
                if n > 1 {
                    y = y.mul(x);
                }
                s = s.add(&y);
                out.push(s.clone());
            }
        }
        SequenceFamily::LogAugmented { .. } => unreachable!("validated: no nested log kinds"),
    }
    out
}

/// Circle distance on `[0, 1)`.
pub fn mod_one_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}
