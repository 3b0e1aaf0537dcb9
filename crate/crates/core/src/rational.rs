//! Exact rational helpers and the `"num/den"` string encoding used in
//! every configuration file.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"0.25"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse rational {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Config(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10u32), frac.len());
        let q = Rational::new(n, d);
        return Ok(if neg { -q } else { q });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

pub fn format_rational(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Exact conversion of a finite `f64` (every finite double is a dyadic rational).
pub fn from_f64_exact(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::Domain(format!("non-finite value {x}")))
}

/// Nearest double, robust for huge numerators and denominators.
pub fn to_f64(q: &Rational) -> f64 {
    if let Some(v) = q.to_f64() {
        if v.is_finite() && (v != 0.0 || q.is_zero()) {
            return v;
        }
    }
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    let n = q.numer().abs();
    let d = q.denom().clone();
    let shift = n.bits() as i64 - d.bits() as i64 - 64;
    let scaled = if shift >= 0 {
        n / (d << shift as usize)
    } else {
        (n << (-shift) as usize) / d
    };
    sign * scaled.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(shift as i32)
}

/// Natural logarithm of a positive rational, safe for very large or small values.
pub fn ln(q: &Rational) -> f64 {
    debug_assert!(q.is_positive());
    let n = q.numer().magnitude();
    let d = q.denom().magnitude();
    let (n_bits, d_bits) = (n.bits() as i64, d.bits() as i64);
    let top = |v: &num_bigint::BigUint, bits: i64| -> f64 {
        let s = (bits - 60).max(0) as usize;
        (v >> s).to_f64().unwrap().ln() + s as f64 * std::f64::consts::LN_2
    };
    top(n, n_bits) - top(d, d_bits)
}

pub fn serialize<S: Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(q))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
    let raw = NumOrStr::deserialize(d)?;
    raw.to_rational().map_err(de::Error::custom)
}

pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for q in v {
            seq.serialize_element(&format_rational(q))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Rational>, D::Error> {
        let raw = Vec::<NumOrStr>::deserialize(d)?;
        raw.iter()
            .map(|r| r.to_rational().map_err(de::Error::custom))
            .collect()
    }
}

/// A JSON scalar that may be written either as a number or as a rational string.
#[derive(Debug, Clone, Deserialize, serde::Serialize, PartialEq)]
#[serde(untagged)]
pub enum NumOrStr {
    Int(i64),
    Float(f64),
    Str(String),
}

impl NumOrStr {
    pub fn to_rational(&self) -> Result<Rational> {
        match self {
            NumOrStr::Int(i) => Ok(Rational::from_integer(BigInt::from(*i))),
            NumOrStr::Float(f) => from_f64_exact(*f),
            NumOrStr::Str(s) => parse_rational(s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_three_spellings() {
        let third = parse_rational("1/3").unwrap();
        assert_eq!(third, Rational::new(1.into(), 3.into()));
        assert_eq!(parse_rational("2").unwrap(), Rational::from_integer(2.into()));
        assert_eq!(
            parse_rational("0.25").unwrap(),
            Rational::new(1.into(), 4.into())
        );
        assert_eq!(
            parse_rational("-1.5").unwrap(),
            Rational::new((-3).into(), 2.into())
        );
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn to_f64_handles_huge_terms() {
        let three = BigInt::from(3u32);
        let big = num_traits::pow(three.clone(), 2000);
        let q = Rational::new(big.clone() + BigInt::one(), big);
        assert!((to_f64(&q) - 1.0).abs() < 1e-15);
        let tiny = Rational::new(BigInt::one(), num_traits::pow(three, 700));
        assert_eq!(to_f64(&tiny), 0.0f64.max(to_f64(&tiny)));
        assert!((ln(&tiny) + 700.0 * 3f64.ln()).abs() < 1e-9);
    }
}
