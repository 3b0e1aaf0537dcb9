//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Fresnel integrals `(C(x), S(x))` with the `pi t^2 / 2` convention:
/// power series below 1.5, Lentz continued fraction for the complementary
/// error function above.
pub fn fresnel(x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;
    let ax = x.abs();
    let (c, s) = if ax < FPMIN.sqrt() {
        (ax, 0.0)
    } else if ax <= 1.5 {
        let fact = FRAC_PI_2 * ax * ax;
        let (mut sum, mut sums, mut sumc) = (0.0, 0.0, ax);
        let (mut sign, mut odd, mut term, mut n) = (1.0, true, ax, 3.0);
        for k in 1..200 {
            term *= fact / k as f64;
            sum += sign * term / n;
            let test = sum.abs() * EPS;
            if odd {
                sign = -sign;
                sums = sum;
                sum = sumc;
            } else {
                sumc = sum;
                sum = sums;
            }
            if term < test {
                break;
            }
            odd = !odd;
            n += 2.0;
        }
        (sumc, sums)
    } else {
        let pix2 = PI * ax * ax;
        let mut b = Complex64::new(1.0, -pix2);
        let mut cc = Complex64::new(1.0 / FPMIN, 0.0);
        let mut d = Complex64::new(1.0, 0.0) / b;
        let mut h = d;
        let mut n = -1.0;
        for _ in 2..400 {
            n += 2.0;
            let a = -n * (n + 1.0);
            b += Complex64::new(4.0, 0.0);
            d = Complex64::new(1.0, 0.0) / (d * a + b);
            cc = b + Complex64::new(a, 0.0) / cc;
            let del = cc * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < EPS {
                break;
            }
        }
        h *= Complex64::new(ax, -ax);
        let cs = Complex64::new(0.5, 0.5)
            * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, 0.5 * pix2) * h);
        (cs.re, cs.im)
    };
    if x < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

/// `int_a^b e(c x^2) dx` for `c > 0`.
pub fn quadratic_integral(c: f64, a: f64, b: f64) -> Complex64 {
    let k = 2.0 * c.sqrt();
    let (ca, sa) = fresnel(k * a);
    let (cb, sb) = fresnel(k * b);
    Complex64::new(cb - ca, sb - sa) / k
}

/// `int_a^b e(s x + o) dx` for `s != 0`.
pub fn linear_integral(s: f64, o: f64, a: f64, b: f64) -> Complex64 {
    let e = |t: f64| Complex64::from_polar(1.0, TAU * t);
    (e(s * b + o) - e(s * a + o)) / Complex64::new(0.0, TAU * s)
}

/// `(P/Q)^n mod 1` for `n = 1..=big_n`, exactly, then rounded.
pub fn rational_powers_mod_one(p: u64, q: u64, big_n: u32) -> Vec<f64> {
    let (p, q) = (BigInt::from(p), BigInt::from(q));
    let (mut pn, mut qn) = (BigInt::from(1), BigInt::from(1));
    (1..=big_n)
        .map(|_| {
            pn *= &p;
            qn *= &q;
            let rem = &pn % &qn;
            BigRational::new(rem, qn.clone()).to_f64().unwrap()
        })
        .collect()
}

/// `sup_v |#{y < v}/N - v|` evaluated at every `y_i` from the left and right.
pub fn discrepancy_oracle(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mut best: f64 = 0.0;
    for &v in y {
        let below = y.iter().filter(|&&t| t < v).count() as f64;
        let upto = y.iter().filter(|&&t| t <= v).count() as f64;
        best = best.max((below / n - v).abs()).max((upto / n - v).abs());
    }
    best
}

/// Circle distance between two values mod 1.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

