//! Admissible function families `f_n` and executable checks of the
//! growth and sign hypotheses (B, C, D) that drive the decay argument.
//!
//! Every family is smooth on `[1, inf)`. Polynomial kinds are evaluated in
//! exact rational arithmetic; the logarithmic kind adds `n log x`, whose
//! derivatives are again rational.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::precision::FixedReal;
use crate::rational::{self, Rational};

/// Polynomial with rational coefficients, constant term first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(#[serde(with = "rational::vec")] pub Vec<Rational>);

impl Polynomial {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        Polynomial(coeffs)
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.0
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.0
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + rational::to_f64(c))
    }

    pub fn eval_fixed(&self, x: &FixedReal) -> FixedReal {
        let bits = x.frac_bits();
        let mut acc = FixedReal::from_int(0, bits);
        for c in self.0.iter().rev() {
            acc = acc.mul(x).add_rational(c);
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * Rational::from_integer(BigInt::from(k)))
                .collect(),
        )
    }

    /// `x^shift * self`.
    fn shifted(&self, shift: usize) -> Polynomial {
        let mut coeffs = vec![Rational::zero(); shift];
        coeffs.extend(self.0.iter().cloned());
        Polynomial(coeffs)
    }

    fn scaled(&self, k: &Rational) -> Polynomial {
        Polynomial(self.0.iter().map(|c| c * k).collect())
    }

    fn monomial(n: usize) -> Polynomial {
        Polynomial::new(vec![Rational::one()]).shifted(n)
    }
}

/// The built-in families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawFamily")]
#[derive(Default)]
pub enum SequenceFamily {
    /// `x^n`
    #[default]
    PurePower,
    /// `g(x) x^n`
    PolyCoeff { g: Polynomial },
    /// `g(n) x^n`
    PolyScale { g: Polynomial },
    /// `x^n + x^(n-1) + ... + x + 1`
    PowerSum,
    /// `base_n(x) + n log x`
    LogAugmented { base: Box<SequenceFamily> },
}

/// Wire form of a family; rejects keys that do not belong to the kind.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    kind: String,
    g: Option<Polynomial>,
    base: Option<Box<SequenceFamily>>,
}

impl TryFrom<RawFamily> for SequenceFamily {
    type Error = String;

    fn try_from(raw: RawFamily) -> std::result::Result<Self, String> {
        let family = match (raw.kind.as_str(), raw.g, raw.base) {
            ("pure_power", None, None) => SequenceFamily::PurePower,
            ("power_sum", None, None) => SequenceFamily::PowerSum,
            ("poly_coeff", Some(g), None) => SequenceFamily::PolyCoeff { g },
            ("poly_scale", Some(g), None) => SequenceFamily::PolyScale { g },
            ("log_augmented", None, Some(base)) => SequenceFamily::LogAugmented { base },
            (k @ ("pure_power" | "power_sum" | "poly_coeff" | "poly_scale" | "log_augmented"), _, _) => {
                return Err(format!("wrong fields for family kind {k:?}"))
            }
            (k, _, _) => return Err(format!("unknown family kind {k:?}")),
        };
        family.validate().map_err(|e| e.to_string())?;
        Ok(family)
    }
}


/// A value of `f_n(x)`: exact for polynomial kinds, certified otherwise.
#[derive(Debug, Clone)]
pub enum FamilyValue {
    Exact(Rational),
    Certified(FixedReal),
}

impl FamilyValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            FamilyValue::Exact(q) => rational::to_f64(q),
            FamilyValue::Certified(x) => x.to_f64(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Derivatives {
    pub f: FamilyValue,
    pub d1: Rational,
    pub d2: Rational,
    pub d3: Rational,
}

impl SequenceFamily {
    pub fn poly_coeff(coeffs: &[&str]) -> Result<Self> {
        let g = parse_poly(coeffs)?;
        let f = SequenceFamily::PolyCoeff { g };
        f.validate()?;
        Ok(f)
    }

    pub fn poly_scale(coeffs: &[&str]) -> Result<Self> {
        let g = parse_poly(coeffs)?;
        let f = SequenceFamily::PolyScale { g };
        f.validate()?;
        Ok(f)
    }

    pub fn log_augmented(base: SequenceFamily) -> Self {
        SequenceFamily::LogAugmented {
            base: Box::new(base),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SequenceFamily::PurePower => "pure_power".into(),
            SequenceFamily::PolyCoeff { .. } => "poly_coeff".into(),
            SequenceFamily::PolyScale { .. } => "poly_scale".into(),
            SequenceFamily::PowerSum => "power_sum".into(),
            SequenceFamily::LogAugmented { base } => format!("log_augmented({})", base.label()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SequenceFamily::PolyCoeff { g } => {
                if g.0.is_empty() || g.0.iter().any(|c| !c.is_positive()) {
                    return config("poly_coeff requires every coefficient of g to be > 0");
                }
            }
            SequenceFamily::PolyScale { g } => {
                if g.0.iter().any(|c| c.is_negative()) || g.0.iter().all(|c| c.is_zero()) {
                    return config(
                        "poly_scale requires non-negative coefficients, not all zero",
                    );
                }
            }
            SequenceFamily::LogAugmented { base } => {
                if matches!(**base, SequenceFamily::LogAugmented { .. }) {
                    return config("nested log_augmented families are not supported");
                }
                base.validate()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// `f_n` as an explicit polynomial, or `None` for the logarithmic kind.
    pub fn polynomial(&self, n: u32) -> Option<Polynomial> {
        let n_us = n as usize;
        match self {
            SequenceFamily::PurePower => Some(Polynomial::monomial(n_us)),
            SequenceFamily::PolyCoeff { g } => Some(g.shifted(n_us)),
            SequenceFamily::PolyScale { g } => {
                let gn = g.eval(&Rational::from_integer(BigInt::from(n)));
                Some(Polynomial::monomial(n_us).scaled(&gn))
            }
            SequenceFamily::PowerSum => Some(Polynomial(vec![Rational::one(); n_us + 1])),
            SequenceFamily::LogAugmented { .. } => None,
        }
    }

    /// `(f_n, f_n', f_n'', f_n''')` at rational `x >= 1`.
    pub fn eval_derivatives(&self, n: u32, x: &Rational) -> Derivatives {
        assert!(n >= 1, "families are indexed from n = 1");
        match self {
            SequenceFamily::LogAugmented { base } => {
                let b = base.eval_derivatives(n, x);
                let nn = Rational::from_integer(BigInt::from(n));
                let inv = x.recip();
                let bits = 192;
                let log_term = FixedReal::from_rational(x, bits).ln().mul_int(n as i64);
                let base_fixed = match b.f {
                    FamilyValue::Exact(q) => FixedReal::from_rational(&q, bits),
                    FamilyValue::Certified(v) => v,
                };
                Derivatives {
                    f: FamilyValue::Certified(base_fixed.add(&log_term)),
                    d1: b.d1 + &nn * &inv,
                    d2: b.d2 - &nn * &inv * &inv,
                    d3: b.d3 + Rational::from_integer(BigInt::from(2)) * &nn * &inv * &inv * &inv,
                }
            }
            _ => {
                let p = self.polynomial(n).expect("polynomial kind");
                let p1 = p.derivative();
                let p2 = p1.derivative();
                let p3 = p2.derivative();
                Derivatives {
                    f: FamilyValue::Exact(p.eval(x)),
                    d1: p1.eval(x),
                    d2: p2.eval(x),
                    d3: p3.eval(x),
                }
            }
        }
    }

    /// `f_n(x)` at fixed-point `x`, error propagated.
    pub fn eval_fixed(&self, n: u32, x: &FixedReal) -> FixedReal {
        match self {
            SequenceFamily::LogAugmented { base } => {
                base.eval_fixed(n, x).add(&x.ln().mul_int(n as i64))
            }
            _ => self.polynomial(n).expect("polynomial kind").eval_fixed(x),
        }
    }

    /// Upper bound on `log2 max_{n <= big_n} |f_n'(x)|` for `1 <= x <= x_upper`.
    pub fn derivative_bound_log2(&self, big_n: u32, x_upper: f64) -> f64 {
        let n = big_n as f64;
        let lx = x_upper.log2();
        let pure = n.log2() + (n - 1.0) * lx;
        let v = match self {
            SequenceFamily::PurePower => pure,
            SequenceFamily::PolyCoeff { g } => {
                let g0 = g.eval_f64(x_upper).abs().max(1.0);
                let g1 = g.derivative().eval_f64(x_upper).abs();
                (g0 * 2f64.powf(pure - n * lx) + g1).log2() + n * lx
            }
            SequenceFamily::PolyScale { g } => {
                let gmax = (1..=big_n)
                    .map(|k| g.eval_f64(k as f64).abs())
                    .fold(1.0, f64::max);
                gmax.log2() + pure
            }
            SequenceFamily::PowerSum => 2.0 * n.log2() + (n - 1.0) * lx,
            SequenceFamily::LogAugmented { base } => {
                (2f64.powf(base.derivative_bound_log2(big_n, x_upper) - pure) + n)
                    .log2()
                    + pure
            }
        };
        v + 1.0
    }

    /// Extra bits (beyond the pure-power requirement) the orbit recurrence of
    /// this family needs to meet the same tolerance.
    pub fn extra_bits(&self, big_n: u32, x_upper: f64) -> u32 {
        let extra = match self {
            SequenceFamily::PurePower => 0.0,
            SequenceFamily::PolyCoeff { g } => {
                let g0 = g.eval_f64(x_upper).abs();
                let g1 = g.derivative().eval_f64(x_upper).abs();
                (g0 + g1 + g.degree() as f64 + 2.0).log2()
            }
            SequenceFamily::PolyScale { g } => {
                let gmax = (1..=big_n)
                    .map(|k| g.eval_f64(k as f64).abs())
                    .fold(1.0, f64::max);
                (gmax + 1.0).log2()
            }
            SequenceFamily::PowerSum => ((big_n + 2) as f64).log2(),
            SequenceFamily::LogAugmented { base } => {
                base.extra_bits(big_n, x_upper) as f64 + ((big_n + 2) as f64).log2()
            }
        };
        extra.ceil() as u32 + 2
    }

    pub fn requires_interval_above_one(&self) -> bool {
        matches!(self, SequenceFamily::LogAugmented { .. })
    }

    /// Lower bound on the global minimum of the family's D-sign behaviour;
    /// only the log kind needs its base to have positive sign.
    fn base(&self) -> Option<&SequenceFamily> {
        match self {
            SequenceFamily::LogAugmented { base } => Some(base),
            _ => None,
        }
    }
}

fn parse_poly(coeffs: &[&str]) -> Result<Polynomial> {
    Ok(Polynomial(
        coeffs
            .iter()
            .map(|s| rational::parse_rational(s))
            .collect::<Result<_>>()?,
    ))
}

/// Machine-precision access to `(f_n, f_n', f_n'', f_n''')`.
///
/// The hypothesis checkers run over this trait so that test doubles
/// (families that deliberately violate a hypothesis) can be injected.
pub trait DerivativeModel: Sync {
    fn derivatives_f64(&self, n: u32, x: f64) -> [f64; 4];

    /// True only for `x^n`, whose constants are checked in closed form.
    fn is_pure_power(&self) -> bool {
        false
    }

    fn requires_interval_above_one(&self) -> bool {
        false
    }
}

impl DerivativeModel for SequenceFamily {
    fn derivatives_f64(&self, n: u32, x: f64) -> [f64; 4] {
        let pure = |k: u32| pure_power_derivs(k, x);
        match self {
            SequenceFamily::PurePower => pure(n),
            SequenceFamily::PolyCoeff { g } => {
                let g0 = g.eval_f64(x);
                let g1p = g.derivative();
                let g2p = g1p.derivative();
                let g3p = g2p.derivative();
                let (g1, g2, g3) = (g1p.eval_f64(x), g2p.eval_f64(x), g3p.eval_f64(x));
                let [p0, p1, p2, p3] = pure(n);
                [
                    g0 * p0,
                    g1 * p0 + g0 * p1,
                    g2 * p0 + 2.0 * g1 * p1 + g0 * p2,
                    g3 * p0 + 3.0 * g2 * p1 + 3.0 * g1 * p2 + g0 * p3,
                ]
            }
            SequenceFamily::PolyScale { g } => {
                let gn = g.eval_f64(n as f64);
                pure(n).map(|v| gn * v)
            }
            SequenceFamily::PowerSum => {
                let mut acc = [0.0; 4];
                for k in 0..=n {
                    let d = if k == 0 { [1.0, 0.0, 0.0, 0.0] } else { pure(k) };
                    for i in 0..4 {
                        acc[i] += d[i];
                    }
                }
                acc
            }
            SequenceFamily::LogAugmented { base } => {
                let b = base.derivatives_f64(n, x);
                let nf = n as f64;
                [
                    b[0] + nf * x.ln(),
                    b[1] + nf / x,
                    b[2] - nf / (x * x),
                    b[3] + 2.0 * nf / (x * x * x),
                ]
            }
        }
    }

    fn is_pure_power(&self) -> bool {
        matches!(self, SequenceFamily::PurePower)
    }

    fn requires_interval_above_one(&self) -> bool {
        SequenceFamily::requires_interval_above_one(self)
    }
}

fn pure_power_derivs(n: u32, x: f64) -> [f64; 4] {
    let nf = n as f64;
    let p = |k: i32| if (n as i32) < k { 0.0 } else { x.powi(n as i32 - k) };
    [
        p(0),
        nf * p(1),
        nf * (nf - 1.0) * p(2),
        nf * (nf - 1.0) * (nf - 2.0) * p(3),
    ]
}

/// Relative margin: a grid value within 1% of a bound is a failure.
pub const SAFETY_MARGIN: f64 = 0.01;

/// Default ceiling on a fitted `C1`.
pub const DEFAULT_C1_CEILING: f64 = 1e6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "rational")]
    pub lo: Rational,
    #[serde(with = "rational")]
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi);
        Interval { lo, hi }
    }

    /// `points` equally spaced rationals including both endpoints.
    pub fn grid(&self, points: usize) -> Vec<Rational> {
        let points = points.max(2);
        let step = (&self.hi - &self.lo) / Rational::from_integer(BigInt::from(points - 1));
        (0..points)
            .map(|j| &self.lo + &step * Rational::from_integer(BigInt::from(j)))
            .collect()
    }

    pub fn grid_f64(&self, points: usize) -> Vec<f64> {
        self.grid(points).iter().map(rational::to_f64).collect()
    }

    fn check_domain(&self, model: &dyn DerivativeModel) -> Result<()> {
        if self.lo < Rational::one() {
            return Err(Error::Domain(format!(
                "interval must lie in [1, inf), got lower end {}",
                rational::format_rational(&self.lo)
            )));
        }
        if model.requires_interval_above_one() && self.lo <= Rational::one() {
            return Err(Error::Domain(
                "log_augmented families need conv(X) inside (1, inf)".into(),
            ));
        }
        Ok(())
    }
}

/// A grid point where a hypothesis check failed or was tightest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Witness {
    pub m: u32,
    pub n: u32,
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyB {
    pub c1: f64,
    pub c2: f64,
    pub pass: bool,
    pub max_ratio: f64,
    pub worst: Option<Witness>,
}

/// Checks `|f_n' - f_m'| <= C1 n^C2 x^(n-1)` for all `m < n <= n_max` on the grid.
///
/// With `candidate = None` the exponent defaults to 1 and `C1` is fitted as
/// the largest normalized ratio (inflated by the safety margin). For `x^n`
/// the closed-form pair (2, 1) is verified exactly in rational arithmetic.
pub fn check_property_b(
    model: &dyn DerivativeModel,
    interval: &Interval,
    n_max: u32,
    grid: usize,
    candidate: Option<(f64, f64)>,
    ceiling: f64,
) -> Result<PropertyB> {
    interval.check_domain(model)?;
    if n_max < 2 {
        return config("property B needs n_max >= 2");
    }
    if model.is_pure_power() && candidate.is_none_or(|c| c == (2.0, 1.0)) {
        return Ok(pure_power_b(interval, n_max, grid));
    }
    let c2 = candidate.map_or(1.0, |c| c.1);
    let xs = interval.grid_f64(grid);
    let mut max_ratio = 0.0f64;
    let mut worst = None;
    for &x in &xs {
        let d1: Vec<f64> = (1..=n_max).map(|n| model.derivatives_f64(n, x)[1]).collect();
        for n in 2..=n_max {
            let norm = (n as f64).powf(c2) * x.powi(n as i32 - 1);
            for m in 1..n {
                let ratio = (d1[(n - 1) as usize] - d1[(m - 1) as usize]).abs() / norm;
                if !(ratio <= max_ratio) {
                    max_ratio = ratio;
                    worst = Some(Witness { m, n, x, value: ratio });
                }
            }
        }
    }
    let (c1, pass) = match candidate {
        Some((c1, _)) => (c1, max_ratio.is_finite() && max_ratio <= (1.0 - SAFETY_MARGIN) * c1),
        None => {
            let c1 = max_ratio / (1.0 - SAFETY_MARGIN);
            (c1, c1.is_finite() && c1 > 0.0 && c1 <= ceiling)
        }
    };
    Ok(PropertyB {
        c1,
        c2,
        pass,
        max_ratio,
        worst,
    })
}

fn pure_power_b(interval: &Interval, n_max: u32, grid: usize) -> PropertyB {
    // n x^(n-1) - m x^(m-1) <= 2 n x^(n-1)  for x >= 1
    let mut pass = true;
    let mut max_ratio = 0.0f64;
    let mut worst = None;
    let two = Rational::from_integer(2.into());
    for x in interval.grid(grid) {
        let pows = powers(&x, n_max);
        for n in 2..=n_max {
            let dn = Rational::from_integer(n.into()) * &pows[(n - 1) as usize];
            let bound = &two * &dn;
            for m in 1..n {
                let dm = Rational::from_integer(m.into()) * &pows[(m - 1) as usize];
                let diff = (&dn - &dm).abs();
                if diff > bound {
                    pass = false;
                }
                let ratio = rational::to_f64(&(&diff / &dn));
                if ratio > max_ratio {
                    max_ratio = ratio;
                    worst = Some(Witness {
                        m,
                        n,
                        x: rational::to_f64(&x),
                        value: ratio,
                    });
                }
            }
        }
    }
    PropertyB {
        c1: 2.0,
        c2: 1.0,
        pass,
        max_ratio,
        worst,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyC {
    pub c3: f64,
    pub pass: bool,
    /// Smallest `n0` such that every tested pair with `n >= n0` has a
    /// strictly positive normalized gap.
    pub smallest_threshold: Option<u32>,
    pub worst: Option<Witness>,
}

/// Checks `|f_n'' - f_m''| >= C3 x^(n-2)` for `n >= n_min_threshold`, `m < n`.
pub fn check_property_c(
    model: &dyn DerivativeModel,
    interval: &Interval,
    n_min_threshold: u32,
    n_max: u32,
    grid: usize,
) -> Result<PropertyC> {
    interval.check_domain(model)?;
    if n_max < 2 {
        return config("property C needs n_max >= 2");
    }
    let n_lo = n_min_threshold.max(2);
    if model.is_pure_power() {
        return Ok(pure_power_c(interval, n_lo, n_max, grid));
    }
    let xs = interval.grid_f64(grid);
    // min normalized ratio per n
    let mut per_n = vec![f64::INFINITY; n_max as usize + 1];
    let mut per_n_witness: Vec<Option<Witness>> = vec![None; n_max as usize + 1];
    for &x in &xs {
        let d2: Vec<f64> = (1..=n_max).map(|n| model.derivatives_f64(n, x)[2]).collect();
        for n in 2..=n_max {
            let norm = x.powi(n as i32 - 2);
            for m in 1..n {
                let ratio = (d2[(n - 1) as usize] - d2[(m - 1) as usize]).abs() / norm;
                if ratio < per_n[n as usize] || ratio.is_nan() {
                    per_n[n as usize] = ratio;
                    per_n_witness[n as usize] = Some(Witness { m, n, x, value: ratio });
                }
            }
        }
    }
    let mut smallest_threshold = None;
    for n0 in (2..=n_max).rev() {
        if per_n[n0 as usize] > 0.0 {
            smallest_threshold = Some(n0);
        } else {
            break;
        }
    }
    let (mut min_ratio, mut worst) = (f64::INFINITY, None);
    for n in n_lo..=n_max {
        if !(per_n[n as usize] >= min_ratio) {
            min_ratio = per_n[n as usize];
            worst = per_n_witness[n as usize].clone();
        }
    }
    let c3 = min_ratio / (1.0 + SAFETY_MARGIN);
    Ok(PropertyC {
        c3,
        pass: c3.is_finite() && c3 > 0.0,
        smallest_threshold,
        worst,
    })
}

fn pure_power_c(interval: &Interval, n_lo: u32, n_max: u32, grid: usize) -> PropertyC {
    // n(n-1) x^(n-2) - m(m-1) x^(m-2) >= x^(n-2)  for n >= 2, x >= 1
    let mut pass = true;
    let mut worst: Option<Witness> = None;
    for x in interval.grid(grid) {
        let pows = powers(&x, n_max);
        let xinv2 = (&x * &x).recip();
        let p = |k: u32| -> Rational {
            if k >= 2 {
                pows[(k - 2) as usize].clone()
            } else {
                pows[k as usize].clone() * &xinv2
            }
        };
        for n in n_lo..=n_max {
            let cn = Rational::from_integer((n * (n - 1)).into());
            let lhs_n = &cn * p(n);
            let floor = p(n);
            for m in 1..n {
                let cm = Rational::from_integer((m * (m - 1)).into());
                let gap = (&lhs_n - &cm * p(m)).abs();
                if gap < floor {
                    pass = false;
                }
                let ratio = rational::to_f64(&(&gap / &floor));
                if worst.as_ref().is_none_or(|w| ratio < w.value) {
                    worst = Some(Witness {
                        m,
                        n,
                        x: rational::to_f64(&x),
                        value: ratio,
                    });
                }
            }
        }
    }
    PropertyC {
        c3: 1.0,
        pass,
        smallest_threshold: Some(2),
        worst,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyD {
    pub sign: i8,
    pub pass: bool,
    pub witness: Option<Witness>,
}

/// Checks that `f_n''' - f_m'''` keeps one sign, the same for every pair.
///
/// Values within `1e-12` of the pair's scale count as zero and are
/// compatible with either sign.
pub fn check_property_d(
    model: &dyn DerivativeModel,
    interval: &Interval,
    n_max: u32,
    grid: usize,
) -> Result<PropertyD> {
    interval.check_domain(model)?;
    if model.is_pure_power() {
        return Ok(pure_power_d(interval, n_max, grid));
    }
    let xs = interval.grid_f64(grid);
    let mut sign: i8 = 0;
    for &x in &xs {
        let d3: Vec<f64> = (1..=n_max).map(|n| model.derivatives_f64(n, x)[3]).collect();
        for n in 2..=n_max {
            for m in 1..n {
                let (a, b) = (d3[(n - 1) as usize], d3[(m - 1) as usize]);
                let diff = a - b;
                let scale = a.abs().max(b.abs());
                if diff.abs() <= 1e-12 * scale || diff == 0.0 {
                    continue;
                }
                let s: i8 = if diff > 0.0 { 1 } else { -1 };
                if sign == 0 {
                    sign = s;
                } else if s != sign {
                    return Ok(PropertyD {
                        sign,
                        pass: false,
                        witness: Some(Witness { m, n, x, value: diff }),
                    });
                }
            }
        }
    }
    Ok(PropertyD {
        sign: if sign == 0 { 1 } else { sign },
        pass: true,
        witness: None,
    })
}

fn pure_power_d(interval: &Interval, n_max: u32, grid: usize) -> PropertyD {
    for x in interval.grid(grid) {
        let pows = powers(&x, n_max);
        let xinv3 = (&x * &x * &x).recip();
        let p = |k: u32| -> Rational {
            if k >= 3 {
                pows[(k - 3) as usize].clone()
            } else {
                pows[k as usize].clone() * &xinv3
            }
        };
        for n in 2..=n_max {
            let cn = Rational::from_integer((n * (n - 1) * n.saturating_sub(2)).into());
            for m in 1..n {
                let cm = Rational::from_integer((m * (m - 1) * m.saturating_sub(2)).into());
                let diff = &cn * p(n) - &cm * p(m);
                if diff < Rational::zero() {
                    return PropertyD {
                        sign: 1,
                        pass: false,
                        witness: Some(Witness {
                            m,
                            n,
                            x: rational::to_f64(&x),
                            value: rational::to_f64(&diff),
                        }),
                    };
                }
            }
        }
    }
    PropertyD {
        sign: 1,
        pass: true,
        witness: None,
    }
}

fn powers(x: &Rational, n_max: u32) -> Vec<Rational> {
    let mut out = Vec::with_capacity(n_max as usize + 1);
    let mut acc = Rational::one();
    for _ in 0..=n_max {
        out.push(acc.clone());
        acc *= x;
    }
    out
}

/// Certified constants for one family on one interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisCertificate {
    pub family: String,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub d_sign: i8,
    pub n_checked: (u32, u32),
    pub n_min_threshold: u32,
    pub interval: Interval,
    pub grid: usize,
    pub pass_b: bool,
    pub pass_c: bool,
    pub pass_d: bool,
}

impl HypothesisCertificate {
    pub fn all_pass(&self) -> bool {
        self.pass_b && self.pass_c && self.pass_d
    }
}

/// Runs B, C and D with fitted constants and bundles the result.
pub fn certify(
    family: &SequenceFamily,
    interval: &Interval,
    n_max: u32,
    grid: usize,
) -> Result<HypothesisCertificate> {
    family.validate()?;
    let b = check_property_b(family, interval, n_max, grid, None, DEFAULT_C1_CEILING)?;
    let c = check_property_c(family, interval, 2, n_max, grid)?;
    let d = check_property_d(family, interval, n_max, grid)?;
    let mut pass_d = d.pass;
    if let Some(base) = family.base() {
        // the n log x perturbation preserves D only for positive-sign bases
        let bd = check_property_d(base, interval, n_max, grid)?;
        pass_d &= bd.pass && bd.sign > 0;
    }
    Ok(HypothesisCertificate {
        family: family.label(),
        c1: b.c1,
        c2: b.c2,
        c3: c.c3,
        d_sign: d.sign,
        n_checked: (1, n_max),
        n_min_threshold: 2,
        interval: interval.clone(),
        grid,
        pass_b: b.pass,
        pass_c: c.pass,
        pass_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn unit() -> Interval {
        Interval::new(q("1"), q("2"))
    }

    #[test]
    fn pure_power_derivatives_at_two() {
        let d = SequenceFamily::PurePower.eval_derivatives(3, &q("2"));
        assert!(matches!(d.f, FamilyValue::Exact(ref v) if *v == q("8")));
        assert_eq!((d.d1, d.d2, d.d3), (q("12"), q("12"), q("6")));
    }

    #[test]
    fn power_sum_derivatives_at_one() {
        let d = SequenceFamily::PowerSum.eval_derivatives(2, &q("1"));
        assert_eq!(d.f.to_f64(), 3.0);
        assert_eq!((d.d1, d.d2, d.d3), (q("3"), q("2"), q("0")));
    }

    #[test]
    fn poly_scale_value() {
        let f = SequenceFamily::poly_scale(&["0", "1"]).unwrap();
        let d = f.eval_derivatives(2, &q("3/2"));
        assert!(matches!(d.f, FamilyValue::Exact(ref v) if *v == q("9/2")));
    }

    #[test]
    fn poly_coeff_rejects_zero_coefficient() {
        assert!(SequenceFamily::poly_coeff(&["0", "1"]).is_err());
        assert!(SequenceFamily::poly_coeff(&["1", "2"]).is_ok());
    }

    #[test]
    fn f64_and_exact_paths_agree() {
        let fams = [
            SequenceFamily::PurePower,
            SequenceFamily::poly_coeff(&["1", "1/2", "3"]).unwrap(),
            SequenceFamily::poly_scale(&["1", "2"]).unwrap(),
            SequenceFamily::PowerSum,
            SequenceFamily::log_augmented(SequenceFamily::PurePower),
        ];
        for f in &fams {
            for n in [1, 2, 3, 7] {
                let x = q("7/5");
                let exact = f.eval_derivatives(n, &x);
                let fast = f.derivatives_f64(n, 1.4);
                let ex = [
                    exact.f.to_f64(),
                    rational::to_f64(&exact.d1),
                    rational::to_f64(&exact.d2),
                    rational::to_f64(&exact.d3),
                ];
                for i in 0..4 {
                    assert!(
                        (ex[i] - fast[i]).abs() <= 1e-12 * ex[i].abs().max(1.0),
                        "{} n={n} i={i}",
                        f.label()
                    );
                }
            }
        }
    }

    #[test]
    fn pure_power_certificate_is_closed_form() {
        let cert = certify(&SequenceFamily::PurePower, &unit(), 30, 17).unwrap();
        assert_eq!((cert.c1, cert.c2, cert.c3, cert.d_sign), (2.0, 1.0, 1.0, 1));
        assert!(cert.all_pass());
    }

    #[test]
    fn power_sum_fits_b() {
        let b = check_property_b(&SequenceFamily::PowerSum, &unit(), 20, 33, None, 1e6).unwrap();
        assert!(b.pass);
        assert_eq!(b.c2, 1.0);
        // worst pair is (m, n) = (1, 20) at x = 1: (1 + 2 + ... + 20 - 1) / 20
        assert!((b.c1 - 10.45 / 0.99).abs() < 1e-9, "{}", b.c1);
    }

    struct SquareExponent;
    impl DerivativeModel for SquareExponent {
        fn derivatives_f64(&self, n: u32, x: f64) -> [f64; 4] {
            let k = (n * n) as f64;
            [
                x.powf(k),
                k * x.powf(k - 1.0),
                k * (k - 1.0) * x.powf(k - 2.0),
                k * (k - 1.0) * (k - 2.0) * x.powf(k - 3.0),
            ]
        }
    }

    struct Negated;
    impl DerivativeModel for Negated {
        fn derivatives_f64(&self, n: u32, x: f64) -> [f64; 4] {
            SequenceFamily::PurePower.derivatives_f64(n, x).map(|v| -v)
        }
    }

    struct Alternating;
    impl DerivativeModel for Alternating {
        fn derivatives_f64(&self, n: u32, x: f64) -> [f64; 4] {
            let s = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
            SequenceFamily::PurePower.derivatives_f64(n, x).map(|v| s * v)
        }
    }

    #[test]
    fn super_polynomial_family_fails_b() {
        let b = check_property_b(&SquareExponent, &unit(), 12, 9, None, 1e6).unwrap();
        assert!(!b.pass);
        assert_eq!(b.worst.unwrap().x, 2.0);
    }

    #[test]
    fn property_c_for_pure_power_includes_boundary_pair() {
        let c = check_property_c(&SequenceFamily::PurePower, &unit(), 1, 10, 9).unwrap();
        assert!(c.pass);
        assert_eq!(c.c3, 1.0);
        let w = c.worst.unwrap();
        assert_eq!((w.m, w.n), (1, 2));
    }

    #[test]
    fn log_augmented_c_slightly_below_one() {
        let f = SequenceFamily::log_augmented(SequenceFamily::PurePower);
        let iv = Interval::new(q("1001/1000"), q("2"));
        let c = check_property_c(&f, &iv, 2, 40, 65).unwrap();
        assert!(c.pass);
        assert!(c.c3 > 0.95 && c.c3 < 1.0, "{}", c.c3);
    }

    #[test]
    fn log_augmented_needs_interval_above_one() {
        let f = SequenceFamily::log_augmented(SequenceFamily::PurePower);
        assert!(matches!(
            check_property_c(&f, &unit(), 2, 10, 9),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn property_d_signs() {
        let d = check_property_d(&SequenceFamily::PurePower, &unit(), 15, 9).unwrap();
        assert_eq!((d.sign, d.pass), (1, true));
        let d = check_property_d(&Negated, &unit(), 15, 9).unwrap();
        assert_eq!((d.sign, d.pass), (-1, true));
        let d = check_property_d(&Alternating, &unit(), 15, 9).unwrap();
        assert!(!d.pass);
        let w = d.witness.unwrap();
        assert!(w.n <= 4);
    }

    #[test]
    fn family_json_shapes() {
        let f: SequenceFamily = serde_json::from_str(r#"{"kind":"pure_power"}"#).unwrap();
        assert_eq!(f, SequenceFamily::PurePower);
        let f: SequenceFamily =
            serde_json::from_str(r#"{"kind":"poly_scale","g":["0","1"]}"#).unwrap();
        assert_eq!(f, SequenceFamily::poly_scale(&["0", "1"]).unwrap());
        let f: SequenceFamily =
            serde_json::from_str(r#"{"kind":"log_augmented","base":{"kind":"power_sum"}}"#)
                .unwrap();
        assert_eq!(f, SequenceFamily::log_augmented(SequenceFamily::PowerSum));
        assert!(serde_json::from_str::<SequenceFamily>(r#"{"kind":"pure_power","x":1}"#).is_err());
    }
}
