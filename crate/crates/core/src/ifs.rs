//! Equicontractive iterated function systems `phi_i(x) = r x + t_i`,
//! cylinder geometry in exact rationals, and digit sampling of the
//! self-similar measure.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::precision::{ErrBound, FixedReal};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsSpec {
    #[serde(with = "rational")]
    pub r: Rational,
    #[serde(with = "rational::vec")]
    pub t: Vec<Rational>,
    #[serde(with = "rational::vec")]
    pub p: Vec<Rational>,
}

impl IfsSpec {
    /// Builds and checks a spec; see [`IfsSpec::check`].
    pub fn new(r: Rational, t: Vec<Rational>, p: Vec<Rational>) -> Result<Self> {
        let spec = IfsSpec { r, t, p };
        spec.check()?;
        Ok(spec)
    }

    pub fn parse(r: &str, t: &[&str], p: &[&str]) -> Result<Self> {
        let conv = |v: &[&str]| -> Result<Vec<Rational>> {
            v.iter().map(|s| rational::parse_rational(s)).collect()
        };
        Self::new(rational::parse_rational(r)?, conv(t)?, conv(p)?)
    }

    /// `phi_1 = (x + 2)/3`, `phi_2 = (x + 4)/3`: the middle-third Cantor set shifted by 1.
    pub fn cantor_plus_one() -> Self {
        Self::parse("1/3", &["2/3", "4/3"], &["1/2", "1/2"]).expect("valid")
    }

    /// Cantor set shifted by `shift`, with the given weights.
    pub fn cantor_shifted(shift: &Rational, p: Vec<Rational>) -> Result<Self> {
        let third = Rational::new(1.into(), 3.into());
        let two_thirds = Rational::new(2.into(), 3.into());
        let t = vec![shift * &two_thirds, shift * &two_thirds + &two_thirds];
        Self::new(third, t, p)
    }

    /// Well-formedness: `0 < r < 1`, at least two maps, weights `>= 0` summing to 1.
    pub fn check(&self) -> Result<()> {
        if !(self.r.is_positive() && self.r < Rational::one()) {
            return config(format!(
                "contraction ratio must lie in (0, 1), got {}",
                rational::format_rational(&self.r)
            ));
        }
        if self.t.len() < 2 {
            return config("an IFS needs at least two maps");
        }
        if self.t.len() != self.p.len() {
            return config(format!(
                "{} translations but {} probabilities",
                self.t.len(),
                self.p.len()
            ));
        }
        if self.t.len() > u16::MAX as usize {
            return config("alphabet too large");
        }
        if self.p.iter().any(|p| p.is_negative()) {
            return config("probabilities must be non-negative");
        }
        let total: Rational = self.p.iter().sum();
        if !total.is_one() {
            return config(format!(
                "probabilities sum to {}, not 1",
                rational::format_rational(&total)
            ));
        }
        Ok(())
    }

    pub fn alphabet_size(&self) -> usize {
        self.t.len()
    }

    pub fn probs_f64(&self) -> Vec<f64> {
        self.p.iter().map(rational::to_f64).collect()
    }

    pub fn r_f64(&self) -> f64 {
        rational::to_f64(&self.r)
    }

    pub fn with_probs(&self, p: Vec<Rational>) -> Result<Self> {
        Self::new(self.r.clone(), self.t.clone(), p)
    }

    /// `[t_min/(1-r), t_max/(1-r)]`, the fixed points of the extreme maps.
    pub fn conv_hull(&self) -> (Rational, Rational) {
        let one_minus = Rational::one() - &self.r;
        let min = self.t.iter().min().expect("non-empty").clone();
        let max = self.t.iter().max().expect("non-empty").clone();
        (min / &one_minus, max / &one_minus)
    }

    pub fn hull_length(&self) -> Rational {
        let (lo, hi) = self.conv_hull();
        hi - lo
    }

    /// `phi_i(x)` for a 1-based digit.
    pub fn apply(&self, digit: u16, x: &Rational) -> Rational {
        &self.r * x + &self.t[digit as usize - 1]
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.probs_f64())
    }
}

/// Geometry facts about a spec; all endpoints exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    #[serde(with = "rational::vec")]
    pub conv_hull: Vec<Rational>,
    /// Smallest distance between distinct level-1 images of the hull
    /// (non-positive when two images touch or overlap).
    #[serde(with = "rational")]
    pub gap_min: Rational,
    pub support_ok: bool,
    pub separation_ok: bool,
    pub images: Vec<[String; 2]>,
}

impl ValidationReport {
    pub fn hull(&self) -> (Rational, Rational) {
        (self.conv_hull[0].clone(), self.conv_hull[1].clone())
    }

    pub fn all_ok(&self) -> bool {
        self.support_ok && self.separation_ok
    }
}

pub fn validate_ifs(spec: &IfsSpec) -> Result<ValidationReport> {
    spec.check()?;
    let (lo, hi) = spec.conv_hull();
    let mut images: Vec<(Rational, Rational)> = (1..=spec.alphabet_size() as u16)
        .map(|i| (spec.apply(i, &lo), spec.apply(i, &hi)))
        .collect();
    let labels = images
        .iter()
        .map(|(a, b)| [rational::format_rational(a), rational::format_rational(b)])
        .collect();
    images.sort();
    let gap_min = images
        .windows(2)
        .map(|w| &w[1].0 - &w[0].1)
        .min()
        .expect("at least two maps");
    Ok(ValidationReport {
        support_ok: lo >= Rational::one(),
        separation_ok: gap_min.is_positive(),
        gap_min,
        conv_hull: vec![lo, hi],
        images: labels,
    })
}

/// `-sum p_i ln p_i`, with `0 ln 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EntropyCheck {
    pub entropy: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// `h(p) / (-log r)`; passes iff strictly above 1/2.
pub fn check_entropy_condition(spec: &IfsSpec) -> EntropyCheck {
    entropy_condition(spec.entropy(), rational::ln(&spec.r))
}

pub fn entropy_condition(h: f64, log_r: f64) -> EntropyCheck {
    let ratio = h / -log_r;
    EntropyCheck {
        entropy: h,
        ratio,
        pass: ratio > 0.5,
    }
}

/// A finite word over the 1-based alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<u16>);

impl Word {
    pub fn new(digits: Vec<u16>) -> Self {
        Word(digits)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// `digit` repeated `len` times.
    pub fn constant(digit: u16, len: usize) -> Self {
        Word(vec![digit; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn digits(&self) -> &[u16] {
        &self.0
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut d = self.0.clone();
        d.extend_from_slice(&other.0);
        Word(d)
    }

    pub fn prefix(&self, k: usize) -> Word {
        Word(self.0[..k].to_vec())
    }

    pub fn check(&self, spec: &IfsSpec) -> Result<()> {
        let a = spec.alphabet_size() as u16;
        if let Some(&d) = self.0.iter().find(|&&d| d == 0 || d > a) {
            return config(format!("digit {d} outside the alphabet 1..={a}"));
        }
        Ok(())
    }

    /// Parses `"2,2,1"`, `"221"` (single-digit alphabets) or `""`.
    pub fn parse(s: &str) -> Result<Word> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Word::empty());
        }
        let parts: Vec<&str> = if s.contains(',') {
            s.split(',').collect()
        } else {
            s.split("").filter(|p| !p.is_empty()).collect()
        };
        parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<u16>()
                    .map_err(|_| Error::Config(format!("bad digit {p:?} in word {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Vec::<u16>::deserialize(d).map(Word)
    }
}

/// `x -> scale x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub scale: Rational,
    pub offset: Rational,
}

impl AffineMap {
    pub fn apply(&self, x: &Rational) -> Rational {
        &self.scale * x + &self.offset
    }

    pub fn apply_f64(&self, x: f64) -> f64 {
        rational::to_f64(&self.scale) * x + rational::to_f64(&self.offset)
    }
}

/// `phi_a = phi_(a_1) o ... o phi_(a_M)` as `(r^M, sum t_(a_k) r^(k-1))`.
pub fn compose(spec: &IfsSpec, word: &Word) -> AffineMap {
    let mut scale = Rational::one();
    let mut offset = Rational::zero();
    for &d in word.digits() {
        offset += &scale * &spec.t[d as usize - 1];
        scale *= &spec.r;
    }
    AffineMap { scale, offset }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub word: Word,
    #[serde(with = "rational")]
    pub x0: Rational,
    #[serde(with = "rational")]
    pub x1: Rational,
    #[serde(with = "rational")]
    pub prob: Rational,
}

impl Cylinder {
    pub fn length(&self) -> Rational {
        &self.x1 - &self.x0
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.x0 <= x && x <= &self.x1
    }

    /// Gap between two cylinders (0 if they meet).
    pub fn distance(&self, other: &Cylinder) -> Rational {
        if self.x1 < other.x0 {
            &other.x0 - &self.x1
        } else if other.x1 < self.x0 {
            &self.x0 - &other.x1
        } else {
            Rational::zero()
        }
    }
}

pub fn cylinder(spec: &IfsSpec, word: &Word) -> Cylinder {
    let (lo, hi) = spec.conv_hull();
    let map = compose(spec, word);
    Cylinder {
        word: word.clone(),
        x0: map.apply(&lo),
        x1: map.apply(&hi),
        prob: word_probability(spec, word),
    }
}

pub fn word_probability(spec: &IfsSpec, word: &Word) -> Rational {
    word.digits()
        .iter()
        .map(|&d| spec.p[d as usize - 1].clone())
        .product()
}

/// 1-based index of the first disagreement.
pub fn wedge_depth(a: &Word, b: &Word) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::Domain("wedge depth needs words of equal length".into()));
    }
    a.digits()
        .iter()
        .zip(b.digits())
        .position(|(x, y)| x != y)
        .map(|i| i + 1)
        .ok_or_else(|| Error::Domain("wedge depth of identical words".into()))
}

/// Every word of length `len` over `1..=alphabet`, in lexicographic order.
pub fn all_words(alphabet: usize, len: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * alphabet);
        for w in &out {
            for d in 1..=alphabet as u16 {
                let mut v = w.0.clone();
                v.push(d);
                next.push(Word(v));
            }
        }
        out = next;
    }
    out
}

/// `{phi_i o phi_j}`: ratio `r^2`, translation `r t_j + t_i`, weight `p_i p_j`.
pub fn square_ifs(spec: &IfsSpec) -> Result<IfsSpec> {
    let mut t = Vec::new();
    let mut p = Vec::new();
    for i in 0..spec.alphabet_size() {
        for j in 0..spec.alphabet_size() {
            t.push(&spec.r * &spec.t[j] + &spec.t[i]);
            p.push(&spec.p[i] * &spec.p[j]);
        }
    }
    IfsSpec::new(&spec.r * &spec.r, t, p)
}

/// Midpoint of the widest level-`level` gap lying above 1, minus 1.
pub fn suggest_kappa(spec: &IfsSpec, level: usize) -> Result<Rational> {
    let a = spec.alphabet_size();
    if (a as f64).powi(level as i32) > (1u64 << 20) as f64 {
        return Err(Error::Resource(format!("{a}^{level} cylinders is too many")));
    }
    let mut cyl: Vec<(Rational, Rational)> = all_words(a, level)
        .iter()
        .map(|w| {
            let c = cylinder(spec, w);
            (c.x0, c.x1)
        })
        .collect();
    cyl.sort();
    let one = Rational::one();
    let best = cyl
        .windows(2)
        .filter(|w| w[1].0 > w[0].1 && w[0].1 >= one)
        .max_by(|u, v| (&u[1].0 - &u[0].1).cmp(&(&v[1].0 - &v[0].1)))
        .ok_or_else(|| Error::Domain(format!("no level-{level} gap above 1")))?;
    let two = Rational::from_integer(2.into());
    Ok((&best[0].1 + &best[1].0) / two - one)
}

/// Where a point sits relative to the attractor, descended cylinder by cylinder.
#[derive(Debug, Clone, PartialEq)]
pub enum Location {
    /// Outside every level-`depth` cylinder.
    Outside { depth: usize },
    /// Inside a cylinder at every level up to the search cap.
    Undecided { depth: usize, word: Word },
}

/// Locates `x` by descending the unique cylinder containing it.
///
/// Needs separation so that at most one cylinder per level contains `x`.
pub fn locate(spec: &IfsSpec, x: &Rational, max_depth: usize) -> Location {
    let mut word = Word::empty();
    let (lo, hi) = spec.conv_hull();
    if x < &lo || x > &hi {
        return Location::Outside { depth: 0 };
    }
    for depth in 1..=max_depth {
        let next = (1..=spec.alphabet_size() as u16).find_map(|d| {
            let w = word.concat(&Word(vec![d]));
            cylinder(spec, &w).contains(x).then_some(w)
        });
        match next {
            Some(w) => word = w,
            None => return Location::Outside { depth },
        }
    }
    Location::Undecided {
        depth: max_depth,
        word,
    }
}

/// Inverse-CDF digit sampler with exact 64-bit thresholds.
#[derive(Debug, Clone)]
pub struct DigitSampler {
    thresholds: Vec<u128>,
}

impl DigitSampler {
    pub fn new(probs: &[Rational]) -> Self {
        let scale = Rational::from_integer(BigInt::one() << 64usize);
        let mut cum = Rational::zero();
        let mut thresholds = Vec::with_capacity(probs.len());
        for p in probs {
            cum += p;
            let t = (&cum * &scale).floor().to_integer();
            thresholds.push(u128::try_from(t).expect("threshold fits in 65 bits"));
        }
        DigitSampler { thresholds }
    }

    /// Digit `i` (1-based) with probability `p_i`, to within `2^-64`.
    pub fn draw(&self, rng: &mut impl RngCore) -> u16 {
        let u = rng.next_u64() as u128;
        let i = self.thresholds.partition_point(|&t| t <= u);
        // probabilities that are exactly zero are never drawn
        (i.min(self.thresholds.len() - 1) + 1) as u16
    }
}

/// The generator for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// IID digits with law `probs`.
pub fn sample_word(length: usize, probs: &[Rational], seed: u64, stream: u64) -> Word {
    sample_conditioned_word(&Word::empty(), length, probs, seed, stream)
}

/// `prefix` followed by IID digits, `length` digits in total.
pub fn sample_conditioned_word(
    prefix: &Word,
    length: usize,
    probs: &[Rational],
    seed: u64,
    stream: u64,
) -> Word {
    let sampler = DigitSampler::new(probs);
    let mut rng = stream_rng(seed, stream);
    let mut digits = prefix.0.clone();
    digits.truncate(length.max(prefix.len()));
    while digits.len() < length {
        digits.push(sampler.draw(&mut rng));
    }
    Word(digits)
}

/// Exact `x_K = sum_(k<=K) t_(a_k) r^(k-1)` over the first `depth` digits.
pub fn partial_sum(spec: &IfsSpec, word: &Word, depth: usize) -> Rational {
    let digits = &word.digits()[..depth];
    if digits.is_empty() {
        return Rational::zero();
    }
    // r = u/v and t_i = s_i/w over a common denominator:
    // x_K w v^(K-1) = sum_k s_(a_k) u^(k-1) v^(K-k), accumulated forward
    let (u, v) = (spec.r.numer(), spec.r.denom());
    let w = spec
        .t
        .iter()
        .fold(BigInt::one(), |acc, t| num_integer::lcm(acc, t.denom().clone()));
    let s: Vec<BigInt> = spec.t.iter().map(|t| t.numer() * (&w / t.denom())).collect();
    let mut y = BigInt::zero();
    let mut u_pow = BigInt::one();
    for (k, &d) in digits.iter().enumerate() {
        if k > 0 {
            y *= v;
            u_pow *= u;
        }
        y += &s[d as usize - 1] * &u_pow;
    }
    Rational::new(y, w * num_traits::pow(v.clone(), digits.len() - 1))
}

/// [`partial_sum`] as a fixed-point value certified against the attractor
/// point coded by `word`.
///
/// The coding map sends an infinite word to `x_K + r^K y` with `y` in the
/// hull, so the certified error is `r^K max(|x0|, |x1|)` plus rounding.
pub fn point_of_word(spec: &IfsSpec, word: &Word, depth: usize, frac_bits: u32) -> Result<FixedReal> {
    if depth > word.len() {
        return Err(Error::Domain(format!(
            "truncation depth {depth} exceeds word length {}",
            word.len()
        )));
    }
    word.check(spec)?;
    let x = FixedReal::from_rational(&partial_sum(spec, word, depth), frac_bits);
    Ok(x.with_err(truncation_error(spec, depth)))
}

/// `r^K max(|x0|, |x1|)`.
pub fn truncation_error(spec: &IfsSpec, depth: usize) -> ErrBound {
    let (lo, hi) = spec.conv_hull();
    let reach = if lo.abs() > hi.abs() { lo.abs() } else { hi.abs() };
    if reach.is_zero() {
        return ErrBound::ZERO;
    }
    let ln2 = std::f64::consts::LN_2;
    ErrBound::pow2(depth as f64 * rational::ln(&spec.r) / ln2 + rational::ln(&reach) / ln2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn cantor_plus_one_report() {
        let rep = validate_ifs(&IfsSpec::cantor_plus_one()).unwrap();
        assert_eq!(rep.hull(), (q("1"), q("2")));
        assert_eq!(rep.gap_min, q("1/3"));
        assert!(rep.support_ok && rep.separation_ok);
        assert_eq!(rep.images[0], ["1".to_string(), "4/3".to_string()]);
        assert_eq!(rep.images[1], ["5/3".to_string(), "2".to_string()]);
    }

    #[test]
    fn touching_images_fail_separation() {
        let spec = IfsSpec::parse("1/2", &["1/2", "1"], &["1/2", "1/2"]).unwrap();
        let rep = validate_ifs(&spec).unwrap();
        assert!(!rep.separation_ok);
        assert_eq!(rep.gap_min, q("0"));
    }

    #[test]
    fn support_below_one() {
        let spec = IfsSpec::parse("1/4", &["3/8", "9/8"], &["1/2", "1/2"]).unwrap();
        let rep = validate_ifs(&spec).unwrap();
        assert_eq!(rep.hull(), (q("1/2"), q("3/2")));
        assert!(!rep.support_ok);
    }

    #[test]
    fn malformed_specs_are_config_errors() {
        for (r, p) in [("1", "1/2"), ("0", "1/2"), ("-1/3", "1/2"), ("1/3", "1/3")] {
            let res = IfsSpec::parse(r, &["2/3", "4/3"], &[p, "1/2"]);
            assert!(matches!(res, Err(Error::Config(_))), "{r} {p}");
        }
    }

    #[test]
    fn entropy_values() {
        assert!((entropy(&[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        assert!((entropy(&[0.8, 0.2]) - 0.500402).abs() < 1e-6);
    }

    #[test]
    fn entropy_condition_examples() {
        let c = check_entropy_condition(&IfsSpec::cantor_plus_one());
        assert!((c.ratio - 0.630930).abs() < 1e-6 && c.pass);
        let s = IfsSpec::parse("1/2", &["1", "3/2"], &["9/10", "1/10"]).unwrap();
        let c = check_entropy_condition(&s);
        assert!((c.ratio - 0.469).abs() < 1e-3 && !c.pass);
        let h = 0.5004;
        let c = entropy_condition(h, -2.0 * h);
        assert_eq!(c.ratio, 0.5);
        assert!(!c.pass);
    }

    #[test]
    fn composition() {
        let spec = IfsSpec::cantor_plus_one();
        let id = compose(&spec, &Word::empty());
        assert_eq!((id.scale, id.offset), (q("1"), q("0")));
        let m = compose(&spec, &Word::new(vec![1, 2]));
        assert_eq!((m.scale.clone(), m.offset.clone()), (q("1/9"), q("10/9")));
        let c = cylinder(&spec, &Word::new(vec![1, 2]));
        assert_eq!((c.x0, c.x1), (q("11/9"), q("4/3")));
    }

    #[test]
    fn cylinder_and_wedge() {
        let spec = IfsSpec::cantor_plus_one();
        let c = cylinder(&spec, &Word::constant(2, 5));
        assert_eq!((c.x0, c.x1), (q("2") - q("1/243"), q("2")));
        assert_eq!(c.prob, q("1/32"));
        assert_eq!(word_probability(&spec, &Word::new(vec![1])), q("1/2"));
        let a = Word::new(vec![1, 2, 1]);
        let b = Word::new(vec![1, 1, 2]);
        assert_eq!(wedge_depth(&a, &b).unwrap(), 2);
        assert!(wedge_depth(&a, &a).is_err());
    }

    #[test]
    fn degenerate_law_and_prefix() {
        let p = vec![q("1"), q("0")];
        for seed in 0..20 {
            assert!(sample_word(50, &p, seed, 3).digits().iter().all(|&d| d == 1));
        }
        let prefix = Word::constant(2, 5);
        let half = vec![q("1/2"), q("1/2")];
        for seed in 0..20 {
            let w = sample_conditioned_word(&prefix, 12, &half, seed, seed);
            assert_eq!(w.prefix(5), prefix);
            assert_eq!(w.len(), 12);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let half = vec![q("1/2"), q("1/2")];
        let a = sample_word(64, &half, 9, 1);
        assert_eq!(a, sample_word(64, &half, 9, 1));
        assert_ne!(a, sample_word(64, &half, 9, 2));
    }

    #[test]
    fn digit_frequencies_within_three_sigma() {
        let p = vec![q("4/5"), q("1/5")];
        let w = sample_word(100_000, &p, 42, 0);
        let ones = w.digits().iter().filter(|&&d| d == 1).count() as f64;
        let n = 100_000.0;
        let sigma = (n * 0.8 * 0.2f64).sqrt();
        assert!((ones - 0.8 * n).abs() <= 3.0 * sigma, "{ones}");
    }

    #[test]
    fn point_of_word_examples() {
        let spec = IfsSpec::cantor_plus_one();
        let w = Word::new(vec![2, 1, 1]);
        assert_eq!(partial_sum(&spec, &w, 2), q("14/9"));
        let x = point_of_word(&spec, &w, 2, 128).unwrap();
        assert!((x.to_f64() - 14.0 / 9.0).abs() < 1e-15);
        for k in [1usize, 5, 20] {
            let w = Word::constant(1, k);
            let x = point_of_word(&spec, &w, k, 200).unwrap();
            let actual = (Rational::one() - x.to_rational()).abs();
            let third_k = rational::to_f64(&num_traits::pow(q("1/3"), k));
            assert!(rational::to_f64(&actual) <= third_k * (1.0 + 1e-12));
            assert!(x.err().to_f64() >= rational::to_f64(&actual));
        }
        assert!(point_of_word(&spec, &Word::constant(1, 3), 4, 64).is_err());
    }

    #[test]
    fn truncation_error_is_geometric() {
        let spec = IfsSpec::cantor_plus_one();
        let w = Word::constant(2, 40);
        let e = |k: usize| point_of_word(&spec, &w, k, 400).unwrap().err().log2();
        for k in [3usize, 10, 30] {
            let step = e(k + 1) - e(k);
            assert!((step - (1.0f64 / 3.0).log2()).abs() < 1e-6, "{step}");
        }
    }

    #[test]
    fn square_ifs_of_cantor() {
        let sq = square_ifs(&IfsSpec::cantor_plus_one()).unwrap();
        assert_eq!(sq.r, q("1/9"));
        assert_eq!(sq.alphabet_size(), 4);
        assert_eq!(sq.conv_hull(), (q("1"), q("2")));
        let rep = validate_ifs(&sq).unwrap();
        assert!(rep.separation_ok);
    }

    #[test]
    fn kappa_helper_picks_the_middle_gap() {
        let spec = IfsSpec::cantor_plus_one();
        assert_eq!(suggest_kappa(&spec, 1).unwrap(), q("1/2"));
        assert_eq!(suggest_kappa(&spec, 3).unwrap(), q("1/2"));
    }

    #[test]
    fn locate_points() {
        let spec = IfsSpec::cantor_plus_one();
        assert_eq!(locate(&spec, &q("7/5"), 50), Location::Outside { depth: 1 });
        assert!(matches!(locate(&spec, &q("1"), 30), Location::Undecided { .. }));
        assert_eq!(locate(&spec, &q("3"), 10), Location::Outside { depth: 0 });
    }

    #[test]
    fn word_parsing() {
        assert_eq!(Word::parse("2,2,1").unwrap(), Word::new(vec![2, 2, 1]));
        assert_eq!(Word::parse("221").unwrap(), Word::new(vec![2, 2, 1]));
        assert_eq!(Word::parse("").unwrap(), Word::empty());
        assert_eq!(Word::new(vec![1, 2]).to_string(), "1,2");
    }
}
