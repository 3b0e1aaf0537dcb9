//! Anomalously likely words `B(k)` and the filtered set `G_M`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::ifs::{self, Word};
use crate::rational::{self, Rational};

/// Enumerated mode materializes at most this many words.
pub const ENUMERATION_LIMIT: usize = 1 << 20;

/// Sampled filters abort below this acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-3;

fn log_probs(probs: &[Rational]) -> Vec<f64> {
    probs.iter().map(rational::ln).collect()
}

fn entropy_of(probs: &[Rational]) -> f64 {
    ifs::entropy(&probs.iter().map(rational::to_f64).collect::<Vec<_>>())
}

/// `sum_i c_i log p_i >= k (-h + delta)`, the test every caller shares.
fn counts_in_bad_set(counts: &[usize], log_p: &[f64], k: usize, rate: f64) -> bool {
    let mut lp = 0.0;
    for (c, l) in counts.iter().zip(log_p) {
        if *c > 0 {
            lp += *c as f64 * l;
        }
    }
    lp >= k as f64 * rate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadSetMass {
    pub k: usize,
    #[serde(with = "rational")]
    pub mass: Rational,
    pub mass_f64: f64,
    /// `k (-h + delta)`, the log-probability threshold.
    pub log_threshold: f64,
    /// Members, listed only when `|A|^k <= 2^20`.
    pub members: Option<Vec<Word>>,
}

fn compositions(parts: usize, total: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(parts - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn multinomial(counts: &[usize]) -> BigInt {
    let mut acc = BigInt::one();
    let mut seen = 0usize;
    for &c in counts {
        for j in 1..=c {
            acc = acc * BigInt::from(seen + j) / BigInt::from(j);
        }
        seen += c;
    }
    acc
}

/// Exact `mu(B(k))` by grouping words on their digit counts.
pub fn bad_set_mass(probs: &[Rational], k: usize, delta: f64) -> Result<BadSetMass> {
    if k == 0 {
        return config("B(k) needs k >= 1");
    }
    let lp = log_probs(probs);
    let rate = -entropy_of(probs) + delta;
    let mut mass = Rational::zero();
    let mut bad_counts = Vec::new();
    for counts in compositions(probs.len(), k) {
        if counts_in_bad_set(&counts, &lp, k, rate) {
            let mut p = Rational::from_integer(multinomial(&counts));
            for (c, q) in counts.iter().zip(probs) {
                p *= num_traits::pow(q.clone(), *c);
            }
            mass += p;
            bad_counts.push(counts);
        }
    }
    let members = (probs.len() as f64).powi(k as i32) <= ENUMERATION_LIMIT as f64;
    let members = members.then(|| {
        ifs::all_words(probs.len(), k)
            .into_iter()
            .filter(|w| bad_counts.contains(&digit_counts(w, probs.len())))
            .collect()
    });
    Ok(BadSetMass {
        k,
        mass_f64: rational::to_f64(&mass),
        mass,
        log_threshold: k as f64 * rate,
        members,
    })
}

fn digit_counts(word: &Word, alphabet: usize) -> Vec<usize> {
    let mut c = vec![0; alphabet];
    for &d in word.digits() {
        c[d as usize - 1] += 1;
    }
    c
}

/// Monte Carlo estimate of `mu(B(k))` and its standard error.
pub fn bad_set_mass_sampled(
    probs: &[Rational],
    k: usize,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if k == 0 || samples < 2 {
        return config("sampled B(k) needs k >= 1 and at least 2 samples");
    }
    let lp = log_probs(probs);
    let rate = -entropy_of(probs) + delta;
    let hits = (0..samples)
        .filter(|&i| {
            let w = ifs::sample_word(k, probs, seed, i as u64);
            counts_in_bad_set(&digit_counts(&w, probs.len()), &lp, k, rate)
        })
        .count();
    let p = hits as f64 / samples as f64;
    Ok((p, (p * (1.0 - p) / (samples - 1) as f64).sqrt()))
}

/// Least-squares large-deviation rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaFit {
    /// `f64::INFINITY` when every mass on the range is zero.
    pub eta: f64,
    pub vacuous: bool,
    pub k_range: (usize, usize),
    pub masses: Vec<(usize, f64)>,
    /// `mass(k) <= exp(-eta k / 2)` on the whole range.
    pub verified: bool,
    pub violations: Vec<usize>,
}

pub fn fit_eta(probs: &[Rational], delta: f64, k_lo: usize, k_hi: usize) -> Result<EtaFit> {
    if k_lo == 0 || k_hi < k_lo {
        return config(format!("eta fit range {k_lo}..={k_hi} is invalid"));
    }
    let masses = (k_lo..=k_hi)
        .map(|k| bad_set_mass(probs, k, delta).map(|b| (k, b.mass_f64)))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = masses
        .iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|&(k, m)| (k as f64, m.ln()))
        .collect();
    if pts.is_empty() {
        return Ok(EtaFit {
            eta: f64::INFINITY,
            vacuous: true,
            k_range: (k_lo, k_hi),
            masses,
            verified: true,
            violations: vec![],
        });
    }
    let eta = if pts.len() == 1 {
        -pts[0].1 / pts[0].0
    } else {
        -linear_fit(&pts).slope
    };
    let violations: Vec<usize> = masses
        .iter()
        .filter(|&&(k, m)| !(eta > 0.0) || m > (-eta * k as f64 / 2.0).exp())
        .map(|&(k, _)| k)
        .collect();
    Ok(EtaFit {
        eta,
        vacuous: false,
        k_range: (k_lo, k_hi),
        masses,
        verified: violations.is_empty(),
        violations,
    })
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

pub fn linear_fit(pts: &[(f64, f64)]) -> LinearFit {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = pts.iter().map(|p| p.1 - intercept - slope * p.0).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_stderr = if pts.len() > 2 && sxx > 0.0 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LinearFit {
        slope,
        intercept,
        slope_stderr,
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        residuals,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FilterMode {
    Enumerated,
    Sampled { samples: usize, seed: u64 },
    /// A caller-supplied word list (test fixtures, splits).
    Explicit,
}

/// `G_M`: words whose prefixes avoid `B(k)` for every `k` in the window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WordFilter {
    pub m: usize,
    pub delta: f64,
    /// `max(1, floor(delta M))..=M`.
    pub window: (usize, usize),
    pub entropy: f64,
    pub mode: FilterMode,
    #[serde(with = "rational::vec")]
    pub probs: Vec<Rational>,
    /// Accepted words in lexicographic order (enumerated and explicit modes).
    pub words: Option<Vec<Word>>,
    #[serde(with = "opt_rational")]
    pub accepted_mass: Option<Rational>,
    #[serde(with = "opt_rational")]
    pub rejected_mass: Option<Rational>,
    /// `mu(G_M)`, exact or estimated.
    pub acceptance: f64,
    pub acceptance_stderr: f64,
}

mod opt_rational {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::rational::{self, Rational};

    pub fn serialize<S: Serializer>(
        q: &Option<Rational>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match q {
            Some(q) => s.serialize_some(&rational::format_rational(q)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| rational::parse_rational(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub fn filter_window(m: usize, delta: f64) -> (usize, usize) {
    (((delta * m as f64).floor() as usize).max(1), m)
}

impl WordFilter {
    fn base(probs: &[Rational], m: usize, delta: f64, mode: FilterMode) -> Result<WordFilter> {
        if m == 0 {
            return config("G_M needs M >= 1");
        }
        if !(delta > 0.0) {
            return config("G_M needs delta > 0");
        }
        Ok(WordFilter {
            m,
            delta,
            window: filter_window(m, delta),
            entropy: entropy_of(probs),
            mode,
            probs: probs.to_vec(),
            words: None,
            accepted_mass: None,
            rejected_mass: None,
            acceptance: f64::NAN,
            acceptance_stderr: 0.0,
        })
    }

    /// True iff no window prefix of `word` lies in its `B(k)`.
    pub fn membership(&self, word: &Word) -> bool {
        if word.len() < self.m {
            return false;
        }
        if let (FilterMode::Explicit, Some(words)) = (&self.mode, &self.words) {
            return words.binary_search(word).is_ok();
        }
        let lp = log_probs(&self.probs);
        let rate = -self.entropy + self.delta;
        let mut counts = vec![0usize; self.probs.len()];
        for (k, &d) in word.digits()[..self.m].iter().enumerate() {
            counts[d as usize - 1] += 1;
            let k = k + 1;
            if k >= self.window.0 && counts_in_bad_set(&counts, &lp, k, rate) {
                return false;
            }
        }
        true
    }

    pub fn is_enumerated(&self) -> bool {
        self.words.is_some()
    }
}

/// Builds `G_M` in the requested mode.
pub fn filter_g_m(probs: &[Rational], m: usize, delta: f64, mode: FilterMode) -> Result<WordFilter> {
    let mut f = WordFilter::base(probs, m, delta, mode)?;
    match mode {
        FilterMode::Enumerated => {
            if (probs.len() as f64).powi(m as i32) > ENUMERATION_LIMIT as f64 {
                return config(format!(
                    "enumerated G_M needs |A|^M <= 2^20, got {}^{m}",
                    probs.len()
                ));
            }
            enumerate(&mut f);
        }
        FilterMode::Sampled { samples, seed } => {
            if samples < 2 {
                return config("sampled G_M needs at least 2 samples");
            }
            let hits = (0..samples)
                .filter(|&i| f.membership(&ifs::sample_word(m, probs, seed, i as u64)))
                .count();
            let p = hits as f64 / samples as f64;
            f.acceptance = p;
            f.acceptance_stderr = (p * (1.0 - p) / (samples - 1) as f64).sqrt();
            if p < MIN_ACCEPTANCE {
                return Err(Error::Domain(format!(
                    "G_M acceptance {p:.3e} ({hits} of {samples}) is below {MIN_ACCEPTANCE:e}; \
                     window {:?}, entropy {:.6}, delta {delta}",
                    f.window, f.entropy
                )));
            }
        }
        FilterMode::Explicit => return config("explicit filters are built with WordFilter::explicit"),
    }
    Ok(f)
}

impl WordFilter {
    /// A fixture filter holding exactly `words`.
    pub fn explicit(probs: &[Rational], words: Vec<Word>, delta: f64) -> Result<WordFilter> {
        let m = words.first().map(|w| w.len()).unwrap_or(1);
        if words.iter().any(|w| w.len() != m) {
            return config("explicit filter words must share one length");
        }
        let mut f = WordFilter::base(probs, m, delta, FilterMode::Explicit)?;
        let mut words = words;
        words.sort();
        words.dedup();
        let accepted: Rational = words.iter().map(|w| prob(probs, w)).sum();
        f.acceptance = rational::to_f64(&accepted);
        f.rejected_mass = Some(Rational::one() - &accepted);
        f.accepted_mass = Some(accepted);
        f.words = Some(words);
        Ok(f)
    }
}

fn prob(probs: &[Rational], w: &Word) -> Rational {
    w.digits().iter().map(|&d| probs[d as usize - 1].clone()).product()
}

/// Depth-first walk over the word tree: a bad window prefix rejects its whole
/// subtree at once; surviving leaves are collected.
fn enumerate(f: &mut WordFilter) {
    // p_i = q_i / D over a common denominator D
    let d = f
        .probs
        .iter()
        .fold(BigInt::one(), |acc, p| acc.lcm(p.denom()));
    let q: Vec<BigInt> = f.probs.iter().map(|p| p.numer() * (&d / p.denom())).collect();
    let lp = log_probs(&f.probs);
    let rate = -f.entropy + f.delta;
    let a = f.probs.len();
    let m = f.m;
    let mut accepted_num = BigInt::zero();
    let mut rejected_num = BigInt::zero();
    let d_pow: Vec<BigInt> = (0..=m).map(|k| num_traits::pow(d.clone(), k)).collect();
    let mut words = Vec::new();
    let mut digits = Vec::with_capacity(m);
    let mut counts = vec![0usize; a];
    let mut nums = vec![BigInt::one()];
    fn walk(
        f: &WordFilter,
        ctx: (&[BigInt], &[f64], f64, &[BigInt]),
        digits: &mut Vec<u16>,
        counts: &mut Vec<usize>,
        nums: &mut Vec<BigInt>,
        acc: (&mut BigInt, &mut BigInt),
        words: &mut Vec<Word>,
    ) {
        let (q, lp, rate, d_pow) = ctx;
        let k = digits.len();
        let (accepted, rejected) = acc;
        if k > 0 && k >= f.window.0 && counts_in_bad_set(counts, lp, k, rate) {
            *rejected += &nums[k] * &d_pow[f.m - k];
            return;
        }
        if k == f.m {
            *accepted += &nums[k];
            words.push(Word(digits.clone()));
            return;
        }
        for i in 0..q.len() {
            if q[i].is_zero() {
                continue;
            }
            digits.push(i as u16 + 1);
            counts[i] += 1;
            let next = &nums[k] * &q[i];
            nums.push(next);
            walk(f, ctx, digits, counts, nums, (&mut *accepted, &mut *rejected), words);
            nums.pop();
            counts[i] -= 1;
            digits.pop();
        }
    }
    walk(
        f,
        (&q, &lp, rate, &d_pow),
        &mut digits,
        &mut counts,
        &mut nums,
        (&mut accepted_num, &mut rejected_num),
        &mut words,
    );
    let denom = d_pow[m].clone();
    let accepted = Rational::new(accepted_num, denom.clone());
    let rejected = Rational::new(rejected_num, denom);
    f.acceptance = rational::to_f64(&accepted);
    f.accepted_mass = Some(accepted);
    f.rejected_mass = Some(rejected);
    f.words = Some(words);
}

/// Rejected mass against the union bound over the window and the fitted rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedMassCheck {
    pub rejected: f64,
    /// `sum_k mu(B(k))` over the window.
    pub union_bound: f64,
    /// `sum_k exp(-eta k / 2)` over the window; 0 when vacuous.
    pub eta_bound: f64,
    pub pass: bool,
}

pub fn check_rejected_mass(filter: &WordFilter, eta: &EtaFit) -> Result<RejectedMassCheck> {
    let rejected = match &filter.rejected_mass {
        Some(r) => rational::to_f64(r),
        None => 1.0 - filter.acceptance,
    };
    let mut union = Rational::zero();
    for k in filter.window.0..=filter.window.1 {
        union += bad_set_mass(&filter.probs, k, filter.delta)?.mass;
    }
    let union_bound = rational::to_f64(&union);
    let eta_bound = if eta.vacuous {
        0.0
    } else {
        (filter.window.0..=filter.window.1)
            .map(|k| (-eta.eta * k as f64 / 2.0).exp())
            .sum()
    };
    let exact_ok = match &filter.rejected_mass {
        Some(r) if filter.mode == FilterMode::Enumerated => r <= &union,
        _ => rejected <= union_bound + 4.0 * filter.acceptance_stderr,
    };
    let in_fit = filter.window.0 >= eta.k_range.0 && filter.window.1 <= eta.k_range.1;
    let eta_ok = !in_fit || !eta.verified || union_bound <= eta_bound * (1.0 + 1e-12);
    Ok(RejectedMassCheck {
        rejected,
        union_bound,
        eta_bound,
        pass: exact_ok && eta_ok && !union.is_negative(),
    })
}

pub fn accepted_mass_f64(filter: &WordFilter) -> f64 {
    filter
        .accepted_mass
        .as_ref()
        .map(rational::to_f64)
        .unwrap_or(filter.acceptance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn probs(v: &[&str]) -> Vec<Rational> {
        v.iter().map(|s| parse_rational(s).unwrap()).collect()
    }

    #[test]
    fn uniform_bad_sets_are_empty() {
        let p = probs(&["1/2", "1/2"]);
        for k in 1..30 {
            assert!(bad_set_mass(&p, k, 0.01).unwrap().mass.is_zero());
        }
        let fit = fit_eta(&p, 0.05, 4, 40).unwrap();
        assert!(fit.vacuous && fit.eta.is_infinite());
    }

    #[test]
    fn skewed_mass_at_four() {
        let p = probs(&["4/5", "1/5"]);
        let b = bad_set_mass(&p, 4, 0.05).unwrap();
        assert_eq!(b.mass, parse_rational("0.4096").unwrap());
        assert_eq!(b.members.unwrap(), vec![Word::constant(1, 4)]);
        assert!((b.log_threshold.exp() - 0.1651).abs() < 1e-4);
    }

    #[test]
    fn members_match_mass() {
        let p = probs(&["3/5", "1/4", "3/20"]);
        for k in 1..7 {
            let b = bad_set_mass(&p, k, 0.1).unwrap();
            let total: Rational = b.members.unwrap().iter().map(|w| prob(&p, w)).sum();
            assert_eq!(total, b.mass);
        }
    }

    #[test]
    fn multinomial_values() {
        assert_eq!(multinomial(&[2, 2]), BigInt::from(6));
        assert_eq!(multinomial(&[1, 2, 3]), BigInt::from(60));
    }

    #[test]
    fn uniform_filter_accepts_everything() {
        let p = probs(&["1/2", "1/2"]);
        let f = filter_g_m(&p, 6, 0.05, FilterMode::Enumerated).unwrap();
        assert_eq!(f.words.as_ref().unwrap().len(), 64);
        assert_eq!(f.acceptance, 1.0);
        assert!(f.rejected_mass.unwrap().is_zero());
    }

    #[test]
    fn window_is_clamped() {
        assert_eq!(filter_window(8, 0.05), (1, 8));
        assert_eq!(filter_window(100, 0.05), (5, 100));
    }

    #[test]
    fn sampled_acceptance_close_to_exact() {
        let p = probs(&["4/5", "1/5"]);
        let exact = filter_g_m(&p, 8, 0.05, FilterMode::Enumerated).unwrap();
        let s = filter_g_m(&p, 8, 0.05, FilterMode::Sampled { samples: 20_000, seed: 3 }).unwrap();
        assert!((s.acceptance - exact.acceptance).abs() < 5.0 * s.acceptance_stderr.max(1e-3));
    }

    #[test]
    fn low_acceptance_aborts() {
        // every word starting with the likely digit is rejected at k = 1
        let p = probs(&["9999/10000", "1/10000"]);
        let err = filter_g_m(&p, 8, 1e-4, FilterMode::Sampled { samples: 1000, seed: 1 });
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn fit_line() {
        let f = linear_fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]);
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
        assert!((f.r_squared - 1.0).abs() < 1e-15);
    }
}
