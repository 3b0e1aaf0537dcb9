//! Star discrepancy, Weyl sums and Monte Carlo estimates of the squared
//! Weyl-sum series over a conditioned self-similar measure.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::ifs::{IfsSpec, Word};
use crate::par::{self, Exec};
use crate::sampling::{Depth, OrbitSampler};
use crate::sequences::SequenceFamily;

/// Inputs above this size are refused by the quadratic oracle.
pub const BRUTE_FORCE_LIMIT: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscrepancyMethod {
    SortedFormula,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub n: usize,
    pub d_star: f64,
    pub method: DiscrepancyMethod,
}

fn check_unit(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return config("discrepancy of an empty sequence");
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v < 1.0)) {
        return Err(Error::Domain(format!("value {v} outside [0, 1)")));
    }
    Ok(())
}

/// `max_i max(i/N - y_(i), y_(i) - (i-1)/N)` over the sorted values.
pub fn star_discrepancy(values: &[f64]) -> Result<DiscrepancyReport> {
    check_unit(values)?;
    let mut y = values.to_vec();
    y.sort_by(f64::total_cmp);
    let n = y.len() as f64;
    let d = y
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let i = i as f64;
            ((i + 1.0) / n - v).max(v - i / n)
        })
        .fold(0.0, f64::max);
    Ok(DiscrepancyReport {
        n: values.len(),
        d_star: d,
        method: DiscrepancyMethod::SortedFormula,
    })
}

/// `sup_v |#{y_i < v}/N - v|` over the critical set `{y_i} u {y_i+}`, in `O(N^2)`.
pub fn star_discrepancy_bruteforce(values: &[f64]) -> Result<DiscrepancyReport> {
    check_unit(values)?;
    if values.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::Resource(format!(
            "brute-force discrepancy limited to {BRUTE_FORCE_LIMIT} points"
        )));
    }
    let n = values.len() as f64;
    let mut d = 0.0f64;
    for &v in values {
        // [0, v) excludes v; [0, v+] includes every y_i <= v
        let below = values.iter().filter(|&&y| y < v).count() as f64;
        let upto = values.iter().filter(|&&y| y <= v).count() as f64;
        d = d.max((below / n - v).abs()).max((upto / n - v).abs());
    }
    Ok(DiscrepancyReport {
        n: values.len(),
        d_star: d,
        method: DiscrepancyMethod::BruteForce,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylSumResult {
    pub l: i64,
    pub n: usize,
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
}

impl WeylSumResult {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `e(l y) = exp(2 pi i l y)` with the phase reduced mod 1 first.
pub fn unit_phase(l: i64, y: f64) -> Complex64 {
    let t = (l as f64 * y).rem_euclid(1.0);
    let (s, c) = (TAU * t).sin_cos();
    Complex64::new(c, s)
}

/// `(1/N) sum_n e(l y_n)`.
pub fn weyl_sum(values: &[f64], l: i64) -> Result<WeylSumResult> {
    if l == 0 {
        return config("Weyl sums need a non-zero frequency");
    }
    if values.is_empty() {
        return config("Weyl sum of an empty sequence");
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v < 1.0)) {
        return Err(Error::Domain(format!("value {v} outside [0, 1)")));
    }
    let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
    for &y in values {
        let z = unit_phase(l, y);
        re.add(z.re);
        im.add(z.im);
    }
    let n = values.len() as f64;
    let value = Complex64::new(re.value() / n, im.value() / n);
    Ok(WeylSumResult {
        l,
        n: values.len(),
        re: value.re,
        im: value.im,
        modulus: value.norm(),
    })
}

/// Running mean and variance (Welford); identical inputs give variance exactly 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelTerm {
    pub n: u32,
    /// Mean over samples of `|(1/N) sum_(n<=N) e(l f_n(x))|^2`.
    pub term: f64,
    pub stderr: f64,
    /// `sum (1/N') term(N')` over the schedule up to this `N`.
    pub partial_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelSeriesEstimate {
    pub schedule: Vec<u32>,
    pub terms: Vec<DelTerm>,
    pub samples: usize,
    pub depth: usize,
    pub frac_bits: u32,
    pub max_err: f64,
}

impl DelSeriesEstimate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,term,stderr,partial_sum\n");
        for t in &self.terms {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                t.n, t.term, t.stderr, t.partial_sum
            ));
        }
        out
    }

    /// True when every step either decreases or rises by less than
    /// two combined standard errors.
    pub fn trend_decreasing(&self) -> bool {
        self.terms.windows(2).all(|w| {
            let slack = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            w[1].term <= w[0].term + slack
        })
    }
}

/// Common settings of the Monte Carlo drivers.
#[derive(Debug, Clone)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub depth: Depth,
    pub exec: Exec,
}

impl MonteCarlo {
    pub fn new(samples: usize, seed: u64) -> Self {
        MonteCarlo {
            samples,
            seed,
            tol: crate::precision::DEFAULT_TOL,
            depth: Depth::Auto,
            exec: Exec::default(),
        }
    }
}

/// Estimates `int |S_N|^2 d mu_c` for each `N` in `schedule`.
pub fn del_series_estimate(
    spec: &IfsSpec,
    family: &SequenceFamily,
    prefix: &Word,
    l: i64,
    schedule: &[u32],
    mc: &MonteCarlo,
) -> Result<DelSeriesEstimate> {
    if l == 0 {
        return config("the series needs a non-zero frequency");
    }
    if schedule.is_empty() || schedule.contains(&0) {
        return config("schedule must be a non-empty list of positive N");
    }
    if mc.samples == 0 {
        return config("samples must be positive");
    }
    let big_n = *schedule.iter().max().unwrap();
    let sampler = OrbitSampler::new(spec, family, prefix, mc.depth, big_n, mc.tol)?;
    let per_sample = par::try_map_indexed(mc.exec, mc.samples, |i| -> Result<(Vec<f64>, f64)> {
        let (_, orbit) = sampler.orbit(mc.seed, i as u64)?;
        let values = orbit.certified_values()?;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut prefix_sums = Vec::with_capacity(values.len());
        for &y in values {
            acc += unit_phase(l, y);
            prefix_sums.push(acc);
        }
        let sq = schedule
            .iter()
            .map(|&n| (prefix_sums[n as usize - 1] / n as f64).norm_sqr())
            .collect();
        Ok((sq, orbit.max_err))
    })?;
    let max_err = per_sample.iter().map(|s| s.1).fold(0.0, f64::max);
    let mut partial = 0.0;
    let terms = schedule
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let mut st = RunningStats::default();
            for s in &per_sample {
                st.push(s.0[j]);
            }
            partial += st.mean() / n as f64;
            DelTerm {
                n,
                term: st.mean(),
                stderr: st.stderr(),
                partial_sum: partial,
            }
        })
        .collect();
    Ok(DelSeriesEstimate {
        schedule: schedule.to_vec(),
        terms,
        samples: mc.samples,
        depth: sampler.depth(),
        frac_bits: sampler.frac_bits(),
        max_err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStatistics {
    pub word_head: String,
    pub d_star: Vec<f64>,
    /// `weyl[j][k]`: modulus for frequency `ls[j]` at `ns[k]`.
    pub weyl: Vec<Vec<f64>>,
    pub max_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistributionReport {
    pub ns: Vec<u32>,
    pub ls: Vec<i64>,
    pub points: Vec<PointStatistics>,
    pub median_d_star: Vec<f64>,
    /// `median_weyl[j][k]` for frequency `ls[j]` at `ns[k]`.
    pub median_weyl: Vec<Vec<f64>>,
    pub depth: usize,
    pub frac_bits: u32,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Discrepancy and Weyl sums of orbit prefixes at points drawn from `mu_c`.
pub fn equidistribution_experiment(
    spec: &IfsSpec,
    family: &SequenceFamily,
    prefix: &Word,
    ns: &[u32],
    ls: &[i64],
    mc: &MonteCarlo,
) -> Result<EquidistributionReport> {
    if ns.is_empty() || ns.contains(&0) || ls.contains(&0) {
        return config("need positive N values and non-zero frequencies");
    }
    let big_n = *ns.iter().max().unwrap();
    let sampler = OrbitSampler::new(spec, family, prefix, mc.depth, big_n, mc.tol)?;
    let points = par::try_map_indexed(mc.exec, mc.samples, |i| -> Result<PointStatistics> {
        let (word, orbit) = sampler.orbit(mc.seed, i as u64)?;
        let values = orbit.certified_values()?;
        let d_star = ns
            .iter()
            .map(|&n| star_discrepancy(&values[..n as usize]).map(|r| r.d_star))
            .collect::<Result<Vec<_>>>()?;
        let weyl = ls
            .iter()
            .map(|&l| {
                ns.iter()
                    .map(|&n| weyl_sum(&values[..n as usize], l).map(|w| w.modulus))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let head: Vec<String> = word.digits().iter().take(24).map(|d| d.to_string()).collect();
        Ok(PointStatistics {
            word_head: head.join(","),
            d_star,
            weyl,
            max_err: orbit.max_err,
        })
    })?;
    let median_d_star = (0..ns.len())
        .map(|k| median(&points.iter().map(|p| p.d_star[k]).collect::<Vec<_>>()))
        .collect();
    let median_weyl = (0..ls.len())
        .map(|j| {
            (0..ns.len())
                .map(|k| median(&points.iter().map(|p| p.weyl[j][k]).collect::<Vec<_>>()))
                .collect()
        })
        .collect();
    Ok(EquidistributionReport {
        ns: ns.to_vec(),
        ls: ls.to_vec(),
        points,
        median_d_star,
        median_weyl,
        depth: sampler.depth(),
        frac_bits: sampler.frac_bits(),
    })
}
