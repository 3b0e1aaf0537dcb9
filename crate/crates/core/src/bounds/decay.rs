//! Monte Carlo decay of `|int e(l (f_n - f_m)) d mu_c|` and the five
//! explicit decay terms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::constants::ConstantsBundle;
use super::words::{linear_fit, LinearFit};
use crate::equidist::unit_phase;
use crate::error::{config, Result};
use crate::ifs::{IfsSpec, Word};
use crate::par::{self, Exec};
use crate::precision::DEFAULT_TOL;
use crate::sampling::{Depth, OrbitSampler};
use crate::sequences::SequenceFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub l: i64,
    pub schedule: Vec<u32>,
    /// `m = n - lag`.
    pub lag: u32,
    pub samples: usize,
    pub seed: u64,
    pub replicates: usize,
    pub tol: f64,
    pub depth: Depth,
    #[serde(skip, default)]
    pub exec: Exec,
}

impl DecayConfig {
    pub fn new(l: i64, schedule: Vec<u32>, samples: usize, seed: u64) -> Self {
        DecayConfig {
            l,
            schedule,
            lag: 1,
            samples,
            seed,
            replicates: 20,
            tol: DEFAULT_TOL,
            depth: Depth::Auto,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: u32,
    pub m: u32,
    pub re: f64,
    pub im: f64,
    /// Modulus of the complex sample mean.
    pub modulus: f64,
    /// Standard error of the complex mean across replicate batches.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    pub fit: LinearFit,
    pub gamma_hat: f64,
    /// `slope + 2 stderr < 0`.
    pub significant: bool,
    pub theoretical_gamma: Option<f64>,
    pub samples: usize,
    pub replicates: usize,
    pub depth: usize,
    pub frac_bits: u32,
    pub max_err: f64,
}

impl DecayReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,m,modulus,stderr,re,im\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.n, r.m, r.modulus, r.stderr, r.re, r.im
            ));
        }
        s
    }
}

/// Estimates the conditioned integral for each `n` in the schedule and fits
/// `log modulus` against `n`.
pub fn fourier_decay(
    spec: &IfsSpec,
    family: &SequenceFamily,
    prefix: &Word,
    cfg: &DecayConfig,
    theoretical_gamma: Option<f64>,
) -> Result<DecayReport> {
    if cfg.l == 0 {
        return config("decay needs l != 0");
    }
    if cfg.schedule.is_empty() || cfg.schedule.iter().any(|&n| n <= cfg.lag) {
        return config("every scheduled n must exceed the lag");
    }
    if cfg.lag == 0 {
        return config("lag must be positive");
    }
    if cfg.replicates < 2 || cfg.samples < cfg.replicates {
        return config("need at least 2 replicates and one sample per replicate");
    }
    let big_n = *cfg.schedule.iter().max().unwrap();
    let sampler = OrbitSampler::new(spec, family, prefix, cfg.depth, big_n, cfg.tol)?;
    let per_sample = par::try_map_indexed(cfg.exec, cfg.samples, |i| -> Result<(Vec<Complex64>, f64)> {
        let (_, orbit) = sampler.orbit(cfg.seed, i as u64)?;
        let v = orbit.certified_values()?;
        let z = cfg
            .schedule
            .iter()
            .map(|&n| {
                let (a, b) = (v[n as usize - 1], v[(n - cfg.lag) as usize - 1]);
                unit_phase(cfg.l, a - b)
            })
            .collect();
        Ok((z, orbit.max_err))
    })?;
    let max_err = per_sample.iter().map(|s| s.1).fold(0.0, f64::max);
    let r = cfg.replicates;
    let rows: Vec<DecayRow> = cfg
        .schedule
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            // contiguous batches; the remainder goes to the last one
            let mut batch = vec![(Complex64::new(0.0, 0.0), 0usize); r];
            let per = cfg.samples / r;
            for (i, s) in per_sample.iter().enumerate() {
                let b = (i / per).min(r - 1);
                batch[b].0 += s.0[j];
                batch[b].1 += 1;
            }
            let total: Complex64 = batch.iter().map(|b| b.0).sum();
            let mean = total / cfg.samples as f64;
            let means: Vec<Complex64> = batch.iter().map(|b| b.0 / b.1 as f64).collect();
            let var = means.iter().map(|b| (b - mean).norm_sqr()).sum::<f64>() / (r - 1) as f64;
            DecayRow {
                n,
                m: n - cfg.lag,
                re: mean.re,
                im: mean.im,
                modulus: mean.norm(),
                stderr: (var / r as f64).sqrt(),
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.modulus > 0.0)
        .map(|r| (r.n as f64, r.modulus.ln()))
        .collect();
    let fit = linear_fit(&pts);
    Ok(DecayReport {
        gamma_hat: fit.slope.exp(),
        significant: fit.slope + 2.0 * fit.slope_stderr < 0.0,
        fit,
        rows,
        theoretical_gamma,
        samples: cfg.samples,
        replicates: r,
        depth: sampler.depth(),
        frac_bits: sampler.frac_bits(),
        max_err,
    })
}

/// Runs the experiment on the bundle's prefix and reports its `gamma`.
pub fn fourier_decay_with_bundle(
    spec: &IfsSpec,
    family: &SequenceFamily,
    bundle: &ConstantsBundle,
    cfg: &DecayConfig,
) -> Result<DecayReport> {
    fourier_decay(spec, family, &bundle.prefix, cfg, Some(bundle.theoretical_gamma))
}

/// The five terms and their logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayTerms {
    pub n: u32,
    pub m: u64,
    pub terms: [f64; 5],
    pub logs: [f64; 5],
}

/// (1) `e^(2M(-h+d)) / r^(M+2dn)`, (2) `e^(M(-h+d)) / (r^(2M+2dn+floor(dM)) x0^n)`,
/// (3) `e^(2M(-h+d)) / (r^(3M+2dn) x0^n)`, (4) `r^(dn)`, (5) `e^(-eta d M)`.
pub fn eval_decay_terms(bundle: &ConstantsBundle, m: u64, n: u32) -> DecayTerms {
    let (mf, nf, d) = (m as f64, n as f64, bundle.delta_kappa);
    let lr = bundle.log_r();
    let rate = -bundle.entropy + d;
    let lx0 = bundle.x0.ln();
    let logs = [
        2.0 * mf * rate - (mf + 2.0 * d * nf) * lr,
        mf * rate - (2.0 * mf + 2.0 * d * nf + (d * mf).floor()) * lr - nf * lx0,
        2.0 * mf * rate - (3.0 * mf + 2.0 * d * nf) * lr - nf * lx0,
        d * nf * lr,
        match bundle.eta {
            Some(eta) => -eta * d * mf,
            None => f64::NEG_INFINITY,
        },
    ];
    DecayTerms {
        n,
        m,
        terms: logs.map(f64::exp),
        logs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSweep {
    pub rows: Vec<DecayTerms>,
    /// Per term, `max_n term / Gamma^(n/2)`.
    pub k_fitted: [f64; 5],
    /// Per term, the fitted constant of the upper half of the grid does not
    /// exceed that of the lower half.
    pub stable: [bool; 5],
    /// Per term, non-increasing from `monotone_from` on.
    pub monotone: [bool; 5],
    pub monotone_from: u32,
    /// `max_n e^(-eta d M) / e^(eta d log(1+kappa) n / (2 log r))`.
    pub term5_ratio_max: f64,
}

pub fn decay_term_sweep(
    bundle: &ConstantsBundle,
    grid: &[(u32, u64)],
    monotone_from: u32,
) -> Result<TermSweep> {
    if grid.len() < 2 {
        return config("term sweep needs at least two grid points");
    }
    let rows: Vec<DecayTerms> = grid.iter().map(|&(n, m)| eval_decay_terms(bundle, m, n)).collect();
    let lg = bundle.gamma_kappa.ln();
    let ratio = |t: &DecayTerms, j: usize| (t.logs[j] - t.n as f64 * lg / 2.0).exp();
    let half = rows.len() / 2;
    let mut k_fitted = [0.0; 5];
    let mut stable = [true; 5];
    let mut monotone = [true; 5];
    for j in 0..5 {
        let lo = rows[..half].iter().map(|t| ratio(t, j)).fold(0.0, f64::max);
        let hi = rows[half..].iter().map(|t| ratio(t, j)).fold(0.0, f64::max);
        k_fitted[j] = lo.max(hi);
        stable[j] = hi <= lo * (1.0 + 1e-12);
        let tail: Vec<f64> = rows
            .iter()
            .filter(|t| t.n >= monotone_from)
            .map(|t| t.logs[j])
            .collect();
        monotone[j] = tail.windows(2).all(|w| w[1] <= w[0]);
    }
    let term5_ratio_max = match bundle.eta {
        Some(eta) => {
            let c = eta * bundle.delta_kappa * (1.0 + bundle.kappa).ln() / (2.0 * bundle.log_r());
            rows.iter()
                .map(|t| (t.logs[4] - c * t.n as f64).exp())
                .fold(0.0, f64::max)
        }
        None => 0.0,
    };
    Ok(TermSweep {
        rows,
        k_fitted,
        stable,
        monotone,
        monotone_from,
        term5_ratio_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::constants::{compute_constants, BundleOptions};
    use crate::rational::parse_rational;

    fn bundle() -> ConstantsBundle {
        compute_constants(
            &IfsSpec::cantor_plus_one(),
            &BundleOptions::new(parse_rational("2/5").unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn term_four_at_one_hundred() {
        let mut b = bundle();
        b.delta_kappa = 0.01;
        let t = eval_decay_terms(&b, 36, 100);
        assert!((t.terms[3] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_measure_does_not_decay() {
        let spec = IfsSpec::cantor_plus_one()
            .with_probs(vec![parse_rational("1").unwrap(), parse_rational("0").unwrap()])
            .unwrap();
        let cfg = DecayConfig::new(1, vec![5, 10, 15], 200, 1);
        let rep = fourier_decay(&spec, &SequenceFamily::PurePower, &Word::constant(2, 5), &cfg, None)
            .unwrap();
        for r in &rep.rows {
            assert!((r.modulus - 1.0).abs() < 1e-12);
        }
        assert!(!rep.significant);
    }

    #[test]
    fn conjugate_frequency() {
        let spec = IfsSpec::cantor_plus_one();
        let c = Word::constant(2, 5);
        let a = fourier_decay(&spec, &SequenceFamily::PurePower, &c, &DecayConfig::new(1, vec![6, 9], 400, 5), None)
            .unwrap();
        let b = fourier_decay(&spec, &SequenceFamily::PurePower, &c, &DecayConfig::new(-1, vec![6, 9], 400, 5), None)
            .unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!((x.modulus - y.modulus).abs() < 1e-12);
            assert!((x.im + y.im).abs() < 1e-12);
        }
    }
}
