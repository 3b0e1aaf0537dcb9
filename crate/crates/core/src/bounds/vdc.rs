//! Numerical check of the first-derivative oscillatory-integral bound
//! `|int_a^b e(phi)| <= 1 / gamma` when `|phi'| >= gamma` and `phi'` is monotone.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::wm::{MapF64, PhaseFn};
use crate::error::{config, Error, Result};
use crate::ifs::{cylinder, validate_ifs, wedge_depth, IfsSpec, Word};
use crate::par::{self, Exec};
use crate::quadrature::{refine_complex, GaussLegendre};
use crate::rational;
use crate::sequences::{HypothesisCertificate, SequenceFamily};

pub trait Phase: Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

/// `slope x + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPhase {
    pub slope: f64,
    pub offset: f64,
}

impl Phase for LinearPhase {
    fn value(&self, x: f64) -> f64 {
        self.slope * x + self.offset
    }
    fn d1(&self, _: f64) -> f64 {
        self.slope
    }
    fn d2(&self, _: f64) -> f64 {
        0.0
    }
}

/// `c x^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPhase {
    pub c: f64,
}

impl Phase for QuadraticPhase {
    fn value(&self, x: f64) -> f64 {
        self.c * x * x
    }
    fn d1(&self, x: f64) -> f64 {
        2.0 * self.c * x
    }
    fn d2(&self, _: f64) -> f64 {
        2.0 * self.c
    }
}

/// Quadrature settings for oscillatory integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatoryQuadrature {
    pub order: usize,
    pub tol: f64,
    pub max_panels: usize,
    /// Grid used to sample `phi'` and `phi''`.
    pub probe_points: usize,
}

impl Default for OscillatoryQuadrature {
    fn default() -> Self {
        OscillatoryQuadrature {
            order: 16,
            tol: 1e-12,
            max_panels: 1 << 20,
            probe_points: 1025,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VdcOutcome {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    pub gamma: f64,
    pub bound: f64,
    pub pass: bool,
    pub quad_delta: f64,
    pub converged: bool,
    /// Sampled `min |phi'|`, which must dominate `gamma`.
    pub observed_min_derivative: f64,
}

impl VdcOutcome {
    pub fn integral(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Integrates `e(phi)` on `[a, b]` and compares with `1 / gamma`.
///
/// Errors with `Flagged` when `phi''` changes sign on the probe grid.
pub fn vdc_integral(
    phase: &dyn Phase,
    a: f64,
    b: f64,
    gamma: f64,
    q: &OscillatoryQuadrature,
) -> Result<VdcOutcome> {
    if !(b > a) || !(gamma > 0.0) {
        return config("vdc needs a < b and gamma > 0");
    }
    let mut max_d1: f64 = 0.0;
    let mut min_d1 = f64::INFINITY;
    let (mut pos, mut neg) = (false, false);
    let mut scale: f64 = 0.0;
    let probe: Vec<(f64, f64)> = (0..q.probe_points)
        .map(|i| {
            let x = a + (b - a) * i as f64 / (q.probe_points - 1) as f64;
            (phase.d1(x), phase.d2(x))
        })
        .collect();
    for &(d1, d2) in &probe {
        max_d1 = max_d1.max(d1.abs());
        min_d1 = min_d1.min(d1.abs());
        scale = scale.max(d2.abs());
    }
    let noise = scale * 1e-9;
    for &(_, d2) in &probe {
        pos |= d2 > noise;
        neg |= d2 < -noise;
    }
    if pos && neg {
        return Err(Error::Flagged(
            "phi' is not monotone on the interval (phi'' changes sign)".into(),
        ));
    }
    let rule = GaussLegendre::new(q.order);
    let start = ((8.0 * max_d1 * (b - a)).ceil() as usize).max(4);
    let f = |x: f64| {
        let (s, c) = (std::f64::consts::TAU * phase.value(x).rem_euclid(1.0)).sin_cos();
        Complex64::new(c, s)
    };
    let r = refine_complex(&rule, &f, a, b, start, q.max_panels, q.tol);
    let modulus = r.value.norm();
    Ok(VdcOutcome {
        re: r.value.re,
        im: r.value.im,
        modulus,
        gamma,
        bound: 1.0 / gamma,
        pass: modulus <= 1.0 / gamma,
        quad_delta: r.delta,
        converged: r.converged,
        observed_min_derivative: min_d1,
    })
}

/// `l (F(phi_(ca)(x)) - F(phi_(cb)(x)))` with `F = f_n - f_m`.
#[derive(Debug, Clone)]
pub struct WordPairPhase {
    pa: MapF64,
    pb: MapF64,
    f: PhaseFn,
    l: f64,
}

impl Phase for WordPairPhase {
    fn value(&self, x: f64) -> f64 {
        let ya = self.pa.scale * x + self.pa.offset;
        let yb = self.pb.scale * x + self.pb.offset;
        self.l * (self.f.difference_derivs(ya)[0] - self.f.difference_derivs(yb)[0])
    }
    fn d1(&self, x: f64) -> f64 {
        let ya = self.pa.scale * x + self.pa.offset;
        let yb = self.pb.scale * x + self.pb.offset;
        self.l
            * (self.pa.scale * self.f.difference_derivs(ya)[1]
                - self.pb.scale * self.f.difference_derivs(yb)[1])
    }
    fn d2(&self, x: f64) -> f64 {
        let ya = self.pa.scale * x + self.pa.offset;
        let yb = self.pb.scale * x + self.pb.offset;
        self.l
            * (self.pa.scale.powi(2) * self.f.difference_derivs(ya)[2]
                - self.pb.scale.powi(2) * self.f.difference_derivs(yb)[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub a: Word,
    pub b: Word,
    /// `|a ^ b|`, the common prefix length.
    pub common: usize,
    pub outcome: VdcOutcome,
    /// The structural lower bound is dominated by the sampled `min |phi'|`.
    pub gamma_sound: bool,
}

/// One word pair through the full IFS pipeline.
#[derive(Debug, Clone)]
pub struct PairSetup<'a> {
    pub spec: &'a IfsSpec,
    pub family: &'a SequenceFamily,
    pub cert: &'a HypothesisCertificate,
    pub prefix: &'a Word,
    pub n: u32,
    pub m: u32,
    pub l: i64,
}

/// `c0 C3 |l| r^(2|c| + M + |a ^ b|) x0^(n-2)`, `x0 = inf I_c`.
pub fn pair_gamma(s: &PairSetup<'_>, depth: usize, common: usize) -> Result<f64> {
    let rep = validate_ifs(s.spec)?;
    let c0 = rational::to_f64(&rep.gap_min);
    let x0 = rational::to_f64(&cylinder(s.spec, s.prefix).x0);
    let r = s.spec.r_f64().abs();
    let exp = (2 * s.prefix.len() + depth + common) as i32;
    Ok(c0 * s.cert.c3 * s.l.unsigned_abs() as f64 * r.powi(exp) * x0.powi(s.n as i32 - 2))
}

pub fn vdc_check(s: &PairSetup<'_>, a: &Word, b: &Word, q: &OscillatoryQuadrature) -> Result<PairCheck> {
    if a.len() != b.len() || a.is_empty() {
        return config("vdc pair needs two words of one positive length");
    }
    a.check(s.spec)?;
    b.check(s.spec)?;
    let rep = validate_ifs(s.spec)?;
    if !rep.separation_ok {
        return config("vdc needs separated first-level images");
    }
    if !s.cert.all_pass() {
        return config("vdc needs a passing hypothesis certificate");
    }
    let common = wedge_depth(a, b)? - 1;
    let c = cylinder(s.spec, s.prefix);
    let f = PhaseFn::new(
        s.family,
        s.n,
        s.m,
        s.l,
        rational::to_f64(&c.x0),
        rational::to_f64(&c.x1),
        1e-10,
    )?;
    if f.backend() != super::wm::Backend::F64 {
        return Err(Error::Precision(format!(
            "word-pair phases for n = {} exceed machine precision",
            s.n
        )));
    }
    let phase = WordPairPhase {
        pa: MapF64::new(s.spec, &s.prefix.concat(a)),
        pb: MapF64::new(s.spec, &s.prefix.concat(b)),
        f,
        l: s.l as f64,
    };
    let gamma = pair_gamma(s, a.len(), common)?;
    let (lo, hi) = s.spec.conv_hull();
    let outcome = vdc_integral(&phase, rational::to_f64(&lo), rational::to_f64(&hi), gamma, q)?;
    Ok(PairCheck {
        a: a.clone(),
        b: b.clone(),
        common,
        gamma_sound: outcome.observed_min_derivative >= gamma,
        outcome,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VdcBatch {
    pub pairs: Vec<PairCheck>,
    pub all_pass: bool,
    pub all_converged: bool,
    pub all_gamma_sound: bool,
}

/// `count` random distinct pairs of depth-`depth` words, seeded per pair.
pub fn vdc_batch(
    s: &PairSetup<'_>,
    depth: usize,
    count: usize,
    seed: u64,
    exec: Exec,
    q: &OscillatoryQuadrature,
) -> Result<VdcBatch> {
    let alphabet = s.spec.alphabet_size() as u16;
    if depth == 0 || (alphabet as f64).powi(depth as i32) < 2.0 {
        return config("vdc batch needs at least two distinct words");
    }
    let pairs = par::try_map_indexed(exec, count, |i| -> Result<PairCheck> {
        use rand::Rng;
        let mut rng = crate::ifs::stream_rng(seed, i as u64);
        loop {
            let a = Word((0..depth).map(|_| rng.random_range(1..=alphabet)).collect());
            let b = Word((0..depth).map(|_| rng.random_range(1..=alphabet)).collect());
            if a != b {
                return vdc_check(s, &a, &b, q);
            }
        }
    })?;
    Ok(VdcBatch {
        all_pass: pairs.iter().all(|p| p.outcome.pass),
        all_converged: pairs.iter().all(|p| p.outcome.converged),
        all_gamma_sound: pairs.iter().all(|p| p.gamma_sound),
        pairs,
    })
}
