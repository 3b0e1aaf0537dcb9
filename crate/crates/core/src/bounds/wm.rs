//! The filtered exponential sum `W_M` and its L2 norm over the hull.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::constants::ConstantsBundle;
use super::words::{filter_g_m, FilterMode, WordFilter};
use crate::error::{config, Error, Result};
use crate::ifs::{self, compose, cylinder, IfsSpec, Word};
use crate::par::{self, Exec};
use crate::precision::{self, FixedReal};
use crate::quadrature::refine_simpson;
use crate::rational::{self, Rational};
use crate::sequences::{DerivativeModel, SequenceFamily};

/// Phase error budget below which machine arithmetic is used.
pub const F64_PHASE_BUDGET: f64 = 1e-10;

/// How `l (f_n(y) - f_m(y)) mod 1` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Backend {
    F64,
    Fixed { bits: u32 },
}

/// `y -> l (f_n(y) - f_m(y)) mod 1` on a known range of `y`.
#[derive(Debug, Clone)]
pub struct PhaseFn {
    family: SequenceFamily,
    n: u32,
    m: u32,
    l: i64,
    backend: Backend,
    tol: f64,
}

impl PhaseFn {
    /// Picks machine arithmetic when its error bound on `[y_lo, y_hi]` is
    /// below [`F64_PHASE_BUDGET`], fixed point otherwise.
    pub fn new(
        family: &SequenceFamily,
        n: u32,
        m: u32,
        l: i64,
        y_lo: f64,
        y_hi: f64,
        tol: f64,
    ) -> Result<PhaseFn> {
        if m >= n {
            return config(format!("need m < n, got m = {m}, n = {n}"));
        }
        if l == 0 {
            return config("frequency l must be non-zero");
        }
        family.validate()?;
        let eps = f64::EPSILON;
        let mut est: f64 = 0.0;
        for i in 0..=8 {
            let y = y_lo + (y_hi - y_lo) * i as f64 / 8.0;
            let a = family.derivatives_f64(n, y);
            let b = family.derivatives_f64(m, y);
            let e = (a[0].abs() + b[0].abs()) * (n as f64 + 8.0) * eps
                + (a[1].abs() + b[1].abs()) * y.abs() * 4.0 * eps;
            est = est.max(e * l.unsigned_abs() as f64);
        }
        let backend = if est.is_finite() && est <= F64_PHASE_BUDGET.min(tol) {
            Backend::F64
        } else {
            let y_up = y_hi.abs().max(y_lo.abs()).max(1.0);
            let l_bits = (l.unsigned_abs() as f64).log2().ceil() as u32;
            Backend::Fixed {
                bits: precision::family_bits(family, n, y_up, tol)? + l_bits,
            }
        };
        Ok(PhaseFn {
            family: family.clone(),
            n,
            m,
            l,
            backend,
            tol,
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// `F(y) = f_n(y) - f_m(y)` and its first two derivatives.
    pub fn difference_derivs(&self, y: f64) -> [f64; 3] {
        let a = self.family.derivatives_f64(self.n, y);
        let b = self.family.derivatives_f64(self.m, y);
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    /// The phase in `[0, 1)` at `y = map(x)`.
    pub fn phase(&self, map: &MapF64, x: f64) -> Result<f64> {
        match self.backend {
            Backend::F64 => {
                let y = map.scale * x + map.offset;
                let d = self.difference_derivs(y)[0];
                Ok((self.l as f64 * d).rem_euclid(1.0))
            }
            Backend::Fixed { bits } => {
                let xq = rational::from_f64_exact(x)?;
                let y = FixedReal::from_rational(&map.exact.apply(&xq), bits);
                let v = self
                    .family
                    .eval_fixed(self.n, &y)
                    .sub(&self.family.eval_fixed(self.m, &y))
                    .mul_int(self.l);
                let err = v.err().to_f64();
                if !(err <= self.tol) {
                    return Err(Error::Precision(format!(
                        "phase error {err:.3e} exceeds {:.3e} at {bits} bits",
                        self.tol
                    )));
                }
                Ok(v.frac_f64())
            }
        }
    }
}

/// An affine map kept both exactly and in machine precision.
#[derive(Debug, Clone)]
pub struct MapF64 {
    pub scale: f64,
    pub offset: f64,
    pub exact: ifs::AffineMap,
}

impl MapF64 {
    pub fn new(spec: &IfsSpec, word: &Word) -> Self {
        let exact = compose(spec, word);
        MapF64 {
            scale: rational::to_f64(&exact.scale),
            offset: rational::to_f64(&exact.offset),
            exact,
        }
    }
}

#[derive(Debug, Clone)]
struct Term {
    weight: f64,
    map: MapF64,
}

/// `W_M(x) = sum_(a in G_M) p_a e(l (f_n - f_m)(phi_(ca)(x)))`, precomputed.
#[derive(Debug, Clone)]
pub struct WmSum {
    terms: Vec<Term>,
    phase: PhaseFn,
    /// Hull of the IFS, the integration domain.
    pub hull: (f64, f64),
    /// `|r|^(|c| + M)`.
    pub scale: f64,
    max_dphase: f64,
}

/// Shared argument bundle for `W_M` evaluations.
#[derive(Debug, Clone)]
pub struct WmParams<'a> {
    pub spec: &'a IfsSpec,
    pub family: &'a SequenceFamily,
    pub prefix: &'a Word,
    pub n: u32,
    pub m: u32,
    pub l: i64,
    pub tol: f64,
}

impl WmSum {
    /// Needs an enumerated or explicit filter.
    pub fn new(p: &WmParams<'_>, filter: &WordFilter) -> Result<WmSum> {
        let words = filter.words.as_ref().ok_or_else(|| {
            Error::Config("W_M enumeration needs an enumerated or explicit filter".into())
        })?;
        p.prefix.check(p.spec)?;
        if filter.probs != p.spec.p {
            return config("filter probabilities differ from the IFS weights");
        }
        let c = cylinder(p.spec, p.prefix);
        let (y_lo, y_hi) = (rational::to_f64(&c.x0), rational::to_f64(&c.x1));
        let phase = PhaseFn::new(p.family, p.n, p.m, p.l, y_lo, y_hi, p.tol)?;
        let terms: Vec<Term> = words
            .iter()
            .map(|a| {
                a.check(p.spec)?;
                Ok(Term {
                    weight: rational::to_f64(&ifs::word_probability(p.spec, a)),
                    map: MapF64::new(p.spec, &p.prefix.concat(a)),
                })
            })
            .collect::<Result<_>>()?;
        let (lo, hi) = p.spec.conv_hull();
        let scale = p.spec.r_f64().abs().powi((p.prefix.len() + filter.m) as i32);
        let max_f1 = (0..=32)
            .map(|i| {
                let y = y_lo + (y_hi - y_lo) * i as f64 / 32.0;
                phase.difference_derivs(y)[1].abs()
            })
            .fold(0.0, f64::max);
        Ok(WmSum {
            terms,
            hull: (rational::to_f64(&lo), rational::to_f64(&hi)),
            scale,
            max_dphase: p.l.unsigned_abs() as f64 * scale * max_f1,
            phase,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn backend(&self) -> Backend {
        self.phase.backend()
    }

    /// Upper bound on `|d/dx phase|` over the hull, for any term.
    pub fn max_phase_derivative(&self) -> f64 {
        self.max_dphase
    }

    /// Sum of the weights, an upper bound on `|W_M|`.
    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    pub fn eval(&self, x: f64) -> Result<Complex64> {
        let mut re = 0.0;
        let mut im = 0.0;
        for t in &self.terms {
            let (s, c) = (std::f64::consts::TAU * self.phase.phase(&t.map, x)?).sin_cos();
            re += t.weight * c;
            im += t.weight * s;
        }
        Ok(Complex64::new(re, im))
    }
}

/// Convenience wrapper: build and evaluate at a single point.
pub fn eval_w_m(p: &WmParams<'_>, filter: &WordFilter, x: f64) -> Result<Complex64> {
    WmSum::new(p, filter)?.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledValue {
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl SampledValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Unbiased estimate: `a ~ p^M`, contribution `1[a in G_M] e(...)`.
pub fn eval_w_m_sampled(
    p: &WmParams<'_>,
    filter: &WordFilter,
    x: f64,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<SampledValue> {
    if samples < 2 {
        return config("sampled W_M needs at least 2 samples");
    }
    let c = cylinder(p.spec, p.prefix);
    let phase = PhaseFn::new(
        p.family,
        p.n,
        p.m,
        p.l,
        rational::to_f64(&c.x0),
        rational::to_f64(&c.x1),
        p.tol,
    )?;
    let vals = par::try_map_indexed(exec, samples, |i| -> Result<Complex64> {
        let a = ifs::sample_word(filter.m, &p.spec.p, seed, i as u64);
        if !filter.membership(&a) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let map = MapF64::new(p.spec, &p.prefix.concat(&a));
        let (s, co) = (std::f64::consts::TAU * phase.phase(&map, x)?).sin_cos();
        Ok(Complex64::new(co, s))
    })?;
    let n = samples as f64;
    let mean = vals.iter().sum::<Complex64>() / n;
    let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    Ok(SampledValue {
        re: mean.re,
        im: mean.im,
        stderr: (var / n).sqrt(),
        samples,
    })
}

/// Refinement is flagged when the last doubling moved the value by more.
pub const L2_FLAG_DELTA: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Norm {
    pub value: f64,
    /// `|Q(2K) - Q(K)|`.
    pub delta: f64,
    pub panels: usize,
    pub flagged: bool,
}

/// `int_I |W_M|^2` by composite Simpson, panels doubled from an
/// oscillation-aware start until successive values agree.
pub fn l2_norm_w_m(sum: &WmSum, max_panels: usize) -> Result<L2Norm> {
    let (a, b) = sum.hull;
    if sum.is_empty() {
        return Ok(L2Norm {
            value: 0.0,
            delta: 0.0,
            panels: 0,
            flagged: false,
        });
    }
    // |W|^2 oscillates at up to twice the largest phase frequency
    let start = ((16.0 * sum.max_phase_derivative() * (b - a)).ceil() as usize).max(16);
    let start = start.next_power_of_two().min(max_panels.max(16) / 2);
    // evaluation errors surface through a side channel
    let failure = std::sync::Mutex::new(None);
    let f = |x: f64| match sum.eval(x) {
        Ok(v) => v.norm_sqr(),
        Err(e) => {
            failure.lock().unwrap().get_or_insert(e);
            0.0
        }
    };
    let tol = 1e-11 * sum.total_weight().powi(2).max(1e-300);
    let r = refine_simpson(&f, a, b, start, max_panels, tol);
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(L2Norm {
        value: r.value,
        delta: r.delta,
        panels: r.panels,
        flagged: r.delta > L2_FLAG_DELTA,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCell {
    pub depth: usize,
    pub n: u32,
    pub m: u32,
    pub integral: f64,
    pub refinement_delta: f64,
    pub flagged: bool,
    /// `|I| e^(M(-h + delta))`.
    pub main: f64,
    /// `r^(-M - floor(delta M)) x0^-n + e^(M(-h + delta)) r^(-2M) x0^-n`.
    pub bracket: f64,
    /// `(integral - main) / bracket`, clamped at 0.
    pub required_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub cells: Vec<EnvelopeCell>,
    /// Smallest constant valid on the whole grid.
    pub c_fit: f64,
    /// Smallest positive per-cell constant.
    pub c_min_positive: f64,
    /// `c_fit / c_min_positive`; 1 when no cell needs a constant.
    pub spread: f64,
    /// `spread <= 4`.
    pub stable: bool,
    /// `c_fit` restricted to the lower-left quarter of the grid.
    pub c_fit_subgrid: f64,
    pub any_flagged: bool,
}

/// Per-cell L2 norms over `depths x ns` with `m = n - 1`, compared with the
/// main term plus a constant times the bracket.
pub fn envelope_grid(
    spec: &IfsSpec,
    family: &SequenceFamily,
    bundle: &ConstantsBundle,
    depths: &[usize],
    ns: &[u32],
    l: i64,
    exec: Exec,
) -> Result<EnvelopeReport> {
    if depths.is_empty() || ns.is_empty() {
        return config("envelope grid needs at least one depth and one n");
    }
    let filters = depths
        .iter()
        .map(|&d| filter_g_m(&spec.p, d, bundle.delta_kappa, FilterMode::Enumerated))
        .collect::<Result<Vec<_>>>()?;
    let abs_i = bundle.abs_i;
    let rate = -bundle.entropy + bundle.delta_kappa;
    let log_r = bundle.log_r();
    let cells_idx: Vec<(usize, usize)> = (0..depths.len())
        .flat_map(|i| (0..ns.len()).map(move |j| (i, j)))
        .collect();
    let cells = par::try_map_indexed(exec, cells_idx.len(), |k| -> Result<EnvelopeCell> {
        let (i, j) = cells_idx[k];
        let (depth, n) = (depths[i], ns[j]);
        if n < 2 {
            return config("envelope grid needs n >= 2");
        }
        let params = WmParams {
            spec,
            family,
            prefix: &bundle.prefix,
            n,
            m: n - 1,
            l,
            tol: 1e-10,
        };
        let sum = WmSum::new(&params, &filters[i])?;
        let l2 = l2_norm_w_m(&sum, 1 << 18)?;
        let mf = depth as f64;
        let main = abs_i * (mf * rate).exp();
        let x0n = -(n as f64) * bundle.x0.ln();
        let floor_dm = (bundle.delta_kappa * mf).floor();
        let bracket = ((-mf - floor_dm) * log_r + x0n).exp()
            + (mf * rate - 2.0 * mf * log_r + x0n).exp();
        Ok(EnvelopeCell {
            depth,
            n,
            m: n - 1,
            integral: l2.value,
            refinement_delta: l2.delta,
            flagged: l2.flagged,
            main,
            bracket,
            required_c: ((l2.value - main) / bracket).max(0.0),
        })
    })?;
    let c_fit = cells.iter().map(|c| c.required_c).fold(0.0, f64::max);
    let c_min_positive = cells
        .iter()
        .map(|c| c.required_c)
        .filter(|&c| c > 0.0)
        .fold(f64::INFINITY, f64::min);
    let spread = if c_fit > 0.0 { c_fit / c_min_positive } else { 1.0 };
    let d_mid = depths[(depths.len() - 1) / 2];
    let n_mid = ns[(ns.len() - 1) / 2];
    let c_fit_subgrid = cells
        .iter()
        .filter(|c| c.depth <= d_mid && c.n <= n_mid)
        .map(|c| c.required_c)
        .fold(0.0, f64::max);
    Ok(EnvelopeReport {
        any_flagged: cells.iter().any(|c| c.flagged),
        cells,
        c_fit,
        c_min_positive,
        spread,
        stable: spread <= 4.0,
        c_fit_subgrid,
    })
}

/// `(sum_(a in G_M) p_a) + rejected == 1`, exactly.
pub fn filter_mass_identity(filter: &WordFilter) -> Option<bool> {
    let acc = filter.accepted_mass.as_ref()?;
    let rej = filter.rejected_mass.as_ref()?;
    Some(acc + rej == Rational::from_integer(1.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn setup() -> (IfsSpec, SequenceFamily, Word) {
        (
            IfsSpec::cantor_plus_one(),
            SequenceFamily::PurePower,
            Word::constant(2, 5),
        )
    }

    #[test]
    fn single_word_has_weight_modulus() {
        let (spec, fam, c) = setup();
        let p = WmParams {
            spec: &spec,
            family: &fam,
            prefix: &c,
            n: 5,
            m: 4,
            l: 3,
            tol: 1e-10,
        };
        let a = Word::new(vec![1, 2]);
        let f = WordFilter::explicit(&spec.p, vec![a], 0.01).unwrap();
        let sum = WmSum::new(&p, &f).unwrap();
        for x in [1.0, 1.3, 2.0] {
            let v = sum.eval(x).unwrap().norm();
            assert!((v - 0.25).abs() <= 2.0 * f64::EPSILON * 0.25);
        }
        let l2 = l2_norm_w_m(&sum, 1 << 12).unwrap();
        assert!((l2.value - 0.0625).abs() < 1e-14);
    }

    #[test]
    fn empty_filter_is_zero() {
        let (spec, fam, c) = setup();
        let p = WmParams {
            spec: &spec,
            family: &fam,
            prefix: &c,
            n: 2,
            m: 1,
            l: 1,
            tol: 1e-10,
        };
        let mut f = WordFilter::explicit(&spec.p, vec![Word::new(vec![1])], 0.01).unwrap();
        f.words = Some(vec![]);
        let sum = WmSum::new(&p, &f).unwrap();
        assert_eq!(sum.eval(1.5).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(l2_norm_w_m(&sum, 64).unwrap().value, 0.0);
    }

    #[test]
    fn fixed_backend_agrees_with_f64() {
        let (spec, fam, c) = setup();
        let f = filter_g_m(&spec.p, 3, 0.01, FilterMode::Enumerated).unwrap();
        let p = WmParams {
            spec: &spec,
            family: &fam,
            prefix: &c,
            n: 9,
            m: 8,
            l: 1,
            tol: 1e-10,
        };
        let fast = WmSum::new(&p, &f).unwrap();
        assert_eq!(fast.backend(), Backend::F64);
        let mut slow = fast.clone();
        slow.phase.backend = Backend::Fixed { bits: 120 };
        for x in [1.0, 1.25, 1.9] {
            assert!((fast.eval(x).unwrap() - slow.eval(x).unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn large_n_switches_to_fixed_point() {
        let (spec, fam, c) = setup();
        let f = filter_g_m(&spec.p, 1, 0.01, FilterMode::Enumerated).unwrap();
        let p = WmParams {
            spec: &spec,
            family: &fam,
            prefix: &c,
            n: 80,
            m: 79,
            l: 1,
            tol: 1e-10,
        };
        let sum = WmSum::new(&p, &f).unwrap();
        assert!(matches!(sum.backend(), Backend::Fixed { .. }));
        assert!(sum.eval(1.5).unwrap().norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn sampled_estimate_tracks_enumeration() {
        let (spec, fam, c) = setup();
        let f = filter_g_m(&spec.p, 4, 0.01, FilterMode::Enumerated).unwrap();
        let p = WmParams {
            spec: &spec,
            family: &fam,
            prefix: &c,
            n: 6,
            m: 5,
            l: 1,
            tol: 1e-10,
        };
        let exact = eval_w_m(&p, &f, 1.5).unwrap();
        let est = eval_w_m_sampled(&p, &f, 1.5, 20_000, 9, Exec::default()).unwrap();
        assert!((est.value() - exact).norm() < 5.0 * est.stderr);
    }

    #[test]
    fn mass_identity_holds() {
        let p = vec![parse_rational("4/5").unwrap(), parse_rational("1/5").unwrap()];
        let f = filter_g_m(&p, 8, 0.05, FilterMode::Enumerated).unwrap();
        assert_eq!(filter_mass_identity(&f), Some(true));
    }
}
