use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use super::words::{fit_eta, EtaFit};
use crate::error::{Error, Result};
use crate::ifs::{self, cylinder, locate, validate_ifs, IfsSpec, Location, Word};
use crate::rational::{self, Rational};

/// The four quantities whose maximum is `Gamma_kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaTerms {
    pub terms: [f64; 4],
    pub max: f64,
    /// `log(1 + kappa) / (-2 log r)`.
    pub exponent: f64,
}

/// Evaluates the four terms in log space.
pub fn gamma_kappa(delta: f64, kappa: f64, r: f64, h: f64) -> GammaTerms {
    let lr = r.ln();
    let e = (1.0 + kappa).ln() / (-2.0 * lr);
    let two_step = 2.0 * (-h + delta) - lr;
    let one_step = (-h + delta) - delta * lr;
    let log_terms = [
        delta * lr,
        -2.0 * delta * lr + e * two_step,
        (1.0 + delta).ln() - 3.0 * delta * lr + e * two_step,
        (1.0 + delta).ln() - 3.0 * delta * lr + e * one_step,
    ];
    let terms = log_terms.map(f64::exp);
    GammaTerms {
        terms,
        max: terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        exponent: e,
    }
}

/// Admissibility margin: `Gamma_kappa <= 1 - 1e-6`.
pub const GAMMA_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSolution {
    pub delta: f64,
    pub gamma: GammaTerms,
    /// Grid exponent `k` of the largest admissible `2^-k`.
    pub grid_k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaFailure {
    pub min_gamma: f64,
    pub at_delta: f64,
}

impl fmt::Display for DeltaFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no delta in (0, 1] with Gamma_kappa < 1; smallest value {:.9} at delta = {:.3e}",
            self.min_gamma, self.at_delta
        )
    }
}

impl From<DeltaFailure> for Error {
    fn from(f: DeltaFailure) -> Self {
        Error::Domain(f.to_string())
    }
}

/// Largest admissible `delta` on the grid `2^-k` (k = 0..=60), refined by
/// bisection against the next grid point to relative width `rel_tol`.
pub fn solve_delta_kappa(
    kappa: f64,
    r: f64,
    h: f64,
    rel_tol: f64,
) -> std::result::Result<DeltaSolution, DeltaFailure> {
    let ok = |d: f64| gamma_kappa(d, kappa, r, h).max <= 1.0 - GAMMA_MARGIN;
    let mut best = DeltaFailure {
        min_gamma: f64::INFINITY,
        at_delta: f64::NAN,
    };
    for k in 0..=60u32 {
        let d = 0.5f64.powi(k as i32);
        let g = gamma_kappa(d, kappa, r, h).max;
        if g < best.min_gamma {
            best = DeltaFailure {
                min_gamma: g,
                at_delta: d,
            };
        }
        if !ok(d) {
            continue;
        }
        let (mut lo, mut hi) = (d, (2.0 * d).min(1.0));
        if k > 0 {
            while (hi - lo) > rel_tol * lo {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        return Ok(DeltaSolution {
            delta: lo,
            gamma: gamma_kappa(lo, kappa, r, h),
            grid_k: k,
        });
    }
    Err(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NKappa {
    pub n: usize,
    /// Smallest depth with `r^N |I| < delta x_min`.
    pub ratio_depth: usize,
    /// Smallest depth at which no cylinder contains `1 + kappa`.
    pub side_depth: usize,
}

/// Depth cap when descending towards `1 + kappa`.
pub const LOCATE_DEPTH: usize = 200;

/// Smallest `N` such that level-`N` cylinders have `sup/inf < 1 + delta` and
/// each lies strictly on one side of `1 + kappa`.
pub fn compute_n_kappa(spec: &IfsSpec, kappa: &Rational, delta: f64) -> Result<NKappa> {
    let rep = validate_ifs(spec)?;
    if !rep.separation_ok {
        return Err(Error::Config("N_kappa needs separated first-level images".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    let (x_min, _) = rep.hull();
    if !x_min.is_positive() {
        return Err(Error::Domain("hull must lie in (0, inf)".into()));
    }
    let d = rational::from_f64_exact(delta)?;
    let abs_i = spec.hull_length();
    let bound = &d * &x_min;
    let mut ratio_depth = 0usize;
    let mut width = abs_i.clone();
    // worst ratio at depth N is 1 + r^N |I| / x_min
    while width >= bound {
        width *= &spec.r;
        ratio_depth += 1;
        if ratio_depth > 100_000 {
            return Err(Error::Resource("ratio depth search did not terminate".into()));
        }
    }
    let target = Rational::one() + kappa;
    let side_depth = match locate(spec, &target, LOCATE_DEPTH) {
        Location::Outside { depth } => depth,
        Location::Undecided { depth, .. } => {
            return Err(Error::Config(format!(
                "1 + kappa = {} lies in a cylinder at every depth up to {depth}",
                rational::format_rational(&target)
            )))
        }
    };
    Ok(NKappa {
        n: ratio_depth.max(side_depth).max(1),
        ratio_depth,
        side_depth,
    })
}

/// Reading of `log 2 pi C1 |l| |I|` in the definition of `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogGrouping {
    /// `log(2 pi C1 |l| |I|)`.
    #[default]
    LogOfProduct,
    /// `log(2 pi) C1 |l| |I|`.
    LogTwoPiTimesRest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MParams {
    pub n: u32,
    pub l: i64,
    pub c1: f64,
    pub c2: f64,
    pub abs_i: f64,
    pub x1: f64,
    pub r: f64,
    pub delta: f64,
    pub n_kappa: usize,
    pub grouping: LogGrouping,
}

/// A two-sided check `r^lower <= middle <= r^upper`, in natural logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentCheck {
    pub lower_exponent: f64,
    pub upper_exponent: f64,
    pub lower_log: f64,
    pub upper_log: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl ExponentCheck {
    fn new(lower_exponent: f64, upper_exponent: f64, middle: f64, log_r: f64) -> Self {
        let lower_log = lower_exponent * log_r;
        let upper_log = upper_exponent * log_r;
        ExponentCheck {
            lower_exponent,
            upper_exponent,
            lower_log,
            upper_log,
            lower_ok: lower_log <= middle,
            upper_ok: middle <= upper_log,
        }
    }

    pub fn pass(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MResult {
    pub m: u64,
    pub floor_term: u64,
    pub ceil_term: u64,
    /// `log(2 pi C1 |l| |I| n^C2 x1^(n-1) r^(N_kappa + 2M))`.
    pub log_middle: f64,
    /// Exponents `delta n + N + 2` and `delta n + N`.
    pub stated_form: ExponentCheck,
    /// Exponents `2 delta n + N + 2` and `2 delta n + N`.
    pub corrected_form: ExponentCheck,
    /// Exponents `2 ceil(delta n) + N + 2` and `2 delta n + N`; implied by the
    /// integerized `M` for every `n`.
    pub integerized_form: ExponentCheck,
    /// `M >= n log x1 / (-2 log r)`.
    pub growth_ok: bool,
}

impl MResult {
    pub fn pass(&self) -> bool {
        self.integerized_form.pass()
    }
}

pub fn compute_m(p: &MParams) -> Result<MResult> {
    if p.n < 2 || p.l == 0 {
        return Err(Error::Config("M needs n >= 2 and l != 0".into()));
    }
    if !(p.r > 0.0 && p.r < 1.0 && p.x1 > 0.0 && p.c1 > 0.0 && p.abs_i > 0.0) {
        return Err(Error::Config("M needs 0 < r < 1 and positive C1, |I|, x1".into()));
    }
    let log_r = p.r.ln();
    let n = p.n as f64;
    let product = 2.0 * std::f64::consts::PI * p.c1 * p.l.unsigned_abs() as f64 * p.abs_i;
    let lead = match p.grouping {
        LogGrouping::LogOfProduct => product.ln(),
        LogGrouping::LogTwoPiTimesRest => {
            (2.0 * std::f64::consts::PI).ln() * p.c1 * p.l.unsigned_abs() as f64 * p.abs_i
        }
    };
    let numerator = lead + p.c2 * n.ln() + (n - 1.0) * p.x1.ln();
    let floor_term = (1.0 + numerator / (-2.0 * log_r)).floor();
    if floor_term < 0.0 {
        return Err(Error::Domain(format!("M floor term {floor_term} is negative")));
    }
    let ceil_term = (p.delta * n).ceil();
    let m = floor_term + ceil_term;
    let big_n = p.n_kappa as f64;
    let log_middle =
        product.ln() + p.c2 * n.ln() + (n - 1.0) * p.x1.ln() + (big_n + 2.0 * m) * log_r;
    let dn = p.delta * n;
    Ok(MResult {
        m: m as u64,
        floor_term: floor_term as u64,
        ceil_term: ceil_term as u64,
        log_middle,
        stated_form: ExponentCheck::new(dn + big_n + 2.0, dn + big_n, log_middle, log_r),
        corrected_form: ExponentCheck::new(2.0 * dn + big_n + 2.0, 2.0 * dn + big_n, log_middle, log_r),
        integerized_form: ExponentCheck::new(
            2.0 * ceil_term + big_n + 2.0,
            2.0 * dn + big_n,
            log_middle,
            log_r,
        ),
        growth_ok: m >= n * p.x1.ln() / (-2.0 * log_r),
    })
}

/// Every constant of one experiment configuration, with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsBundle {
    pub kappa: f64,
    pub kappa_exact: String,
    pub delta_kappa: f64,
    pub gamma_kappa: f64,
    pub gamma_terms: [f64; 4],
    pub n_kappa: usize,
    /// Fitted large-deviation rate; `None` when every bad set is empty.
    pub eta: Option<f64>,
    pub eta_vacuous: bool,
    pub theoretical_gamma: f64,
    pub entropy: f64,
    pub r: f64,
    pub abs_i: f64,
    pub gap_min: f64,
    pub prefix: Word,
    pub x0: f64,
    pub x1: f64,
    pub provenance: BTreeMap<String, String>,
}

impl ConstantsBundle {
    /// Direct re-evaluation of the four terms.
    pub fn recheck_gamma(&self) -> GammaTerms {
        gamma_kappa(self.delta_kappa, self.kappa, self.r, self.entropy)
    }

    pub fn log_r(&self) -> f64 {
        self.r.ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleOptions {
    pub kappa: Rational,
    /// Fixed `delta` instead of the solver's.
    pub delta: Option<f64>,
    pub prefix: Option<Word>,
    pub eta_k_range: (usize, usize),
}

impl BundleOptions {
    pub fn new(kappa: Rational) -> Self {
        BundleOptions {
            kappa,
            delta: None,
            prefix: None,
            eta_k_range: (4, 40),
        }
    }
}

/// `max(Gamma^(1/2), exp(eta delta log(1+kappa) / (2 log r)))`.
pub fn theoretical_gamma(gamma: f64, eta: Option<f64>, delta: f64, kappa: f64, r: f64) -> f64 {
    let second = match eta {
        Some(eta) => (eta * delta * (1.0 + kappa).ln() / (2.0 * r.ln())).exp(),
        None => 0.0,
    };
    gamma.sqrt().max(second)
}

/// Runs validation, the entropy check, the delta solver, `N_kappa`, the
/// eta fit and prefix selection.
pub fn compute_constants(spec: &IfsSpec, opts: &BundleOptions) -> Result<ConstantsBundle> {
    let rep = validate_ifs(spec)?;
    if !rep.all_ok() {
        return Err(Error::Config(format!(
            "IFS fails validation (support_ok = {}, separation_ok = {})",
            rep.support_ok, rep.separation_ok
        )));
    }
    if !opts.kappa.is_positive() {
        return Err(Error::Config("kappa must be positive".into()));
    }
    let ent = ifs::check_entropy_condition(spec);
    let r = spec.r_f64();
    let kappa = rational::to_f64(&opts.kappa);
    let mut provenance = BTreeMap::new();
    let delta = match opts.delta {
        Some(d) => {
            provenance.insert("delta_kappa".into(), "supplied".into());
            d
        }
        None => {
            let sol = solve_delta_kappa(kappa, r, ent.entropy, 1e-3)?;
            provenance.insert(
                "delta_kappa".into(),
                format!("grid 2^-{} refined by bisection", sol.grid_k),
            );
            sol.delta
        }
    };
    let gamma = gamma_kappa(delta, kappa, r, ent.entropy);
    if !(gamma.max < 1.0) {
        return Err(Error::Domain(format!(
            "Gamma_kappa = {:.9} >= 1 at delta = {delta}",
            gamma.max
        )));
    }
    provenance.insert("gamma_kappa".into(), "direct evaluation of the four terms".into());
    let nk = compute_n_kappa(spec, &opts.kappa, delta)?;
    provenance.insert(
        "n_kappa".into(),
        format!(
            "exact search: ratio depth {}, side depth {}",
            nk.ratio_depth, nk.side_depth
        ),
    );
    let (k_lo, k_hi) = opts.eta_k_range;
    let fit: EtaFit = fit_eta(&spec.p, delta, k_lo, k_hi)?;
    let eta = if fit.vacuous { None } else { Some(fit.eta) };
    provenance.insert(
        "eta".into(),
        if fit.vacuous {
            "vacuous: every bad set empty on the fit range".into()
        } else {
            format!("least-squares fit of log bad-set mass over k = {k_lo}..={k_hi}")
        },
    );
    let threshold = Rational::one() + &opts.kappa;
    let prefix = match &opts.prefix {
        Some(p) => {
            p.check(spec)?;
            p.clone()
        }
        None => {
            let top = spec
                .t
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1))
                .map(|(i, _)| i as u16 + 1)
                .unwrap();
            Word::constant(top, nk.n)
        }
    };
    let c = cylinder(spec, &prefix);
    if c.x0 <= threshold {
        return Err(Error::Domain(format!(
            "prefix cylinder starts at {} which is not above 1 + kappa",
            rational::format_rational(&c.x0)
        )));
    }
    provenance.insert(
        "prefix".into(),
        if opts.prefix.is_some() {
            "supplied".into()
        } else {
            "largest-translation digit repeated N_kappa times".into()
        },
    );
    provenance.insert("entropy".into(), "-sum p log p".into());
    provenance.insert("theoretical_gamma".into(), "max(Gamma^(1/2), eta term)".into());
    Ok(ConstantsBundle {
        kappa,
        kappa_exact: rational::format_rational(&opts.kappa),
        delta_kappa: delta,
        gamma_kappa: gamma.max,
        gamma_terms: gamma.terms,
        n_kappa: nk.n,
        eta,
        eta_vacuous: fit.vacuous,
        theoretical_gamma: theoretical_gamma(gamma.max, eta, delta, kappa, r),
        entropy: ent.entropy,
        r,
        abs_i: rational::to_f64(&spec.hull_length()),
        gap_min: rational::to_f64(&rep.gap_min),
        prefix,
        x0: rational::to_f64(&c.x0),
        x1: rational::to_f64(&c.x1),
        provenance,
    })
}
