//! One function per subcommand. Each reads what it needs from the config
//! (recording defaults as it goes) and returns an [`Output`].

use koksma::bounds::constants::{compute_constants, compute_m, BundleOptions, ConstantsBundle, MParams};
use koksma::bounds::decay::{fourier_decay_with_bundle, DecayConfig};
use koksma::bounds::vdc::{vdc_batch, OscillatoryQuadrature, PairSetup};
use koksma::bounds::wm::{l2_norm_w_m, WmParams, WmSum};
use koksma::bounds::words::{bad_set_mass, check_rejected_mass, filter_g_m, fit_eta, FilterMode};
use koksma::equidist::{
    del_series_estimate, equidistribution_experiment, star_discrepancy, weyl_sum, MonteCarlo,
};
use koksma::ifs::{check_entropy_condition, cylinder, validate_ifs};
use koksma::precision::rational_orbit;
use koksma::rational::format_rational;
use koksma::sampling::OrbitSampler;
use koksma::sequences::{certify, HypothesisCertificate, Interval};
use koksma::{Error, Exec, Result, Word};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::output::{num, Output};

/// Exit code for a report whose hypotheses do not hold.
const VALIDATION_FAILED: i32 = 2;
/// Exit code for a bound check that ran and failed.
const BOUND_FLAGGED: i32 = 4;

fn monte_carlo(cfg: &mut ExperimentConfig, samples: usize, exec: Exec) -> Result<MonteCarlo> {
    let mut mc = MonteCarlo::new(samples, cfg.seed()?);
    mc.tol = cfg.tol();
    mc.depth = cfg.depth();
    mc.exec = exec;
    Ok(mc)
}

pub fn validate(cfg: &mut ExperimentConfig) -> Result<Output> {
    let report = validate_ifs(&cfg.ifs)?;
    let entropy = check_entropy_condition(&cfg.ifs);
    let ok = report.all_ok() && entropy.pass;
    let out = Output::json("validate", json!({ "ifs": report, "entropy": entropy, "ok": ok }))?;
    Ok(out.with_exit(if ok { 0 } else { VALIDATION_FAILED }))
}

fn bundle(cfg: &mut ExperimentConfig) -> Result<ConstantsBundle> {
    let mut opts = BundleOptions::new(cfg.kappa()?);
    opts.delta = cfg.delta;
    opts.prefix = cfg.prefix_given()?;
    opts.eta_k_range = cfg.k_range();
    let b = compute_constants(&cfg.ifs, &opts)?;
    cfg.prefix_or(&b.prefix)?;
    Ok(b)
}

/// Hypothesis constants of the family on the prefix cylinder.
fn certificate(cfg: &ExperimentConfig, prefix: &Word, n_max: u32) -> Result<HypothesisCertificate> {
    let c = cylinder(&cfg.ifs, prefix);
    certify(&cfg.family()?, &Interval::new(c.x0, c.x1), n_max.max(2), 33)
}

pub fn constants(cfg: &mut ExperimentConfig) -> Result<Output> {
    let b = bundle(cfg)?;
    let depth = match cfg.n {
        Some(n) => {
            let cert = certificate(cfg, &b.prefix, n)?;
            let res = compute_m(&MParams {
                n,
                l: cfg.l()?,
                c1: cert.c1,
                c2: cert.c2,
                abs_i: b.abs_i,
                x1: b.x1,
                r: b.r,
                delta: b.delta_kappa,
                n_kappa: b.n_kappa,
                grouping: cfg.grouping(),
            })?;
            Some(json!({ "certificate": cert, "M": res, "pass": res.pass() }))
        }
        None => None,
    };
    Output::json("constants", json!({ "bundle": b, "depth": depth }))
}

pub fn sample(cfg: &mut ExperimentConfig) -> Result<Output> {
    let prefix = cfg.prefix_or(&Word::empty())?;
    let count = cfg.count(10);
    let big_n = *cfg.big_n.get_or_insert(1);
    let (depth, tol, seed) = (cfg.depth(), cfg.tol(), cfg.seed()?);
    let sampler = OrbitSampler::new(&cfg.ifs, &cfg.family()?, &prefix, depth, big_n, tol)?;
    let mut csv = String::from("stream,x,err,word\n");
    let mut rows = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let w = sampler.word(seed, i);
        let x = sampler.point(&w)?;
        csv.push_str(&format!("{i},{},{},\"{w}\"\n", num(x.to_f64()), num(x.err().to_f64())));
        rows.push(json!({ "stream": i, "x": x.to_f64(), "err": x.err().to_f64(), "word": w }));
    }
    let summary = vec![
        ("depth".into(), sampler.depth().to_string()),
        ("frac_bits".into(), sampler.frac_bits().to_string()),
    ];
    let result = json!({ "depth": sampler.depth(), "frac_bits": sampler.frac_bits(), "points": rows });
    Output::tabular("sample", result, summary, csv)
}

pub fn orbit(cfg: &mut ExperimentConfig) -> Result<Output> {
    let family = cfg.family()?;
    let big_n = cfg.big_n()?;
    let tol = cfg.tol();
    let (fragment, desc, word) = match cfg.x()? {
        Some(x) => {
            let f = rational_orbit(&family, &x, big_n, tol)?;
            (f, format_rational(&x), None)
        }
        None => {
            let prefix = cfg.prefix_or(&Word::empty())?;
            let (seed, depth) = (cfg.word_seed()?, cfg.depth());
            let sampler = OrbitSampler::new(&cfg.ifs, &family, &prefix, depth, big_n, tol)?;
            let (w, f) = sampler.orbit(seed, 0)?;
            let desc = format!("word seed {seed}, depth {}", sampler.depth());
            (f, desc, Some(w))
        }
    };
    let csv = fragment.to_csv(&desc);
    // the fragment's own header lines follow the config echo
    let summary = vec![];
    Output::tabular("orbit", json!({ "x": desc, "word": word, "orbit": fragment }), summary, csv)
}

/// Orbit prefix statistics at one exact point, or medians over sampled points.
fn point_statistics(cfg: &mut ExperimentConfig, ls: &[i64], exec: Exec) -> Result<serde_json::Value> {
    let family = cfg.family()?;
    let ns = cfg.ns()?;
    let big_n = *ns.iter().max().unwrap();
    match cfg.x()? {
        Some(x) => {
            let f = rational_orbit(&family, &x, big_n, cfg.tol())?;
            let v = f.certified_values()?;
            let d = ns
                .iter()
                .map(|&n| star_discrepancy(&v[..n as usize]).map(|r| r.d_star))
                .collect::<Result<Vec<_>>>()?;
            let w = ls
                .iter()
                .map(|&l| {
                    ns.iter()
                        .map(|&n| weyl_sum(&v[..n as usize], l).map(|w| w.modulus))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(json!({ "ns": ns, "ls": ls, "median_d_star": d, "median_weyl": w, "points": 1, "max_err": f.max_err }))
        }
        None => {
            let prefix = cfg.prefix_or(&Word::empty())?;
            let count = cfg.count(20);
            let mc = monte_carlo(cfg, count, exec)?;
            let rep = equidistribution_experiment(&cfg.ifs, &family, &prefix, &ns, ls, &mc)?;
            Ok(serde_json::to_value(rep)?)
        }
    }
}

pub fn discrepancy(cfg: &mut ExperimentConfig, exec: Exec) -> Result<Output> {
    let stats = point_statistics(cfg, &[1], exec)?;
    let mut csv = String::from("N,d_star\n");
    for (n, d) in stats["ns"].as_array().unwrap().iter().zip(stats["median_d_star"].as_array().unwrap()) {
        csv.push_str(&format!("{n},{}\n", num(d.as_f64().unwrap())));
    }
    Output::tabular("discrepancy", stats, vec![("statistic".into(), "median over points".into())], csv)
}

pub fn weyl(cfg: &mut ExperimentConfig, exec: Exec) -> Result<Output> {
    let ls = cfg.ls()?;
    if ls.contains(&0) {
        return Err(Error::Config("frequencies must be non-zero".into()));
    }
    let stats = point_statistics(cfg, &ls, exec)?;
    let mut csv = String::from("l,N,modulus\n");
    let ns = stats["ns"].as_array().unwrap();
    for (l, row) in ls.iter().zip(stats["median_weyl"].as_array().unwrap()) {
        for (n, w) in ns.iter().zip(row.as_array().unwrap()) {
            csv.push_str(&format!("{l},{n},{}\n", num(w.as_f64().unwrap())));
        }
    }
    Output::tabular("weyl", stats, vec![("statistic".into(), "median over points".into())], csv)
}

pub fn del_series(cfg: &mut ExperimentConfig, exec: Exec) -> Result<Output> {
    let family = cfg.family()?;
    let prefix = cfg.prefix_or(&Word::empty())?;
    let (l, schedule) = (cfg.l()?, cfg.schedule()?);
    let samples = cfg.samples(400);
    let mc = monte_carlo(cfg, samples, exec)?;
    let est = del_series_estimate(&cfg.ifs, &family, &prefix, l, &schedule, &mc)?;
    let summary = vec![
        ("depth".into(), est.depth.to_string()),
        ("max_err".into(), num(est.max_err)),
        ("trend_decreasing".into(), est.trend_decreasing().to_string()),
    ];
    let csv = est.to_csv();
    Output::tabular("del-series", est, summary, csv)
}

pub fn hoeffding(cfg: &mut ExperimentConfig) -> Result<Output> {
    let delta = cfg.delta()?;
    let (lo, hi) = cfg.k_range();
    let probs = cfg.ifs.p.clone();
    let fit = fit_eta(&probs, delta, lo, hi)?;
    let mut csv = String::from("k,mass,mass_f64,bound\n");
    let mut rows = Vec::new();
    for k in lo..=hi {
        let b = bad_set_mass(&probs, k, delta)?;
        let bound = if fit.vacuous { 0.0 } else { (-fit.eta * k as f64 / 2.0).exp() };
        csv.push_str(&format!("{k},{},{},{}\n", format_rational(&b.mass), num(b.mass_f64), num(bound)));
        rows.push(json!({ "k": k, "mass": format_rational(&b.mass), "mass_f64": b.mass_f64, "bound": bound }));
    }
    let filter = match cfg.big_m {
        Some(m) => {
            let f = filter_g_m(&probs, m, delta, FilterMode::Enumerated)?;
            let check = check_rejected_mass(&f, &fit)?;
            Some(json!({
                "M": m,
                "window": f.window,
                "words": f.words.as_ref().map(Vec::len),
                "accepted_mass": f.accepted_mass.as_ref().map(format_rational),
                "rejected_mass": f.rejected_mass.as_ref().map(format_rational),
                "check": check,
            }))
        }
        None => None,
    };
    let summary = vec![
        ("eta".into(), if fit.vacuous { "vacuous".into() } else { num(fit.eta) }),
        ("verified".into(), fit.verified.to_string()),
    ];
    let ok = fit.verified && filter.as_ref().is_none_or(|f| f["check"]["pass"] == true);
    let result = json!({ "eta": fit, "masses": rows, "filter": filter });
    Ok(Output::tabular("hoeffding", result, summary, csv)?.with_exit(if ok { 0 } else { BOUND_FLAGGED }))
}

pub fn wm(cfg: &mut ExperimentConfig) -> Result<Output> {
    let family = cfg.family()?;
    let (delta, prefix) = match cfg.kappa {
        Some(_) => {
            let b = bundle(cfg)?;
            cfg.delta = Some(b.delta_kappa);
            (b.delta_kappa, b.prefix)
        }
        None => (cfg.delta()?, cfg.prefix_or(&Word::empty())?),
    };
    let (n, m, l, big_m) = (cfg.n()?, cfg.m()?, cfg.l()?, cfg.big_m()?);
    let points = cfg.points(17);
    let tol = *cfg.tol.get_or_insert(1e-10);
    let filter = filter_g_m(&cfg.ifs.p, big_m, delta, FilterMode::Enumerated)?;
    let params = WmParams { spec: &cfg.ifs, family: &family, prefix: &prefix, n, m, l, tol };
    let sum = WmSum::new(&params, &filter)?;
    let l2 = l2_norm_w_m(&sum, 1 << 18)?;
    let (a, b) = sum.hull;
    let mut csv = String::from("x,re,im,modulus\n");
    let mut values = Vec::with_capacity(points);
    for i in 0..points {
        let x = if points == 1 { a } else { a + (b - a) * i as f64 / (points - 1) as f64 };
        let v = sum.eval(x)?;
        csv.push_str(&format!("{},{},{},{}\n", num(x), num(v.re), num(v.im), num(v.norm())));
        values.push(json!({ "x": x, "re": v.re, "im": v.im, "modulus": v.norm() }));
    }
    let summary = vec![
        ("words".into(), sum.len().to_string()),
        ("accepted_mass".into(), num(filter.acceptance)),
        ("l2_norm_squared".into(), num(l2.value)),
        ("l2_flagged".into(), l2.flagged.to_string()),
    ];
    let result = json!({
        "words": sum.len(),
        "window": filter.window,
        "accepted_mass": filter.accepted_mass.as_ref().map(format_rational),
        "l2": l2,
        "values": values,
    });
    let code = if l2.flagged { BOUND_FLAGGED } else { 0 };
    Ok(Output::tabular("wm", result, summary, csv)?.with_exit(code))
}

pub fn vdc(cfg: &mut ExperimentConfig, exec: Exec) -> Result<Output> {
    let family = cfg.family()?;
    let b = bundle(cfg)?;
    let (n, m, l, big_m) = (cfg.n()?, cfg.m()?, cfg.l()?, cfg.big_m()?);
    let count = cfg.count(50);
    let seed = cfg.seed()?;
    let cert = certificate(cfg, &b.prefix, n)?;
    let setup = PairSetup { spec: &cfg.ifs, family: &family, cert: &cert, prefix: &b.prefix, n, m, l };
    let batch = vdc_batch(&setup, big_m, count, seed, exec, &OscillatoryQuadrature::default())?;
    let mut csv = String::from("a,b,common,re,im,modulus,gamma,bound,pass,converged,gamma_sound\n");
    for p in &batch.pairs {
        let o = &p.outcome;
        csv.push_str(&format!(
            "\"{}\",\"{}\",{},{},{},{},{},{},{},{},{}\n",
            p.a,
            p.b,
            p.common,
            num(o.re),
            num(o.im),
            num(o.modulus),
            num(o.gamma),
            num(o.bound),
            o.pass,
            o.converged,
            p.gamma_sound
        ));
    }
    let ok = batch.all_pass && batch.all_converged && batch.all_gamma_sound;
    let summary = vec![
        ("all_pass".into(), batch.all_pass.to_string()),
        ("all_converged".into(), batch.all_converged.to_string()),
        ("all_gamma_sound".into(), batch.all_gamma_sound.to_string()),
    ];
    Ok(Output::tabular("vdc", batch, summary, csv)?.with_exit(if ok { 0 } else { BOUND_FLAGGED }))
}

fn decay_config(cfg: &mut ExperimentConfig, exec: Exec) -> Result<DecayConfig> {
    let (l, schedule, seed) = (cfg.l()?, cfg.schedule()?, cfg.seed()?);
    let samples = cfg.samples(20_000);
    let mut dc = DecayConfig::new(l, schedule, samples, seed);
    dc.lag = cfg.lag();
    dc.replicates = cfg.replicates();
    dc.tol = cfg.tol();
    dc.depth = cfg.depth();
    dc.exec = exec;
    Ok(dc)
}

pub fn decay(cfg: &mut ExperimentConfig, exec: Exec) -> Result<Output> {
    let family = cfg.family()?;
    let b = bundle(cfg)?;
    let dc = decay_config(cfg, exec)?;
    let rep = fourier_decay_with_bundle(&cfg.ifs, &family, &b, &dc)?;
    let summary = vec![
        ("gamma_hat".into(), num(rep.gamma_hat)),
        ("slope".into(), num(rep.fit.slope)),
        ("slope_stderr".into(), num(rep.fit.slope_stderr)),
        ("significant".into(), rep.significant.to_string()),
        ("theoretical_gamma".into(), num(b.theoretical_gamma)),
        ("depth".into(), rep.depth.to_string()),
        ("max_err".into(), num(rep.max_err)),
    ];
    let csv = rep.to_csv();
    Output::tabular("decay", rep, summary, csv)
}

/// validate, constants, decay and discrepancy in one summary document.
pub fn report(cfg: &mut ExperimentConfig, exec: Exec) -> Result<Output> {
    let family = cfg.family()?;
    let validation = validate_ifs(&cfg.ifs)?;
    let entropy = check_entropy_condition(&cfg.ifs);
    if !(validation.all_ok() && entropy.pass) {
        let out = Output::json("report", json!({ "validate": { "ifs": validation, "entropy": entropy, "ok": false } }))?;
        return Ok(out.with_exit(VALIDATION_FAILED));
    }
    let b = bundle(cfg)?;
    let dc = decay_config(cfg, exec)?;
    let rep = fourier_decay_with_bundle(&cfg.ifs, &family, &b, &dc)?;
    if cfg.ns.is_none() {
        cfg.ns = Some(crate::config::Schedule(vec![500, 1000, 2000, 4000]));
    }
    let ns = cfg.ns()?;
    let count = cfg.count(20);
    let mut mc = MonteCarlo::new(count, dc.seed);
    (mc.tol, mc.depth, mc.exec) = (dc.tol, dc.depth, exec);
    // equidistribution is measured for the unconditioned measure
    let eq = equidistribution_experiment(&cfg.ifs, &family, &Word::empty(), &ns, &[1], &mc)?;
    Output::json(
        "report",
        json!({
            "validate": { "ifs": validation, "entropy": entropy, "ok": true },
            "constants": b,
            "decay": {
                "gamma_hat": rep.gamma_hat,
                "slope": rep.fit.slope,
                "slope_stderr": rep.fit.slope_stderr,
                "significant": rep.significant,
                "theoretical_gamma": rep.theoretical_gamma,
                "depth": rep.depth,
                "max_err": rep.max_err,
                "rows": rep.rows,
            },
            "discrepancy": {
                "ns": eq.ns,
                "points": count,
                "median_d_star": eq.median_d_star,
                "median_weyl_l1": eq.median_weyl[0],
                "depth": eq.depth,
            },
        }),
    )
}
