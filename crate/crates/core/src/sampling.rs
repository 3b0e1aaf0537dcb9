//! Certified orbits at points drawn from the (conditioned) self-similar measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifs::{self, cylinder, DigitSampler, IfsSpec, Word};
use crate::precision::{self, FixedReal, OrbitFragment};
use crate::rational;
use crate::sequences::SequenceFamily;

/// Truncation depth of sampled digit words (prefix included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Depth {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for Depth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Depth::Auto);
        }
        s.parse::<usize>()
            .map(Depth::Fixed)
            .map_err(|_| Error::Config(format!("depth must be \"auto\" or an integer, got {s:?}")))
    }
}

/// Draws points `x ~ mu o phi_c^-1` as digit words and evaluates certified orbits.
#[derive(Debug, Clone)]
pub struct OrbitSampler {
    spec: IfsSpec,
    family: SequenceFamily,
    prefix: Word,
    depth: usize,
    frac_bits: u32,
    big_n: u32,
    tol: f64,
    digits: DigitSampler,
}

impl OrbitSampler {
    pub fn new(
        spec: &IfsSpec,
        family: &SequenceFamily,
        prefix: &Word,
        depth: Depth,
        big_n: u32,
        tol: f64,
    ) -> Result<Self> {
        prefix.check(spec)?;
        family.validate()?;
        let c = cylinder(spec, prefix);
        if c.x0 < rational::Rational::from_integer(1.into()) {
            return Err(Error::Domain(format!(
                "prefix cylinder [{}, {}] reaches below 1",
                rational::format_rational(&c.x0),
                rational::format_rational(&c.x1)
            )));
        }
        let x_upper = rational::to_f64(&c.x1) * (1.0 + 1e-12);
        let frac_bits = precision::family_bits(family, big_n, x_upper, tol / 4.0)?;
        let depth = match depth {
            Depth::Fixed(k) if k < prefix.len() => {
                return Err(Error::Config(format!(
                    "depth {k} is shorter than the prefix ({})",
                    prefix.len()
                )))
            }
            Depth::Fixed(k) => k,
            Depth::Auto => auto_depth(spec, family, big_n, x_upper, tol)?.max(prefix.len()),
        };
        Ok(OrbitSampler {
            spec: spec.clone(),
            family: family.clone(),
            prefix: prefix.clone(),
            depth,
            frac_bits,
            big_n,
            tol,
            digits: DigitSampler::new(&spec.p),
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn big_n(&self) -> u32 {
        self.big_n
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// The digit word for stream `stream`.
    pub fn word(&self, seed: u64, stream: u64) -> Word {
        let mut rng = ifs::stream_rng(seed, stream);
        let mut d = self.prefix.0.clone();
        while d.len() < self.depth {
            d.push(self.digits.draw(&mut rng));
        }
        Word(d)
    }

    pub fn point(&self, word: &Word) -> Result<FixedReal> {
        ifs::point_of_word(&self.spec, word, self.depth, self.frac_bits)
    }

    pub fn orbit_of_word(&self, word: &Word) -> Result<OrbitFragment> {
        let x = self.point(word)?;
        precision::eval_family_mod_one(&self.family, &x, self.big_n, self.tol)
    }

    pub fn orbit(&self, seed: u64, stream: u64) -> Result<(Word, OrbitFragment)> {
        let w = self.word(seed, stream);
        let o = self.orbit_of_word(&w)?;
        Ok((w, o))
    }
}

/// Smallest depth `K` with `sup |f_n'| r^K max|hull| <= tol / 4` on `[1, x_upper]`.
pub fn auto_depth(
    spec: &IfsSpec,
    family: &SequenceFamily,
    big_n: u32,
    x_upper: f64,
    tol: f64,
) -> Result<usize> {
    let ln2 = std::f64::consts::LN_2;
    let (lo, hi) = spec.conv_hull();
    let reach = rational::to_f64(&hi).abs().max(rational::to_f64(&lo).abs());
    let need = family.derivative_bound_log2(big_n, x_upper) + reach.log2() - (tol / 4.0).log2();
    let per_digit = -rational::ln(&spec.r) / ln2;
    let k = (need / per_digit).ceil().max(1.0);
    if k > 1e7 {
        return Err(Error::Resource(format!("auto depth {k} digits is too deep")));
    }
    Ok(k as usize)
}
