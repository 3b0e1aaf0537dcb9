//! Experiment configuration: the JSON file, command-line overrides and the
//! resolved form that every output echoes.

use std::fmt;
use std::path::Path;

use clap::Args;
use koksma::bounds::LogGrouping;
use koksma::rational::NumOrStr;
use koksma::sampling::Depth;
use koksma::{Error, IfsSpec, Rational, Result, SequenceFamily, Word};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One experiment. Only `ifs` is mandatory in the file; each command
/// demands the parameters it uses and fills defaults for the rest, so the
/// echoed copy shows exactly what ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ifs: IfsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<SequenceFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<NumOrStr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ls: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub big_n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns: Option<Schedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    /// Word length of the filtered sum and of vdc word pairs.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Number of sampled points or word pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<NumOrStr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_range: Option<(usize, usize)>,
    /// Evaluation points of the filtered sum across the hull.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouping: Option<LogGrouping>,
}

/// A list of positive integers, written as a JSON list or as
/// `"start:end:step"` (inclusive) or `"a,b,c"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule(pub Vec<u32>);

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad schedule {s:?}; use start:end:step or a,b,c"));
        let num = |p: &str| p.trim().parse::<u32>().map_err(|_| bad());
        let v: Vec<u32> = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [a, b, step] = parts.as_slice() else {
                return Err(bad());
            };
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step == 0 || a > b {
                return Err(bad());
            }
            (a..=b).step_by(step as usize).collect()
        } else {
            s.split(',').map(num).collect::<Result<_>>()?
        };
        if v.is_empty() || v.contains(&0) {
            return Err(bad());
        }
        Ok(Schedule(v))
    }
}

impl Serialize for Schedule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Schedule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<u32>),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::List(v) => Ok(Schedule(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `"auto"` or a fixed digit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthSpec(pub Depth);

impl std::str::FromStr for DepthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse().map(DepthSpec)
    }
}

impl fmt::Display for DepthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Depth::Auto => f.write_str("auto"),
            Depth::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl Serialize for DepthSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Depth::Auto => s.serialize_str("auto"),
            Depth::Fixed(k) => s.serialize_u64(k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for DepthSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(k) => Ok(DepthSpec(Depth::Fixed(k))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Per-command flags; each one replaces the config key of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Rational threshold offset, e.g. 2/5.
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Frequency.
    #[arg(long, allow_hyphen_values = true)]
    pub l: Option<i64>,
    /// Frequencies, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ls: Option<Vec<i64>>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub m: Option<u32>,
    /// Orbit length.
    #[arg(long = "N")]
    pub big_n: Option<u32>,
    /// Orbit lengths for discrepancy and Weyl sums (start:end:step or a,b,c).
    #[arg(long)]
    pub ns: Option<Schedule>,
    /// Index schedule (start:end:step or a,b,c).
    #[arg(long)]
    pub schedule: Option<Schedule>,
    /// Word length of the filtered sum and of vdc word pairs.
    #[arg(long = "M")]
    pub big_m: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub word_seed: Option<u64>,
    /// Digit depth: "auto" or an integer.
    #[arg(long)]
    pub depth: Option<DepthSpec>,
    /// Conditioning word, e.g. 2,2,2,2,2.
    #[arg(long)]
    pub prefix: Option<String>,
    /// Exact rational starting point, e.g. 4/3.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub lag: Option<u32>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Bad-set fit range lo:hi.
    #[arg(long, value_parser = parse_range)]
    pub k_range: Option<(usize, usize)>,
    #[arg(long)]
    pub points: Option<usize>,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let a = a.trim().parse().map_err(|_| "bad lower end")?;
    let b = b.trim().parse().map_err(|_| "bad upper end")?;
    Ok((a, b))
}

fn missing<T>(key: &str, flag: &str) -> Result<T> {
    Err(Error::Config(format!("missing `{key}`: set it in the config or pass {flag}")))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.ifs.check()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides, seed: Option<u64>) {
        fn set<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
        if let Some(k) = &o.kappa {
            self.kappa = Some(NumOrStr::Str(k.clone()));
        }
        if let Some(x) = &o.x {
            self.x = Some(NumOrStr::Str(x.clone()));
        }
        set(&mut self.delta, &o.delta);
        set(&mut self.l, &o.l);
        set(&mut self.ls, &o.ls);
        set(&mut self.n, &o.n);
        set(&mut self.m, &o.m);
        set(&mut self.big_n, &o.big_n);
        set(&mut self.ns, &o.ns);
        set(&mut self.schedule, &o.schedule);
        set(&mut self.big_m, &o.big_m);
        set(&mut self.samples, &o.samples);
        set(&mut self.count, &o.count);
        set(&mut self.word_seed, &o.word_seed);
        set(&mut self.depth, &o.depth);
        set(&mut self.prefix, &o.prefix);
        set(&mut self.tol, &o.tol);
        set(&mut self.lag, &o.lag);
        set(&mut self.replicates, &o.replicates);
        set(&mut self.k_range, &o.k_range);
        set(&mut self.points, &o.points);
        set(&mut self.seed, &seed);
    }

    pub fn family(&self) -> Result<SequenceFamily> {
        match &self.family {
            Some(f) => {
                f.validate()?;
                Ok(f.clone())
            }
            None => missing("family", "a family object in the config"),
        }
    }

    pub fn kappa(&self) -> Result<Rational> {
        match &self.kappa {
            Some(k) => k.to_rational(),
            None => missing("kappa", "--kappa"),
        }
    }

    pub fn x(&self) -> Result<Option<Rational>> {
        self.x.as_ref().map(|x| x.to_rational()).transpose()
    }

    pub fn delta(&self) -> Result<f64> {
        self.delta.map_or_else(|| missing("delta", "--delta"), Ok)
    }

    pub fn l(&self) -> Result<i64> {
        match self.l {
            Some(0) => Err(Error::Config("l must be non-zero".into())),
            Some(l) => Ok(l),
            None => missing("l", "--l"),
        }
    }

    /// `ls`, falling back to `[l]`.
    pub fn ls(&mut self) -> Result<Vec<i64>> {
        if self.ls.is_none() {
            self.ls = Some(vec![self.l()?]);
        }
        Ok(self.ls.clone().unwrap())
    }

    pub fn n(&self) -> Result<u32> {
        self.n.map_or_else(|| missing("n", "--n"), Ok)
    }

    /// `m`, defaulting to `n - 1`.
    pub fn m(&mut self) -> Result<u32> {
        let n = self.n()?;
        if n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        Ok(*self.m.get_or_insert(n - 1))
    }

    pub fn big_n(&self) -> Result<u32> {
        self.big_n.map_or_else(|| missing("N", "--N"), Ok)
    }

    pub fn ns(&self) -> Result<Vec<u32>> {
        self.ns.as_ref().map_or_else(|| missing("ns", "--ns"), |s| Ok(s.0.clone()))
    }

    pub fn schedule(&self) -> Result<Vec<u32>> {
        self.schedule
            .as_ref()
            .map_or_else(|| missing("schedule", "--schedule"), |s| Ok(s.0.clone()))
    }

    pub fn big_m(&self) -> Result<usize> {
        self.big_m.map_or_else(|| missing("M", "--M"), Ok)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.map_or_else(|| missing("seed", "--seed"), Ok)
    }

    pub fn word_seed(&self) -> Result<u64> {
        self.word_seed.map_or_else(|| missing("word_seed", "--word-seed"), Ok)
    }

    pub fn samples(&mut self, default: usize) -> usize {
        *self.samples.get_or_insert(default)
    }

    pub fn count(&mut self, default: usize) -> usize {
        *self.count.get_or_insert(default)
    }

    pub fn depth(&mut self) -> Depth {
        self.depth.get_or_insert(DepthSpec(Depth::Auto)).0
    }

    pub fn tol(&mut self) -> f64 {
        *self.tol.get_or_insert(koksma::precision::DEFAULT_TOL)
    }

    pub fn lag(&mut self) -> u32 {
        *self.lag.get_or_insert(1)
    }

    pub fn replicates(&mut self) -> usize {
        *self.replicates.get_or_insert(20)
    }

    pub fn k_range(&mut self) -> (usize, usize) {
        *self.k_range.get_or_insert((4, 40))
    }

    pub fn points(&mut self, default: usize) -> usize {
        *self.points.get_or_insert(default)
    }

    pub fn grouping(&mut self) -> LogGrouping {
        *self.grouping.get_or_insert_with(LogGrouping::default)
    }

    /// The configured prefix, or `fallback` (recorded in the echo).
    pub fn prefix_or(&mut self, fallback: &Word) -> Result<Word> {
        let w = match &self.prefix {
            Some(p) => Word::parse(p)?,
            None => {
                self.prefix = Some(fallback.to_string());
                fallback.clone()
            }
        };
        w.check(&self.ifs)?;
        Ok(w)
    }

    pub fn prefix_given(&self) -> Result<Option<Word>> {
        self.prefix.as_deref().map(Word::parse).transpose()
    }
}
