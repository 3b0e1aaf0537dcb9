mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use koksma::{Error, Exec, Result};

use config::{ExperimentConfig, Overrides};
use output::{emit, Format};

#[derive(Parser)]
#[command(name = "koksma", version, about = "Metric equidistribution experiments on self-similar measures")]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every stochastic command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write `<command>.<ext>` into this directory instead of stdout.
    #[arg(long, global = true, env = "KOKSMA_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for the parallel paths.
    #[arg(long, global = true, env = "KOKSMA_THREADS")]
    threads: Option<usize>,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the separation and entropy hypotheses of the IFS.
    Validate(Overrides),
    /// Derived constants for a threshold offset, and optionally the depth M at n.
    Constants(Overrides),
    /// Sample points from the measure.
    Sample(Overrides),
    /// Certified orbit x_n mod 1 at an exact rational or a sampled point.
    Orbit(Overrides),
    /// Star discrepancy of orbit prefixes.
    Discrepancy(Overrides),
    /// Normalised Weyl sums of orbit prefixes.
    Weyl(Overrides),
    /// Monte Carlo estimate of the correlation series.
    DelSeries(Overrides),
    /// Exact masses of the large-deviation word sets and the fitted rate.
    Hoeffding(Overrides),
    /// Filtered oscillatory sum W_M on the hull.
    Wm(Overrides),
    /// Oscillatory-integral bound on random word pairs.
    Vdc(Overrides),
    /// Decay rate of the conditioned Fourier coefficients.
    Decay(Overrides),
    /// validate, constants, decay and discrepancy in one JSON document.
    Report(Overrides),
}

impl Command {
    fn overrides(&self) -> &Overrides {
        match self {
            Command::Validate(o)
            | Command::Constants(o)
            | Command::Sample(o)
            | Command::Orbit(o)
            | Command::Discrepancy(o)
            | Command::Weyl(o)
            | Command::DelSeries(o)
            | Command::Hoeffding(o)
            | Command::Wm(o)
            | Command::Vdc(o)
            | Command::Decay(o)
            | Command::Report(o) => o,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::Precision(_) => 3,
        Error::Flagged(_) => 4,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("missing --config".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(cli.command.overrides(), cli.seed);
    if let Some(t) = cli.threads {
        koksma::par::configure_threads(t);
    }
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let c = &mut cfg;
    let out = match &cli.command {
        Command::Validate(_) => commands::validate(c),
        Command::Constants(_) => commands::constants(c),
        Command::Sample(_) => commands::sample(c),
        Command::Orbit(_) => commands::orbit(c),
        Command::Discrepancy(_) => commands::discrepancy(c, exec),
        Command::Weyl(_) => commands::weyl(c, exec),
        Command::DelSeries(_) => commands::del_series(c, exec),
        Command::Hoeffding(_) => commands::hoeffding(c),
        Command::Wm(_) => commands::wm(c),
        Command::Vdc(_) => commands::vdc(c, exec),
        Command::Decay(_) => commands::decay(c, exec),
        Command::Report(_) => commands::report(c, exec),
    }?;
    let format = cli.format.unwrap_or(out.default_format());
    let text = out.render(&cfg, format)?;
    emit(&text, out.command, format, cli.out.as_ref())?;
    Ok(out.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
