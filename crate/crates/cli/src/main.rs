//! `ohaf`: outage and capacity experiments for STNC-OHAF relaying.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ohaf_core::experiment::{self, ConfigPatch, ExperimentKind};
use ohaf_core::Scheme;

#[derive(Parser)]
#[command(name = "ohaf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo outage versus system SNR, with the closed-form overlay.
    OutageSweep(Common),
    /// Sum outage capacity versus symbols per period.
    CapacitySweep(Common),
    /// Compare the SNR recursion against the simulated baseband chain.
    ValidateLemma1(Common),
    /// Outage of all schemes on one shared topology.
    CompareSchemes(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; flags override its fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Relay counts, e.g. `2` or `2,3`.
    #[arg(long = "relays", value_name = "K")]
    relays: Option<String>,
    /// Symbols per period, a list `1,2,4` or a range `1:10:1`.
    #[arg(long = "symbols", value_name = "M")]
    symbols: Option<String>,
    /// Target rate in bits per channel use.
    #[arg(long, value_name = "R", allow_hyphen_values = true)]
    rate: Option<f64>,
    /// SNR grid in dB: `LO:HI:STEP`, a list, or a single value.
    #[arg(long = "snr-db", value_name = "LO:HI:STEP", allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Monte Carlo trials per point.
    #[arg(long, value_name = "N")]
    trials: Option<u64>,
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Scheme to simulate; repeat for several.
    #[arg(long = "scheme", value_name = "NAME")]
    schemes: Vec<Scheme>,
    /// Range of the uniform link-variance draws.
    #[arg(long = "variance-range", value_name = "LO,HI")]
    variance_range: Option<String>,
    /// Noise traces per channel (validate-lemma1).
    #[arg(long, value_name = "N")]
    noise_traces: Option<u64>,
    /// Channel draws (validate-lemma1).
    #[arg(long, value_name = "N")]
    channels: Option<u64>,
    /// Worker threads; does not affect results.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Output CSV; the manifest is written next to it.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("invalid --{flag} entry {x:?}: {e}"))
        })
        .collect()
}

/// `LO:HI:STEP` inclusive of `HI` up to rounding, a comma list, or a value.
fn parse_grid(flag: &str, s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let [lo, hi, step] = [lo, hi, step].map(|x| x.trim().parse::<f64>());
            let (lo, hi, step) = (
                lo.with_context(|| format!("invalid --{flag} start"))?,
                hi.with_context(|| format!("invalid --{flag} end"))?,
                step.with_context(|| format!("invalid --{flag} step"))?,
            );
            if step.is_nan() || step <= 0.0 || hi.is_nan() || hi < lo {
                bail!("invalid --{flag}: need LO <= HI and STEP > 0");
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| lo + step * i as f64).collect())
        }
        [_] => parse_list(flag, s),
        _ => bail!("invalid --{flag}: expected LO:HI:STEP or a comma list"),
    }
}

fn patch_from_flags(kind: ExperimentKind, c: &Common) -> anyhow::Result<ConfigPatch> {
    let symbols = match &c.symbols {
        Some(s) => Some(
            parse_grid("symbols", s)?
                .into_iter()
                .map(|x| {
                    if x.fract() != 0.0 || x < 0.0 {
                        bail!("invalid --symbols: {x} is not a whole number");
                    }
                    Ok(x as usize)
                })
                .collect::<anyhow::Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let variance_range = match &c.variance_range {
        Some(s) => match parse_list::<f64>("variance-range", s)?.as_slice() {
            [lo, hi] => Some((*lo, *hi)),
            _ => bail!("invalid --variance-range: expected LO,HI"),
        },
        None => None,
    };
    Ok(ConfigPatch {
        experiment: Some(kind),
        relays: c
            .relays
            .as_deref()
            .map(|s| parse_list("relays", s))
            .transpose()?,
        symbols,
        rate: c.rate,
        snr_db: c
            .snr_db
            .as_deref()
            .map(|s| parse_grid("snr-db", s))
            .transpose()?,
        schemes: (!c.schemes.is_empty()).then(|| c.schemes.clone()),
        trials: c.trials,
        seed: c.seed,
        variance_range,
        variances: None,
        n0: None,
        noise_traces: c.noise_traces,
        channels: c.channels,
        workers: c.workers,
        out: c.out.clone(),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (kind, common) = match &cli.command {
        Command::OutageSweep(c) => (ExperimentKind::OutageSweep, c),
        Command::CapacitySweep(c) => (ExperimentKind::CapacitySweep, c),
        Command::ValidateLemma1(c) => (ExperimentKind::ValidateLemma1, c),
        Command::CompareSchemes(c) => (ExperimentKind::CompareSchemes, c),
    };
    let file = match &common.config {
        Some(p) => {
            ConfigPatch::from_file(p).with_context(|| format!("reading config {}", p.display()))?
        }
        None => ConfigPatch::default(),
    };
    if let Some(k) = file.experiment {
        if k != kind {
            eprintln!("note: config names {}, running {}", k.name(), kind.name());
        }
    }
    let config = file.merge(patch_from_flags(kind, common)?).resolve()?;
    let out = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", kind.name())));
    let result = experiment::run(&config)?;
    let manifest = result
        .write(&out)
        .with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {} and {}", out.display(), manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
