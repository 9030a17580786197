use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kmedyn::KernelSpec;
use kmedyn_cli::config::{ArxFitConfig, OdeGmmConfig, PropagateConfig, ReducedPropConfig};
use kmedyn_cli::scenarios::{median_bandwidth, mmd_distance};
use kmedyn_cli::{io, run, Overrides, ScenarioConfig};

/// Kernel mean embeddings for uncertainty propagation in dynamical systems.
///
/// Distances are reported as RKHS distances (square root of MMD²).
#[derive(Parser)]
#[command(name = "kme-dyn", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Uncertain linear ODE: mixture parameter vs its moment-matched Gaussian.
    OdeGmm(ScenarioArgs),
    /// ARX model: distances of PVE and least-squares parameter models to the truth.
    ArxFit(ScenarioArgs),
    /// Random walk with drift: direct sampling vs reduced-set propagation errors.
    ReducedProp(ReducedArgs),
    /// RKHS distance between two samples stored as CSV matrices.
    Mmd(MmdArgs),
    /// Propagate a built-in system described by a config file.
    Propagate(PropagateArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[command(flatten)]
    common: Common,
    /// Realizations per ensemble.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct ReducedArgs {
    #[command(flatten)]
    common: Common,
    /// Representation sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    nr: Vec<usize>,
    /// Noise draws per step.
    #[arg(long)]
    nxi: Option<usize>,
    /// Ridge added to the reduced-set Gram matrix, or `auto`.
    #[arg(long, value_parser = parse_ridge)]
    ridge: Option<Ridge>,
}

#[derive(Args)]
struct PropagateArgs {
    #[command(flatten)]
    common: Common,
    /// Realizations (direct algorithm).
    #[arg(long)]
    n: Option<usize>,
    /// Reduced-set size.
    #[arg(long)]
    nr: Option<usize>,
    /// Noise draws per step.
    #[arg(long)]
    nxi: Option<usize>,
    /// Ridge added to the reduced-set Gram matrix, or `auto`.
    #[arg(long, value_parser = parse_ridge)]
    ridge: Option<Ridge>,
}

#[derive(Clone, Copy)]
struct Ridge(Option<f64>);

fn parse_ridge(s: &str) -> Result<Ridge, String> {
    if s == "auto" {
        return Ok(Ridge(None));
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(Ridge(Some(v))),
        _ => Err(format!("'{s}' is not a nonnegative number or 'auto'")),
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Linear,
    Polynomial,
    Gaussian,
    Exponential,
}

#[derive(Clone, Copy)]
enum Bandwidth {
    Value(f64),
    Median,
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    if s == "median" {
        return Ok(Bandwidth::Median);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Bandwidth::Value(v)),
        _ => Err(format!("'{s}' is not a positive number or 'median'")),
    }
}

#[derive(Args)]
struct MmdArgs {
    /// First sample: CSV, one row per point.
    a: PathBuf,
    /// Second sample, same number of columns.
    b: PathBuf,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: KernelKind,
    /// Gaussian bandwidth σ in exp(-|x-y|²/(2σ²)), or `median` for the median
    /// pairwise distance of the pooled sample.
    #[arg(long, default_value = "median", value_parser = parse_bandwidth)]
    bandwidth: Bandwidth,
    /// Polynomial degree.
    #[arg(long, default_value_t = 2)]
    degree: u32,
    /// Directory for mmd.csv.
    #[arg(long, default_value = "out/mmd")]
    out: PathBuf,
}

fn scenario(common: &Common, default: ScenarioConfig, overrides: Overrides) -> Result<Vec<String>> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = ScenarioConfig::load(path)?;
            if cfg.name() != default.name() {
                bail!("{} holds a {} config, expected {}", path.display(), cfg.name(), default.name());
            }
            cfg
        }
        None => default,
    };
    let overrides = Overrides {
        seed: common.seed,
        out: common.out.clone(),
        ..overrides
    };
    overrides.apply(&mut cfg)?;
    let mut lines = run(&cfg)?;
    lines.push(format!("outputs in {}", cfg.out().display()));
    Ok(lines)
}

fn mmd(args: &MmdArgs) -> Result<Vec<String>> {
    let a = io::read_matrix(&args.a)?;
    let b = io::read_matrix(&args.b)?;
    if a.dim() != b.dim() {
        bail!("column mismatch: {} has {}, {} has {}", args.a.display(), a.dim(), args.b.display(), b.dim());
    }
    let kernel = match args.kernel {
        KernelKind::Linear => KernelSpec::linear(),
        KernelKind::Polynomial => KernelSpec::polynomial(args.degree)?,
        KernelKind::Exponential => KernelSpec::exponential(),
        KernelKind::Gaussian => KernelSpec::gaussian(match args.bandwidth {
            Bandwidth::Value(v) => v,
            Bandwidth::Median => median_bandwidth(&a, &b)?,
        })?,
    };
    let d = mmd_distance(&a, &b, kernel)?;
    io::create_out(&args.out)?;
    let path = args.out.join("mmd.csv");
    let mut w = io::csv_writer(&path)?;
    w.write_record(["kernel", "value"])?;
    w.write_record([kernel.to_string(), d.to_string()])?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(vec![d.to_string()])
}

fn dispatch(cli: &Cli) -> Result<Vec<String>> {
    match &cli.command {
        Command::OdeGmm(a) => scenario(
            &a.common,
            ScenarioConfig::OdeGmm(OdeGmmConfig::default()),
            Overrides { n: a.n, ..Default::default() },
        ),
        Command::ArxFit(a) => scenario(
            &a.common,
            ScenarioConfig::ArxFit(ArxFitConfig::default()),
            Overrides { n: a.n, ..Default::default() },
        ),
        Command::ReducedProp(a) => scenario(
            &a.common,
            ScenarioConfig::ReducedProp(ReducedPropConfig::default()),
            Overrides {
                nr: a.nr.clone(),
                nxi: a.nxi,
                ridge: a.ridge.map(|r| r.0),
                ..Default::default()
            },
        ),
        Command::Propagate(a) => scenario(
            &a.common,
            ScenarioConfig::Propagate(PropagateConfig::default()),
            Overrides {
                n: a.n,
                nr: a.nr.into_iter().collect(),
                nxi: a.nxi,
                ridge: a.ridge.map(|r| r.0),
                ..Default::default()
            },
        ),
        Command::Mmd(a) => mmd(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(lines) => {
            let mut out = std::io::stdout().lock();
            for l in lines {
                // a closed pipe (e.g. `| head`) is not an error
                if writeln!(out, "{l}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
