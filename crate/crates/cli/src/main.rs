//! `chaoslab`: one subcommand per experiment, JSON or flag configuration,
//! CSV/JSON reports with an embedded copy of the resolved configuration.

mod commands;
mod config;

use chaoslab::functionals::Shape;
use chaoslab::limits::Carrier;
use chaoslab::Error;
use clap::{Args, Parser, Subcommand};
use config::{CommandKind, Format, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;

#[derive(Parser)]
#[command(name = "chaoslab", version, about = "Chaos-expansion experiments for functionals of Gaussian fields")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Moments ∫ C^q over a ball or all of R^d, with a log-log slope.
    Moments(Flags),
    /// Exact chaos-by-chaos variance of the functional.
    Variance(Flags),
    /// Write one field realization on a grid.
    Field(Flags),
    /// Replicate CLT experiment: W1, KS and shape statistics per t.
    Clt(Flags),
    /// Single-path log-average experiment.
    Ascl(Flags),
    /// Contraction integrals h_t(k1,k2) or the ξ_m(t) proxy.
    Contractions(Flags),
    /// Check the decay and regularity conditions of a model.
    Conditions(Flags),
}

#[derive(Args, Default)]
struct Flags {
    /// berry | exponential | matern | cauchy
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Powers: 8..128, 5 or 2,4,8.
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    signed: Option<bool>,
    /// Radius or `inf`.
    #[arg(long)]
    r_max: Option<String>,
    /// hermite:q | indicator:u | series:a0,a1,.. | table:path.csv
    #[arg(long)]
    phi: Option<String>,
    #[arg(long, value_enum)]
    shape: Option<ShapeArg>,
    /// Domain scales, comma separated.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    /// Log-average horizons, comma separated.
    #[arg(long = "T", value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    /// Chaos truncation level.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Number of plane waves.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Lattice spacing.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, value_enum)]
    carrier: Option<CarrierArg>,
    #[arg(long)]
    n_reps: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    k1: Option<usize>,
    #[arg(long)]
    k2: Option<usize>,
    /// Contraction threshold m of ξ_m.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k_cap: Option<usize>,
    #[arg(long)]
    drop_first_chaos: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ShapeArg {
    Ball,
    Box,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CarrierArg {
    Auto,
    Planewave,
    Circulant,
}

impl Flags {
    fn into_config(self) -> RunConfig {
        RunConfig {
            model: self.model,
            d: self.d,
            alpha: self.alpha,
            mu: self.mu,
            beta: self.beta,
            gamma: self.gamma,
            q: self.q,
            signed: self.signed,
            r_max: self.r_max,
            phi: self.phi,
            shape: self.shape.map(|s| match s {
                ShapeArg::Ball => Shape::Ball,
                ShapeArg::Box => Shape::Box,
            }),
            t: self.t,
            horizons: self.horizons,
            n: self.n,
            k: self.k,
            h: self.h,
            carrier: self.carrier.map(|c| match c {
                CarrierArg::Auto => Carrier::Auto,
                CarrierArg::Planewave => Carrier::Planewave,
                CarrierArg::Circulant => Carrier::Circulant,
            }),
            n_reps: self.n_reps,
            n_samples: self.n_samples,
            k1: self.k1,
            k2: self.k2,
            m: self.m,
            k_cap: self.k_cap,
            drop_first_chaos: self.drop_first_chaos.then_some(true),
            seed: self.seed,
            out: self.out,
            format: self.format,
            ..Default::default()
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match cli.command {
        Cmd::Moments(f) => (CommandKind::Moments, f),
        Cmd::Variance(f) => (CommandKind::Variance, f),
        Cmd::Field(f) => (CommandKind::Field, f),
        Cmd::Clt(f) => (CommandKind::Clt, f),
        Cmd::Ascl(f) => (CommandKind::Ascl, f),
        Cmd::Contractions(f) => (CommandKind::Contractions, f),
        Cmd::Conditions(f) => (CommandKind::Conditions, f),
    };

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let base = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => RunConfig::default(),
    };
    let env_seed = std::env::var("CHAOSLAB_SEED").ok();
    let cfg = match base.overlay(flags.into_config()).resolve(kind, env_seed.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    match commands::run(&cfg) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", outcome.summary);
            if outcome.inconclusive {
                ExitCode::from(EXIT_INCONCLUSIVE)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
