//! `kljn-puf` — reproducible experiment runner for the simulation library:
//! noise-based key exchange, telegraph-stream string verification, key/lock
//! challenge protocols, and the adversary harness.
//!
//! Subcommands: `exchange | verify | puf | attack`. Global flags `--seed`,
//! `--out`, `--format`, `--jobs`, `--config`, `--set` layer onto built-in
//! defaults (see [`config`] for precedence). Artifacts go to `--out` (or
//! stdout); a short human summary goes to stderr.
//!
//! Exit status: `0` — the run completed and every bound/invariant it checks
//! held; `1` — the run completed but a gate was breached (a measured rate
//! outside its tolerance, a rejected session, an aborted exchange); `2` —
//! usage, configuration, or I/O error.

mod attack_cmd;
mod config;
mod exchange_cmd;
mod output;
mod puf_cmd;
mod verify_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, ModeCfg, OutputFormat, VariantCfg};

#[derive(Parser)]
#[command(
    name = "kljn-puf",
    version,
    about = "Simulator for resistor-noise key exchange, telegraph-stream verification, and hardware key/lock protocols",
    after_help = "Exit status: 0 all gates held, 1 a gate was breached, 2 usage/config error."
)]
struct Cli {
    /// Master seed; every random stream in the run derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Artifact format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Worker threads; results are identical for any value.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// TOML config file (layered under --set and dedicated flags).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set exchange.r_low=5000 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one key exchange and emit its transcript.
    Exchange(ExchangeArgs),
    /// Sweep stream-verification false accepts against the analytic 2^-m.
    Verify(VerifyArgs),
    /// Provision a key/lock pair, run challenge sessions, persist state.
    Puf(PufArgs),
    /// Run adversary attacks and gate their measured rates.
    Attack(AttackArgs),
}

#[derive(Args)]
pub struct ExchangeArgs {
    /// Secret bits to agree on.
    #[arg(long)]
    n_bits: Option<usize>,
    /// Low resistor value.
    #[arg(long)]
    r_low: Option<f64>,
    /// High resistor value.
    #[arg(long)]
    r_high: Option<f64>,
    /// Effective temperature factor of the noise sources.
    #[arg(long)]
    kt_eff: Option<f64>,
    /// Noise bandwidth factor.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Noise samples simulated per cycle.
    #[arg(long)]
    samples_per_cycle: Option<usize>,
    /// Publicly compare every k-th tick (active-attack defense).
    #[arg(long)]
    compare_every_kth: Option<usize>,
    /// Alarm threshold in reference-RMS units.
    #[arg(long)]
    compare_epsilon: Option<f64>,
    /// Give up after this many cycles.
    #[arg(long)]
    max_cycles: Option<u64>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// String length in bits.
    #[arg(long)]
    n_bits: Option<usize>,
    /// Sweep lower bound for the stream length m (inclusive).
    #[arg(long)]
    m_min: Option<u32>,
    /// Sweep upper bound for the stream length m (inclusive).
    #[arg(long)]
    m_max: Option<u32>,
    /// Monte Carlo trials per m value.
    #[arg(long)]
    trials: Option<u64>,
    /// Verify identical strings: every trial must accept; rows report the
    /// residual false-accept probability 2^-m.
    #[arg(long)]
    identical: bool,
    /// Comparison route (the two are independent implementations).
    #[arg(long, value_enum)]
    mode: Option<ModeCfg>,
}

#[derive(Args)]
pub struct PufArgs {
    /// Device family.
    #[arg(long, value_enum)]
    variant: Option<VariantCfg>,
    /// Secret length in bits.
    #[arg(long)]
    n_bits: Option<usize>,
    /// Stream length for challenge verification.
    #[arg(long)]
    m: Option<u32>,
    /// Sessions to run (a fresh ultra/strong pair initializes on the first).
    #[arg(long)]
    sessions: Option<u64>,
    /// Noise samples per cycle during key renewals.
    #[arg(long)]
    samples_per_cycle: Option<usize>,
    /// After the sessions, present a key rebuilt from manufacturer records
    /// and log its verdict.
    #[arg(long)]
    clone_probe: bool,
    /// Persist lock.json and key.json here after the run.
    #[arg(long)]
    state_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct AttackArgs {
    /// Attack name, or "all" for the whole registry.
    name: Option<String>,
    /// List registered attacks and exit.
    #[arg(long)]
    list: bool,
    /// Trials / runs (each attack documents its own default scale).
    #[arg(long)]
    trials: Option<u64>,
    /// Secret or response length in bits.
    #[arg(long)]
    n_bits: Option<usize>,
    /// Stream length for challenge verification.
    #[arg(long)]
    m: Option<u32>,
    /// Noise samples per exchange cycle.
    #[arg(long)]
    samples_per_cycle: Option<usize>,
    /// Injection amplitude in reference-RMS units.
    #[arg(long)]
    amplitude_scale: Option<f64>,
    /// Test fixture: add a deliberately leaky wiretap oracle whose gate
    /// must trip (returns exit status 1 by design).
    #[arg(long, hide = true)]
    fixture_leaky_eve: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("gate breached: at least one bound or invariant did not hold");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    let mut cfg: ExperimentConfig = config::load(cli.config.as_deref(), &cli.sets)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = Some(o);
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(jobs) = cfg.jobs {
        if jobs == 0 {
            return Err("jobs must be >= 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| format!("cannot size the worker pool: {e}"))?;
    }
    match cli.command {
        Cmd::Exchange(args) => exchange_cmd::run(&cfg, &args),
        Cmd::Verify(args) => verify_cmd::run(&cfg, &args),
        Cmd::Puf(args) => puf_cmd::run(&cfg, &args),
        Cmd::Attack(args) => attack_cmd::run(&cfg, &args),
    }
}
