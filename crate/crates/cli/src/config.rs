//! Experiment configuration with layered overrides.
//!
//! Precedence, lowest to highest:
//! 1. built-in defaults (this module),
//! 2. a TOML config file (`--config path.toml`),
//! 3. dotted `--set section.key=value` overrides, applied in order,
//! 4. dedicated command-line flags.
//!
//! The merged configuration — master seed included — fully determines a
//! run, so repeating the same invocation reproduces every output file byte
//! for byte. Unknown keys are rejected rather than ignored: a typo must not
//! silently fall back to a default.

use std::fs;
use std::path::{Path, PathBuf};

use kljn_puf_core::nbl::RtwMode;
use kljn_puf_core::puf::Variant;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// JSON Lines: a schema-versioned header record, then one record per row.
    Text,
    /// Flat tables with a header row; columns are documented per subcommand.
    Csv,
}

/// Device family selector (mirrors the core library's variants).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantCfg {
    Ultra,
    Strong,
    Simple,
}

impl From<VariantCfg> for Variant {
    fn from(v: VariantCfg) -> Variant {
        match v {
            VariantCfg::Ultra => Variant::Ultra,
            VariantCfg::Strong => Variant::Strong,
            VariantCfg::Simple => Variant::Simple,
        }
    }
}

/// Which telegraph-stream comparison route `verify` exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeCfg {
    Product,
    Xor,
}

impl From<ModeCfg> for RtwMode {
    fn from(m: ModeCfg) -> RtwMode {
        match m {
            ModeCfg::Product => RtwMode::Product,
            ModeCfg::Xor => RtwMode::Xor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stream in a run derives from it.
    pub seed: u64,
    /// Worker threads for trial-level parallelism. Results are identical
    /// for any value; this only changes wall time.
    pub jobs: Option<usize>,
    pub format: OutputFormat,
    /// Artifact path; stdout when absent.
    pub out: Option<PathBuf>,
    pub exchange: ExchangeCfg,
    pub verify: VerifyCfg,
    pub puf: PufCfg,
    pub attack: AttackCfg,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            jobs: None,
            format: OutputFormat::Text,
            out: None,
            exchange: ExchangeCfg::default(),
            verify: VerifyCfg::default(),
            puf: PufCfg::default(),
            attack: AttackCfg::default(),
        }
    }
}

/// One key exchange (`exchange` subcommand).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExchangeCfg {
    /// Secret bits to agree on.
    pub n_bits: usize,
    pub r_low: f64,
    pub r_high: f64,
    pub kt_eff: f64,
    pub bandwidth: f64,
    pub samples_per_cycle: usize,
    /// Compare every k-th tick publicly (the active-attack defense).
    pub compare_every_kth: usize,
    /// Alarm threshold in reference-RMS units.
    pub compare_epsilon: f64,
    /// Give up after this many cycles; default scales with `n_bits`.
    pub max_cycles: Option<u64>,
}

impl Default for ExchangeCfg {
    fn default() -> Self {
        Self {
            n_bits: 128,
            r_low: 10_000.0,
            r_high: 100_000.0,
            kt_eff: 1.0,
            bandwidth: 0.5,
            samples_per_cycle: 10_000,
            compare_every_kth: 16,
            compare_epsilon: 3.0,
            max_cycles: None,
        }
    }
}

/// False-accept sweep for stream verification (`verify` subcommand).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyCfg {
    /// String length in bits.
    pub n_bits: usize,
    /// Sweep lower bound for the stream length m (inclusive).
    pub m_min: u32,
    /// Sweep upper bound for the stream length m (inclusive).
    pub m_max: u32,
    /// Monte Carlo trials per m value.
    pub trials: u64,
    /// Verify identical strings instead of differing ones: every trial must
    /// accept, and the row reports the residual false-accept probability.
    pub identical: bool,
    pub mode: ModeCfg,
}

impl Default for VerifyCfg {
    fn default() -> Self {
        Self { n_bits: 8, m_min: 1, m_max: 12, trials: 100_000, identical: false, mode: ModeCfg::Product }
    }
}

/// Key/lock lifecycle sessions (`puf` subcommand).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PufCfg {
    pub variant: VariantCfg,
    /// Secret length in bits.
    pub n_bits: usize,
    /// Stream length for challenge verification.
    pub m: u32,
    /// Sessions to run; the first session of a fresh ultra/strong pair is
    /// its initialization.
    pub sessions: u64,
    /// Noise samples per exchange cycle during key renewals.
    pub samples_per_cycle: usize,
    /// After the sessions, present a key rebuilt from the manufacturer's
    /// provisioning records and log its verdict (reject expected for
    /// initialized ultra/strong pairs, accept for simple pairs).
    pub clone_probe: bool,
    /// Persist `lock.json` and `key.json` here after the run.
    pub state_dir: Option<PathBuf>,
}

impl Default for PufCfg {
    fn default() -> Self {
        Self {
            variant: VariantCfg::Ultra,
            n_bits: 16,
            m: 83,
            sessions: 3,
            samples_per_cycle: 10_000,
            clone_probe: false,
            state_dir: None,
        }
    }
}

/// Adversary harness (`attack` subcommand). `None` keeps an attack's own
/// documented default scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackCfg {
    /// Attack name, or "all" for the whole registry.
    pub name: String,
    pub trials: Option<u64>,
    pub n_bits: Option<usize>,
    pub m: Option<u32>,
    pub samples_per_cycle: Option<usize>,
    pub amplitude_scale: Option<f64>,
    /// Test fixture: adds a deliberately leaky wiretap oracle whose report
    /// must fail its gate (proves the harness can go red).
    pub fixture_leaky_eve: bool,
}

impl Default for AttackCfg {
    fn default() -> Self {
        Self {
            name: "all".to_string(),
            trials: None,
            n_bits: None,
            m: None,
            samples_per_cycle: None,
            amplitude_scale: None,
            fixture_leaky_eve: false,
        }
    }
}

/// Parse the right-hand side of a `--set` as a TOML literal, falling back
/// to a bare string (so `--set puf.variant=ultra` needs no quoting).
fn parse_toml_literal(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Apply one `--set section.key=value` onto the raw TOML tree.
fn apply_set(root: &mut toml::Table, spec: &str) -> Result<(), String> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("--set expects key=value, got `{spec}`"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(format!("--set key `{path}` has an empty path segment"));
    }
    let mut table = root;
    for k in &keys[..keys.len() - 1] {
        table = table
            .entry((*k).to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| format!("--set {path}: `{k}` is not a table"))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), parse_toml_literal(raw.trim()));
    Ok(())
}

/// Merge defaults, an optional config file, and `--set` overrides.
pub fn load(config: Option<&Path>, sets: &[String]) -> Result<ExperimentConfig, String> {
    let mut root: toml::Table = match config {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| format!("cannot read config {}: {e}", p.display()))?
            .parse()
            .map_err(|e| format!("config {} is not valid TOML: {e}", p.display()))?,
        None => toml::Table::new(),
    };
    for s in sets {
        apply_set(&mut root, s)?;
    }
    toml::Value::Table(root)
        .try_into()
        .map_err(|e| format!("invalid config: {e}"))
}
