//! Experiment configuration: command-line flags override a flat
//! `key=value` file, which overrides built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use edsimo::optimizer::{DEFAULT_EPSILON, DEFAULT_MAX_ITER};
use edsimo::SystemParams;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Optimize,
    Sep,
    Simulate,
    BruteForce,
    SweepN,
    SweepM,
    SweepSnr,
    Gaussianity,
    Convexity,
    Validate,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Optimize => "optimize",
            Scenario::Sep => "sep",
            Scenario::Simulate => "simulate",
            Scenario::BruteForce => "brute-force",
            Scenario::SweepN => "sweep-n",
            Scenario::SweepM => "sweep-m",
            Scenario::SweepSnr => "sweep-snr",
            Scenario::Gaussianity => "gaussianity",
            Scenario::Convexity => "convexity",
            Scenario::Validate => "validate",
        }
    }

    fn default_trials(self) -> u64 {
        match self {
            Scenario::Simulate | Scenario::Validate => 100_000,
            Scenario::Gaussianity => 1_000_000,
            Scenario::Convexity => 10_000,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => bail!("unknown format '{other}' (expected csv or json)"),
        }
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Rician factor.
    #[arg(long = "K")]
    pub k: Option<f64>,
    /// Number of receive antennas.
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Constellation size.
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Average SNR in dB.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// Per-antenna noise variance.
    #[arg(long)]
    pub sigma_z2: Option<f64>,
    /// Stopping threshold on the squared power step.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Monte Carlo trials (per symbol for simulations, draws for
    /// gaussianity, combinations for convexity).
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Flat key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Explicit constellation powers, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub powers: Option<Vec<f64>>,
    /// Brute-force grid step as a fraction of the power budget.
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub k_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub m_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr_values: Option<Vec<f64>>,
    /// Symbol power for the gaussianity check (defaults to the budget).
    #[arg(long)]
    pub power: Option<f64>,
    /// Restrict the convexity probe to a neighbourhood of the optimized
    /// constellation of this relative radius.
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub k: f64,
    pub n: usize,
    pub m: usize,
    pub snr_db: f64,
    pub sigma_z2: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub trials: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub powers: Option<Vec<f64>>,
    pub grid_step: f64,
    pub k_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub snr_values: Vec<f64>,
    pub power: Option<f64>,
    pub radius: Option<f64>,
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e| anyhow::anyhow!("config key '{key}': cannot parse '{raw}': {e}"))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    raw.split(',').map(|v| parse_value(key, v)).collect()
}

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), no + 1);
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl CommonArgs {
    /// Fills unset fields from a parsed config file.
    fn fill_from(&mut self, file: &BTreeMap<String, String>) -> Result<()> {
        for (key, raw) in file {
            match key.as_str() {
                "K" => self.k = self.k.or(Some(parse_value(key, raw)?)),
                "N" => self.n = self.n.or(Some(parse_value(key, raw)?)),
                "M" => self.m = self.m.or(Some(parse_value(key, raw)?)),
                "snr-db" => self.snr_db = self.snr_db.or(Some(parse_value(key, raw)?)),
                "sigma-z2" => self.sigma_z2 = self.sigma_z2.or(Some(parse_value(key, raw)?)),
                "epsilon" => self.epsilon = self.epsilon.or(Some(parse_value(key, raw)?)),
                "max-iter" => self.max_iter = self.max_iter.or(Some(parse_value(key, raw)?)),
                "trials" => self.trials = self.trials.or(Some(parse_value(key, raw)?)),
                "seed" => self.seed = self.seed.or(Some(parse_value(key, raw)?)),
                "out" => self.out = self.out.take().or(Some(PathBuf::from(raw))),
                "format" => self.format = self.format.or(Some(parse_value(key, raw)?)),
                "powers" if self.powers.is_none() => self.powers = Some(parse_list(key, raw)?),
                "grid-step" => self.grid_step = self.grid_step.or(Some(parse_value(key, raw)?)),
                "k-values" if self.k_values.is_none() => {
                    self.k_values = Some(parse_list(key, raw)?)
                }
                "n-values" if self.n_values.is_none() => {
                    self.n_values = Some(parse_list(key, raw)?)
                }
                "m-values" if self.m_values.is_none() => {
                    self.m_values = Some(parse_list(key, raw)?)
                }
                "snr-values" if self.snr_values.is_none() => {
                    self.snr_values = Some(parse_list(key, raw)?)
                }
                "power" => self.power = self.power.or(Some(parse_value(key, raw)?)),
                "radius" => self.radius = self.radius.or(Some(parse_value(key, raw)?)),
                "powers" | "k-values" | "n-values" | "m-values" | "snr-values" => {}
                other => bail!("unknown config key '{other}'"),
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn resolve(scenario: Scenario, mut args: CommonArgs) -> Result<Self> {
        if let Some(path) = args.config.clone() {
            args.fill_from(&read_config_file(&path)?)?;
        }
        let k = args.k.unwrap_or(50.0);
        let n = args.n.unwrap_or(500);
        let m = args.m.unwrap_or(4);
        let snr_db = args.snr_db.unwrap_or(0.0);
        let (n_default, m_default, snr_default): (Vec<usize>, Vec<usize>, Vec<f64>) = match scenario
        {
            Scenario::SweepN => ((1..=10).map(|i| 100 * i).collect(), vec![m], vec![snr_db]),
            Scenario::SweepM => (vec![n], (2..=10).collect(), vec![snr_db]),
            Scenario::SweepSnr => (vec![n], vec![m], (-6..=6).map(f64::from).collect()),
            _ => (vec![n], vec![m], vec![snr_db]),
        };
        let config = ExperimentConfig {
            scenario,
            k,
            n,
            m,
            snr_db,
            sigma_z2: args.sigma_z2.unwrap_or(1.0),
            epsilon: args.epsilon.unwrap_or(DEFAULT_EPSILON),
            max_iter: args.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            trials: args.trials.unwrap_or(scenario.default_trials()),
            seed: args.seed.unwrap_or(42),
            out: args.out,
            format: args.format.unwrap_or_default(),
            powers: args.powers,
            grid_step: args.grid_step.unwrap_or(0.01),
            k_values: args.k_values.unwrap_or_else(|| vec![k]),
            n_values: args.n_values.unwrap_or(n_default),
            m_values: args.m_values.unwrap_or(m_default),
            snr_values: args.snr_values.unwrap_or(snr_default),
            power: args.power,
            radius: args.radius,
        };
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<()> {
        if self.k_values.is_empty()
            || self.n_values.is_empty()
            || self.m_values.is_empty()
            || self.snr_values.is_empty()
        {
            bail!("sweep ranges must be non-empty");
        }
        for &k in &self.k_values {
            for &n in &self.n_values {
                for &m in &self.m_values {
                    for &snr in &self.snr_values {
                        SystemParams::from_snr_db(k, n, self.sigma_z2, m, snr)?;
                    }
                }
            }
        }
        self.params()?;
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            bail!("epsilon must be > 0");
        }
        if self.max_iter < 1 {
            bail!("max-iter must be >= 1");
        }
        Ok(())
    }

    /// Parameters of the single (non-swept) operating point.
    pub fn params(&self) -> Result<SystemParams> {
        Ok(SystemParams::from_snr_db(
            self.k,
            self.n,
            self.sigma_z2,
            self.m,
            self.snr_db,
        )?)
    }
}
