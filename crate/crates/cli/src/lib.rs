//! Experiment runner behind the `edsimo` command-line tool.

pub mod config;
pub mod oracle;
pub mod output;
pub mod scenarios;

use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{Context, Result};

pub use config::{CommonArgs, ExperimentConfig, OutputFormat, Scenario};
pub use scenarios::{run, Report};

/// Runs a scenario and writes its table to `--out` or standard output.
/// Returns the failed checks.
pub fn execute(config: &ExperimentConfig) -> Result<Vec<String>> {
    let report = run(config)?;
    let name = config.scenario.name();
    match &config.out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            report.table.write(config.format, name, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            report.table.write(config.format, name, &mut w)?;
        }
    }
    Ok(report.failures)
}
