//! One runner per subcommand. Each produces a [`Report`]: a table to write
//! plus the list of failed checks (only `validate` produces failures).

use anyhow::{bail, Result};
use edsimo::detector::sep_at_optimal_boundaries;
use edsimo::optimizer::{
    brute_force, convexity_probe, init_powers, optimize, OptResult, ProbeRegion,
};
use edsimo::simulator::{gaussianity_report, simulate_ser, SimResult};
use edsimo::{per_symbol_error, validate_constellation, Constellation, SystemParams};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Scenario};
use crate::oracle::check_boundaries;
use crate::output::Table;

pub struct Report {
    pub table: Table,
    pub failures: Vec<String>,
}

impl From<Table> for Report {
    fn from(table: Table) -> Self {
        Report {
            table,
            failures: Vec::new(),
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Report> {
    match config.scenario {
        Scenario::Optimize => run_optimize(config).map(Report::from),
        Scenario::BruteForce => run_brute_force(config).map(Report::from),
        Scenario::Sep => run_sep(config).map(Report::from),
        Scenario::Simulate => run_simulate(config).map(Report::from),
        Scenario::SweepN | Scenario::SweepM | Scenario::SweepSnr => {
            run_sweep(config).map(Report::from)
        }
        Scenario::Gaussianity => run_gaussianity(config).map(Report::from),
        Scenario::Convexity => run_convexity(config).map(Report::from),
        Scenario::Validate => run_validation(config),
    }
}

fn allocation_table(result: &OptResult) -> Table {
    let mut t = Table::new(vec![
        "symbol_index",
        "p_m",
        "alpha_m",
        "lambda_m",
        "P_e",
        "iterations",
        "converged",
    ]);
    let c = &result.constellation;
    for (i, (&p, &a)) in c.powers().iter().zip(c.alpha()).enumerate() {
        t.push(vec![
            (i + 1).into(),
            p.into(),
            a.into(),
            result.boundaries.lambdas().get(i).copied().into(),
            result.sep.into(),
            result.iterations.into(),
            result.converged.into(),
        ]);
    }
    t
}

pub fn run_optimize(config: &ExperimentConfig) -> Result<Table> {
    let params = config.params()?;
    let result = optimize(&params, config.epsilon, config.max_iter)?;
    Ok(allocation_table(&result))
}

pub fn run_brute_force(config: &ExperimentConfig) -> Result<Table> {
    let params = config.params()?;
    let result = brute_force(&params, config.grid_step)?;
    Ok(allocation_table(&result))
}

/// The constellation given with `--powers`, or the optimizer's starting ramp.
fn chosen_constellation(config: &ExperimentConfig, params: &SystemParams) -> Result<Constellation> {
    Ok(match &config.powers {
        Some(p) => validate_constellation(p, params)?,
        None => init_powers(params)?,
    })
}

pub fn run_sep(config: &ExperimentConfig) -> Result<Table> {
    let params = config.params()?;
    let c = chosen_constellation(config, &params)?;
    let (b, sep) = sep_at_optimal_boundaries(&c, &params)?;
    let mut t = Table::new(vec![
        "symbol_index",
        "p_m",
        "alpha_m",
        "mu_m",
        "sigma2_m",
        "lambda_m",
        "P_e_m",
        "P_e",
    ]);
    for (i, s) in c.stats(&params).iter().enumerate() {
        t.push(vec![
            (i + 1).into(),
            c.powers()[i].into(),
            c.alpha()[i].into(),
            s.mu.into(),
            s.sigma2.into(),
            b.lambdas().get(i).copied().into(),
            per_symbol_error(i, &c, &b, &params)?.into(),
            sep.into(),
        ]);
    }
    Ok(t)
}

/// Constellation for Monte Carlo runs: `--powers` when given, otherwise
/// the optimized one.
fn simulation_target(config: &ExperimentConfig, params: &SystemParams) -> Result<Constellation> {
    match &config.powers {
        Some(p) => Ok(validate_constellation(p, params)?),
        None => Ok(optimize(params, config.epsilon, config.max_iter)?.constellation),
    }
}

fn require_trials(config: &ExperimentConfig) -> Result<()> {
    if config.trials < 1 {
        bail!("{} needs --trials >= 1", config.scenario.name());
    }
    Ok(())
}

pub fn run_simulate(config: &ExperimentConfig) -> Result<Table> {
    require_trials(config)?;
    let params = config.params()?;
    let c = simulation_target(config, &params)?;
    let (b, sep) = sep_at_optimal_boundaries(&c, &params)?;
    let sim = simulate_ser(&c, &b, &params, config.trials, config.seed)?;
    let mut t = Table::new(vec![
        "symbol_index",
        "p_m",
        "lambda_m",
        "trials",
        "errors",
        "P_e_m",
        "mu_m",
        "empirical_mean",
        "sigma2_m",
        "empirical_variance",
        "P_e",
        "empirical_ser",
        "std_error",
        "seed",
    ]);
    for (i, s) in c.stats(&params).iter().enumerate() {
        let em = &sim.empirical_moments[i];
        t.push(vec![
            (i + 1).into(),
            c.powers()[i].into(),
            b.lambdas().get(i).copied().into(),
            sim.trials_per_symbol.into(),
            sim.errors_per_symbol[i].into(),
            per_symbol_error(i, &c, &b, &params)?.into(),
            s.mu.into(),
            em.mean.into(),
            s.sigma2.into(),
            em.variance.into(),
            sep.into(),
            sim.empirical_ser.into(),
            sim.std_error.into(),
            sim.seed.into(),
        ]);
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy)]
struct SweepPoint {
    k: f64,
    n: usize,
    m: usize,
    snr_db: f64,
}

/// Grid of sweep points ordered by the swept value first.
fn sweep_points(config: &ExperimentConfig) -> Vec<SweepPoint> {
    let mut points = Vec::new();
    for &k in &config.k_values {
        for &n in &config.n_values {
            for &m in &config.m_values {
                for &snr_db in &config.snr_values {
                    points.push(SweepPoint { k, n, m, snr_db });
                }
            }
        }
    }
    let key = |p: &SweepPoint| match config.scenario {
        Scenario::SweepN => p.n as f64,
        Scenario::SweepM => p.m as f64,
        _ => p.snr_db,
    };
    points.sort_by(|a, b| key(a).total_cmp(&key(b)));
    points
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<Table> {
    let points = sweep_points(config);
    let rows = points
        .par_iter()
        .map(|pt| -> Result<(OptResult, Option<SimResult>)> {
            let params = SystemParams::from_snr_db(pt.k, pt.n, config.sigma_z2, pt.m, pt.snr_db)?;
            let r = optimize(&params, config.epsilon, config.max_iter)?;
            let sim = if config.trials > 0 {
                Some(simulate_ser(
                    &r.constellation,
                    &r.boundaries,
                    &params,
                    config.trials,
                    config.seed,
                )?)
            } else {
                None
            };
            Ok((r, sim))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(vec![
        "N",
        "M",
        "snr_db",
        "K",
        "P_e",
        "iterations",
        "converged",
        "empirical_ser",
        "std_error",
    ]);
    for (pt, (r, sim)) in points.iter().zip(&rows) {
        t.push(vec![
            pt.n.into(),
            pt.m.into(),
            pt.snr_db.into(),
            pt.k.into(),
            r.sep.into(),
            r.iterations.into(),
            r.converged.into(),
            sim.as_ref().map(|s| s.empirical_ser).into(),
            sim.as_ref().map(|s| s.std_error).into(),
        ]);
    }
    Ok(t)
}

pub fn run_gaussianity(config: &ExperimentConfig) -> Result<Table> {
    let params = config.params()?;
    let p_m = config.power.unwrap_or(params.p_bar);
    let r = gaussianity_report(&params, p_m, config.trials, config.seed)?;
    let mut t = Table::new(vec![
        "N",
        "K",
        "p_m",
        "draws",
        "seed",
        "mu",
        "empirical_mean",
        "mean_z",
        "sigma2",
        "empirical_variance",
        "variance_z",
        "q01_delta",
        "q99_delta",
    ]);
    t.push(vec![
        params.n.into(),
        params.k.into(),
        p_m.into(),
        r.draws.into(),
        r.seed.into(),
        r.predicted.mu.into(),
        r.empirical.mean.into(),
        r.mean_z.into(),
        r.predicted.sigma2.into(),
        r.empirical.variance.into(),
        r.variance_z.into(),
        r.lower_quantile_delta.into(),
        r.upper_quantile_delta.into(),
    ]);
    Ok(t)
}

fn probe_region(config: &ExperimentConfig, params: &SystemParams) -> Result<ProbeRegion> {
    Ok(match config.radius {
        Some(radius) => ProbeRegion::Neighborhood {
            center: optimize(params, config.epsilon, config.max_iter)?
                .constellation
                .powers()
                .to_vec(),
            radius,
        },
        None => ProbeRegion::Feasible,
    })
}

pub fn run_convexity(config: &ExperimentConfig) -> Result<Table> {
    require_trials(config)?;
    let params = config.params()?;
    let region = probe_region(config, &params)?;
    let r = convexity_probe(&params, config.trials as usize, config.seed, &region)?;
    let mut t = Table::new(vec![
        "region",
        "trials",
        "violations",
        "max_violation",
        "tolerance",
        "seed",
    ]);
    let region_name = match region {
        ProbeRegion::Feasible => "feasible",
        ProbeRegion::Neighborhood { .. } => "neighborhood",
    };
    t.push(vec![
        region_name.into(),
        r.trials.into(),
        r.violations.into(),
        r.max_violation.into(),
        r.tolerance.into(),
        config.seed.into(),
    ]);
    Ok(t)
}

struct Checks {
    table: Table,
    failures: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            table: Table::new(vec!["check", "measured", "tolerance", "passed"]),
            failures: Vec::new(),
        }
    }

    /// Records `measured <= tolerance`.
    fn at_most(&mut self, name: &str, measured: f64, tolerance: f64) {
        let passed = measured <= tolerance;
        self.table.push(vec![
            name.into(),
            measured.into(),
            tolerance.into(),
            passed.into(),
        ]);
        if !passed {
            self.failures.push(format!(
                "{name}: measured {measured:e} exceeds {tolerance:e}"
            ));
        }
    }
}

/// Default desk-scale cross-check bundle at the configured operating point.
pub fn run_validation(config: &ExperimentConfig) -> Result<Report> {
    require_trials(config)?;
    let params = config.params()?;
    // Fails early on a malformed --powers before any expensive work.
    let target = config
        .powers
        .as_ref()
        .map(|p| validate_constellation(p, &params))
        .transpose()?;
    let mut checks = Checks::new();

    let b = check_boundaries(200, config.seed)?;
    checks.at_most("boundary_offset", b.max_offset, 1e-6);
    checks.at_most("boundary_pdf_equality", b.max_pdf_mismatch, 1e-9);

    let opt = optimize(&params, config.epsilon, config.max_iter)?;
    checks.at_most(
        "optimizer_not_converged",
        if opt.converged { 0.0 } else { 1.0 },
        0.0,
    );
    match brute_force(&params, config.grid_step) {
        Ok(bf) => {
            checks.at_most("brute_force_sep_gap", opt.sep - bf.sep, 1e-4);
            let alpha_gap = opt
                .constellation
                .alpha()
                .iter()
                .zip(bf.constellation.alpha())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            checks.at_most("brute_force_alpha_gap", alpha_gap, 0.05);
        }
        Err(edsimo::Error::GridTooLarge { .. }) => {}
        Err(e) => return Err(e.into()),
    }

    let c = target.unwrap_or_else(|| opt.constellation.clone());
    let (bounds, sep) = sep_at_optimal_boundaries(&c, &params)?;
    let sim = simulate_ser(&c, &bounds, &params, config.trials, config.seed)?;
    checks.at_most(
        "mc_ser_z",
        (sim.empirical_ser - sep).abs() / sim.std_error_under(sep),
        5.0,
    );
    let moment_z = sim
        .empirical_moments
        .iter()
        .zip(c.stats(&params))
        .map(|(e, s)| {
            let (zm, zv) = e.z_scores(&s);
            zm.abs().max(zv.abs())
        })
        .fold(0.0, f64::max);
    checks.at_most("mc_moments_z", moment_z, 3.0);

    let g = gaussianity_report(&params, params.p_bar, config.trials.max(1000), config.seed)?;
    checks.at_most(
        "gaussianity_moments_z",
        g.mean_z.abs().max(g.variance_z.abs()),
        3.0,
    );

    let region = probe_region(config, &params)?;
    let probe = convexity_probe(&params, 10_000, config.seed, &region)?;
    checks.at_most("convexity_violations", probe.violations as f64, 0.0);

    Ok(Report {
        table: checks.table,
        failures: checks.failures,
    })
}
