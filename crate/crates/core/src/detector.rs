//! Threshold detection on the averaged energy: Q-function, conditional
//! densities, optimal decision boundaries and the exact average symbol
//! error probability.
//!
//! Indices are zero-based. Boundary `i` separates symbol `i` from symbol
//! `i + 1`; the outer thresholds at zero and infinity are implicit.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{energy_stats_unchecked, Constellation, EnergyStats, SystemParams};

/// Smallest relative variance gap accepted by the boundary closed form.
pub const DEGENERATE_REL_GAP: f64 = 1e-12;

/// Tail probabilities below this are reported as zero.
pub const Q_UNDERFLOW: f64 = 1e-300;

/// Interior decision thresholds, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    lambdas: Vec<f64>,
}

impl Boundaries {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if let Some(i) = lambdas.iter().position(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Domain(format!(
                "boundary {i} must be finite and positive, got {}",
                lambdas[i]
            )));
        }
        if let Some(i) = lambdas.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::Domain(format!(
                "boundaries not strictly increasing at {}",
                i + 1
            )));
        }
        Ok(Self { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Number of decision regions.
    pub fn regions(&self) -> usize {
        self.lambdas.len() + 1
    }

    /// Lower edge of the region of symbol `m`.
    pub fn lower(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.lambdas[m - 1]
        }
    }

    /// Upper edge of the region of symbol `m`.
    pub fn upper(&self, m: usize) -> f64 {
        self.lambdas.get(m).copied().unwrap_or(f64::INFINITY)
    }
}

/// Upper tail of the standard normal distribution.
pub fn q_function(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("Q-function argument is NaN".into()));
    }
    Ok(q(x))
}

pub(crate) fn q(x: f64) -> f64 {
    let v = 0.5 * libm::erfc(x * FRAC_1_SQRT_2);
    if v < Q_UNDERFLOW {
        0.0
    } else {
        v
    }
}

/// Gaussian density of the averaged energy given one transmitted symbol.
pub fn conditional_pdf(y_tilde: f64, stats: &EnergyStats) -> f64 {
    debug_assert!(stats.sigma2 > 0.0);
    let d = y_tilde - stats.mu;
    (-d * d / (2.0 * stats.sigma2)).exp() / (2.0 * PI * stats.sigma2).sqrt()
}

fn check_boundary_index(i: usize, constellation: &Constellation) -> Result<()> {
    if i + 1 >= constellation.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: constellation.len().saturating_sub(1),
        });
    }
    Ok(())
}

fn check_shape(constellation: &Constellation, params: &SystemParams) -> Result<()> {
    if constellation.len() != params.m {
        return Err(Error::ShapeMismatch {
            expected: params.m,
            got: constellation.len(),
        });
    }
    Ok(())
}

/// Energy above `mu_i` at which the densities of symbols `i` and `i + 1`
/// cross, for power gap `d` and variances `v_lo < v_hi`.
///
/// Rationalized root of the pdf-equality quadratic: every term is
/// nonnegative, so there is no cancellation when the variances are close
/// (the root tends to `d / 2`).
fn crossing_offset(d: f64, v_lo: f64, v_hi: f64) -> f64 {
    let gap = v_hi - v_lo;
    let log_ratio = (gap / v_lo).ln_1p();
    let disc = v_lo * v_hi * (d * d + gap * log_ratio);
    v_lo * (d * d + v_hi * log_ratio) / (disc.sqrt() + d * v_lo)
}

/// Point where the conditional densities of symbols `i` and `i + 1` are
/// equal, on the side above `mu_i`. It may lie beyond `mu_{i+1}` when the
/// two powers are very close relative to the spread of the lower symbol.
pub fn likelihood_crossing(
    i: usize,
    constellation: &Constellation,
    params: &SystemParams,
) -> Result<f64> {
    check_boundary_index(i, constellation)?;
    let p = constellation.powers();
    let lo = energy_stats_unchecked(params, p[i]);
    let hi = energy_stats_unchecked(params, p[i + 1]);
    let rel_gap = (hi.sigma2 - lo.sigma2) / hi.sigma2;
    if !(rel_gap >= DEGENERATE_REL_GAP) {
        return Err(Error::DegenerateSpacing { index: i, rel_gap });
    }
    Ok(lo.mu + crossing_offset(p[i + 1] - p[i], lo.sigma2, hi.sigma2))
}

/// Threshold between symbols `i` and `i + 1` minimizing the pair error
/// [`pair_error_h`] over `[mu_i, mu_{i+1}]`.
///
/// This is the likelihood crossing whenever it falls inside the interval;
/// otherwise the pair error is decreasing over the whole interval and the
/// minimizer is its upper end.
pub fn optimal_boundary(
    i: usize,
    constellation: &Constellation,
    params: &SystemParams,
) -> Result<f64> {
    let crossing = likelihood_crossing(i, constellation, params)?;
    let mu_hi = constellation.powers()[i + 1] + params.sigma_z2;
    Ok(crossing.min(mu_hi))
}

pub fn optimal_boundaries(
    constellation: &Constellation,
    params: &SystemParams,
) -> Result<Boundaries> {
    check_shape(constellation, params)?;
    let lambdas = (0..constellation.len() - 1)
        .map(|i| optimal_boundary(i, constellation, params))
        .collect::<Result<Vec<_>>>()?;
    Boundaries::new(lambdas)
}

fn check_regions(constellation: &Constellation, boundaries: &Boundaries) -> Result<()> {
    if boundaries.regions() != constellation.len() {
        return Err(Error::ShapeMismatch {
            expected: constellation.len(),
            got: boundaries.regions(),
        });
    }
    Ok(())
}

/// Error probability of symbol `m`: one tail for the outer symbols, two for
/// the interior ones.
pub fn per_symbol_error(
    m: usize,
    constellation: &Constellation,
    boundaries: &Boundaries,
    params: &SystemParams,
) -> Result<f64> {
    check_regions(constellation, boundaries)?;
    let len = constellation.len();
    if m >= len {
        return Err(Error::IndexOutOfRange { index: m, len });
    }
    let s = energy_stats_unchecked(params, constellation.powers()[m]);
    let sigma = s.sigma();
    let mut pe = 0.0;
    if m > 0 {
        pe += q((s.mu - boundaries.lower(m)) / sigma);
    }
    if m + 1 < len {
        pe += q((boundaries.upper(m) - s.mu) / sigma);
    }
    Ok(pe)
}

/// Average symbol error probability over equiprobable symbols.
pub fn average_sep(
    constellation: &Constellation,
    boundaries: &Boundaries,
    params: &SystemParams,
) -> Result<f64> {
    check_shape(constellation, params)?;
    check_regions(constellation, boundaries)?;
    let total = (0..constellation.len())
        .map(|m| per_symbol_error(m, constellation, boundaries, params))
        .sum::<Result<f64>>()?;
    Ok(total / constellation.len() as f64)
}

/// Same quantity as [`average_sep`], summed boundary by boundary as the two
/// tails meeting at each threshold.
pub fn average_sep_by_boundary(
    constellation: &Constellation,
    boundaries: &Boundaries,
    params: &SystemParams,
) -> Result<f64> {
    check_shape(constellation, params)?;
    check_regions(constellation, boundaries)?;
    let stats = constellation.stats(params);
    let total: f64 = boundaries
        .lambdas()
        .iter()
        .enumerate()
        .map(|(i, &l)| pair_tails(l, &stats[i], &stats[i + 1]))
        .sum();
    Ok(total / constellation.len() as f64)
}

fn pair_tails(lambda: f64, lo: &EnergyStats, hi: &EnergyStats) -> f64 {
    q((lambda - lo.mu) / lo.sigma()) + q((hi.mu - lambda) / hi.sigma())
}

/// Contribution of threshold `i` to the summed symbol error: the upper tail
/// of symbol `i` beyond `lambda` plus the lower tail of symbol `i + 1`
/// below it. Convex in `lambda` on `[mu_i, mu_{i+1}]`.
pub fn pair_error_h(
    lambda: f64,
    i: usize,
    constellation: &Constellation,
    params: &SystemParams,
) -> Result<f64> {
    check_boundary_index(i, constellation)?;
    let lo = energy_stats_unchecked(params, constellation.powers()[i]);
    let hi = energy_stats_unchecked(params, constellation.powers()[i + 1]);
    if !(lambda >= lo.mu && lambda <= hi.mu) {
        return Err(Error::Domain(format!(
            "threshold {lambda} outside [{}, {}]",
            lo.mu, hi.mu
        )));
    }
    Ok(pair_tails(lambda, &lo, &hi))
}

/// Maps an energy observation to a zero-based symbol index. Regions are
/// half-open `[lambda_{m-1}, lambda_m)`, so a value exactly on a threshold
/// goes to the upper symbol.
pub fn decide(y_tilde: f64, boundaries: &Boundaries) -> usize {
    boundaries.lambdas().partition_point(|&l| l <= y_tilde)
}

/// Optimal thresholds for a constellation together with the resulting
/// average symbol error probability.
pub fn sep_at_optimal_boundaries(
    constellation: &Constellation,
    params: &SystemParams,
) -> Result<(Boundaries, f64)> {
    let b = optimal_boundaries(constellation, params)?;
    let sep = average_sep(constellation, &b, params)?;
    Ok((b, sep))
}
