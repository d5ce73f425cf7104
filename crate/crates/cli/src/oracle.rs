//! Search-based reference for the decision thresholds.
//!
//! The pair error `h = Q(a) + Q(b)` is either close to one (powers close
//! together) or astronomically small (powers far apart), and in both
//! regimes plain `f64` evaluation is too flat for a line search. The search
//! therefore minimizes one of two monotone transforms of `h`:
//! `-(erf(a/sqrt2) + erf(b/sqrt2)) = 2(h - 1)` or `ln h`, with log tails
//! from a continued fraction.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use anyhow::Result;
use edsimo::detector::likelihood_crossing;
use edsimo::{
    conditional_pdf, optimal_boundary, validate_constellation, Constellation, EnergyStats,
    SystemParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Natural log of the standard normal upper tail.
pub fn ln_tail(x: f64) -> f64 {
    if x < 5.0 {
        return (0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln();
    }
    // Q(x) = phi(x) / (x + 1/(x + 2/(x + 3/(x + ...)))).
    let mut cf = x;
    for k in (1..=80).rev() {
        cf = x + k as f64 / cf;
    }
    -0.5 * x * x - 0.5 * (2.0 * PI).ln() - cf.ln()
}

fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Minimizer of the pair error between two symbols over `[lo.mu, hi.mu]`,
/// located by golden-section search to relative width `rel_tol`.
pub fn search_boundary(lo: &EnergyStats, hi: &EnergyStats, rel_tol: f64) -> f64 {
    let (s_lo, s_hi) = (lo.sigma(), hi.sigma());
    let args = |l: f64| ((l - lo.mu) / s_lo, (hi.mu - l) / s_hi);
    let width = hi.mu - lo.mu;
    // Coarse scan to pick the regime.
    let coarse = (0..=100)
        .map(|i| {
            let (a, b) = args(lo.mu + width * i as f64 / 100.0);
            0.5 * libm::erfc(a * FRAC_1_SQRT_2) + 0.5 * libm::erfc(b * FRAC_1_SQRT_2)
        })
        .fold(f64::INFINITY, f64::min);
    let tol = rel_tol * width;
    if coarse > 1e-3 {
        golden_section(
            |l| {
                let (a, b) = args(l);
                -(libm::erf(a * FRAC_1_SQRT_2) + libm::erf(b * FRAC_1_SQRT_2))
            },
            lo.mu,
            hi.mu,
            tol,
        )
    } else {
        golden_section(
            |l| {
                let (a, b) = args(l);
                ln_add(ln_tail(a), ln_tail(b))
            },
            lo.mu,
            hi.mu,
            tol,
        )
    }
}

/// Random operating point with K drawn from `ks`, N in [50, 2000], M in
/// [2, 8], SNR in [-6, 10] dB, and an ordered constellation using 80-100% of
/// the budget whose first power is zero half of the time.
pub fn random_instance(rng: &mut ChaCha8Rng, ks: &[f64]) -> Result<(SystemParams, Constellation)> {
    let k = ks[rng.gen_range(0..ks.len())];
    let n = rng.gen_range(50..=2000);
    let m = rng.gen_range(2..=8);
    let snr_db = rng.gen_range(-6.0..10.0);
    let params = SystemParams::from_snr_db(k, n, 1.0, m, snr_db)?;
    let mut acc = 0.0;
    let raw: Vec<f64> = (0..m)
        .map(|i| {
            if i > 0 || rng.gen_bool(0.5) {
                acc += -rng.gen_range(f64::EPSILON..1.0f64).ln();
            }
            acc
        })
        .collect();
    let scale = params.p_bar * rng.gen_range(0.8..1.0) * m as f64 / raw.iter().sum::<f64>();
    let powers: Vec<f64> = raw.iter().map(|r| r * scale).collect();
    Ok((params, validate_constellation(&powers, &params)?))
}

/// Worst-case agreement between closed-form thresholds and the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCheck {
    pub draws: usize,
    pub boundaries: usize,
    /// Largest `|lambda - lambda_search| / (mu_{m+1} - mu_m)`.
    pub max_offset: f64,
    /// Largest relative density mismatch at interior crossings.
    pub max_pdf_mismatch: f64,
    /// Boundaries whose density crossing lies beyond the upper mean; the
    /// threshold then sits at that mean.
    pub clamped: usize,
}

pub fn check_boundaries(draws: usize, seed: u64) -> Result<BoundaryCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BoundaryCheck {
        draws,
        boundaries: 0,
        max_offset: 0.0,
        max_pdf_mismatch: 0.0,
        clamped: 0,
    };
    for _ in 0..draws {
        let (params, c) = random_instance(&mut rng, &[0.0, 1.0, 50.0])?;
        let stats = c.stats(&params);
        for i in 0..params.m - 1 {
            let (lo, hi) = (&stats[i], &stats[i + 1]);
            let lambda = optimal_boundary(i, &c, &params)?;
            let search = search_boundary(lo, hi, 1e-10);
            out.max_offset = out
                .max_offset
                .max((lambda - search).abs() / (hi.mu - lo.mu));
            if likelihood_crossing(i, &c, &params)? <= hi.mu {
                let a = conditional_pdf(lambda, lo);
                let b = conditional_pdf(lambda, hi);
                out.max_pdf_mismatch = out.max_pdf_mismatch.max((a - b).abs() / a.max(b));
            } else {
                out.clamped += 1;
            }
            out.boundaries += 1;
        }
    }
    Ok(out)
}
