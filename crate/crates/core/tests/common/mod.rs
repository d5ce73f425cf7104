#![allow(dead_code)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use edsimo::{validate_constellation, Constellation, EnergyStats, SystemParams};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Random valid parameters: K from the given set, N in [n_lo, n_hi],
/// M in [2, m_hi], SNR in [-6, 10] dB, noise variance in [0.5, 2].
pub fn random_params<R: Rng>(
    rng: &mut R,
    ks: &[f64],
    n_lo: usize,
    n_hi: usize,
    m_hi: usize,
) -> SystemParams {
    let k = ks[rng.gen_range(0..ks.len())];
    let n = rng.gen_range(n_lo..=n_hi);
    let m = rng.gen_range(2..=m_hi);
    let sigma_z2 = rng.gen_range(0.5..2.0);
    let snr_db = rng.gen_range(-6.0..10.0);
    SystemParams::from_snr_db(k, n, sigma_z2, m, snr_db).unwrap()
}

/// Ordered powers with mean a random fraction in [0.8, 1] of the budget.
/// The first power is zero half of the time.
pub fn random_constellation<R: Rng>(rng: &mut R, params: &SystemParams) -> Constellation {
    let m = params.m;
    let zero_first = rng.gen_bool(0.5);
    let gaps: Vec<f64> = (0..m)
        .map(|i| {
            if i == 0 && zero_first {
                0.0
            } else {
                Exp1.sample(rng)
            }
        })
        .collect();
    let mut acc = 0.0;
    let raw: Vec<f64> = gaps
        .iter()
        .map(|g| {
            acc += g;
            acc
        })
        .collect();
    let target = params.p_bar * rng.gen_range(0.8..1.0);
    let scale = target * m as f64 / raw.iter().sum::<f64>();
    let powers: Vec<f64> = raw.iter().map(|r| r * scale).collect();
    validate_constellation(&powers, params).unwrap()
}

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

fn ln_tail(x: f64) -> f64 {
    if x < 5.0 {
        return (0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln();
    }
    let mut cf = x;
    for k in (1..=80).rev() {
        cf = x + k as f64 / cf;
    }
    -0.5 * x * x - 0.5 * (2.0 * PI).ln() - cf.ln()
}

/// Golden-section minimizer of the pair error on `[lo.mu, hi.mu]`, run on
/// `2(h - 1)` via erf when `h` is near one and on `ln h` when it is tiny,
/// since `h` itself is too flat in both regimes.
pub fn search_boundary(lo: &EnergyStats, hi: &EnergyStats) -> f64 {
    let args = move |l: f64| ((l - lo.mu) / lo.sigma(), (hi.mu - l) / hi.sigma());
    let width = hi.mu - lo.mu;
    let coarse = (0..=100)
        .map(|i| {
            let (a, b) = args(lo.mu + width * i as f64 / 100.0);
            0.5 * (libm::erfc(a * FRAC_1_SQRT_2) + libm::erfc(b * FRAC_1_SQRT_2))
        })
        .fold(f64::INFINITY, f64::min);
    let tol = 1e-10 * width;
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
                let (x, y) = (ln_tail(a), ln_tail(b));
                x.max(y) + (x.min(y) - x.max(y)).exp().ln_1p()
            },
            lo.mu,
            hi.mu,
            tol,
        )
    }
}
