//! Monte Carlo channel simulation of the averaged receive energy.
//!
//! Every antenna draws its own channel coefficient and noise sample, so the
//! simulated statistic follows the exact (non-Gaussian) distribution. Work
//! is split into blocks of [`BLOCK_TRIALS`] trials; each block owns a ChaCha
//! stream derived from `(seed, symbol, block)`, and block results are merged
//! in block order, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{decide, Boundaries};
use crate::error::{Error, Result};
use crate::model::{energy_stats, rician_moments, Constellation, EnergyStats, SystemParams};

pub const BLOCK_TRIALS: usize = 10_000;

/// Standard normal 1% quantile magnitude.
const Z_01: f64 = 2.326_347_874_040_840_8;

const GAUSSIANITY_STREAM: u64 = 1 << 63;

fn block_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-component standard deviations of the complex channel and noise.
#[derive(Debug, Clone, Copy)]
struct ChannelDraw {
    los: f64,
    scatter_sd: f64,
    noise_sd: f64,
    amplitude: f64,
    inv_n: f64,
    n: usize,
}

impl ChannelDraw {
    fn new(params: &SystemParams, p_m: f64) -> Result<Self> {
        let (mu_h_sq, sigma_h2) = rician_moments(params.k)?;
        Ok(Self {
            los: mu_h_sq.sqrt(),
            scatter_sd: (0.5 * sigma_h2).sqrt(),
            noise_sd: (0.5 * params.sigma_z2).sqrt(),
            amplitude: p_m.sqrt(),
            inv_n: 1.0 / params.n as f64,
            n: params.n,
        })
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut energy = 0.0;
        for _ in 0..self.n {
            let g: [f64; 4] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let h_re = self.los + self.scatter_sd * g[0];
            let h_im = self.scatter_sd * g[1];
            let y_re = h_re * self.amplitude + self.noise_sd * g[2];
            let y_im = h_im * self.amplitude + self.noise_sd * g[3];
            energy += y_re * y_re + y_im * y_im;
        }
        energy * self.inv_n
    }
}

/// One realization of `||h sqrt(p_m) + z||^2 / N` from fresh channel and
/// noise draws on every antenna.
pub fn sample_energy<R: Rng + ?Sized>(params: &SystemParams, p_m: f64, rng: &mut R) -> Result<f64> {
    params.validate()?;
    if !(p_m >= 0.0) || !p_m.is_finite() {
        return Err(Error::Domain(format!(
            "symbol power must be finite and >= 0, got {p_m}"
        )));
    }
    Ok(ChannelDraw::new(params, p_m)?.sample(rng))
}

/// Streaming central moments up to order four, mergeable across blocks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let one = Moments {
            count: 1,
            mean: x,
            ..Default::default()
        };
        self.merge(&one);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let d = other.mean - self.mean;
        let d_n = d / n;
        let d2 = d * d_n * na * nb;
        let m2 = self.m2 + other.m2 + d2;
        let m3 =
            self.m3 + other.m3 + d2 * d_n * (na - nb) + 3.0 * d_n * (na * other.m2 - nb * self.m2);
        let m4 = self.m4
            + other.m4
            + d2 * d_n * d_n * (na * na - na * nb + nb * nb)
            + 6.0 * d_n * d_n * (na * na * other.m2 + nb * nb * self.m2)
            + 4.0 * d_n * (na * other.m3 - nb * self.m3);
        self.count += other.count;
        self.mean += d_n * nb;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        self.m2 / self.count as f64
    }

    pub fn mean_std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    /// Large-sample standard error of the variance estimate.
    pub fn variance_std_error(&self) -> f64 {
        let n = self.count as f64;
        let v = self.variance();
        ((self.m4 / n - v * v).max(0.0) / n).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    pub mean: f64,
    pub variance: f64,
    pub mean_std_error: f64,
    pub variance_std_error: f64,
}

impl From<&Moments> for EmpiricalMoments {
    fn from(m: &Moments) -> Self {
        Self {
            mean: m.mean,
            variance: m.variance(),
            mean_std_error: m.mean_std_error(),
            variance_std_error: m.variance_std_error(),
        }
    }
}

impl EmpiricalMoments {
    /// Deviations from the predicted statistics in standard errors.
    pub fn z_scores(&self, predicted: &EnergyStats) -> (f64, f64) {
        (
            (self.mean - predicted.mu) / self.mean_std_error,
            (self.variance - predicted.sigma2) / self.variance_std_error,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub trials_per_symbol: u64,
    pub errors_per_symbol: Vec<u64>,
    pub empirical_ser: f64,
    /// Binomial standard error of `empirical_ser`.
    pub std_error: f64,
    pub empirical_moments: Vec<EmpiricalMoments>,
    pub seed: u64,
}

impl SimResult {
    pub fn total_trials(&self) -> u64 {
        self.trials_per_symbol * self.errors_per_symbol.len() as u64
    }

    pub fn total_errors(&self) -> u64 {
        self.errors_per_symbol.iter().sum()
    }

    /// Binomial standard error of the error rate if the true rate were `p`.
    pub fn std_error_under(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.total_trials() as f64).sqrt()
    }
}

fn blocks(trials: u64) -> Vec<(u64, u64)> {
    let block = BLOCK_TRIALS as u64;
    (0..trials.div_ceil(block))
        .map(|b| (b, block.min(trials - b * block)))
        .collect()
}

/// Transmits every symbol `trials_per_symbol` times through independent
/// channel realizations and counts threshold-detector errors.
pub fn simulate_ser(
    constellation: &Constellation,
    boundaries: &Boundaries,
    params: &SystemParams,
    trials_per_symbol: u64,
    seed: u64,
) -> Result<SimResult> {
    params.validate()?;
    if constellation.len() != params.m {
        return Err(Error::ShapeMismatch {
            expected: params.m,
            got: constellation.len(),
        });
    }
    if boundaries.regions() != constellation.len() {
        return Err(Error::ShapeMismatch {
            expected: constellation.len(),
            got: boundaries.regions(),
        });
    }
    if trials_per_symbol < 1 {
        return Err(Error::Domain("trials_per_symbol must be >= 1".into()));
    }
    let draws = constellation
        .powers()
        .iter()
        .map(|&p| ChannelDraw::new(params, p))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64, u64)> = (0..draws.len())
        .flat_map(|m| {
            blocks(trials_per_symbol)
                .into_iter()
                .map(move |(b, n)| (m, b, n))
        })
        .collect();
    let partials: Vec<(usize, u64, Moments)> = jobs
        .par_iter()
        .map(|&(m, b, n)| {
            let mut rng = block_rng(seed, ((m as u64) << 32) | b);
            let mut errors = 0;
            let mut moments = Moments::default();
            for _ in 0..n {
                let y = draws[m].sample(&mut rng);
                moments.push(y);
                if decide(y, boundaries) != m {
                    errors += 1;
                }
            }
            (m, errors, moments)
        })
        .collect();

    let mut errors_per_symbol = vec![0u64; draws.len()];
    let mut moments = vec![Moments::default(); draws.len()];
    for (m, e, mo) in &partials {
        errors_per_symbol[*m] += e;
        moments[*m].merge(mo);
    }
    let total = trials_per_symbol * draws.len() as u64;
    let ser = errors_per_symbol.iter().sum::<u64>() as f64 / total as f64;
    Ok(SimResult {
        trials_per_symbol,
        errors_per_symbol,
        empirical_ser: ser,
        std_error: (ser * (1.0 - ser) / total as f64).sqrt(),
        empirical_moments: moments.iter().map(EmpiricalMoments::from).collect(),
        seed,
    })
}

/// Comparison of simulated energies against the Gaussian prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianityReport {
    pub draws: u64,
    pub seed: u64,
    pub predicted: EnergyStats,
    pub empirical: EmpiricalMoments,
    /// Mean deviation in standard errors.
    pub mean_z: f64,
    /// Variance deviation in standard errors.
    pub variance_z: f64,
    /// Empirical minus predicted 1% quantile, in units of the predicted sigma.
    pub lower_quantile_delta: f64,
    /// Same for the 99% quantile.
    pub upper_quantile_delta: f64,
}

impl GaussianityReport {
    pub fn moments_within(&self, z: f64) -> bool {
        self.mean_z.abs() <= z && self.variance_z.abs() <= z
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn gaussianity_report(
    params: &SystemParams,
    p_m: f64,
    draws: u64,
    seed: u64,
) -> Result<GaussianityReport> {
    if draws < 1000 {
        return Err(Error::Domain(format!(
            "need at least 1000 draws, got {draws}"
        )));
    }
    let predicted = energy_stats(params, p_m)?;
    let channel = ChannelDraw::new(params, p_m)?;
    let per_block: Vec<Vec<f64>> = blocks(draws)
        .par_iter()
        .map(|&(b, n)| {
            let mut rng = block_rng(seed, GAUSSIANITY_STREAM | b);
            (0..n).map(|_| channel.sample(&mut rng)).collect()
        })
        .collect();
    let mut samples: Vec<f64> = per_block.into_iter().flatten().collect();
    let mut moments = Moments::default();
    for &y in &samples {
        moments.push(y);
    }
    samples.sort_by(f64::total_cmp);
    let sigma = predicted.sigma();
    let empirical = EmpiricalMoments::from(&moments);
    let (mean_z, variance_z) = empirical.z_scores(&predicted);
    Ok(GaussianityReport {
        draws,
        seed,
        predicted,
        empirical,
        mean_z,
        variance_z,
        lower_quantile_delta: (quantile(&samples, 0.01) - (predicted.mu - Z_01 * sigma)) / sigma,
        upper_quantile_delta: (quantile(&samples, 0.99) - (predicted.mu + Z_01 * sigma)) / sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::optimal_boundaries;
    use crate::model::validate_constellation;

    #[test]
    fn moments_merge_matches_direct() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37 % 101) as f64).sqrt()).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        for m in [all, a] {
            assert!((m.mean - mean).abs() < 1e-12);
            assert!((m.variance() - var).abs() < 1e-10);
            assert!((m.m4 / n - m4).abs() < 1e-8);
        }
    }

    #[test]
    fn noise_only_energy_mean() {
        let p = SystemParams::new(3.0, 8, 1.5, 2, 1.0).unwrap();
        let mut rng = block_rng(11, 0);
        let mut m = Moments::default();
        for _ in 0..1_000_000 {
            m.push(sample_energy(&p, 0.0, &mut rng).unwrap());
        }
        assert!(
            (m.mean - 1.5).abs() <= 3.0 * m.mean_std_error(),
            "{}",
            m.mean
        );
    }

    #[test]
    fn deterministic_channel_limit() {
        let p = SystemParams::new(1e9, 64, 1e-12, 2, 1.0).unwrap();
        let mut rng = block_rng(5, 0);
        for _ in 0..100 {
            let y = sample_energy(&p, 1.0, &mut rng).unwrap();
            assert!((y - 1.0).abs() < 1e-4, "{y}");
        }
    }

    #[test]
    fn vanishing_noise_no_errors() {
        // Noise scaled down 1e6 times below the unit-power constellation.
        let p = SystemParams::new(50.0, 500, 1e-6, 4, 1.0).unwrap();
        let c = validate_constellation(&[0.0, 0.5, 1.2, 2.3], &p).unwrap();
        let b = optimal_boundaries(&c, &p).unwrap();
        let r = simulate_ser(&c, &b, &p, 25_000, 9).unwrap();
        assert_eq!(r.total_errors(), 0);
        assert_eq!(r.empirical_ser, 0.0);
    }

    #[test]
    fn simulation_is_reproducible() {
        let p = SystemParams::new(0.0, 50, 1.0, 3, 1.0).unwrap();
        let c = validate_constellation(&[0.0, 0.9, 2.1], &p).unwrap();
        let b = optimal_boundaries(&c, &p).unwrap();
        let a = simulate_ser(&c, &b, &p, 12_345, 42).unwrap();
        let again = simulate_ser(&c, &b, &p, 12_345, 42).unwrap();
        assert_eq!(a, again);
        let other = simulate_ser(&c, &b, &p, 12_345, 43).unwrap();
        assert_ne!(a.errors_per_symbol, other.errors_per_symbol);
        let one_thread = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_ser(&c, &b, &p, 12_345, 42).unwrap());
        assert_eq!(a, one_thread);
    }

    #[test]
    fn shape_errors() {
        let p = SystemParams::new(0.0, 50, 1.0, 3, 1.0).unwrap();
        let c = validate_constellation(&[0.0, 0.9, 2.1], &p).unwrap();
        let b = Boundaries::new(vec![1.5]).unwrap();
        assert!(matches!(
            simulate_ser(&c, &b, &p, 10, 1),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(gaussianity_report(&p, 1.0, 999, 1).is_err());
    }
}
