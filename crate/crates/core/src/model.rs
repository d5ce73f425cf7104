//! System parameters and the Gaussian statistics of the antenna-averaged
//! receive energy.
//!
//! The channel coefficient of every antenna is circularly-symmetric complex
//! Gaussian with mean of squared magnitude `K/(K+1)` and variance `1/(K+1)`,
//! so the average channel gain is one. Noise is circularly-symmetric complex
//! Gaussian with variance `sigma_z2`. All energies are absolute, not
//! normalized to the noise floor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack allowed on the average-power constraint, scaled up for
/// budgets above one.
pub const CONSTRAINT_SLACK: f64 = 1e-12;

/// Channel and receiver context shared by every computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Rician factor.
    pub k: f64,
    /// Number of receive antennas.
    pub n: usize,
    /// Per-antenna noise variance.
    pub sigma_z2: f64,
    /// Constellation size.
    pub m: usize,
    /// Average symbol power budget.
    pub p_bar: f64,
}

impl SystemParams {
    pub fn new(k: f64, n: usize, sigma_z2: f64, m: usize, p_bar: f64) -> Result<Self> {
        let params = Self {
            k,
            n,
            sigma_z2,
            m,
            p_bar,
        };
        params.validate()?;
        Ok(params)
    }

    /// Builds parameters from an SNR in dB, converting once via [`snr_to_pbar`].
    pub fn from_snr_db(k: f64, n: usize, sigma_z2: f64, m: usize, snr_db: f64) -> Result<Self> {
        Self::new(k, n, sigma_z2, m, snr_to_pbar(snr_db, sigma_z2)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0) || !self.k.is_finite() {
            return Err(Error::Domain(format!(
                "Rician factor K must be finite and >= 0, got {}",
                self.k
            )));
        }
        if self.n < 1 {
            return Err(Error::Domain("antenna count N must be >= 1".into()));
        }
        if !(self.sigma_z2 > 0.0) || !self.sigma_z2.is_finite() {
            return Err(Error::Domain(format!(
                "noise variance must be finite and > 0, got {}",
                self.sigma_z2
            )));
        }
        if self.m < 2 {
            return Err(Error::Domain(format!(
                "constellation size M must be >= 2, got {}",
                self.m
            )));
        }
        if !(self.p_bar > 0.0) || !self.p_bar.is_finite() {
            return Err(Error::Domain(format!(
                "power budget must be finite and > 0, got {}",
                self.p_bar
            )));
        }
        Ok(())
    }

    pub fn snr(&self) -> f64 {
        self.p_bar / self.sigma_z2
    }

    pub fn with_n(self, n: usize) -> Self {
        Self { n, ..self }
    }

    pub fn with_m(self, m: usize) -> Self {
        Self { m, ..self }
    }

    pub(crate) fn constraint_slack(&self) -> f64 {
        CONSTRAINT_SLACK * self.p_bar.max(1.0)
    }
}

/// Squared magnitude of the line-of-sight mean and the scattered variance of
/// a unit-gain Rician channel coefficient.
pub fn rician_moments(k: f64) -> Result<(f64, f64)> {
    if !(k >= 0.0) {
        return Err(Error::Domain(format!(
            "Rician factor K must be >= 0, got {k}"
        )));
    }
    if k.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let sigma_h2 = 1.0 / (k + 1.0);
    Ok((1.0 - sigma_h2, sigma_h2))
}

/// Converts an SNR in dB to the absolute average power budget.
pub fn snr_to_pbar(snr_db: f64, sigma_z2: f64) -> Result<f64> {
    if !(sigma_z2 > 0.0) {
        return Err(Error::Domain(format!(
            "noise variance must be > 0, got {sigma_z2}"
        )));
    }
    if !snr_db.is_finite() {
        return Err(Error::Domain(format!("SNR must be finite, got {snr_db}")));
    }
    Ok(sigma_z2 * 10f64.powf(snr_db / 10.0))
}

/// Mean and variance of the antenna-averaged energy for one transmitted symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyStats {
    pub mu: f64,
    pub sigma2: f64,
}

impl EnergyStats {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Exact first two moments of `||h sqrt(p) + z||^2 / N`.
///
/// These hold for every `N`; only the Gaussian shape of the distribution is
/// asymptotic in the antenna count.
pub fn energy_stats(params: &SystemParams, p_m: f64) -> Result<EnergyStats> {
    if !(p_m >= 0.0) || !p_m.is_finite() {
        return Err(Error::Domain(format!(
            "symbol power must be finite and >= 0, got {p_m}"
        )));
    }
    Ok(energy_stats_unchecked(params, p_m))
}

pub(crate) fn energy_stats_unchecked(params: &SystemParams, p_m: f64) -> EnergyStats {
    let n = params.n as f64;
    let k = params.k;
    let s2 = params.sigma_z2;
    let fading = (2.0 * k + 1.0) / ((k + 1.0) * (k + 1.0));
    EnergyStats {
        mu: p_m + s2,
        sigma2: (fading * p_m * p_m + s2 * s2 + 2.0 * s2 * p_m) / n,
    }
}

/// Ordered symbol powers satisfying the average-power constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    powers: Vec<f64>,
    alpha: Vec<f64>,
}

impl Constellation {
    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// Power of each symbol relative to the average budget.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        self.powers.iter().sum::<f64>() / self.powers.len() as f64
    }

    pub fn stats(&self, params: &SystemParams) -> Vec<EnergyStats> {
        self.powers
            .iter()
            .map(|&p| energy_stats_unchecked(params, p))
            .collect()
    }
}

/// Checks ordering, sign, and the average-power constraint, then derives
/// the power ratios.
pub fn validate_constellation(powers: &[f64], params: &SystemParams) -> Result<Constellation> {
    params.validate()?;
    if powers.len() != params.m {
        return Err(Error::ShapeMismatch {
            expected: params.m,
            got: powers.len(),
        });
    }
    for (i, &p) in powers.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::InvalidConstellation(format!(
                "power at index {i} is not finite"
            )));
        }
        if p < 0.0 {
            return Err(Error::InvalidConstellation(format!(
                "power at index {i} is negative ({p})"
            )));
        }
    }
    for (i, w) in powers.windows(2).enumerate() {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidConstellation(format!(
                "powers not strictly increasing at index {}: {} >= {}",
                i + 1,
                w[0],
                w[1]
            )));
        }
    }
    let mean = powers.iter().sum::<f64>() / powers.len() as f64;
    if mean > params.p_bar + params.constraint_slack() {
        return Err(Error::InvalidConstellation(format!(
            "average power {mean} exceeds budget {}",
            params.p_bar
        )));
    }
    Ok(Constellation {
        powers: powers.to_vec(),
        alpha: powers.iter().map(|p| p / params.p_bar).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(k: f64, n: usize, sigma_z2: f64) -> SystemParams {
        SystemParams::new(k, n, sigma_z2, 2, 1.0).unwrap()
    }

    #[test]
    fn rician_limits() {
        assert_eq!(rician_moments(0.0).unwrap(), (0.0, 1.0));
        let (mu2, s2) = rician_moments(1e9).unwrap();
        assert!((mu2 - 1.0).abs() < 1e-8 && s2.abs() < 1e-8);
        let (mu2, s2) = rician_moments(50.0).unwrap();
        assert_relative_eq!(mu2, 50.0 / 51.0, max_relative = 1e-15);
        assert_relative_eq!(s2, 1.0 / 51.0, max_relative = 1e-15);
        assert!(matches!(rician_moments(-0.1), Err(Error::Domain(_))));
        assert!(rician_moments(f64::NAN).is_err());
    }

    #[test]
    fn energy_stats_closed_form() {
        for k in [0.0, 1.0, 50.0] {
            let s = energy_stats(&params(k, 100, 1.0), 0.0).unwrap();
            assert_eq!(s.mu, 1.0);
            assert_relative_eq!(s.sigma2, 0.01, max_relative = 1e-15);
        }
        let s = energy_stats(&params(0.0, 100, 1.0), 1.0).unwrap();
        assert_eq!(s.mu, 2.0);
        assert_relative_eq!(s.sigma2, 0.04, max_relative = 1e-15);
        assert!(energy_stats(&params(0.0, 100, 1.0), -1e-9).is_err());
    }

    #[test]
    fn snr_conversion() {
        assert_eq!(snr_to_pbar(0.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            snr_to_pbar(3.0, 1.0).unwrap(),
            1.9952623149688795,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            snr_to_pbar(-6.0, 2.0).unwrap(),
            0.5023772863019159,
            max_relative = 1e-14
        );
        assert!(snr_to_pbar(0.0, 0.0).is_err());
    }

    #[test]
    fn constellation_validation() {
        let p = SystemParams::new(0.0, 100, 1.0, 2, 1.0).unwrap();
        let c = validate_constellation(&[0.0, 2.0], &p).unwrap();
        assert_eq!(c.alpha(), &[0.0, 2.0]);

        let err = validate_constellation(&[1.0, 1.0], &p).unwrap_err();
        assert!(err.to_string().contains("index 1"), "{err}");
        assert!(validate_constellation(&[-0.5, 1.0], &p).is_err());
        assert!(validate_constellation(&[0.0, 2.5], &p).is_err());
        assert!(matches!(
            validate_constellation(&[0.0, 1.0, 2.0], &p),
            Err(Error::ShapeMismatch { .. })
        ));

        let p4 = SystemParams::new(0.0, 100, 1.0, 4, 1.0).unwrap();
        let c = validate_constellation(&[0.0, 0.5, 1.0, 2.5], &p4).unwrap();
        assert_relative_eq!(c.mean_power(), 1.0);
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::new(-1.0, 10, 1.0, 2, 1.0).is_err());
        assert!(SystemParams::new(0.0, 0, 1.0, 2, 1.0).is_err());
        assert!(SystemParams::new(0.0, 10, 0.0, 2, 1.0).is_err());
        assert!(SystemParams::new(0.0, 10, 1.0, 1, 1.0).is_err());
        assert!(SystemParams::new(0.0, 10, 1.0, 2, 0.0).is_err());
    }
}
