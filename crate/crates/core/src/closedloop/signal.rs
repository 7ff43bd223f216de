use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::{gain_normalization, total_pattern};
use crate::geometry::Geometry;
use crate::weights::WeightVector;

/// Interferer scenario. Noise power is 1 and the interferer power is the INR.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalScenario {
    pub start_angle_rad: f64,
    /// Signed; negative moves toward boresight from a positive start.
    pub angular_velocity_deg_s: f64,
    pub inr_db: f64,
    pub samples_per_decision: usize,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl SignalScenario {
    pub fn fixed(angle_rad: f64, inr_db: f64, samples_per_decision: usize, seed: u64) -> Self {
        Self {
            start_angle_rad: angle_rad,
            angular_velocity_deg_s: 0.0,
            inr_db,
            samples_per_decision,
            sample_rate_hz: 1.0e6,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_decision < 1 {
            return Err(Error::InvalidArgument("samples_per_decision must be at least 1".into()));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidArgument("sample_rate_hz must be positive".into()));
        }
        if !self.inr_db.is_finite() || !self.start_angle_rad.is_finite() || !self.angular_velocity_deg_s.is_finite() {
            return Err(Error::InvalidArgument("scenario values must be finite".into()));
        }
        Ok(())
    }

    pub fn inr_linear(&self) -> f64 {
        10f64.powf(self.inr_db / 10.0)
    }

    pub fn decision_interval_s(&self) -> f64 {
        self.samples_per_decision as f64 / self.sample_rate_hz
    }

    pub fn decisions_per_second(&self) -> f64 {
        1.0 / self.decision_interval_s()
    }

    pub fn angle_at(&self, time_s: f64) -> f64 {
        self.start_angle_rad + self.angular_velocity_deg_s.to_radians() * time_s
    }

    pub fn is_moving(&self) -> bool {
        self.angular_velocity_deg_s != 0.0
    }
}

/// x[k] = sqrt(G) z[k] + n[k] with z ~ N(0, INR), n ~ N(0, 1).
pub fn sample_interference<R: Rng + ?Sized>(gain: f64, inr: f64, count: usize, rng: &mut R) -> Vec<f64> {
    let a = (gain * inr).sqrt();
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            let n: f64 = StandardNormal.sample(rng);
            a * z + n
        })
        .collect()
}

/// Samples received with weights `w` while the interferer sits at the
/// scenario's start angle.
pub fn generate_samples(
    scenario: &SignalScenario,
    geometry: &Geometry,
    w: &WeightVector,
    count: usize,
) -> Result<Vec<f64>> {
    scenario.validate()?;
    let cut = total_pattern(geometry, w, &[scenario.angle_at(0.0)])?;
    let gain = gain_normalization(geometry).linear(cut.copol_field[0]);
    let mut rng = signal_rng(scenario.seed);
    Ok(sample_interference(gain, scenario.inr_linear(), count, &mut rng))
}

/// Z = mean of squared samples.
pub fn power_metric(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("power metric of an empty sample block".into()));
    }
    Ok(samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64)
}

/// How a decision's energy is obtained from the true gain G.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measurement {
    /// Z from N generated samples.
    Sampled,
    /// Z drawn from its exact law (G INR + 1) chi2_N / N.
    ChiSquare,
    /// The noiseless expectation G INR + 1.
    ExpectedPower,
    /// The linear gain itself.
    TrueGain,
}

impl Measurement {
    pub fn name(&self) -> &'static str {
        match self {
            Measurement::Sampled => "sampled",
            Measurement::ChiSquare => "chi-square",
            Measurement::ExpectedPower => "expected-power",
            Measurement::TrueGain => "true-gain",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Measurement::Sampled, Measurement::ChiSquare, Measurement::ExpectedPower, Measurement::TrueGain]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

pub(crate) struct Meter {
    mode: Measurement,
    inr: f64,
    n: usize,
    chi: ChiSquared<f64>,
}

impl Meter {
    pub(crate) fn new(mode: Measurement, inr: f64, n: usize) -> Result<Self> {
        let chi = ChiSquared::new(n.max(1) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(Self { mode, inr, n: n.max(1), chi })
    }

    pub(crate) fn measure<R: Rng + ?Sized>(&self, gain: f64, rng: &mut R) -> f64 {
        match self.mode {
            Measurement::Sampled => {
                let x = sample_interference(gain, self.inr, self.n, rng);
                x.iter().map(|v| v * v).sum::<f64>() / self.n as f64
            }
            Measurement::ChiSquare => (gain * self.inr + 1.0) * self.chi.sample(rng) / self.n as f64,
            Measurement::ExpectedPower => gain * self.inr + 1.0,
            Measurement::TrueGain => gain,
        }
    }
}

/// Independent streams: 0 drives proposals, 1 drives received samples.
pub(crate) fn proposal_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(0);
    r
}

pub(crate) fn signal_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(1);
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn variance(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
    }

    #[test]
    fn power_metric_cases() {
        assert_eq!(power_metric(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(power_metric(&[1.0, -1.0, 2.0]).unwrap(), 2.0);
        assert!(power_metric(&[]).is_err());
    }

    #[test]
    fn sample_variance_limits() {
        let mut rng = signal_rng(11);
        let v = variance(&sample_interference(1.0, 1e-9, 1_000_000, &mut rng));
        assert!((v - 1.0).abs() < 0.01, "{v}");
        let v = variance(&sample_interference(1.0, 10.0, 1_000_000, &mut rng));
        assert!((v - 11.0).abs() < 0.1, "{v}");
        let v = variance(&sample_interference(0.0, 1e6, 1_000_000, &mut rng));
        assert!((v - 1.0).abs() < 0.01, "{v}");
    }

    #[test]
    fn sampled_and_chi_square_agree_in_mean() {
        let (g, inr, n) = (0.3, 10.0, 50);
        let trials = 10_000;
        let mut rng = signal_rng(3);
        for mode in [Measurement::Sampled, Measurement::ChiSquare] {
            let m = Meter::new(mode, inr, n).unwrap();
            let z: Vec<f64> = (0..trials).map(|_| m.measure(g, &mut rng)).collect();
            let mean = z.iter().sum::<f64>() / trials as f64;
            let mu = g * inr + 1.0;
            let sigma = (2.0 * mu * mu / n as f64 / trials as f64).sqrt();
            assert!((mean - mu).abs() < 3.0 * sigma, "{mode:?}: {mean} vs {mu}");
        }
    }

    #[test]
    fn measurement_names_round_trip() {
        for m in [Measurement::Sampled, Measurement::ChiSquare, Measurement::ExpectedPower, Measurement::TrueGain] {
            assert_eq!(Measurement::from_name(m.name()), Some(m));
        }
    }
}
