//! Probability that a comparison of two power measurements rejects a weight
//! change that lowered the gain by dG: Gaussian approximation and a direct
//! chi-square simulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Standard normal upper tail.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Which denominator to use for Gamma. `Derived` follows from the Gaussian
/// approximation of both measurements; `Printed` has 4G where the derived
/// form has 4G^2, and is kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaForm {
    Derived,
    Printed,
}

pub fn gamma(g: f64, dg: f64, inr: f64, n: usize, form: GammaForm) -> f64 {
    let lead = match form {
        GammaForm::Derived => 4.0 * g * g,
        GammaForm::Printed => 4.0 * g,
    };
    let den = (lead - 4.0 * g * dg + 2.0 * dg * dg) * inr + 8.0 * g - 4.0 * dg + 4.0 / inr;
    (n as f64 * dg * dg * inr / den).sqrt()
}

fn check(g: f64, dg: f64, inr: f64, n: usize) -> Result<()> {
    if !(dg > 0.0) {
        return Err(Error::InvalidArgument("delta_G must be positive".into()));
    }
    if !(g >= dg) {
        return Err(Error::InvalidArgument("G must be at least delta_G".into()));
    }
    if !(inr > 0.0) {
        return Err(Error::InvalidArgument("INR must be positive".into()));
    }
    if n < 1 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    Ok(())
}

/// Q(Gamma) with the derived denominator.
pub fn theorem1_error_probability(g: f64, dg: f64, inr: f64, n: usize) -> Result<f64> {
    theorem1_with(GammaForm::Derived, g, dg, inr, n)
}

pub fn theorem1_with(form: GammaForm, g: f64, dg: f64, inr: f64, n: usize) -> Result<f64> {
    check(g, dg, inr, n)?;
    Ok(q_function(gamma(g, dg, inr, n, form)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub probability: f64,
    pub stderr: f64,
    pub trials: u64,
}

const BATCH: u64 = 1 << 16;

/// Fraction of trials in which Z1 (gain G - dG) exceeds Z0 (gain G), with
/// both drawn from their exact scaled chi-square laws. Batches use separate
/// streams, so the estimate does not depend on the thread count.
pub fn mc_error_probability(g: f64, dg: f64, inr: f64, n: usize, trials: u64, seed: u64) -> Result<McEstimate> {
    if trials < 10_000 {
        return Err(Error::InvalidArgument("at least 10^4 trials are required".into()));
    }
    if !(dg > 0.0 && g >= dg && inr > 0.0 && n >= 1) {
        return Err(Error::InvalidArgument("need 0 < delta_G <= G, INR > 0, N >= 1".into()));
    }
    let chi = ChiSquared::new(n as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let s0 = g * inr + 1.0;
    let s1 = (g - dg) * inr + 1.0;
    let batches = trials.div_ceil(BATCH);
    let hits: u64 = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = BATCH.min(trials - b * BATCH);
            (0..count)
                .filter(|_| {
                    let z0 = s0 * chi.sample(&mut rng);
                    let z1 = s1 * chi.sample(&mut rng);
                    z1 > z0
                })
                .count() as u64
        })
        .sum();
    let p = hits as f64 / trials as f64;
    Ok(McEstimate { probability: p, stderr: (p * (1.0 - p) / trials as f64).sqrt(), trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_function_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        assert!((q_function(1.96) - 0.024997895).abs() < 1e-8);
        assert!(q_function(40.0) < 1e-300);
    }

    #[test]
    fn limits() {
        let p = theorem1_error_probability(1.0, 1e-12, 10.0, 1000).unwrap();
        assert!((p - 0.5).abs() < 1e-6);
        let p = theorem1_error_probability(1.0, 0.01, 10.0, 1_000_000_000_000).unwrap();
        assert!(p < 1e-12);
        assert!(theorem1_error_probability(1.0, 0.0, 10.0, 10).is_err());
        assert!(theorem1_error_probability(1.0, -0.1, 10.0, 10).is_err());
    }

    #[test]
    fn derived_form_matches_moment_algebra() {
        // Gamma = dG INR / sqrt(2 (s0^2 + s1^2) / N), s_i the two measurement means
        for &(g, dg, inr, n) in &[(1.0, 0.01, 10.0, 1000usize), (4.0, 2.0, 1.0, 10), (0.25, 0.0025, 100.0, 100_000)] {
            let s0: f64 = g * inr + 1.0;
            let s1: f64 = (g - dg) * inr + 1.0;
            let direct = dg * inr / (2.0 * (s0 * s0 + s1 * s1) / n as f64).sqrt();
            let got = gamma(g, dg, inr, n, GammaForm::Derived);
            assert!((got - direct).abs() < 1e-12 * direct, "{got} vs {direct}");
        }
    }

    #[test]
    fn error_probability_falls_with_samples() {
        let ps: Vec<f64> = [1_000usize, 10_000, 100_000, 1_000_000]
            .iter()
            .map(|&n| theorem1_error_probability(1.0, 0.01, 10.0, n).unwrap())
            .collect();
        assert!(ps.windows(2).all(|w| w[1] < w[0]));
        assert!(ps[0] > 0.4);
        assert!(ps[3] < 0.01);
    }

    #[test]
    fn mc_null_versus_full_gain() {
        let e = mc_error_probability(1.0, 1.0, 1e6, 10_000, 10_000, 1).unwrap();
        assert_eq!(e.probability, 0.0);
        assert!(mc_error_probability(1.0, 0.5, 1.0, 10, 100, 1).is_err());
    }

    #[test]
    fn mc_is_seed_deterministic() {
        let a = mc_error_probability(1.0, 0.1, 2.0, 100, 100_000, 5).unwrap();
        let b = mc_error_probability(1.0, 0.1, 2.0, 100, 100_000, 5).unwrap();
        assert_eq!(a, b);
    }
}
