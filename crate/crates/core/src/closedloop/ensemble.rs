use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::weights::{PhaseAlphabet, QuantizedWeights};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    /// Average of the +-1 weight values per element.
    pub element_means: Vec<f64>,
    /// Hamming distance over N, averaged over all pairs of runs.
    pub mean_pairwise_distance: f64,
    pub runs: usize,
}

impl EnsembleStats {
    /// Fraction of elements whose mean magnitude exceeds `level`.
    pub fn fraction_biased(&self, level: f64) -> f64 {
        let k = self.element_means.iter().filter(|m| m.abs() > level).count();
        k as f64 / self.element_means.len() as f64
    }
}

pub fn ensemble_weight_stats(runs: &[QuantizedWeights]) -> Result<EnsembleStats> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument("ensemble statistics need at least two runs".into()));
    }
    let first = &runs[0];
    if first.alphabet().levels() != 2 {
        return Err(Error::InvalidArgument("ensemble statistics need binary weights".into()));
    }
    let n = first.len();
    for r in runs {
        if r.alphabet() != first.alphabet() {
            return Err(Error::AlphabetMismatch { left: first.alphabet().levels(), right: r.alphabet().levels() });
        }
        crate::field::check_len(n, r.len())?;
    }
    let plus = first.alphabet().unity_index();
    let mut counts = vec![0usize; n];
    for r in runs {
        for (c, &i) in counts.iter_mut().zip(r.indices()) {
            if i == plus {
                *c += 1;
            }
        }
    }
    let k = runs.len();
    let element_means = counts.iter().map(|&c| (2.0 * c as f64 - k as f64) / k as f64).collect();
    // pairs disagreeing at element n: c (k - c)
    let disagree: f64 = counts.iter().map(|&c| (c * (k - c)) as f64).sum();
    let pairs = (k * (k - 1) / 2) as f64;
    Ok(EnsembleStats {
        element_means,
        mean_pairwise_distance: disagree / pairs / n as f64,
        runs: k,
    })
}

/// Independent draw per element with P(+1) = (1 + mean) / 2.
pub fn sample_from_ensemble(stats: &EnsembleStats, seed: u64) -> Result<QuantizedWeights> {
    let alphabet = PhaseAlphabet::new(2)?;
    let plus = alphabet.unity_index();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = stats
        .element_means
        .iter()
        .map(|&m| {
            let p = (1.0 + m) / 2.0;
            if rng.random::<f64>() < p {
                plus
            } else {
                1 - plus
            }
        })
        .collect();
    QuantizedWeights::new(alphabet, idx)
}
