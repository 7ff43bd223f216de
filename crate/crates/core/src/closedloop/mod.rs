//! Weight adaptation driven by noisy received-power measurements.

pub mod anneal;
pub mod cluster;
pub mod ensemble;
pub mod library;
pub mod moving;
pub mod signal;
pub mod theorem;

pub use anneal::{anneal_closed_loop, AnnealInit, AnnealOutcome, AnnealSettings};
pub use cluster::{cluster_partition, Partition};
pub use ensemble::{ensemble_weight_stats, sample_from_ensemble, EnsembleStats};
pub use library::{build_library, track_with_library, LibraryEntry, LibraryOptimizer, WeightLibrary};
pub use moving::{track_moving_source, AngleTable};
pub use signal::{generate_samples, power_metric, Measurement, SignalScenario};
pub use theorem::{mc_error_probability, theorem1_error_probability, GammaForm, McEstimate};

/// One closed-loop decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub index: u64,
    pub time_s: f64,
    pub psi_rad: f64,
    /// Identifies the applied weights: the library entry, or the number of
    /// accepted changes so far for element-wise search.
    pub weights_id: u64,
    pub measured: f64,
    pub accepted: bool,
    pub true_gain_dbi: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClosedLoopTrace {
    pub records: Vec<DecisionRecord>,
}

impl ClosedLoopTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Index of the first decision whose true gain is at or below `threshold_dbi`.
    pub fn first_at_or_below(&self, threshold_dbi: f64) -> Option<u64> {
        self.records.iter().find(|r| r.true_gain_dbi <= threshold_dbi).map(|r| r.index)
    }

    pub fn final_gain_dbi(&self) -> Option<f64> {
        self.records.last().map(|r| r.true_gain_dbi)
    }
}

/// Temperature for zero-based decision `k` of a length-`t` schedule
/// 1, 1/2, ..., 1/T, held at 1/T afterwards.
pub fn temperature(k: usize, t: usize) -> f64 {
    1.0 / ((k + 1).min(t.max(1)) as f64)
}

/// Acceptance rule: improvements always, otherwise with probability
/// exp(dE / T). `u` is a uniform draw in [0, 1).
pub fn accept(delta_e: f64, temp: f64, u: f64) -> bool {
    delta_e >= 0.0 || u < (delta_e / temp).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_clamps() {
        assert_eq!(temperature(0, 10), 1.0);
        assert_eq!(temperature(3, 10), 0.25);
        assert_eq!(temperature(9, 10), 0.1);
        assert_eq!(temperature(500, 10), 0.1);
    }

    #[test]
    fn cold_rule_never_accepts_worse() {
        for u in [0.0, 0.3, 0.999] {
            assert!(!accept(-1e-6, 1e-12, u));
            assert!(accept(0.0, 1e-12, u));
        }
    }
}
