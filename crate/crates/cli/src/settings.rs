//! Config file schema. Every section is optional; keys inside a section are
//! checked against the schema, and required keys are reported together.

use std::path::{Path, PathBuf};

use rimnull_core::DishSpec;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dish: Option<DishSpec>,
    pub pattern: Option<PatternSection>,
    pub nullscan: Option<NullscanSection>,
    pub freqscan: Option<FreqscanSection>,
    pub theorem1: Option<Theorem1Section>,
    pub closedloop: Option<ClosedloopSection>,
    pub moving: Option<MovingSection>,
    pub library: Option<LibrarySection>,
    pub hybrid: Option<HybridSection>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSection {
    pub start_deg: Option<f64>,
    pub stop_deg: Option<f64>,
    pub step_deg: Option<f64>,
    pub weights: Option<PathBuf>,
    pub export_geometry: Option<bool>,
    pub bundle_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullscanSection {
    pub method: Option<String>,
    pub start_deg: Option<f64>,
    pub stop_deg: Option<f64>,
    pub step_deg: Option<f64>,
    pub mainlobe_delta: Option<f64>,
    pub frequencies_hz: Option<Vec<f64>>,
    pub population: Option<usize>,
    pub movements: Option<usize>,
    pub write_weights: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqscanSection {
    pub weights: Option<PathBuf>,
    pub psi_deg: Option<f64>,
    pub start_hz: Option<f64>,
    pub stop_hz: Option<f64>,
    pub step_hz: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Section {
    pub gain: Option<Vec<f64>>,
    pub delta_fraction: Option<Vec<f64>>,
    pub inr_db: Option<Vec<f64>>,
    pub samples: Option<Vec<usize>>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedloopSection {
    pub psi_deg: Option<f64>,
    pub inr_db: Option<f64>,
    pub samples_per_decision: Option<usize>,
    pub decisions: Option<usize>,
    pub levels: Option<usize>,
    pub cluster_size: Option<usize>,
    pub measurement: Option<String>,
    pub runs: Option<usize>,
    pub schedule_length: Option<usize>,
    pub record_every: Option<usize>,
    pub sample_rate_hz: Option<f64>,
    pub init: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingSection {
    pub start_deg: Option<f64>,
    pub stop_deg: Option<f64>,
    pub velocity_deg_s: Option<f64>,
    pub inr_db: Option<f64>,
    pub samples_per_decision: Option<usize>,
    pub sample_rate_hz: Option<f64>,
    pub levels: Option<usize>,
    pub warm_decisions: Option<usize>,
    pub schedule_length: Option<usize>,
    pub record_every: Option<usize>,
    pub measurement: Option<String>,
    pub cluster_size: Option<usize>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibrarySection {
    pub grid_start_deg: Option<f64>,
    pub grid_stop_deg: Option<f64>,
    pub grid_step_deg: Option<f64>,
    pub optimizer: Option<String>,
    pub anneal_decisions: Option<usize>,
    pub start_deg: Option<f64>,
    pub stop_deg: Option<f64>,
    pub velocity_deg_s: Option<f64>,
    pub inr_db: Option<f64>,
    pub samples_per_decision: Option<usize>,
    pub sample_rate_hz: Option<f64>,
    pub kernel_width: Option<f64>,
    pub schedule_length: Option<usize>,
    pub record_every: Option<usize>,
    pub measurement: Option<String>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridSection {
    pub assumed_feed_taper_q: Option<f64>,
    pub psi_deg: Option<f64>,
    pub levels: Option<usize>,
    pub runs: Option<usize>,
    pub stage1_decisions: Option<usize>,
    pub stage2_decisions: Option<usize>,
    pub threshold_dbi: Option<f64>,
    pub inr_db: Option<f64>,
    pub measurement: Option<String>,
    pub mismatch_start_deg: Option<f64>,
    pub mismatch_stop_deg: Option<f64>,
    pub mismatch_step_deg: Option<f64>,
    pub write_traces: Option<bool>,
    pub seed: Option<u64>,
}

/// Collects absent required keys so they can be reported in one message.
pub struct Need {
    section: &'static str,
    missing: Vec<String>,
}

impl Need {
    pub fn new(section: &'static str) -> Self {
        Self { section, missing: Vec::new() }
    }

    pub fn req<T: Clone>(&mut self, key: &str, v: &Option<T>) -> Option<T> {
        if v.is_none() {
            self.missing.push(format!("{}.{key}", self.section));
        }
        v.clone()
    }

    pub fn finish(self) -> CliResult<()> {
        if self.missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::Missing(self.missing))
        }
    }
}

/// Inclusive grid from `start` to `stop`; the last point is dropped if it
/// overshoots by more than a millionth of a step.
pub fn grid(name: &str, start: f64, stop: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(CliError::Config(format!("{name}: need start <= stop and a positive step")));
    }
    let count = ((stop - start) / step + 1e-6).floor() as usize + 1;
    if count > 10_000_000 {
        return Err(CliError::Config(format!("{name}: {count} points is too many")));
    }
    Ok((0..count).map(|i| start + step * i as f64).collect())
}
