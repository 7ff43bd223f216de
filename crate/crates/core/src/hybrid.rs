//! Closed-loop annealing warm-started from an open-loop solution computed on
//! an assumed (inexact) pattern.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::closedloop::anneal::{anneal_with_table, AnnealInit, Annealer, AnnealOutcome, AnnealSettings};
use crate::closedloop::cluster::Partition;
use crate::closedloop::moving::AngleTable;
use crate::closedloop::signal::{Measurement, SignalScenario};
use crate::closedloop::ClosedLoopTrace;
use crate::config::DishConfig;
use crate::error::{Error, Result};
use crate::field::{check_len, element_vector, fixed_field, gain_normalization};
use crate::geometry::Geometry;
use crate::weights::{PhaseAlphabet, QuantizedWeights, WeightVector};

#[derive(Debug, Clone, PartialEq)]
pub struct HybridScenario {
    pub assumed_config: DishConfig,
    pub true_config: DishConfig,
    pub null_angle_rad: f64,
    pub alphabet: PhaseAlphabet,
    pub seeds: Vec<u64>,
    pub stage1_decisions: usize,
    pub stage2_decisions: usize,
    /// Stage 2 counts decisions until the true gain reaches this level.
    pub threshold_dbi: f64,
    /// Scale of the noiseless energy G INR + 1 used by both stages.
    pub inr_db: f64,
    pub stage2_measurement: Measurement,
    pub samples_per_decision: usize,
}

impl HybridScenario {
    /// Default mismatch: the assumed feed taper is 1.5, everything else equal.
    pub fn new(true_config: DishConfig) -> Self {
        let assumed_config = DishConfig { feed_taper_q: 1.5, ..true_config.clone() };
        Self {
            assumed_config,
            true_config,
            null_angle_rad: 1.75f64.to_radians(),
            alphabet: PhaseAlphabet::new(4).expect("4 levels"),
            seeds: (0..10).collect(),
            stage1_decisions: 20_000,
            stage2_decisions: 20_000,
            threshold_dbi: -40.0,
            inr_db: 30.0,
            stage2_measurement: Measurement::ExpectedPower,
            samples_per_decision: 1000,
        }
    }

    /// The configs may differ only in the feed taper.
    pub fn validate(&self) -> Result<()> {
        self.assumed_config.validate()?;
        self.true_config.validate()?;
        let aligned = DishConfig { feed_taper_q: self.true_config.feed_taper_q, ..self.assumed_config.clone() };
        if aligned != self.true_config {
            return Err(Error::Config("assumed and true dish may differ only in feed_taper_q".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("hybrid scenario needs at least one seed".into()));
        }
        Ok(())
    }
}

/// Stage 1: noiseless annealing on the assumed pattern. Only the assumed
/// geometry is visible here.
pub fn run_stage1(
    assumed: &Geometry,
    psi: f64,
    alphabet: &PhaseAlphabet,
    decisions: usize,
    inr_db: f64,
    seed: u64,
) -> Result<AnnealOutcome> {
    let table = AngleTable::single(assumed, psi);
    let part = Partition::singletons(assumed.len());
    let sc = SignalScenario::fixed(psi, inr_db, 1, seed);
    let mut st = AnnealSettings::new(alphabet.clone(), decisions, seed);
    st.measurement = Measurement::ExpectedPower;
    anneal_with_table(&sc, &table, &part, &st)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridRun {
    pub seed: u64,
    pub stage1: ClosedLoopTrace,
    pub stage1_weights: QuantizedWeights,
    /// Stage-1 null depth on the assumed pattern.
    pub believed_dbi: f64,
    /// The same weights on the true pattern.
    pub actual_dbi: f64,
    pub warm: ClosedLoopTrace,
    pub cold: ClosedLoopTrace,
    /// Decisions until the threshold; `None` if never reached.
    pub warm_steps: Option<u64>,
    pub cold_steps: Option<u64>,
}

impl HybridRun {
    pub fn ratio(&self) -> Option<f64> {
        match (self.cold_steps, self.warm_steps) {
            (Some(c), Some(w)) => Some(c as f64 / (w.max(1)) as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridReport {
    pub runs: Vec<HybridRun>,
}

fn median_steps(v: impl Iterator<Item = Option<u64>>) -> Option<u64> {
    let mut x: Vec<u64> = v.map(|s| s.unwrap_or(u64::MAX)).collect();
    x.sort_unstable();
    let m = x[x.len() / 2];
    (m != u64::MAX).then_some(m)
}

impl HybridReport {
    pub fn median_warm_steps(&self) -> Option<u64> {
        median_steps(self.runs.iter().map(|r| r.warm_steps))
    }

    pub fn median_cold_steps(&self) -> Option<u64> {
        median_steps(self.runs.iter().map(|r| r.cold_steps))
    }

    /// Median over seeds of cold/warm; runs that never reached the threshold
    /// count as infinite (cold) or zero (warm) ratios.
    pub fn median_ratio(&self) -> f64 {
        let mut r: Vec<f64> = self
            .runs
            .iter()
            .map(|x| match (x.cold_steps, x.warm_steps) {
                (_, None) => 0.0,
                (None, Some(_)) => f64::INFINITY,
                _ => x.ratio().unwrap_or(0.0),
            })
            .collect();
        r.sort_by(f64::total_cmp);
        r[r.len() / 2]
    }
}

fn steps_to(trace: &ClosedLoopTrace, start_dbi: f64, threshold: f64) -> Option<u64> {
    if start_dbi <= threshold {
        return Some(0);
    }
    trace.first_at_or_below(threshold).map(|k| k + 1)
}

pub fn run_hybrid(scenario: &HybridScenario) -> Result<HybridReport> {
    scenario.validate()?;
    let assumed = Geometry::build(&scenario.assumed_config)?;
    let truth = Geometry::build(&scenario.true_config)?;
    run_hybrid_with(scenario, &assumed, &truth)
}

pub fn run_hybrid_with(scenario: &HybridScenario, assumed: &Geometry, truth: &Geometry) -> Result<HybridReport> {
    check_len(assumed.len(), truth.len())?;
    let psi = scenario.null_angle_rad;
    let table = AngleTable::single(truth, psi);
    let norm = table.normalization();
    let part = Partition::singletons(truth.len());
    let runs: Result<Vec<HybridRun>> = scenario
        .seeds
        .par_iter()
        .map(|&seed| {
            let s1 = run_stage1(assumed, psi, &scenario.alphabet, scenario.stage1_decisions, scenario.inr_db, seed)?;
            let w1 = s1.weights.values();
            let actual_dbi = norm.dbi(table.field(psi, &w1));

            let sc = SignalScenario {
                start_angle_rad: psi,
                angular_velocity_deg_s: 0.0,
                inr_db: scenario.inr_db,
                samples_per_decision: scenario.samples_per_decision,
                sample_rate_hz: 1.0e6,
                seed: seed ^ 0x5eed_0002,
            };
            let mut st = AnnealSettings::new(scenario.alphabet.clone(), scenario.stage2_decisions, seed ^ 0x5eed_0001);
            st.measurement = scenario.stage2_measurement;
            st.init = AnnealInit::Provided(s1.weights.clone());
            let warm = anneal_with_table(&sc, &table, &part, &st)?;

            let mut cold_st = st.clone();
            cold_st.init = AnnealInit::Random;
            cold_st.seed = seed ^ 0x5eed_0003;
            let mut cold_run = Annealer::new(&sc, &table, &part, &cold_st)?;
            let cold_start_dbi = cold_run.current_gain_dbi();
            cold_run.run_to_end();
            let cold = cold_run.finish();

            Ok(HybridRun {
                seed,
                believed_dbi: s1.final_gain_dbi,
                actual_dbi,
                warm_steps: steps_to(&warm.trace, actual_dbi, scenario.threshold_dbi),
                cold_steps: steps_to(&cold.trace, cold_start_dbi, scenario.threshold_dbi),
                stage1: s1.trace,
                stage1_weights: s1.weights,
                warm: warm.trace,
                cold: cold.trace,
            })
        })
        .collect();
    Ok(HybridReport { runs: runs? })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchRow {
    pub psi_rad: f64,
    pub believed_dbi: f64,
    pub actual_dbi: f64,
}

impl MismatchRow {
    pub fn delta_db(&self) -> f64 {
        self.actual_dbi - self.believed_dbi
    }
}

/// Gain of `w` on the assumed and the true pattern over `angles`.
pub fn mismatch_report(
    assumed: &Geometry,
    truth: &Geometry,
    w: &WeightVector,
    angles: &[f64],
) -> Result<Vec<MismatchRow>> {
    check_len(assumed.len(), truth.len())?;
    check_len(truth.len(), w.len())?;
    let na = gain_normalization(assumed);
    let nt = gain_normalization(truth);
    let eval = |g: &Geometry, psi: f64| -> Complex64 {
        fixed_field(g, psi) + element_vector(g, psi).iter().zip(w.values()).map(|(a, b)| a * b).sum::<Complex64>()
    };
    Ok(angles
        .par_iter()
        .map(|&psi| MismatchRow {
            psi_rad: psi,
            believed_dbi: na.dbi(eval(assumed, psi)),
            actual_dbi: nt.dbi(eval(truth, psi)),
        })
        .collect())
}
