//! Tracking by sampling from a library of precomputed null-steering weights.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::closedloop::anneal::{anneal_with_table, AnnealSettings};
use crate::closedloop::cluster::Partition;
use crate::closedloop::moving::{dot, trajectory_table, AngleTable, GRID_STEP_DEG};
use crate::closedloop::signal::{proposal_rng, signal_rng, Measurement, Meter, SignalScenario};
use crate::closedloop::{accept, temperature, ClosedLoopTrace, DecisionRecord};
use crate::error::{Error, Result};
use crate::field::{element_field_vector, gain_normalization};
use crate::geometry::Geometry;
use crate::openloop::{gp_solve, optimal_weights_single, ConstraintSet, GpSettings};
use crate::weights::{PhaseAlphabet, WeightVector};

/// Entries whose null is shallower than this, relative to the quiescent
/// pattern at their own angle, are flagged.
pub const MIN_SUPPRESSION_DB: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry {
    pub null_angle_rad: f64,
    pub weights: WeightVector,
    pub suppression_db: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightLibrary {
    entries: Vec<LibraryEntry>,
}

impl WeightLibrary {
    pub fn new(entries: Vec<LibraryEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("library is empty".into()));
        }
        if entries.windows(2).any(|p| !(p[1].null_angle_rad > p[0].null_angle_rad)) {
            return Err(Error::InvalidArgument("library angles must be strictly increasing".into()));
        }
        let n = entries[0].weights.len();
        if let Some(e) = entries.iter().find(|e| e.weights.len() != n) {
            return Err(Error::LengthMismatch { expected: n, actual: e.weights.len() });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry whose null angle is closest to `psi`.
    pub fn nearest(&self, psi: f64) -> usize {
        let mut best = 0;
        for (i, e) in self.entries.iter().enumerate() {
            if (e.null_angle_rad - psi).abs() < (self.entries[best].null_angle_rad - psi).abs() {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LibraryOptimizer {
    /// Unconstrained closed-form weights.
    Optimal,
    GradientProjection(GpSettings),
    /// Annealing on the noiseless expected power G INR + 1.
    NoiselessAnneal { alphabet: PhaseAlphabet, decisions: usize, inr_db: f64, seed: u64 },
}

pub fn build_library(angle_grid: &[f64], optimizer: &LibraryOptimizer, geometry: &Geometry) -> Result<WeightLibrary> {
    if angle_grid.is_empty() {
        return Err(Error::EmptyAngles);
    }
    if angle_grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::InvalidArgument("library angle grid must be strictly increasing".into()));
    }
    let norm = gain_normalization(geometry);
    let entries: Vec<LibraryEntry> = angle_grid
        .par_iter()
        .enumerate()
        .map(|(i, &psi)| {
            let bundle = element_field_vector(geometry, psi);
            let quiescent = norm.dbi(bundle.fixed_field + bundle.element_vector.iter().sum::<Complex64>());
            let solved: Result<(WeightVector, bool)> = match optimizer {
                LibraryOptimizer::Optimal => optimal_weights_single(&bundle).map(|s| (s.weights, true)),
                LibraryOptimizer::GradientProjection(gp) => {
                    let mut set = ConstraintSet::new(geometry.len());
                    set.push_null(&bundle).and_then(|_| gp_solve(&set, gp)).map(|o| (o.weights, o.converged))
                }
                LibraryOptimizer::NoiselessAnneal { alphabet, decisions, inr_db, seed } => {
                    let table = AngleTable::single(geometry, psi);
                    let part = Partition::singletons(geometry.len());
                    let sc = SignalScenario::fixed(psi, *inr_db, 1, seed.wrapping_add(i as u64));
                    let mut st = AnnealSettings::new(alphabet.clone(), *decisions, seed.wrapping_add(i as u64));
                    st.measurement = Measurement::ExpectedPower;
                    st.record_every = (*decisions).max(1);
                    anneal_with_table(&sc, &table, &part, &st).map(|o| (o.weights.to_weights(), true))
                }
            };
            match solved {
                Ok((w, ok)) => {
                    let g = norm.dbi(bundle.fixed_field + dot(&bundle.element_vector, w.values()));
                    let suppression_db = quiescent - g;
                    LibraryEntry {
                        null_angle_rad: psi,
                        weights: w,
                        suppression_db,
                        flagged: !ok || !(suppression_db >= MIN_SUPPRESSION_DB),
                    }
                }
                Err(_) => LibraryEntry {
                    null_angle_rad: psi,
                    weights: WeightVector::ones(geometry.len()),
                    suppression_db: 0.0,
                    flagged: true,
                },
            }
        })
        .collect();
    WeightLibrary::new(entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryTracking {
    /// Mean absolute index offset of a proposal.
    pub kernel_width: f64,
    pub decisions: usize,
    pub schedule_length: usize,
    pub measurement: Measurement,
    pub seed: u64,
    pub record_every: usize,
}

impl LibraryTracking {
    /// The schedule stops cooling at 1/10 of the noise power. Library entries
    /// differ by far more than single-element moves, so a schedule that keeps
    /// cooling freezes on a stale measurement once the source moves.
    pub fn new(decisions: usize, seed: u64) -> Self {
        Self {
            kernel_width: 3.0,
            decisions,
            schedule_length: 10,
            measurement: Measurement::ChiSquare,
            seed,
            record_every: 1,
        }
    }
}

/// Symmetric geometric proposal over library indices: |offset| >= 1 with
/// mean `width`, sign uniform. Offsets leaving the library are redrawn; after
/// repeated misses the current index is returned.
pub fn propose_index<R: Rng + ?Sized>(current: usize, len: usize, width: f64, rng: &mut R) -> usize {
    if len <= 1 {
        return current;
    }
    let p = 1.0 / width.max(1.0);
    for _ in 0..64 {
        let mut d = 1usize;
        while rng.random::<f64>() >= p && d < len {
            d += 1;
        }
        let up = rng.random::<bool>();
        let j = if up { current.checked_add(d) } else { current.checked_sub(d) };
        if let Some(j) = j.filter(|&j| j < len) {
            return j;
        }
    }
    current
}

struct NodeSums {
    node: usize,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

fn sums_at(table: &AngleTable, node: usize, lib: &WeightLibrary) -> Vec<Complex64> {
    let e = table.node(node).0;
    lib.entries().iter().map(|x| dot(e, x.weights.values())).collect()
}

/// Accept/reject over library entries against measured power, with the
/// interferer following the scenario trajectory.
pub fn track_with_library(
    scenario: &SignalScenario,
    geometry: &Geometry,
    library: &WeightLibrary,
    tracking: &LibraryTracking,
) -> Result<ClosedLoopTrace> {
    let table = trajectory_table(scenario, geometry, tracking.decisions, GRID_STEP_DEG.to_radians())?;
    track_library_with_table(scenario, &table, library, tracking)
}

pub fn track_library_with_table(
    scenario: &SignalScenario,
    table: &AngleTable,
    library: &WeightLibrary,
    tracking: &LibraryTracking,
) -> Result<ClosedLoopTrace> {
    scenario.validate()?;
    if tracking.record_every == 0 || tracking.schedule_length == 0 {
        return Err(Error::InvalidArgument("record_every and schedule_length must be at least 1".into()));
    }
    crate::field::check_len(table.n_elements(), library.entries()[0].weights.len())?;
    let norm = table.normalization();
    let meter = Meter::new(tracking.measurement, scenario.inr_linear(), scenario.samples_per_decision)?;
    let mut rng_p = proposal_rng(tracking.seed);
    let mut rng_s = signal_rng(scenario.seed);
    let pair = table.len() > 1;

    let (node, _) = table.locate(scenario.angle_at(0.0));
    let mut sums = NodeSums {
        node,
        a: sums_at(table, node, library),
        b: if pair { sums_at(table, node + 1, library) } else { Vec::new() },
    };
    let gain = |sums: &NodeSums, frac: f64, i: usize| {
        let fa = table.node(sums.node).1 + sums.a[i];
        let f = if pair { fa * (1.0 - frac) + (table.node(sums.node + 1).1 + sums.b[i]) * frac } else { fa };
        norm.linear(f)
    };

    let mut current = library.nearest(scenario.angle_at(0.0));
    let (_, f0) = table.locate(scenario.angle_at(0.0));
    let mut e_best = meter.measure(gain(&sums, f0, current), &mut rng_s);
    let mut trace = ClosedLoopTrace::default();
    for k in 0..tracking.decisions {
        let t = k as f64 * scenario.decision_interval_s();
        let psi = scenario.angle_at(t);
        let (node, frac) = table.locate(psi);
        if node != sums.node {
            if pair && node == sums.node + 1 {
                sums.a = std::mem::take(&mut sums.b);
                sums.b = sums_at(table, node + 1, library);
            } else {
                sums.a = sums_at(table, node, library);
                if pair {
                    sums.b = sums_at(table, node + 1, library);
                }
            }
            sums.node = node;
        }
        let j = propose_index(current, library.len(), tracking.kernel_width, &mut rng_p);
        let e_new = meter.measure(gain(&sums, frac, j), &mut rng_s);
        let temp = temperature(k, tracking.schedule_length);
        let u: f64 = rng_p.random();
        let accepted = accept(e_best - e_new, temp, u);
        if accepted {
            current = j;
            e_best = e_new;
        }
        if k % tracking.record_every == 0 || k + 1 == tracking.decisions {
            trace.records.push(DecisionRecord {
                index: k as u64,
                time_s: t,
                psi_rad: psi,
                weights_id: current as u64,
                measured: e_new,
                accepted,
                true_gain_dbi: crate::field::to_db(gain(&sums, frac, current)),
            });
        }
    }
    Ok(trace)
}
