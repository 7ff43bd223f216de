//! Interferer in linear angular motion. The pattern along the trajectory is
//! tabulated on a fine angle grid and interpolated linearly between nodes.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::closedloop::anneal::{AnnealOutcome, AnnealSettings, Annealer};
use crate::closedloop::cluster::Partition;
use crate::closedloop::signal::SignalScenario;
use crate::error::{Error, Result};
use crate::field::{element_vector, fixed_field, gain_normalization, GainNormalization};
use crate::geometry::Geometry;

/// Default node spacing of the trajectory table.
pub const GRID_STEP_DEG: f64 = 0.002;

/// Fixed field and element vector at a run of equally spaced angles.
#[derive(Debug, Clone)]
pub struct AngleTable {
    start: f64,
    step: f64,
    elements: Vec<Vec<Complex64>>,
    fixed: Vec<Complex64>,
    norm: GainNormalization,
}

impl AngleTable {
    /// One node; every angle maps to it.
    pub fn single(geometry: &Geometry, psi: f64) -> Self {
        Self {
            start: psi,
            step: 0.0,
            elements: vec![element_vector(geometry, psi)],
            fixed: vec![fixed_field(geometry, psi)],
            norm: gain_normalization(geometry),
        }
    }

    /// Nodes at multiples of `step` covering [lo, hi].
    pub fn grid(geometry: &Geometry, lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(hi >= lo) {
            return Err(Error::InvalidArgument("angle table needs lo <= hi and a positive step".into()));
        }
        let i0 = (lo / step).floor() as i64;
        let i1 = ((hi / step).ceil() as i64).max(i0 + 1);
        let angles: Vec<f64> = (i0..=i1).map(|i| i as f64 * step).collect();
        let nodes: Vec<(Vec<Complex64>, Complex64)> = angles
            .par_iter()
            .map(|&a| (element_vector(geometry, a), fixed_field(geometry, a)))
            .collect();
        let (elements, fixed) = nodes.into_iter().unzip();
        Ok(Self { start: angles[0], step, elements, fixed, norm: gain_normalization(geometry) })
    }

    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn n_elements(&self) -> usize {
        self.elements[0].len()
    }

    pub fn normalization(&self) -> GainNormalization {
        self.norm
    }

    pub fn node_angle(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub(crate) fn node(&self, i: usize) -> (&[Complex64], Complex64) {
        (&self.elements[i], self.fixed[i])
    }

    /// Lower node and interpolation fraction, clamped to the table.
    pub fn locate(&self, psi: f64) -> (usize, f64) {
        if self.len() == 1 {
            return (0, 0.0);
        }
        let x = ((psi - self.start) / self.step).clamp(0.0, (self.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.len() - 2);
        (i, x - i as f64)
    }

    /// Interpolated total field for weights `w`, evaluated from scratch.
    pub fn field(&self, psi: f64, w: &[Complex64]) -> Complex64 {
        let (i, f) = self.locate(psi);
        let at = |k: usize| self.fixed[k] + dot(&self.elements[k], w);
        if self.len() == 1 {
            at(0)
        } else {
            at(i) * (1.0 - f) + at(i + 1) * f
        }
    }
}

pub(crate) fn dot(e: &[Complex64], w: &[Complex64]) -> Complex64 {
    e.iter().zip(w).map(|(a, b)| a * b).sum()
}

const REFRESH: usize = 4096;

/// Incrementally maintained rim sums at the two nodes bracketing the
/// current angle.
pub(crate) struct Tracker<'a> {
    table: &'a AngleTable,
    node: usize,
    frac: f64,
    sa: Complex64,
    sb: Complex64,
    commits: usize,
}

impl<'a> Tracker<'a> {
    pub(crate) fn new(table: &'a AngleTable, psi: f64, w: &[Complex64]) -> Self {
        let (node, frac) = table.locate(psi);
        let mut t = Self { table, node, frac, sa: Complex64::new(0.0, 0.0), sb: Complex64::new(0.0, 0.0), commits: 0 };
        t.refresh(w);
        t
    }

    fn pair(&self) -> bool {
        self.table.len() > 1
    }

    fn refresh(&mut self, w: &[Complex64]) {
        self.sa = dot(self.table.node(self.node).0, w);
        if self.pair() {
            self.sb = dot(self.table.node(self.node + 1).0, w);
        }
    }

    pub(crate) fn set_angle(&mut self, psi: f64, w: &[Complex64]) {
        let (node, frac) = self.table.locate(psi);
        self.frac = frac;
        if node == self.node {
            return;
        }
        if node == self.node + 1 {
            self.sa = self.sb;
            self.node = node;
            self.sb = dot(self.table.node(node + 1).0, w);
        } else if node + 1 == self.node {
            self.sb = self.sa;
            self.node = node;
            self.sa = dot(self.table.node(node).0, w);
        } else {
            self.node = node;
            self.refresh(w);
        }
    }

    fn combine(&self, a: Complex64, b: Complex64) -> Complex64 {
        let fa = self.table.node(self.node).1 + a;
        if self.pair() {
            let fb = self.table.node(self.node + 1).1 + b;
            fa * (1.0 - self.frac) + fb * self.frac
        } else {
            fa
        }
    }

    pub(crate) fn field(&self) -> Complex64 {
        self.combine(self.sa, self.sb)
    }

    /// Change of the two node sums if `members` move to `value`.
    pub(crate) fn delta(&self, members: std::ops::Range<usize>, w: &[Complex64], value: Complex64) -> (Complex64, Complex64) {
        let ea = self.table.node(self.node).0;
        let mut da = Complex64::new(0.0, 0.0);
        let mut db = Complex64::new(0.0, 0.0);
        if self.pair() {
            let eb = self.table.node(self.node + 1).0;
            for n in members {
                let d = value - w[n];
                da += ea[n] * d;
                db += eb[n] * d;
            }
        } else {
            for n in members {
                da += ea[n] * (value - w[n]);
            }
        }
        (da, db)
    }

    pub(crate) fn field_with(&self, d: (Complex64, Complex64)) -> Complex64 {
        self.combine(self.sa + d.0, self.sb + d.1)
    }

    /// Apply a committed change; `w` must already hold the new values.
    pub(crate) fn commit(&mut self, d: (Complex64, Complex64), w: &[Complex64]) {
        self.commits += 1;
        if self.commits.is_multiple_of(REFRESH) {
            self.refresh(w);
        } else {
            self.sa += d.0;
            self.sb += d.1;
        }
    }
}

/// Anneal while the interferer moves; the true gain is tracked at the
/// instantaneous angle. With zero angular velocity this is the fixed-angle
/// closed loop.
pub fn track_moving_source(
    scenario: &SignalScenario,
    geometry: &Geometry,
    settings: &AnnealSettings,
) -> Result<AnnealOutcome> {
    let table = trajectory_table(scenario, geometry, settings.decisions, GRID_STEP_DEG.to_radians())?;
    let partition = crate::closedloop::cluster::cluster_partition(geometry, settings.cluster_size)?;
    track_with_table(scenario, &table, &partition, settings)
}

/// Table covering the angles visited in `decisions` decisions.
pub fn trajectory_table(
    scenario: &SignalScenario,
    geometry: &Geometry,
    decisions: usize,
    step: f64,
) -> Result<AngleTable> {
    scenario.validate()?;
    if !scenario.is_moving() {
        return Ok(AngleTable::single(geometry, scenario.start_angle_rad));
    }
    let a = scenario.angle_at(0.0);
    let b = scenario.angle_at(decisions as f64 * scenario.decision_interval_s());
    AngleTable::grid(geometry, a.min(b), a.max(b), step)
}

pub fn track_with_table(
    scenario: &SignalScenario,
    table: &AngleTable,
    partition: &Partition,
    settings: &AnnealSettings,
) -> Result<AnnealOutcome> {
    let mut run = Annealer::new(scenario, table, partition, settings)?;
    run.run_to_end();
    Ok(run.finish())
}
