//! Weights from known pattern quantities: closed-form null weights, minimum
//! norm least squares over several constraints, and gradient projection onto
//! unit-modulus weights.
//!
//! A constraint row (a, t) is satisfied when a . w = t. Null rows use
//! t = -E_f(psi), so the fixed and rim fields cancel; the main-lobe row uses
//! t = kappa = delta E_f(0). The cost is ||A w - t||^2.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{check_len, element_vector, fixed_field, FieldBundle};
use crate::geometry::Geometry;
use crate::weights::{Regime, WeightVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowLabel {
    Null { psi_rad: f64 },
    NullAt { psi_rad: f64, frequency_hz: f64 },
    Mainlobe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    n: usize,
    rows: Vec<Vec<Complex64>>,
    targets: Vec<Complex64>,
    labels: Vec<RowLabel>,
}

impl ConstraintSet {
    pub fn new(n: usize) -> Self {
        Self { n, rows: Vec::new(), targets: Vec::new(), labels: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Complex64>, target: Complex64, label: RowLabel) -> Result<()> {
        check_len(self.n, row.len())?;
        if label == RowLabel::Mainlobe && self.labels.contains(&RowLabel::Mainlobe) {
            return Err(Error::InvalidArgument("a constraint set holds at most one main-lobe row".into()));
        }
        self.rows.push(row);
        self.targets.push(target);
        self.labels.push(label);
        Ok(())
    }

    /// Null row for a bundle: cancel the fixed field at its angle.
    pub fn push_null(&mut self, bundle: &FieldBundle) -> Result<()> {
        self.push(bundle.element_vector.clone(), -bundle.fixed_field, RowLabel::Null { psi_rad: bundle.psi_rad })
    }

    pub fn n_elements(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<Complex64>] {
        &self.rows
    }

    pub fn targets(&self) -> &[Complex64] {
        &self.targets
    }

    pub fn labels(&self) -> &[RowLabel] {
        &self.labels
    }

    pub fn apply(&self, w: &[Complex64]) -> Vec<Complex64> {
        self.rows.iter().map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum()).collect()
    }

    /// A w - t.
    pub fn residual(&self, w: &[Complex64]) -> Vec<Complex64> {
        self.apply(w).iter().zip(&self.targets).map(|(a, t)| a - t).collect()
    }

    pub fn cost(&self, w: &[Complex64]) -> Result<f64> {
        check_len(self.n, w.len())?;
        Ok(self.residual(w).iter().map(|r| r.norm_sqr()).sum())
    }

    /// A^H r.
    pub fn adjoint(&self, r: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.n];
        for (row, &ri) in self.rows.iter().zip(r) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * ri;
            }
        }
        out
    }

    /// Element-major copy of A: entry `n * K + k` is row k, element n.
    pub fn columns(&self) -> Vec<Complex64> {
        let k = self.len();
        let mut out = vec![ZERO; self.n * k];
        for (ki, row) in self.rows.iter().enumerate() {
            for (ni, &a) in row.iter().enumerate() {
                out[ni * k + ki] = a;
            }
        }
        out
    }
}

/// Null rows at each angle (and each frequency when given, re-evaluating the
/// same layout), preceded by a main-lobe row when `mainlobe_delta` is set.
pub fn build_constraints(
    geometry: &Geometry,
    angles: &[f64],
    mainlobe_delta: Option<f64>,
    frequencies: Option<&[f64]>,
) -> Result<ConstraintSet> {
    if angles.is_empty() {
        return Err(Error::EmptyAngles);
    }
    let mut set = ConstraintSet::new(geometry.len());
    if let Some(delta) = mainlobe_delta {
        let beamwidth = geometry.wavelength_m() / geometry.config().diameter_m;
        if let Some(psi) = angles.iter().find(|a| a.abs() < beamwidth) {
            return Err(Error::InvalidArgument(format!(
                "null at {:.3} deg lies inside the main beam",
                psi.to_degrees()
            )));
        }
        let kappa = fixed_field(geometry, 0.0) * delta;
        set.push(element_vector(geometry, 0.0), kappa, RowLabel::Mainlobe)?;
    }
    match frequencies {
        None => {
            for &psi in angles {
                set.push(element_vector(geometry, psi), -fixed_field(geometry, psi), RowLabel::Null { psi_rad: psi })?;
            }
        }
        Some(fs) => {
            for &f in fs {
                let g = geometry.at_frequency(f)?;
                for &psi in angles {
                    set.push(
                        element_vector(&g, psi),
                        -fixed_field(&g, psi),
                        RowLabel::NullAt { psi_rad: psi, frequency_hz: f },
                    )?;
                }
            }
        }
    }
    Ok(set)
}

/// Weights together with the residual the solver itself derived.
#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub weights: WeightVector,
    pub residual: Vec<Complex64>,
}

/// Smallest-norm weights cancelling the fixed field at one angle:
/// w = -E_f conj(e) / ||e||^2.
pub fn optimal_weights_single(bundle: &FieldBundle) -> Result<LsSolution> {
    let e = &bundle.element_vector;
    let norm2: f64 = e.iter().map(|x| x.norm_sqr()).sum();
    if norm2 == 0.0 {
        return Err(Error::ZeroFieldVector);
    }
    let w: Vec<Complex64> = e.iter().map(|x| -bundle.fixed_field * x.conj() / norm2).collect();
    let residual = bundle.fixed_field + e.iter().zip(&w).map(|(a, b)| a * b).sum::<Complex64>();
    Ok(LsSolution { weights: WeightVector::new(w, Regime::Unconstrained), residual: vec![residual] })
}

/// Minimum-norm solution of A w = t: w = A^H (A A^H)^{-1} t. The reported
/// residual is G x - t from the Gram system.
pub fn optimal_weights_multi(constraints: &ConstraintSet) -> Result<LsSolution> {
    if constraints.is_empty() {
        return Err(Error::EmptyAngles);
    }
    if constraints.len() > constraints.n_elements() {
        return Err(Error::InvalidArgument("more constraints than elements".into()));
    }
    let (g, x) = gram_solve(constraints, constraints.targets())?;
    let w = constraints.adjoint(&x);
    let k = x.len();
    let residual = (0..k)
        .map(|i| (0..k).map(|j| g[i][j] * x[j]).sum::<Complex64>() - constraints.targets()[i])
        .collect();
    Ok(LsSolution { weights: WeightVector::new(w, Regime::Unconstrained), residual })
}

/// Solves (A A^H) x = rhs after a rank check; returns the Gram matrix too.
fn gram_solve(constraints: &ConstraintSet, rhs: &[Complex64]) -> Result<(Vec<Vec<Complex64>>, Vec<Complex64>)> {
    let dependent = dependent_rows(constraints.rows());
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { rows: dependent });
    }
    let g = gram(constraints.rows());
    let x = cholesky_solve(&g, rhs)?;
    Ok((g, x))
}

fn gram(rows: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let k = rows.len();
    let mut g = vec![vec![ZERO; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let v: Complex64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b.conj()).sum();
            g[i][j] = v;
            g[j][i] = v.conj();
        }
    }
    g
}

/// Rows that are (numerically) combinations of earlier rows, by modified
/// Gram-Schmidt with one re-orthogonalization pass.
fn dependent_rows(rows: &[Vec<Complex64>]) -> Vec<usize> {
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut bad = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let norm0 = row.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let mut v = row.clone();
        for _ in 0..2 {
            for b in &basis {
                let c: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm0 == 0.0 || n <= 1e-10 * norm0 {
            bad.push(i);
        } else {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    bad
}

#[allow(clippy::needless_range_loop)]
fn cholesky_solve(g: &[Vec<Complex64>], b: &[Complex64]) -> Result<Vec<Complex64>> {
    let k = g.len();
    let mut l = vec![vec![ZERO; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = g[i][j];
            for p in 0..j {
                s -= l[i][p] * l[j][p].conj();
            }
            if i == j {
                if s.re <= 0.0 {
                    return Err(Error::RankDeficient { rows: vec![i] });
                }
                l[i][i] = Complex64::new(s.re.sqrt(), 0.0);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![ZERO; k];
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i][p] * y[p];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![ZERO; k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for p in i + 1..k {
            s -= l[p][i].conj() * x[p];
        }
        x[i] = s / l[i][i];
    }
    Ok(x)
}

/// Unit-modulus projection. Zero maps to 1.
pub fn project_unit_modulus(x: &[Complex64]) -> Vec<Complex64> {
    x.iter().map(|&z| project_one(z)).collect()
}

fn project_one(z: Complex64) -> Complex64 {
    let n = z.norm();
    if n == 0.0 {
        ONE
    } else {
        z / n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GpInit {
    /// Unity weights plus the smallest correction satisfying the constraints,
    /// projected. Starts next to the quiescent dish.
    UnityCorrection,
    /// Phases of the minimum-norm solution. For a single row every element
    /// then adds coherently, which is a fixed point of the iteration.
    LeastSquaresPhase,
    Provided(Vec<Complex64>),
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpSettings {
    pub step_fraction_gamma: f64,
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    pub init: GpInit,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            step_fraction_gamma: 0.5,
            max_iterations: 5000,
            residual_tolerance: 1e-10,
            init: GpInit::UnityCorrection,
        }
    }
}

impl GpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_fraction_gamma > 0.0 && self.step_fraction_gamma < 1.0) {
            return Err(Error::InvalidArgument("step_fraction_gamma must lie in (0, 1)".into()));
        }
        if !(self.residual_tolerance > 0.0) {
            return Err(Error::InvalidArgument("residual_tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpOutcome {
    pub weights: WeightVector,
    /// Cost after each iteration; entry 0 is the initial cost.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl GpOutcome {
    pub fn final_cost(&self) -> f64 {
        self.trace.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Largest eigenvalue of A^H A by power iteration on N-vectors.
pub fn lambda_max(constraints: &ConstraintSet) -> f64 {
    let n = constraints.n_elements();
    let mut v = vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    let mut lam = 0.0;
    for _ in 0..50 {
        let av = constraints.apply(&v);
        let u = constraints.adjoint(&av);
        let next: f64 = av.iter().map(|x| x.norm_sqr()).sum();
        let un = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if un == 0.0 {
            return next;
        }
        v = u.into_iter().map(|x| x / un).collect();
        let done = (next - lam).abs() <= 1e-6 * next;
        lam = next;
        if done {
            break;
        }
    }
    // Rayleigh quotient of the final vector
    let av = constraints.apply(&v);
    av.iter().map(|x| x.norm_sqr()).sum::<f64>().max(lam)
}

pub fn gp_solve(constraints: &ConstraintSet, settings: &GpSettings) -> Result<GpOutcome> {
    settings.validate()?;
    if constraints.is_empty() {
        return Err(Error::EmptyAngles);
    }
    let n = constraints.n_elements();
    let mut w = match &settings.init {
        GpInit::UnityCorrection => {
            if constraints.len() > n {
                return Err(Error::InvalidArgument("more constraints than elements".into()));
            }
            let ones = vec![ONE; n];
            let (_, x) = gram_solve(constraints, &constraints.residual(&ones))?;
            let dw = constraints.adjoint(&x);
            ones.iter().zip(&dw).map(|(o, d)| project_one(o - d)).collect()
        }
        GpInit::LeastSquaresPhase => project_unit_modulus(optimal_weights_multi(constraints)?.weights.values()),
        GpInit::Provided(v) => {
            check_len(n, v.len())?;
            project_unit_modulus(v)
        }
        GpInit::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n)
                .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
                .collect()
        }
    };
    let lam = lambda_max(constraints);
    if lam == 0.0 {
        return Err(Error::ZeroFieldVector);
    }
    let alpha = settings.step_fraction_gamma / lam;
    let tnorm2: f64 = constraints.targets().iter().map(|t| t.norm_sqr()).sum();
    let floor = f64::EPSILON * f64::EPSILON * tnorm2;

    let mut r = constraints.residual(&w);
    let mut cost: f64 = r.iter().map(|x| x.norm_sqr()).sum();
    let mut trace = vec![cost];
    let mut best = (cost, w.clone());
    let mut stall = 0;
    let mut converged = cost <= floor;
    let mut iterations = 0;
    while !converged && iterations < settings.max_iterations {
        iterations += 1;
        let g = constraints.adjoint(&r);
        w = w.iter().zip(&g).map(|(wi, gi)| project_one(wi - gi * alpha)).collect();
        r = constraints.residual(&w);
        let next: f64 = r.iter().map(|x| x.norm_sqr()).sum();
        trace.push(next);
        if next < best.0 {
            best = (next, w.clone());
        }
        if next <= floor {
            converged = true;
        } else if (cost - next).abs() < settings.residual_tolerance * cost.max(f64::MIN_POSITIVE) {
            stall += 1;
            converged = stall >= 10;
        } else {
            stall = 0;
        }
        cost = next;
    }
    Ok(GpOutcome {
        weights: WeightVector::new(best.1, Regime::UnitModulus),
        trace,
        iterations,
        converged,
    })
}
