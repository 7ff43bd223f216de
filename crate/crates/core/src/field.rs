//! Far-field quantities in the phi = 90 deg cut. The common factor
//! -j w mu0 exp(-j beta r)/(4 pi r) is dropped from every stored field.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CVec3, Geometry, SurfacePatch, Vec3};
use crate::weights::WeightVector;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const CHUNK: usize = 8192;

/// Observation direction at angle `psi` from boresight in the y-z plane.
pub fn direction(psi: f64) -> Vec3 {
    let (s, c) = psi.sin_cos();
    [0.0, s, c]
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldBundle {
    pub psi_rad: f64,
    pub fixed_field: Complex64,
    pub element_vector: Vec<Complex64>,
}

impl FieldBundle {
    /// Rim contribution for weights `w`. Terms are summed in sorted order so
    /// the value does not depend on how the elements are numbered.
    pub fn rim_field(&self, w: &[Complex64]) -> Result<Complex64> {
        check_len(self.element_vector.len(), w.len())?;
        Ok(sorted_dot(&self.element_vector, w))
    }

    pub fn total_field(&self, w: &[Complex64]) -> Result<Complex64> {
        Ok(self.fixed_field + self.rim_field(w)?)
    }

    pub fn len(&self) -> usize {
        self.element_vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_vector.is_empty()
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

fn sorted_dot(e: &[Complex64], w: &[Complex64]) -> Complex64 {
    let mut re: Vec<f64> = Vec::with_capacity(2 * e.len());
    let mut im: Vec<f64> = Vec::with_capacity(2 * e.len());
    for (a, b) in e.iter().zip(w) {
        re.push(a.re * b.re);
        re.push(-a.im * b.im);
        im.push(a.re * b.im);
        im.push(a.im * b.re);
    }
    re.sort_unstable_by(f64::total_cmp);
    im.sort_unstable_by(f64::total_cmp);
    Complex64::new(re.iter().sum(), im.iter().sum())
}

fn patch_sum(patches: &[SurfacePatch], beta: f64, r: Vec3) -> CVec3 {
    let mut acc = [ZERO; 3];
    for p in patches {
        let s = p.position_m;
        let phase = beta * (r[0] * s[0] + r[1] * s[1] + r[2] * s[2]);
        let k = Complex64::from_polar(p.area_m2, phase);
        acc[0] += p.current[0] * k;
        acc[1] += p.current[1] * k;
        acc[2] += p.current[2] * k;
    }
    acc
}

/// Radiation integral of an arbitrary patch list. Chunks are reduced in a
/// fixed order, so the result does not depend on the thread count.
pub fn surface_field_vector(patches: &[SurfacePatch], beta: f64, psi: f64) -> CVec3 {
    let r = direction(psi);
    let parts: Vec<CVec3> = patches.par_chunks(CHUNK).map(|c| patch_sum(c, beta, r)).collect();
    parts.iter().fold([ZERO; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
}

pub fn fixed_field_vector(geometry: &Geometry, psi: f64) -> CVec3 {
    surface_field_vector(geometry.fixed_mesh(), geometry.wavenumber(), psi)
}

/// Co-polar (y) component of the fixed-surface field.
pub fn fixed_field(geometry: &Geometry, psi: f64) -> Complex64 {
    fixed_field_vector(geometry, psi)[1]
}

/// Per-element vector field contributions toward `psi`.
pub fn element_contributions(geometry: &Geometry, psi: f64) -> Vec<CVec3> {
    let r = direction(psi);
    let beta = geometry.wavenumber();
    geometry
        .elements()
        .iter()
        .map(|e| {
            let s = e.position_m;
            let k = Complex64::from_polar(e.area_m2, beta * (r[0] * s[0] + r[1] * s[1] + r[2] * s[2]));
            [e.current[0] * k, e.current[1] * k, e.current[2] * k]
        })
        .collect()
}

/// Co-polar element vector only; skips the fixed surface.
pub fn element_vector(geometry: &Geometry, psi: f64) -> Vec<Complex64> {
    let r = direction(psi);
    let beta = geometry.wavenumber();
    geometry
        .elements()
        .iter()
        .map(|e| {
            let s = e.position_m;
            e.current[1] * Complex64::from_polar(e.area_m2, beta * (r[0] * s[0] + r[1] * s[1] + r[2] * s[2]))
        })
        .collect()
}

pub fn element_field_vector(geometry: &Geometry, psi: f64) -> FieldBundle {
    FieldBundle {
        psi_rad: psi,
        fixed_field: fixed_field(geometry, psi),
        element_vector: element_vector(geometry, psi),
    }
}

/// Maps co-polar field to directive gain: G = beta^2 |E|^2 / (4 pi P_rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainNormalization {
    pub factor: f64,
}

impl GainNormalization {
    pub fn new(wavenumber: f64, radiated_power: f64) -> Self {
        Self { factor: wavenumber * wavenumber / (4.0 * std::f64::consts::PI * radiated_power) }
    }

    pub fn linear(&self, field: Complex64) -> f64 {
        self.factor * field.norm_sqr()
    }

    pub fn dbi(&self, field: Complex64) -> f64 {
        to_db(self.linear(field))
    }

    /// Field magnitude corresponding to a linear gain.
    pub fn field_for_gain(&self, gain: f64) -> f64 {
        (gain / self.factor).sqrt()
    }
}

pub fn gain_normalization(geometry: &Geometry) -> GainNormalization {
    GainNormalization::new(geometry.wavenumber(), geometry.radiated_power())
}

/// 10 log10, with exact zero mapped to negative infinity.
pub fn to_db(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * x.log10()
    }
}

/// Boresight gain of the quiescent dish over the uniform-aperture maximum.
pub fn aperture_efficiency(geometry: &Geometry) -> f64 {
    let g = gain_normalization(geometry);
    let e = fixed_field_vector(geometry, 0.0)[1] + element_vector(geometry, 0.0).iter().sum::<Complex64>();
    let d = geometry.config().diameter_m;
    let ideal = (std::f64::consts::PI * d / geometry.wavelength_m()).powi(2);
    g.linear(e) / ideal
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternCut {
    pub angles_rad: Vec<f64>,
    pub copol_field: Vec<Complex64>,
    pub crosspol_field: Vec<Complex64>,
    pub gain_dbi: Vec<f64>,
    pub normalization: GainNormalization,
}

impl PatternCut {
    pub fn crosspol_gain_dbi(&self) -> Vec<f64> {
        self.crosspol_field.iter().map(|&e| self.normalization.dbi(e)).collect()
    }
}

/// Co- and cross-polar pattern of the weighted dish.
pub fn total_pattern(geometry: &Geometry, w: &WeightVector, angles: &[f64]) -> Result<PatternCut> {
    check_len(geometry.len(), w.len())?;
    let norm = gain_normalization(geometry);
    let weights = w.values();
    let fields: Vec<(Complex64, Complex64)> = angles
        .par_iter()
        .map(|&psi| {
            let f = fixed_field_vector(geometry, psi);
            let parts = element_contributions(geometry, psi);
            let co: Vec<Complex64> = parts.iter().map(|c| c[1]).collect();
            let cross: Vec<Complex64> = parts.iter().map(|c| c[0]).collect();
            (f[1] + sorted_dot(&co, weights), f[0] + sorted_dot(&cross, weights))
        })
        .collect();
    let copol_field: Vec<Complex64> = fields.iter().map(|f| f.0).collect();
    Ok(PatternCut {
        angles_rad: angles.to_vec(),
        gain_dbi: copol_field.iter().map(|&e| norm.dbi(e)).collect(),
        crosspol_field: fields.iter().map(|f| f.1).collect(),
        copol_field,
        normalization: norm,
    })
}

/// Co-polar pattern of a patch list (e.g. the undivided dish mesh).
pub fn surface_pattern(patches: &[SurfacePatch], beta: f64, angles: &[f64]) -> Vec<Complex64> {
    angles.iter().map(|&psi| surface_field_vector(patches, beta, psi)[1]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_sentinel() {
        assert_eq!(to_db(0.0), f64::NEG_INFINITY);
        assert!((to_db(100.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn gain_homogeneity() {
        // scaling every current by c scales the field by c and P_rad by c^2
        let n = GainNormalization::new(31.4, 2.0);
        let c = 3.7;
        let e = Complex64::new(0.3, -1.2);
        let scaled = GainNormalization::new(31.4, 2.0 * c * c);
        assert!((n.dbi(e) - scaled.dbi(e * c)).abs() < 1e-12);
    }

    #[test]
    fn sorted_dot_is_order_free() {
        let e: Vec<Complex64> = (0..50).map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64).cos() * 1e3)).collect();
        let w: Vec<Complex64> = (0..50).map(|k| Complex64::from_polar(1.0, k as f64 * 1.1)).collect();
        let a = sorted_dot(&e, &w);
        let mut idx: Vec<usize> = (0..50).collect();
        idx.reverse();
        idx.swap(3, 17);
        let ep: Vec<Complex64> = idx.iter().map(|&i| e[i]).collect();
        let wp: Vec<Complex64> = idx.iter().map(|&i| w[i]).collect();
        assert_eq!(a, sorted_dot(&ep, &wp));
    }
}
