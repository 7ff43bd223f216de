//! Paraboloid surface, feed illumination, rim tiling and the fixed-surface mesh.
//!
//! Coordinates: focus at the origin, vertex at z = -F, boresight along +z.
//! A surface point is addressed by (theta_f, phi) with theta_f measured at the
//! focus from the -z axis.

use std::f64::consts::{PI, TAU};
use std::ops::Range;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::config::DishConfig;
use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type CVec3 = [Complex64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct RimElement {
    pub index: usize,
    pub ring: usize,
    pub position_m: Vec3,
    pub current: CVec3,
    pub area_m2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePatch {
    pub position_m: Vec3,
    pub current: CVec3,
    pub area_m2: f64,
}

/// Paraboloid with its focus at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Paraboloid {
    pub focal_length_m: f64,
}

impl Paraboloid {
    /// Focus-to-surface distance.
    pub fn range(&self, theta: f64) -> f64 {
        2.0 * self.focal_length_m / (1.0 + theta.cos())
    }

    pub fn projected_radius(&self, theta: f64) -> f64 {
        2.0 * self.focal_length_m * (theta / 2.0).tan()
    }

    pub fn theta_at_radius(&self, rho: f64) -> f64 {
        2.0 * (rho / (2.0 * self.focal_length_m)).atan()
    }

    pub fn point(&self, theta: f64, phi: f64) -> Vec3 {
        let r = self.range(theta);
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        [r * st * cp, r * st * sp, -r * ct]
    }

    /// Meridian arc length from the vertex.
    pub fn arc(&self, theta: f64) -> f64 {
        let u = theta / 2.0;
        let sec = 1.0 / u.cos();
        let tan = u.tan();
        self.focal_length_m * (sec * tan + (sec + tan).ln())
    }

    pub fn theta_at_arc(&self, arc: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, PI * (1.0 - 1e-9));
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.arc(mid) < arc {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Surface area per radian of azimuth between two meridian angles.
    pub fn band_area(&self, theta_a: f64, theta_b: f64) -> f64 {
        let sec3 = |t: f64| (1.0 / (t / 2.0).cos()).powi(3);
        4.0 * self.focal_length_m * self.focal_length_m / 3.0 * (sec3(theta_b) - sec3(theta_a))
    }

    pub fn normal(&self, p: Vec3) -> Vec3 {
        let f2 = 2.0 * self.focal_length_m;
        normalize([-p[0] / f2, -p[1] / f2, 1.0])
    }
}

/// Far-field amplitude of the feed (y-directed short dipole times cos^q) in the
/// direction (theta, phi), theta measured from the -z axis. Zero behind the feed.
pub fn feed_amplitude(q: f64, theta: f64, phi: f64) -> f64 {
    let c = theta.cos();
    if c <= 0.0 {
        return 0.0;
    }
    let uy = theta.sin() * phi.sin();
    c.powf(q) * (1.0 - uy * uy).max(0.0).sqrt()
}

/// Induced physical-optics current 2 n x H at surface point `p`, with the free
/// space impedance dropped.
pub fn surface_current(par: &Paraboloid, q: f64, beta: f64, p: Vec3) -> CVec3 {
    let r = norm(p);
    let u = [p[0] / r, p[1] / r, p[2] / r];
    let c = -u[2];
    if c <= 0.0 {
        return [Complex64::new(0.0, 0.0); 3];
    }
    let amp = Complex64::from_polar(c.powf(q) / r, -beta * r);
    let uy = u[1];
    let pol = [-u[0] * uy, 1.0 - uy * uy, -u[2] * uy];
    let n = par.normal(p);
    // u x pol, then n x that
    let h = cross(u, pol);
    let j = cross(n, h);
    [amp * (2.0 * j[0]), amp * (2.0 * j[1]), amp * (2.0 * j[2])]
}

#[derive(Debug, Clone)]
pub struct Geometry {
    config: DishConfig,
    paraboloid: Paraboloid,
    frequency_hz: f64,
    wavenumber: f64,
    inner_theta_rad: f64,
    elements: Vec<RimElement>,
    rings: Vec<Range<usize>>,
    fixed_mesh: Vec<SurfacePatch>,
    radiated_power: OnceLock<f64>,
}

impl PartialEq for Geometry {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.frequency_hz == other.frequency_hz
            && self.inner_theta_rad == other.inner_theta_rad
            && self.elements == other.elements
            && self.rings == other.rings
            && self.fixed_mesh == other.fixed_mesh
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RimTiling {
    /// (inner theta, outer theta, element count) per ring, innermost first.
    pub rings: Vec<(f64, f64, usize)>,
}

impl RimTiling {
    pub fn element_count(&self) -> usize {
        self.rings.iter().map(|r| r.2).sum()
    }

    pub fn inner_theta(&self) -> f64 {
        self.rings[0].0
    }
}

/// Rings one element side wide (in meridian arc) walk inward from the rim
/// until the nominal annulus is used up; each ring holds
/// floor(circumference / side) elements.
pub fn rim_tiling(config: &DishConfig) -> Result<RimTiling> {
    config.validate()?;
    let par = Paraboloid { focal_length_m: config.focal_length_m() };
    let side = config.element_side_wavelengths * config.wavelength_m();
    let theta0 = config.subtended_half_angle_rad;
    let theta1 = par.theta_at_radius(config.diameter_m / 2.0 - config.rim_width_m);
    let outer_arc = par.arc(theta0);
    let rim_arc = outer_arc - par.arc(theta1);
    let n_rings = (rim_arc / side * (1.0 + 1e-12)).floor() as usize;
    if n_rings == 0 {
        return Err(Error::NoRimElements { rim_arc_m: rim_arc, side_m: side });
    }
    let mut rings = Vec::with_capacity(n_rings);
    for k in (0..n_rings).rev() {
        let a_out = outer_arc - k as f64 * side;
        let a_in = a_out - side;
        let t_in = par.theta_at_arc(a_in);
        let t_out = if k == 0 { theta0 } else { par.theta_at_arc(a_out) };
        let t_mid = par.theta_at_arc(0.5 * (a_in + a_out));
        let count = (TAU * par.projected_radius(t_mid) / side).floor() as usize;
        rings.push((t_in, t_out, count));
    }
    Ok(RimTiling { rings })
}

impl Geometry {
    pub fn build(config: &DishConfig) -> Result<Self> {
        let tiling = rim_tiling(config)?;
        let par = Paraboloid { focal_length_m: config.focal_length_m() };
        let beta = config.wavenumber();
        let q = config.feed_taper_q;

        let mut elements = Vec::with_capacity(tiling.element_count());
        let mut rings = Vec::with_capacity(tiling.rings.len());
        for (ring, &(t_in, t_out, count)) in tiling.rings.iter().enumerate() {
            let t_mid = par.theta_at_arc(0.5 * (par.arc(t_in) + par.arc(t_out)));
            let dphi = TAU / count as f64;
            let area = par.band_area(t_in, t_out) * dphi;
            let start = elements.len();
            for k in 0..count {
                let phi = (k as f64 + 0.5) * dphi;
                let p = par.point(t_mid, phi);
                elements.push(RimElement {
                    index: elements.len(),
                    ring,
                    position_m: p,
                    current: surface_current(&par, q, beta, p),
                    area_m2: area,
                });
            }
            rings.push(start..elements.len());
        }

        let inner = tiling.inner_theta();
        let fixed_mesh = surface_mesh(config, &par, beta, 0.0, inner);
        Ok(Self {
            config: config.clone(),
            paraboloid: par,
            frequency_hz: config.frequency_hz,
            wavenumber: beta,
            inner_theta_rad: inner,
            elements,
            rings,
            fixed_mesh,
            radiated_power: OnceLock::new(),
        })
    }

    /// Same physical layout evaluated at another frequency: currents and
    /// wavenumber change, element positions and patches do not.
    pub fn at_frequency(&self, frequency_hz: f64) -> Result<Self> {
        if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!("frequency {frequency_hz} Hz")));
        }
        let cfg = self.config.with_frequency(frequency_hz);
        let beta = cfg.wavenumber();
        let q = cfg.feed_taper_q;
        let par = self.paraboloid;
        let elements = self
            .elements
            .iter()
            .map(|e| RimElement {
                current: surface_current(&par, q, beta, e.position_m),
                ..e.clone()
            })
            .collect();
        let fixed_mesh = self
            .fixed_mesh
            .iter()
            .map(|s| SurfacePatch {
                current: surface_current(&par, q, beta, s.position_m),
                ..s.clone()
            })
            .collect();
        Ok(Self {
            config: self.config.clone(),
            paraboloid: par,
            frequency_hz,
            wavenumber: beta,
            inner_theta_rad: self.inner_theta_rad,
            elements,
            rings: self.rings.clone(),
            fixed_mesh,
            radiated_power: OnceLock::new(),
        })
    }

    /// Mesh of the whole surface out to the rim, built with the fixed-surface
    /// quadrature rule. This is the dish without a reconfigurable annulus.
    pub fn undivided_mesh(&self) -> Vec<SurfacePatch> {
        surface_mesh(
            &self.config.with_frequency(self.frequency_hz),
            &self.paraboloid,
            self.wavenumber,
            0.0,
            self.config.subtended_half_angle_rad,
        )
    }

    /// Design configuration (layout frequency).
    pub fn config(&self) -> &DishConfig {
        &self.config
    }

    pub fn paraboloid(&self) -> &Paraboloid {
        &self.paraboloid
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn wavelength_m(&self) -> f64 {
        crate::config::SPEED_OF_LIGHT / self.frequency_hz
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn inner_theta_rad(&self) -> f64 {
        self.inner_theta_rad
    }

    pub fn elements(&self) -> &[RimElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Element index ranges per ring, innermost ring first.
    pub fn rings(&self) -> &[Range<usize>] {
        &self.rings
    }

    pub fn fixed_mesh(&self) -> &[SurfacePatch] {
        &self.fixed_mesh
    }

    /// Total power radiated by the feed (same units as the stored currents),
    /// integrated numerically over the front hemisphere. Cached.
    pub fn radiated_power(&self) -> f64 {
        *self
            .radiated_power
            .get_or_init(|| feed_radiated_power(self.config.feed_taper_q))
    }
}

/// Midpoint-rule integral of the feed's power pattern over the sphere.
pub fn feed_radiated_power(q: f64) -> f64 {
    let (nt, np) = (2048usize, 512usize);
    let dt = 0.5 * PI / nt as f64;
    let dp = TAU / np as f64;
    let mut total = 0.0;
    for i in 0..nt {
        let t = (i as f64 + 0.5) * dt;
        let st = t.sin();
        let mut ring = 0.0;
        for k in 0..np {
            let a = feed_amplitude(q, t, (k as f64 + 0.5) * dp);
            ring += a * a;
        }
        total += ring * st;
    }
    total * dt * dp
}

fn surface_mesh(
    config: &DishConfig,
    par: &Paraboloid,
    beta: f64,
    theta_a: f64,
    theta_b: f64,
) -> Vec<SurfacePatch> {
    let lambda = config.wavelength_m();
    let density = config.fixed_mesh_density;
    let q = config.feed_taper_q;
    let a0 = par.arc(theta_a);
    let a1 = par.arc(theta_b);
    let n_theta = ((a1 - a0) * density / lambda).ceil().max(1.0) as usize;
    let da = (a1 - a0) / n_theta as f64;
    let mut out = Vec::new();
    let mut t_lo = theta_a;
    for i in 0..n_theta {
        let t_hi = if i + 1 == n_theta { theta_b } else { par.theta_at_arc(a0 + (i + 1) as f64 * da) };
        let t_mid = par.theta_at_arc(a0 + (i as f64 + 0.5) * da);
        let rho = par.projected_radius(t_mid);
        let raw = (density * TAU * rho / lambda).ceil() as usize;
        let n_phi = raw.div_ceil(4).max(1) * 4;
        let dphi = TAU / n_phi as f64;
        let area = par.band_area(t_lo, t_hi) * dphi;
        for k in 0..n_phi {
            let p = par.point(t_mid, (k as f64 + 0.5) * dphi);
            out.push(SurfacePatch {
                position_m: p,
                current: surface_current(par, q, beta, p),
                area_m2: area,
            });
        }
        t_lo = t_hi;
    }
    out
}

pub(crate) fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn normalize(v: Vec3) -> Vec3 {
    let n = norm(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn par() -> Paraboloid {
        Paraboloid { focal_length_m: 8.4 }
    }

    #[test]
    fn points_lie_on_paraboloid() {
        let p = par();
        for &t in &[0.0, 0.3, 0.9, 1.2] {
            let s = p.point(t, 0.7);
            let rho2 = s[0] * s[0] + s[1] * s[1];
            // z = rho^2/(4F) - F with the focus at the origin
            let z = rho2 / (4.0 * p.focal_length_m) - p.focal_length_m;
            assert!((s[2] - z).abs() < 1e-12);
            assert!((rho2.sqrt() - p.projected_radius(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn arc_length_matches_numeric_integral() {
        let p = par();
        let t = 1.0;
        let n = 20000;
        let h = t / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let x = (i as f64 + 0.5) * h;
            s += p.range(x) / (x / 2.0).cos() * h;
        }
        assert!((p.arc(t) - s).abs() < 1e-6 * s);
        assert!((p.theta_at_arc(p.arc(0.77)) - 0.77).abs() < 1e-12);
    }

    #[test]
    fn band_area_matches_numeric_integral() {
        let p = par();
        let (a, b) = (0.4, 0.9);
        let n = 20000;
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let x = a + (i as f64 + 0.5) * h;
            s += p.projected_radius(x) * p.range(x) / (x / 2.0).cos() * h;
        }
        assert!((p.band_area(a, b) - s).abs() < 1e-7 * s);
    }

    #[test]
    fn normal_is_unit_and_orthogonal_to_surface() {
        let p = par();
        let s = p.point(0.8, 1.1);
        let n = p.normal(s);
        assert!((norm(n) - 1.0).abs() < 1e-14);
        let h = 1e-6;
        let s2 = p.point(0.8 + h, 1.1);
        let s3 = p.point(0.8, 1.1 + h);
        for t in [s2, s3] {
            let d = [t[0] - s[0], t[1] - s[1], t[2] - s[2]];
            let dot = n[0] * d[0] + n[1] * d[1] + n[2] * d[2];
            assert!(dot.abs() < 1e-5 * norm(d));
        }
    }

    #[test]
    fn feed_vanishes_behind_and_tapers() {
        assert_eq!(feed_amplitude(1.14, 2.0, 0.3), 0.0);
        assert_eq!(feed_amplitude(1.14, 0.0, 0.0), 1.0);
        // along the dipole axis (phi = 90 deg, theta = 90 deg) the dipole factor is 0
        assert!(feed_amplitude(0.0, std::f64::consts::FRAC_PI_2 - 1e-9, std::f64::consts::FRAC_PI_2) < 1e-8);
    }

    #[test]
    fn radiated_power_matches_analytic_integral() {
        // integral over phi of (1 - sin^2 t sin^2 p) gives pi (1/(2q+1) + 1/(2q+3))
        for &q in &[0.0, 1.14, 1.5, 3.0] {
            let exact = PI * (1.0 / (2.0 * q + 1.0) + 1.0 / (2.0 * q + 3.0));
            let num = feed_radiated_power(q);
            assert!((num - exact).abs() < 1e-6 * exact, "q={q}: {num} vs {exact}");
        }
    }

    #[test]
    fn current_is_tangent_to_surface() {
        let p = par();
        let s = p.point(0.9, 0.4);
        let j = surface_current(&p, 1.14, 31.4, s);
        let n = p.normal(s);
        let dot = j[0] * n[0] + j[1] * n[1] + j[2] * n[2];
        assert!(dot.norm() < 1e-14);
    }
}
