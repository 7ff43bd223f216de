use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::feed_amplitude;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Edge illumination targeted by the default rim angle.
pub const DEFAULT_EDGE_ILLUMINATION_DB: f64 = -11.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DishConfig {
    pub diameter_m: f64,
    pub rim_width_m: f64,
    pub frequency_hz: f64,
    pub feed_taper_q: f64,
    /// Rim angle theta0 seen from the focus.
    pub subtended_half_angle_rad: f64,
    /// Fixed-surface samples per wavelength.
    pub fixed_mesh_density: f64,
    pub element_side_wavelengths: f64,
}

impl Default for DishConfig {
    fn default() -> Self {
        let q = 1.14;
        let theta0 = calibrate_rim_angle(q, DEFAULT_EDGE_ILLUMINATION_DB)
            .expect("default taper admits a rim angle");
        Self {
            diameter_m: 18.0,
            rim_width_m: 0.5,
            frequency_hz: 1.5e9,
            feed_taper_q: q,
            subtended_half_angle_rad: theta0,
            fixed_mesh_density: 8.0,
            element_side_wavelengths: 0.5,
        }
    }
}

impl DishConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let fields = [
            self.diameter_m,
            self.rim_width_m,
            self.frequency_hz,
            self.feed_taper_q,
            self.subtended_half_angle_rad,
            self.fixed_mesh_density,
            self.element_side_wavelengths,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return bad("all fields must be finite");
        }
        if self.diameter_m <= 0.0 {
            return bad("diameter_m must be positive");
        }
        if self.rim_width_m <= 0.0 || self.rim_width_m >= self.diameter_m / 2.0 {
            return bad("rim_width_m must lie in (0, diameter_m/2)");
        }
        if self.frequency_hz <= 0.0 {
            return bad("frequency_hz must be positive");
        }
        if self.feed_taper_q < 0.0 {
            return bad("feed_taper_q must be non-negative");
        }
        if self.subtended_half_angle_rad <= 0.0 || self.subtended_half_angle_rad >= FRAC_PI_2 {
            return bad("subtended half angle must lie in (0, 90) degrees");
        }
        if self.fixed_mesh_density <= 0.0 {
            return bad("fixed_mesh_density must be positive");
        }
        if self.element_side_wavelengths <= 0.0 {
            return bad("element_side_wavelengths must be positive");
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength_m()
    }

    pub fn focal_length_m(&self) -> f64 {
        self.diameter_m / (4.0 * (self.subtended_half_angle_rad / 2.0).tan())
    }

    /// Edge illumination in dB implied by the stored rim angle.
    pub fn edge_illumination_db(&self) -> f64 {
        edge_illumination_db(self.feed_taper_q, self.subtended_half_angle_rad)
    }

    pub fn with_frequency(&self, frequency_hz: f64) -> Self {
        Self { frequency_hz, ..self.clone() }
    }

    /// Parse a TOML document whose top-level keys follow [`DishSpec`].
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: DishSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.resolve()
    }
}

/// Feed field toward the rim relative to boresight, in the pattern cut plane,
/// without the 1/R spreading loss.
pub fn edge_illumination_db(q: f64, theta: f64) -> f64 {
    20.0 * (feed_amplitude(q, theta, FRAC_PI_2) / feed_amplitude(q, 0.0, FRAC_PI_2)).log10()
}

/// Rim angle at which the feed's edge illumination equals `target_db`.
pub fn calibrate_rim_angle(q: f64, target_db: f64) -> Result<f64> {
    if !(target_db < 0.0) || q < 0.0 {
        return Err(Error::Config(format!(
            "cannot calibrate rim angle for q = {q}, edge illumination {target_db} dB"
        )));
    }
    // edge illumination falls monotonically from 0 dB at boresight
    let (mut lo, mut hi) = (0.0_f64, FRAC_PI_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if edge_illumination_db(q, mid) > target_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// File form of a dish description. Angles are degrees. Either the rim angle
/// or the edge illumination may be given; absent both, -11 dB is used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DishSpec {
    pub diameter_m: Option<f64>,
    pub rim_width_m: Option<f64>,
    pub frequency_hz: Option<f64>,
    pub feed_taper_q: Option<f64>,
    pub subtended_half_angle_deg: Option<f64>,
    pub edge_illumination_db: Option<f64>,
    pub fixed_mesh_density: Option<f64>,
    pub element_side_wavelengths: Option<f64>,
}

impl DishSpec {
    pub fn resolve(&self) -> Result<DishConfig> {
        let d = DishConfig::default();
        let q = self.feed_taper_q.unwrap_or(d.feed_taper_q);
        let theta0 = match (self.subtended_half_angle_deg, self.edge_illumination_db) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give subtended_half_angle_deg or edge_illumination_db, not both".into(),
                ))
            }
            (Some(a), None) => a.to_radians(),
            (None, Some(db)) => calibrate_rim_angle(q, db)?,
            (None, None) => calibrate_rim_angle(q, DEFAULT_EDGE_ILLUMINATION_DB)?,
        };
        let cfg = DishConfig {
            diameter_m: self.diameter_m.unwrap_or(d.diameter_m),
            rim_width_m: self.rim_width_m.unwrap_or(d.rim_width_m),
            frequency_hz: self.frequency_hz.unwrap_or(d.frequency_hz),
            feed_taper_q: q,
            subtended_half_angle_rad: theta0,
            fixed_mesh_density: self.fixed_mesh_density.unwrap_or(d.fixed_mesh_density),
            element_side_wavelengths: self
                .element_side_wavelengths
                .unwrap_or(d.element_side_wavelengths),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_matches_closed_form() {
        // in the cut plane the dipole factor is cos(theta), so the amplitude is cos^(q+1)
        for &(q, db) in &[(1.14, -11.0), (0.0, -6.0), (2.5, -15.0)] {
            let t = calibrate_rim_angle(q, db).unwrap();
            let expect = (10f64.powf(db / 20.0)).powf(1.0 / (q + 1.0)).acos();
            assert!((t - expect).abs() < 1e-12, "{q} {db}: {t} vs {expect}");
        }
    }

    #[test]
    fn default_rim_angle_and_f_over_d() {
        let c = DishConfig::default();
        assert!((c.subtended_half_angle_rad.to_degrees() - 56.40).abs() < 0.01);
        assert!((c.edge_illumination_db() + 11.0).abs() < 1e-9);
        let fd = c.focal_length_m() / c.diameter_m;
        assert!((fd - 0.466).abs() < 0.002, "{fd}");
        c.validate().unwrap();
    }

    #[test]
    fn validation_rejects_degenerate_inputs() {
        let base = DishConfig::default();
        let cases = [
            DishConfig { diameter_m: 0.0, ..base.clone() },
            DishConfig { rim_width_m: 0.0, ..base.clone() },
            DishConfig { rim_width_m: 9.0, ..base.clone() },
            DishConfig { frequency_hz: -1.0, ..base.clone() },
            DishConfig { feed_taper_q: -0.1, ..base.clone() },
            DishConfig { subtended_half_angle_rad: 1.6, ..base.clone() },
            DishConfig { fixed_mesh_density: f64::NAN, ..base.clone() },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn toml_spec_resolves() {
        let c = DishConfig::from_toml("diameter_m = 12.0\nsubtended_half_angle_deg = 60.0\n").unwrap();
        assert_eq!(c.diameter_m, 12.0);
        assert!((c.subtended_half_angle_rad - 60f64.to_radians()).abs() < 1e-15);
        let c = DishConfig::from_toml("edge_illumination_db = -11.0").unwrap();
        assert_eq!(c, DishConfig::default());
        assert!(DishConfig::from_toml("diameter = 3").is_err());
        assert!(DishConfig::from_toml("subtended_half_angle_deg = 50\nedge_illumination_db = -10").is_err());
    }
}
