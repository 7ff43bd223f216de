//! Geometry, field and gain checks against closed forms and reference figures.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rimnull_core::config::calibrate_rim_angle;
use rimnull_core::field::{
    aperture_efficiency, element_field_vector, fixed_field, gain_normalization, surface_pattern, total_pattern,
};
use rimnull_core::geometry::feed_radiated_power;
use rimnull_core::openloop::{build_constraints, gp_solve, optimal_weights_multi, optimal_weights_single};
use rimnull_core::{deg, Complex64, DishConfig, Geometry, GpSettings, WeightVector};

fn dish() -> &'static Geometry {
    static G: OnceLock<Geometry> = OnceLock::new();
    G.get_or_init(|| Geometry::build(&DishConfig::default()).unwrap())
}

#[test]
fn feed_power_matches_closed_form() {
    // Integrating cos^2q(t) (1 - sin^2 t sin^2 p) over the forward hemisphere
    // gives pi (1/(2q+1) + 1/(2q+3)).
    for q in [0.0, 0.5, 1.14, 1.5, 3.0] {
        let exact = PI * (1.0 / (2.0 * q + 1.0) + 1.0 / (2.0 * q + 3.0));
        let got = feed_radiated_power(q);
        assert!((got / exact - 1.0).abs() < 1e-5, "q={q}: {got} vs {exact}");
    }
}

#[test]
fn rim_angle_from_edge_taper() {
    // In the cut plane the feed amplitude is cos^(q+1).
    for (q, db) in [(1.14, -11.0), (1.5, -11.0), (1.0, -8.0)] {
        let direct = (10f64.powf(db / 20.0)).powf(1.0 / (q + 1.0)).acos();
        let got = calibrate_rim_angle(q, db).unwrap();
        assert!((got - direct).abs() < 1e-12, "q={q}");
    }
}

#[test]
fn default_dish_matches_reference_figures() {
    let g = dish();
    let cfg = g.config();
    assert!((cfg.subtended_half_angle_rad.to_degrees() - 56.40).abs() < 0.005);
    let f_over_d = cfg.focal_length_m() / cfg.diameter_m;
    assert!((f_over_d - 0.466).abs() < 5e-4, "F/D {f_over_d}");
    let boresight = total_pattern(g, &WeightVector::ones(g.len()), &[0.0]).unwrap().gain_dbi[0];
    assert!((boresight - 48.02).abs() < 0.05, "boresight {boresight}");
    // Reference efficiency is 81.5 +- 3 %.
    let eff = aperture_efficiency(g);
    assert!((0.785..=0.845).contains(&eff), "efficiency {eff}");
    assert_eq!(g.rings().len(), 5);
}

#[test]
fn f_over_d_from_rim_angle() {
    let cfg = DishConfig::default();
    let t = cfg.subtended_half_angle_rad;
    assert!((cfg.focal_length_m() / cfg.diameter_m - 1.0 / (4.0 * (t / 2.0).tan())).abs() < 1e-12);
}

#[test]
fn rim_area_matches_paraboloid_band() {
    let g = dish();
    let f = g.config().focal_length_m();
    // Surface area of z = r^2 / 4F from the axis out to r.
    let cap = |r: f64| 8.0 * PI * f * f / 3.0 * ((1.0 + r * r / (4.0 * f * f)).powf(1.5) - 1.0);
    let par = g.paraboloid();
    let total: f64 = g.elements().iter().map(|e| e.area_m2).sum();
    let r_out = g.config().diameter_m / 2.0;
    let r_in = par.projected_radius(g.inner_theta_rad());
    let exact = cap(r_out) - cap(r_in);
    assert!((total / exact - 1.0).abs() < 1e-9, "{total} vs {exact}");
    // Element count is the annulus area over the element area, less the
    // per-ring floor remainders.
    let side = g.config().element_side_wavelengths * g.wavelength_m();
    let nominal = exact / (side * side);
    assert!((g.len() as f64) <= nominal && (g.len() as f64) > 0.98 * nominal, "{} vs {nominal}", g.len());
}

#[test]
fn rim_elements_sit_on_the_surface() {
    let g = dish();
    let f = g.config().focal_length_m();
    for e in g.elements().iter().step_by(97) {
        let [x, y, z] = e.position_m;
        let r2 = x * x + y * y;
        // Focus at the origin, vertex at z = -F.
        assert!((z - (r2 / (4.0 * f) - f)).abs() < 1e-9, "{:?}", e.position_m);
    }
}

#[test]
fn split_dish_reproduces_undivided_dish() {
    let g = Geometry::build(&DishConfig { fixed_mesh_density: 4.0, ..DishConfig::default() }).unwrap();
    let whole = g.undivided_mesh();
    let angles: Vec<f64> = [0.0, 0.3, 0.6, 1.0].iter().map(|d| deg(*d)).collect();
    let reference = surface_pattern(&whole, g.wavenumber(), &angles);
    let split = total_pattern(&g, &WeightVector::ones(g.len()), &angles).unwrap();
    for (i, psi) in angles.iter().enumerate() {
        let a = reference[i];
        let b = split.copol_field[i];
        let rel = (a - b).norm() / reference[0].norm();
        assert!(rel < 2e-3, "psi {:.2} deg: relative difference {rel}", psi.to_degrees());
    }
}

#[test]
fn gain_is_field_squared_over_power() {
    let g = dish();
    let norm = gain_normalization(g);
    let e = Complex64::new(3.0, -4.0);
    let expected = g.wavenumber().powi(2) * 25.0 / (4.0 * PI * g.radiated_power());
    assert!((norm.linear(e) / expected - 1.0).abs() < 1e-14);
}

#[test]
fn weighted_field_is_linear_in_weights() {
    let g = dish();
    let psi = deg(1.5);
    let b = element_field_vector(g, psi);
    let w1: Vec<Complex64> = (0..g.len()).map(|n| Complex64::from_polar(1.0, 0.37 * n as f64)).collect();
    let w2: Vec<Complex64> = (0..g.len()).map(|n| Complex64::new((n % 7) as f64 - 3.0, 0.5)).collect();
    let sum: Vec<Complex64> = w1.iter().zip(&w2).map(|(a, c)| a + c).collect();
    let r1 = b.rim_field(&w1).unwrap();
    let r2 = b.rim_field(&w2).unwrap();
    let r12 = b.rim_field(&sum).unwrap();
    assert!((r12 - r1 - r2).norm() <= 1e-10 * (r1.norm() + r2.norm()));
    assert_eq!(b.fixed_field, fixed_field(g, psi));
}

#[test]
fn minimum_norm_single_null_is_smallest_change() {
    // Among all w with fixed + e.w = 0, w* = -E_f conj(e)/|e|^2 has the
    // smallest norm; adding any vector orthogonal to conj(e) keeps the null.
    let g = dish();
    let b = element_field_vector(g, deg(2.0));
    let w = optimal_weights_single(&b).unwrap().weights;
    assert!(b.total_field(w.values()).unwrap().norm() < 1e-10 * b.fixed_field.norm());
    let e = &b.element_vector;
    let mut v: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); e.len()];
    v[0] = e[1];
    v[1] = -e[0];
    let w2: Vec<Complex64> = w.values().iter().zip(&v).map(|(a, c)| a + c).collect();
    assert!(b.total_field(&w2).unwrap().norm() < 1e-9 * b.fixed_field.norm());
    let n1: f64 = w.values().iter().map(|x| x.norm_sqr()).sum();
    let n2: f64 = w2.iter().map(|x| x.norm_sqr()).sum();
    assert!(n1 < n2);
}

#[test]
fn multi_row_solution_agrees_with_single_row() {
    let g = dish();
    let psi = deg(1.75);
    let single = optimal_weights_single(&element_field_vector(g, psi)).unwrap().weights;
    let set = build_constraints(g, &[psi], None, None).unwrap();
    let multi = optimal_weights_multi(&set).unwrap().weights;
    let scale = single.values().iter().map(|x| x.norm()).fold(0.0, f64::max);
    for (a, b) in single.values().iter().zip(multi.values()) {
        assert!((a - b).norm() < 1e-9 * scale);
    }
}

#[test]
fn gp_holds_two_nulls_with_unit_weights() {
    let g = dish();
    let set = build_constraints(g, &[deg(1.5), deg(2.5)], None, None).unwrap();
    let out = gp_solve(&set, &GpSettings::default()).unwrap();
    assert!(out.converged);
    assert!(out.weights.values().iter().all(|w| (w.norm() - 1.0).abs() < 1e-12));
    let norm = gain_normalization(g);
    for psi in [1.5, 2.5] {
        let b = element_field_vector(g, deg(psi));
        assert!(norm.dbi(b.total_field(out.weights.values()).unwrap()) < -100.0);
    }
}
