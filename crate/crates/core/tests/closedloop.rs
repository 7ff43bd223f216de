use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};
use rimnull_core::closedloop::anneal::{anneal_closed_loop, AnnealSettings};
use rimnull_core::closedloop::library::{build_library, track_with_library, LibraryOptimizer, LibraryTracking};
use rimnull_core::closedloop::theorem::{mc_error_probability, theorem1_error_probability};
use rimnull_core::closedloop::{
    ensemble_weight_stats, sample_from_ensemble, track_moving_source, Measurement, SignalScenario,
};
use rimnull_core::field::{element_field_vector, gain_normalization};
use rimnull_core::{Complex64, DishConfig, Geometry, PhaseAlphabet, QuantizedWeights};

fn small() -> &'static Geometry {
    static G: OnceLock<Geometry> = OnceLock::new();
    G.get_or_init(|| {
        Geometry::build(&DishConfig { diameter_m: 6.0, fixed_mesh_density: 1.0, ..Default::default() }).unwrap()
    })
}

fn quiescent_dbi(g: &Geometry, psi: f64) -> f64 {
    let b = element_field_vector(g, psi);
    gain_normalization(g).dbi(b.fixed_field + b.element_vector.iter().sum::<Complex64>())
}

#[test]
fn ensemble_statistics_by_hand() {
    let a = PhaseAlphabet::new(2).unwrap();
    let p = a.unity_index();
    let m = 1 - p;
    let runs = [
        QuantizedWeights::new(a.clone(), vec![p, p, m, m]).unwrap(),
        QuantizedWeights::new(a.clone(), vec![p, m, m, p]).unwrap(),
        QuantizedWeights::new(a.clone(), vec![p, p, p, m]).unwrap(),
    ];
    let s = ensemble_weight_stats(&runs).unwrap();
    let want = [1.0, 1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0];
    for (x, y) in s.element_means.iter().zip(want) {
        assert!((x - y).abs() < 1e-12);
    }
    // Pair distances 2/4, 1/4, 3/4.
    assert!((s.mean_pairwise_distance - 0.5).abs() < 1e-12);
    assert_eq!(s.fraction_biased(0.5), 0.25);
    let draw = sample_from_ensemble(&s, 1).unwrap();
    assert_eq!(draw.indices()[0], p);
}

#[test]
fn error_probability_against_an_independent_sampler() {
    let (g, dg, inr, n) = (1.0, 0.2, 10f64.powf(0.5), 200usize);
    let chi = ChiSquared::new(n as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let trials = 200_000;
    let mut wrong = 0u64;
    for _ in 0..trials {
        let z0 = (g * inr + 1.0) * chi.sample(&mut rng) / n as f64;
        let z1 = ((g - dg) * inr + 1.0) * chi.sample(&mut rng) / n as f64;
        wrong += (z1 > z0) as u64;
    }
    let p = wrong as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    let mc = mc_error_probability(g, dg, inr, n, trials, 5).unwrap();
    assert!((mc.probability - p).abs() < 5.0 * (se * se + mc.stderr * mc.stderr).sqrt());
    let approx = theorem1_error_probability(g, dg, inr, n).unwrap();
    assert!((approx - p).abs() < 0.01, "{approx} vs {p}");
}

#[test]
fn noiseless_annealing_deepens_the_pattern() {
    let g = small();
    let psi = 4f64.to_radians();
    let sc = SignalScenario::fixed(psi, 30.0, 1, 3);
    let mut st = AnnealSettings::new(PhaseAlphabet::new(8).unwrap(), 20_000, 3);
    st.measurement = Measurement::ExpectedPower;
    st.record_every = 1000;
    let out = anneal_closed_loop(&sc, g, &st).unwrap();
    assert!(out.final_gain_dbi < quiescent_dbi(g, psi) - 20.0, "{}", out.final_gain_dbi);
    // Reported gain matches the returned weights.
    let b = element_field_vector(g, psi);
    let direct = gain_normalization(g).dbi(b.total_field(&out.weights.values()).unwrap());
    assert!((direct - out.final_gain_dbi).abs() < 1e-6);
}

#[test]
fn moving_trace_follows_the_trajectory() {
    let g = small();
    let sc = SignalScenario {
        start_angle_rad: 5f64.to_radians(),
        angular_velocity_deg_s: -2.0,
        inr_db: 20.0,
        samples_per_decision: 100,
        sample_rate_hz: 1.0e5,
        seed: 4,
    };
    let mut st = AnnealSettings::tracking(PhaseAlphabet::new(4).unwrap(), 500, 4);
    st.record_every = 50;
    let out = track_moving_source(&sc, g, &st).unwrap();
    for r in &out.trace.records {
        let want = 5.0 - 2.0 * r.index as f64 * 1e-3;
        assert!((r.psi_rad.to_degrees() - want).abs() < 1e-9);
        assert!((r.time_s - r.index as f64 * 1e-3).abs() < 1e-12);
    }
}

#[test]
fn optimal_library_cancels_every_entry() {
    let g = small();
    let grid: Vec<f64> = (0..6).map(|i| (4.0 + 0.1 * i as f64).to_radians()).collect();
    let lib = build_library(&grid, &LibraryOptimizer::Optimal, g).unwrap();
    assert_eq!(lib.len(), 6);
    assert!(lib.entries().iter().all(|e| !e.flagged && e.suppression_db > 100.0));
    assert_eq!(lib.nearest(4.21f64.to_radians()), 2);

    let sc = SignalScenario {
        start_angle_rad: 4.45f64.to_radians(),
        angular_velocity_deg_s: -1.0,
        inr_db: 30.0,
        samples_per_decision: 100,
        sample_rate_hz: 1.0e5,
        seed: 2,
    };
    let trace = track_with_library(&sc, g, &lib, &LibraryTracking::new(400, 2)).unwrap();
    assert_eq!(trace.len(), 400);
}
