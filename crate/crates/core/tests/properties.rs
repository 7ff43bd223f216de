use std::sync::OnceLock;

use proptest::prelude::*;
use rimnull_core::closedloop::anneal::{anneal_with_table, AnnealSettings};
use rimnull_core::closedloop::library::propose_index;
use rimnull_core::closedloop::theorem::{gamma, q_function, GammaForm};
use rimnull_core::closedloop::{
    accept, cluster_partition, temperature, AngleTable, ClosedLoopTrace, DecisionRecord, Measurement,
    SignalScenario,
};
use rimnull_core::field::{element_field_vector, gain_normalization, total_pattern};
use rimnull_core::io::{quantized_table, read_quantized, read_trace, read_weights, trace_table, weights_table};
use rimnull_core::openloop::{build_constraints, gp_solve, project_unit_modulus};
use rimnull_core::{
    Complex64, DishConfig, Geometry, GpSettings, PhaseAlphabet, QuantizedWeights, Regime, WeightVector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 6 m dish with a coarse fixed mesh: a few hundred rim elements.
fn small() -> &'static Geometry {
    static G: OnceLock<Geometry> = OnceLock::new();
    G.get_or_init(|| {
        Geometry::build(&DishConfig { diameter_m: 6.0, fixed_mesh_density: 1.0, ..Default::default() }).unwrap()
    })
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn weights(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec(complex(), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pattern_is_fixed_plus_weighted_sum(w in weights(small().len()), psi in 0.0..10.0f64) {
        let g = small();
        let psi = psi.to_radians();
        let b = element_field_vector(g, psi);
        let direct = b.fixed_field + b.element_vector.iter().zip(&w).map(|(e, x)| e * x).sum::<Complex64>();
        let cut = total_pattern(g, &WeightVector::new(w, Regime::Unconstrained), &[psi]).unwrap();
        let scale = b.fixed_field.norm() + b.element_vector.iter().map(|e| e.norm()).sum::<f64>() * 15.0;
        prop_assert!((cut.copol_field[0] - direct).norm() <= 1e-10 * scale);
        let norm = gain_normalization(g);
        prop_assert!((cut.gain_dbi[0] - norm.dbi(direct)).abs() < 1e-6 || norm.linear(direct) < 1e-20);
    }

    #[test]
    fn rim_field_is_linear(w1 in weights(small().len()), w2 in weights(small().len()), a in complex()) {
        let b = element_field_vector(small(), 3f64.to_radians());
        let mix: Vec<Complex64> = w1.iter().zip(&w2).map(|(x, y)| a * x + y).collect();
        let lhs = b.rim_field(&mix).unwrap();
        let rhs = a * b.rim_field(&w1).unwrap() + b.rim_field(&w2).unwrap();
        let scale: f64 = b.element_vector.iter().map(|e| e.norm()).sum::<f64>() * 200.0;
        prop_assert!((lhs - rhs).norm() <= 1e-11 * scale);
    }

    #[test]
    fn projection_is_unit_modulus_and_keeps_phase(x in weights(64)) {
        let p = project_unit_modulus(&x);
        for (a, b) in x.iter().zip(&p) {
            prop_assert!((b.norm() - 1.0).abs() < 1e-12);
            if a.norm() > 1e-9 {
                prop_assert!((a / a.norm() - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn gp_weights_are_unit_modulus(angles in proptest::collection::btree_set(2u32..12, 1..3)) {
        let g = small();
        let psi: Vec<f64> = angles.iter().map(|&a| (a as f64 * 0.5).to_radians()).collect();
        let set = build_constraints(g, &psi, None, None).unwrap();
        let st = GpSettings { max_iterations: 300, ..Default::default() };
        let out = gp_solve(&set, &st).unwrap();
        prop_assert!(out.weights.values().iter().all(|w| (w.norm() - 1.0).abs() < 1e-12));
        prop_assert_eq!(out.weights.regime(), Regime::UnitModulus);
        prop_assert!(out.final_cost() <= out.trace[0] + 1e-12 * out.trace[0].max(1.0));
    }

    #[test]
    fn clusters_partition_each_ring(size in 1usize..80) {
        let g = small();
        let p = cluster_partition(g, size).unwrap();
        let mut next = 0;
        for c in p.clusters() {
            prop_assert_eq!(c.start, next);
            prop_assert!(!c.is_empty() && c.len() <= size);
            next = c.end;
            let ring = g.elements()[c.start].ring;
            prop_assert!(g.elements()[c.clone()].iter().all(|e| e.ring == ring));
        }
        prop_assert_eq!(next, g.len());
        prop_assert_eq!(p.element_count(), g.len());
    }

    #[test]
    fn weights_round_trip(w in weights(40)) {
        let v = WeightVector::new(w, Regime::Unconstrained);
        let back = read_weights(&weights_table(&v).render()).unwrap();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn quantized_round_trip(levels in 2usize..17, seed in any::<u64>()) {
        let a = PhaseAlphabet::new(levels).unwrap();
        let q = QuantizedWeights::random(a, 50, &mut ChaCha8Rng::seed_from_u64(seed));
        let back = read_quantized(&quantized_table(&q).render()).unwrap();
        prop_assert_eq!(back, q);
    }

    #[test]
    fn trace_round_trip(rows in proptest::collection::vec((0.0..1e3f64, -5.0..5.0f64, 0.0..1e6f64, any::<bool>(), -300.0..60.0f64), 1..30)) {
        let trace = ClosedLoopTrace {
            records: rows.iter().enumerate().map(|(i, r)| DecisionRecord {
                index: i as u64,
                time_s: r.0,
                psi_rad: r.1.to_radians(),
                measured: r.2,
                accepted: r.3,
                true_gain_dbi: r.4,
                weights_id: (i / 2) as u64,
            }).collect(),
        };
        let back = read_trace(&trace_table(&trace).render()).unwrap();
        prop_assert_eq!(back.len(), trace.len());
        for (a, b) in trace.records.iter().zip(&back.records) {
            prop_assert_eq!(a.index, b.index);
            prop_assert_eq!(a.time_s, b.time_s);
            prop_assert_eq!(a.measured, b.measured);
            prop_assert_eq!(a.accepted, b.accepted);
            prop_assert_eq!(a.true_gain_dbi, b.true_gain_dbi);
            prop_assert_eq!(a.weights_id, b.weights_id);
            prop_assert!((a.psi_rad - b.psi_rad).abs() <= 1e-15 * a.psi_rad.abs().max(1e-300));
        }
    }

    #[test]
    fn improvements_are_always_accepted(d in 0.0..1e3f64, t in 1e-6..10.0f64, u in 0.0..1.0f64) {
        prop_assert!(accept(d, t, u));
    }

    #[test]
    fn worse_moves_follow_the_boltzmann_factor(d in 1e-3..10.0f64, t in 1e-3..10.0f64, u in 0.0..1.0f64) {
        prop_assert_eq!(accept(-d, t, u), u < (-d / t).exp());
    }

    #[test]
    fn temperature_never_drops_below_floor(k in 0usize..100_000, t in 1usize..1000) {
        let x = temperature(k, t);
        prop_assert!(x >= 1.0 / t as f64 && x <= 1.0);
        prop_assert!(temperature(k + 1, t) <= x);
    }

    #[test]
    fn error_probability_shrinks_with_samples(g in 0.01..10.0f64, frac in 0.01..1.0f64, inr_db in -20.0..40.0f64, n in 1usize..10_000) {
        let inr = 10f64.powf(inr_db / 10.0);
        let dg = g * frac;
        let a = q_function(gamma(g, dg, inr, n, GammaForm::Derived));
        let b = q_function(gamma(g, dg, inr, n * 4, GammaForm::Derived));
        prop_assert!((0.0..=0.5).contains(&a));
        prop_assert!(b <= a);
    }

    #[test]
    fn library_proposals_stay_in_range(cur in 0usize..200, len in 2usize..200, width in 1.0..20.0f64, seed in any::<u64>()) {
        let cur = cur % len;
        let j = propose_index(cur, len, width, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(j < len);
    }

    #[test]
    fn nearest_symbol_maximizes_projection(z in complex(), levels in 2usize..17) {
        let a = PhaseAlphabet::new(levels).unwrap();
        let k = a.nearest(z);
        let best = a.values().iter().map(|v| (z * v.conj()).re).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((z * a.value(k).conj()).re >= best - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn annealing_is_reproducible(seed in any::<u64>(), levels in 2usize..9) {
        let g = small();
        let psi = 4f64.to_radians();
        let table = AngleTable::single(g, psi);
        let part = cluster_partition(g, 3).unwrap();
        let sc = SignalScenario::fixed(psi, 10.0, 50, seed);
        let mut st = AnnealSettings::new(PhaseAlphabet::new(levels).unwrap(), 300, seed);
        st.cluster_size = 3;
        st.measurement = Measurement::Sampled;
        let a = anneal_with_table(&sc, &table, &part, &st).unwrap();
        let b = anneal_with_table(&sc, &table, &part, &st).unwrap();
        prop_assert_eq!(&a, &b);
        // Thinning the trace does not change the search.
        st.record_every = 7;
        let c = anneal_with_table(&sc, &table, &part, &st).unwrap();
        prop_assert_eq!(&a.weights, &c.weights);
        prop_assert_eq!(a.final_gain_dbi, c.final_gain_dbi);
        prop_assert_eq!(c.trace.records.last(), a.trace.records.last());
        // Every member of a cluster carries the same symbol.
        for cl in part.clusters() {
            let v = a.weights.indices()[cl.start];
            prop_assert!(a.weights.indices()[cl.clone()].iter().all(|&x| x == v));
        }
    }
}
