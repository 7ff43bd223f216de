use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rimnull_bench::coarse_geometry;
use rimnull_core::closedloop::anneal::{anneal_with_table, AnnealSettings};
use rimnull_core::closedloop::{AngleTable, Measurement, Partition, SignalScenario};
use rimnull_core::field::{element_field_vector, element_vector};
use rimnull_core::openloop::{build_constraints, gp_solve};
use rimnull_core::quantized::{firefly_search, FireflySettings};
use rimnull_core::{deg, DishConfig, Geometry, GpSettings, PhaseAlphabet};

fn geometry(c: &mut Criterion) {
    let cfg = DishConfig { fixed_mesh_density: 2.0, ..DishConfig::default() };
    c.bench_function("geometry_build_coarse", |b| b.iter(|| Geometry::build(black_box(&cfg)).unwrap()));
}

fn fields(c: &mut Criterion) {
    let g = coarse_geometry();
    c.bench_function("element_vector", |b| b.iter(|| element_vector(&g, black_box(deg(1.75)))));
    c.bench_function("element_field_vector", |b| b.iter(|| element_field_vector(&g, black_box(deg(1.75)))));
}

fn open_loop(c: &mut Criterion) {
    let g = coarse_geometry();
    let set = build_constraints(&g, &[deg(1.0), deg(2.0), deg(3.0)], None, None).unwrap();
    let mut group = c.benchmark_group("open_loop");
    group.sample_size(10);
    group.bench_function("gp_three_nulls", |b| b.iter(|| gp_solve(&set, &GpSettings::default()).unwrap()));
    let single = build_constraints(&g, &[deg(1.75)], Some(0.03), None).unwrap();
    let alphabet = PhaseAlphabet::new(4).unwrap();
    let st = FireflySettings { movements: 20, ..Default::default() };
    group.bench_function("firefly_20_movements", |b| {
        b.iter(|| firefly_search(&single, &alphabet, &st).unwrap())
    });
    group.finish();
}

fn closed_loop(c: &mut Criterion) {
    let g = coarse_geometry();
    let psi = deg(1.75);
    let table = AngleTable::single(&g, psi);
    let part = Partition::singletons(g.len());
    let mut group = c.benchmark_group("anneal_10k_decisions");
    group.sample_size(10);
    for m in [Measurement::ExpectedPower, Measurement::ChiSquare, Measurement::Sampled] {
        let sc = SignalScenario::fixed(psi, 10.0, 1000, 1);
        let mut st = AnnealSettings::new(PhaseAlphabet::new(16).unwrap(), 10_000, 1);
        st.measurement = m;
        st.record_every = 10_000;
        group.bench_function(m.name(), |b| {
            b.iter_batched(|| st.clone(), |st| anneal_with_table(&sc, &table, &part, &st).unwrap(), BatchSize::SmallInput)
        });
    }
    group.finish();
}

criterion_group!(benches, geometry, fields, open_loop, closed_loop);
criterion_main!(benches);
