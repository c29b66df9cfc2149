use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use swe_bench::{step_with, stepper, vortex};
use swe_core::low_order::{LowOrderWorkspace, Sources};
use swe_core::mesh::{build_quad_mesh, BoundaryKind, QuadMeshSpec, RectangleBoundary};
use swe_core::riemann::max_wave_speed_primitive;

fn wave_speed(c: &mut Criterion) {
    let pairs: Vec<[f64; 4]> = (0..1024)
        .map(|k| {
            let t = k as f64 / 1024.0;
            [0.1 + t, (3.0 * t).sin(), 1.2 - t, (5.0 * t).cos()]
        })
        .collect();
    let mut g = c.benchmark_group("wave_speed");
    g.throughput(Throughput::Elements(pairs.len() as u64));
    g.bench_function("guaranteed_bound", |b| {
        b.iter(|| pairs.iter().map(|p| max_wave_speed_primitive(p[0], p[1], p[2], p[3], 9.81)).sum::<f64>())
    });
    g.finish();
}

fn low_order(c: &mut Criterion) {
    let mut g = c.benchmark_group("low_order");
    for cells in [32, 64] {
        let sim = vortex(cells);
        let mut w = LowOrderWorkspace::new(&sim.graph);
        g.throughput(Throughput::Elements(sim.graph.node_count() as u64));
        g.bench_with_input(BenchmarkId::new("prepare_assemble", cells), &sim, |b, sim| {
            b.iter(|| {
                w.prepare(&sim.graph, &sim.u, &sim.bathymetry, &sim.consts);
                w.assemble(&sim.graph, &sim.u, 1e-3, &Sources::NONE, &sim.consts).unwrap();
                black_box(w.update[0])
            })
        });
    }
    g.finish();
}

fn erk_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("erk_step");
    g.sample_size(20);
    let sim = vortex(64);
    g.throughput(Throughput::Elements(sim.graph.node_count() as u64));
    for scheme in ["RK(1,1;1)", "RK(3,3;1)", "RK(3,3;1/3)"] {
        let mut st = stepper(&sim, scheme);
        g.bench_function(BenchmarkId::new("vortex_4225", scheme), |b| {
            b.iter(|| {
                let mut u = sim.u.clone();
                step_with(&sim, &mut st, &mut u);
                black_box(u[0])
            })
        });
    }
    g.finish();
}

fn mesh_assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("mesh");
    g.sample_size(20);
    for n in [32, 128] {
        let spec = QuadMeshSpec {
            nx: n,
            ny: n,
            extent: [0.0, 0.0, 1.0, 1.0],
            distortion: 0.2,
            seed: 1,
            tags: RectangleBoundary::uniform(BoundaryKind::Reflecting),
        };
        g.throughput(Throughput::Elements(((n + 1) * (n + 1)) as u64));
        g.bench_with_input(BenchmarkId::new("quad_graph", n), &spec, |b, spec| b.iter(|| build_quad_mesh(spec).unwrap()));
    }
    g.finish();
}

criterion_group!(kernels, wave_speed, low_order, erk_step, mesh_assembly);
criterion_main!(kernels);
