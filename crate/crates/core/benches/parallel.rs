use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use borfem::excitation::azimuthal_decompose_with;
use borfem::exec::Exec;
use borfem::exterior::extract_currents;
use borfem::simulation::{BodyModel, ModelOptions};
use borfem::validation::CylinderCase;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn model(case: &CylinderCase, exec: Exec) -> BodyModel {
    let opts = ModelOptions {
        exec,
        ..ModelOptions::default()
    };
    BodyModel::build(case.profile().unwrap(), case.freq, case.eps, true, opts).unwrap()
}

fn cylinder(c: &mut Criterion) {
    let case = CylinderCase::default();
    let src = case.dipole().unwrap();
    let mut g = c.benchmark_group("cylinder");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("mesh_and_assembly", name), &exec, |b, &exec| {
            b.iter(|| model(&case, exec))
        });
        let m = model(&case, exec);
        g.bench_with_input(BenchmarkId::new("incident_harmonics", name), &exec, |b, &exec| {
            b.iter(|| azimuthal_decompose_with(m.mesh(), &src, case.max_harmonic, 256, exec).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("solve", name), &exec, |b, _| {
            b.iter(|| m.solve(&[src], case.max_harmonic).unwrap())
        });
        let sol = m.solve(&[src], case.max_harmonic).unwrap().remove(0);
        let spec = m.default_surface(case.max_harmonic).unwrap();
        g.bench_with_input(BenchmarkId::new("equivalent_currents", name), &exec, |b, &exec| {
            b.iter(|| extract_currents(&sol, &spec, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, cylinder);
criterion_main!(benches);
