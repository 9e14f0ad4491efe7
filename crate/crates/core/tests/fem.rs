use std::f64::consts::PI;

use borfem::constants::{omega, wavelength, MU0};
use borfem::excitation::{incident_field, DipoleSource};
use borfem::fem::reconstruct_fields;
use borfem::fem::solve::HarmonicSolution;
use borfem::geometry::{build_cylinder_profile, Region};
use borfem::simulation::{BodyModel, ModelOptions};
use borfem::C64;

const F: f64 = 2.43e9;
const EPS: C64 = C64::new(52.7, -12.76);

fn cylinder(eps: C64) -> BodyModel {
    BodyModel::build(build_cylinder_profile(0.1, 0.2).unwrap(), F, eps, true, ModelOptions::default()).unwrap()
}

fn source() -> DipoleSource {
    DipoleSource::new([1.0, 0.0, 0.1], 1.0, C64::new(0.3, 0.0), F).unwrap()
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn to_xyz(v: [C64; 3], phi: f64) -> [C64; 3] {
    let (s, c) = phi.sin_cos();
    [v[0] * c - v[1] * s, v[0] * s + v[1] * c, v[2]]
}

fn field_xyz(sol: &HarmonicSolution, p: [f64; 3]) -> ([C64; 3], [C64; 3]) {
    let (rho, phi) = (p[0].hypot(p[1]), p[1].atan2(p[0]));
    let (e, h) = reconstruct_fields(sol, &[[rho, phi, p[2]]]).unwrap()[0];
    (to_xyz(e, phi), to_xyz(h, phi))
}

#[test]
fn reconstructed_fields_obey_faraday() {
    let model = cylinder(EPS);
    let sol = model.solve(&[source()], 11).unwrap().remove(0);
    let mesh = model.mesh();
    let h = 1e-4 * wavelength(F);
    let jwmu = C64::new(0.0, omega(F) * MU0);
    let mut checked = 0;
    for t in (0..mesh.num_triangles()).step_by(211) {
        let region = mesh.region(t);
        if !matches!(region, Region::Body | Region::Air) {
            continue;
        }
        let [rho, z] = mesh.centroid(t);
        if rho < 0.02 {
            continue;
        }
        let phi = 0.37 + 0.1 * checked as f64;
        let p = [rho * phi.cos(), rho * phi.sin(), z];
        let d = |axis: usize| {
            let (mut a, mut b) = (p, p);
            a[axis] += h;
            b[axis] -= h;
            let (ea, eb) = (field_xyz(&sol, a).0, field_xyz(&sol, b).0);
            [0, 1, 2].map(|i| (ea[i] - eb[i]) / (2.0 * h))
        };
        let (dx, dy, dz) = (d(0), d(1), d(2));
        let curl = [dy[2] - dz[1], dz[0] - dx[2], dx[1] - dy[0]];
        let from_curl = curl.map(|c| -c / jwmu);
        let (_, hh) = field_xyz(&sol, p);
        let err = norm(&[from_curl[0] - hh[0], from_curl[1] - hh[1], from_curl[2] - hh[2]]);
        assert!(err <= 1e-3 * norm(&hh), "triangle {t} ({region:?}): {}", err / norm(&hh));
        checked += 1;
    }
    assert!(checked >= 10);
}

#[test]
fn fields_are_mirror_symmetric_about_the_source_plane() {
    let model = cylinder(EPS);
    let sol = model.solve(&[source()], 11).unwrap().remove(0);
    for &(rho, phi, z) in &[(0.05, 0.4, 0.1), (0.12, 1.9, 0.05), (0.15, 2.8, 0.22)] {
        let f = reconstruct_fields(&sol, &[[rho, phi, z], [rho, -phi, z]]).unwrap();
        let (a, b) = (f[0].0, f[1].0);
        let scale = norm(&a);
        assert!((a[0] - b[0]).norm() <= 1e-12 * scale);
        assert!((a[2] - b[2]).norm() <= 1e-12 * scale);
        assert!((a[1] + b[1]).norm() <= 1e-12 * scale);
    }
}

#[test]
fn vacuum_body_scatters_nothing() {
    let model = cylinder(C64::new(1.0, 0.0));
    let src = source();
    let sol = model.solve(&[src], 11).unwrap().remove(0);
    let pts = [[0.05, 0.3, 0.1], [0.15, 1.0, 0.22]];
    for (p, (e, _)) in pts.iter().zip(reconstruct_fields(&sol, &pts).unwrap()) {
        let inc = norm(&incident_field(*p, &src).unwrap());
        assert!(norm(&e) <= 1e-10 * inc);
    }
}

#[test]
fn axial_source_needs_only_m0() {
    let model = cylinder(EPS);
    let z = model.mesh().bounds().z_max() + 0.3;
    let src = DipoleSource::new([0.0, 0.0, z], 1.0, C64::new(0.3, 0.0), F).unwrap();
    let few = model.solve(&[src], 1).unwrap().remove(0);
    let many = model.solve(&[src], 6).unwrap().remove(0);
    let pts = [[0.05, 0.3, 0.1], [0.15, 2.0, 0.22]];
    let a = reconstruct_fields(&few, &pts).unwrap();
    let b = reconstruct_fields(&many, &pts).unwrap();
    for ((ea, _), (eb, _)) in a.iter().zip(&b) {
        let d = [ea[0] - eb[0], ea[1] - eb[1], ea[2] - eb[2]];
        assert!(norm(&d) <= 1e-10 * norm(ea));
        assert!(ea[1].norm() <= 1e-10 * norm(ea));
    }
}

/// `Σ_g |e_m|² + η₀²|h_m|²` over the default equivalent-surface generatrix.
fn boundary_spectrum(model: &BodyModel, sol: &HarmonicSolution) -> Vec<f64> {
    let spec = model.default_surface(11).unwrap();
    let n = 40;
    let mut energy = vec![0.0; sol.harmonics.len()];
    for i in 0..n {
        let z = spec.z_lo + (spec.z_hi - spec.z_lo) * (i as f64 + 0.5) / n as f64;
        for (m, s) in sol.harmonics_at([spec.radius, z]).unwrap().iter().enumerate() {
            energy[m] += s.e.iter().map(|v| v.norm_sqr()).sum::<f64>()
                + 376.73f64.powi(2) * s.h.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
    }
    energy
}

#[test]
fn harmonic_energy_tail_decays() {
    let model = cylinder(EPS);
    let sol = model.solve(&[source()], 11).unwrap().remove(0);
    let e = boundary_spectrum(&model, &sol);
    for m in 4..11 {
        assert!(e[m + 1] < e[m], "m = {m}: {e:?}");
    }
    let peak = e.iter().cloned().fold(0.0, f64::max);
    assert!(e[11] < 1e-6 * peak, "{e:?}");
}

#[test]
fn boundary_fields_converge_in_m() {
    let model = cylinder(EPS);
    let src = source();
    let lo = model.solve(&[src], 14).unwrap().remove(0);
    let hi = model.solve(&[src], 28).unwrap().remove(0);
    let spec = model.default_surface(11).unwrap();
    let pts: Vec<[f64; 3]> = (0..24)
        .flat_map(|k| {
            let phi = 2.0 * PI * k as f64 / 24.0;
            [0.25, 0.5, 0.75].map(|s| [spec.radius, phi, spec.z_lo + s * (spec.z_hi - spec.z_lo)])
        })
        .collect();
    let a = reconstruct_fields(&lo, &pts).unwrap();
    let b = reconstruct_fields(&hi, &pts).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for ((ea, _), (eb, _)) in a.iter().zip(&b) {
        for i in 0..3 {
            num += (ea[i] - eb[i]).norm_sqr();
            den += eb[i].norm_sqr();
        }
    }
    let rel = (num / den).sqrt();
    assert!(rel < 1e-4, "relative change {rel}");
}
