use std::f64::consts::{FRAC_PI_2, PI};

use borfem::constants::{omega, wavenumber, MU0};
use borfem::excitation::DipoleSource;
use borfem::exec::Exec;
use borfem::exterior::{extract_currents, far_field, EquivalentSurface, Kernel};
use borfem::geometry::build_cylinder_profile;
use borfem::simulation::{BodyModel, ModelOptions};
use borfem::validation::CylinderCase;
use borfem::{Error, C64};

fn cylinder_surface(gamma: f64) -> (CylinderCase, EquivalentSurface) {
    let case = CylinderCase {
        gamma: C64::new(gamma, 0.0),
        ..CylinderCase::default()
    };
    let (_, surf) = case.surface().unwrap();
    (case, surf)
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(n: [f64; 3], v: [C64; 3]) -> C64 {
    v[0] * n[0] + v[1] * n[1] + v[2] * n[2]
}

#[test]
fn currents_are_tangential() {
    let (_, surf) = cylinder_surface(1.0);
    let j_max = surf.samples.iter().map(|s| norm(&s.j)).fold(0.0, f64::max);
    let m_max = surf.samples.iter().map(|s| norm(&s.m)).fold(0.0, f64::max);
    assert!(j_max > 0.0 && m_max > 0.0);
    let mut side = 0;
    for s in &surf.samples {
        assert!(dot(s.normal, s.j).norm() <= 1e-12 * j_max);
        assert!(dot(s.normal, s.m).norm() <= 1e-12 * m_max);
        if s.normal[2] == 0.0 {
            side += 1;
            let rho = s.position[0].hypot(s.position[1]);
            let radial = [s.position[0] / rho, s.position[1] / rho, 0.0];
            assert!(dot(radial, s.j).norm() <= 1e-12 * j_max);
            assert!(dot(radial, s.m).norm() <= 1e-12 * m_max);
        }
    }
    assert!(side > 0);
}

#[test]
fn vacuum_body_carries_no_currents() {
    let f = 2.43e9;
    let model = BodyModel::build(build_cylinder_profile(0.1, 0.2).unwrap(), f, C64::new(1.0, 0.0), true, ModelOptions::default())
        .unwrap();
    let src = DipoleSource::new([1.0, 0.0, 0.1], 1.0, C64::new(1.0, 0.0), f).unwrap();
    let sol = model.solve(&[src], 11).unwrap().remove(0);
    let surf = extract_currents(&sol, &model.default_surface(11).unwrap(), Exec::default()).unwrap();
    let e_inc = omega(f) * MU0 * src.moment() / (4.0 * PI);
    for s in &surf.samples {
        assert!(norm(&s.j) * 376.73 <= 1e-10 * e_inc && norm(&s.m) <= 1e-10 * e_inc);
    }
}

#[test]
fn field_is_linear_in_the_currents() {
    let (_, surf) = cylinder_surface(1.0);
    let points = [[1.5, 0.3, 0.4], [-0.8, 1.2, 1.0], [0.2, -2.0, 0.05]];
    let zero = surf.scaled(C64::new(0.0, 0.0));
    let twice = surf.scaled(C64::new(2.0, 0.0));
    for p in points {
        for gamma in [0.0, 0.3, 1.0] {
            let g = C64::new(gamma, 0.0);
            assert!(zero.exterior_field(p, g).unwrap().iter().all(|v| *v == C64::new(0.0, 0.0)));
            let a = surf.exterior_field(p, g).unwrap();
            let b = twice.exterior_field(p, g).unwrap();
            for i in 0..3 {
                assert!((2.0 * a[i] - b[i]).norm() <= 1e-13 * norm(&a));
            }
        }
    }
}

#[test]
fn points_inside_the_surface_or_below_ground_are_rejected() {
    let (_, surf) = cylinder_surface(1.0);
    let r = surf.spec.radius;
    assert!(matches!(surf.exterior_field([0.5 * r, 0.0, 0.1], C64::new(1.0, 0.0)), Err(Error::Domain(_))));
    assert!(matches!(surf.exterior_field([2.0, 0.0, -0.1], C64::new(1.0, 0.0)), Err(Error::Domain(_))));
    assert!(surf.exterior_field([2.0, 0.0, 0.1], C64::new(1.0, 0.0)).is_ok());
}

#[test]
fn distant_field_approaches_the_far_field_pattern() {
    let (case, surf) = cylinder_surface(0.3);
    let k = wavenumber(case.freq);
    let r = 3000.0;
    let gamma = C64::new(0.3, 0.0);
    for &phi in &[0.0, 0.9, 2.5] {
        let theta = [0.4, 1.0, 1.4];
        let ff = far_field(&surf, None, gamma, &theta, phi).unwrap();
        for (i, &t) in theta.iter().enumerate() {
            let p = [r * t.sin() * phi.cos(), r * t.sin() * phi.sin(), r * t.cos()];
            let e = surf.exterior_field(p, gamma).unwrap();
            let phase = C64::from_polar(r, k * r);
            let th = [t.cos() * phi.cos(), t.cos() * phi.sin(), -t.sin()];
            let ph = [-phi.sin(), phi.cos(), 0.0];
            let (et, ep) = (dot(th, e) * phase, dot(ph, e) * phase);
            let scale = (ff.e_theta[i].norm_sqr() + ff.e_phi[i].norm_sqr()).sqrt();
            assert!((et - ff.e_theta[i]).norm() <= 1e-3 * scale, "φ = {phi}, θ = {t}");
            assert!((ep - ff.e_phi[i]).norm() <= 1e-3 * scale);
        }
    }
}

#[test]
fn pec_ground_nulls_horizontal_far_field_at_the_horizon() {
    let (case, surf) = cylinder_surface(1.0);
    let src = case.dipole().unwrap();
    let gamma = C64::new(1.0, 0.0);
    let theta: Vec<f64> = (0..=90).map(|d| (d as f64).to_radians()).collect();
    let ff = far_field(&surf, Some(&src), gamma, &theta, 0.7).unwrap();
    let scale = ff.e_theta.iter().zip(&ff.e_phi).map(|(a, b)| a.norm().max(b.norm())).fold(0.0, f64::max);
    let e_phi_peak = ff.e_phi.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(e_phi_peak > 1e-4 * scale, "the cut must carry a horizontal component");
    let last = theta.len() - 1;
    assert!((theta[last] - FRAC_PI_2).abs() < 1e-15);
    assert!(ff.e_phi[last].norm() <= 1e-10 * scale);
    assert!(far_field(&surf, None, gamma, &[1.7], 0.0).is_err());
}

#[test]
fn full_kernel_converges_to_radiation_kernel_far_away() {
    let (_, surf) = cylinder_surface(0.3);
    let full = surf.clone().with_kernel(Kernel::Full);
    let gamma = C64::new(0.3, 0.0);
    let near = [0.6, 0.2, 0.3];
    let far = [60.0, 20.0, 3.0];
    let rel = |p: [f64; 3]| {
        let a = surf.exterior_field(p, gamma).unwrap();
        let b = full.exterior_field(p, gamma).unwrap();
        norm(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]]) / norm(&b)
    };
    assert!(rel(far) < 0.1 * rel(near));
    assert!(rel(far) < 1e-2);
}
