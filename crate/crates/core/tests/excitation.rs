use std::f64::consts::PI;

use borfem::constants::{omega, wavelength, wavenumber, ETA0, MU0};
use borfem::excitation::{assemble_rhs, azimuthal_decompose, azimuthal_decompose_with, dipole_moment, incident_field, DipoleSource};
use borfem::exec::Exec;
use borfem::geometry::{build_cylinder_profile, triangulate, DomainSpec, Mesh2D};
use borfem::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const F: f64 = 2.43e9;

fn cylinder_mesh() -> Mesh2D {
    let spec = DomainSpec::around(build_cylinder_profile(0.1, 0.2).unwrap(), F, C64::new(52.7, -12.76), true).unwrap();
    triangulate(&spec).unwrap()
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Complete field of a `z`-directed Hertzian dipole at the origin, written in
/// spherical components and converted to cylindrical `[ρ, φ, z]`.
fn hertzian_full(il: f64, freq: f64, rho: f64, z: f64) -> [C64; 3] {
    let k = wavenumber(freq);
    let r = rho.hypot(z);
    let (st, ct) = (rho / r, z / r);
    let jkr = C64::new(0.0, k * r);
    let phase = (-jkr).exp();
    let e_r = ETA0 * il * ct / (2.0 * PI * r * r) * (1.0 + 1.0 / jkr) * phase;
    let e_t = C64::new(0.0, ETA0 * k * il * st / (4.0 * PI * r)) * (1.0 + 1.0 / jkr + 1.0 / (jkr * jkr)) * phase;
    [e_r * st + e_t * ct, C64::new(0.0, 0.0), e_r * ct - e_t * st]
}

#[test]
fn moment_matches_closed_forms() {
    let lambda = wavelength(F);
    let il = dipole_moment(1.0, F);
    assert!((il - (3.0 * lambda * lambda / (PI * ETA0)).sqrt()).abs() < 1e-15);
    let f_unit = borfem::constants::C0;
    assert!((dipole_moment(PI * ETA0 / 3.0, f_unit) - 1.0).abs() < 1e-12);
}

#[test]
fn far_zone_agrees_with_complete_dipole_field() {
    let src = DipoleSource::new([0.0, 0.0, 1.0], 1e-3, C64::new(0.0, 0.0), F).unwrap();
    let lambda = wavelength(F);
    let k = wavenumber(F);
    for &dist in &[5.0, 8.0, 20.0, 60.0] {
        let big_r = dist * lambda;
        for &theta_deg in &[20.0f64, 55.0, 90.0, 130.0] {
            let t = theta_deg.to_radians();
            let (rho, z) = (big_r * t.sin(), big_r * t.cos());
            let ours = incident_field([rho, 0.7, 1.0 + z], &src).unwrap();
            let full = hertzian_full(src.moment(), F, rho, z);
            let e_theta = |e: &[C64; 3]| e[0] * t.cos() - e[2] * t.sin();
            let (a, b) = (e_theta(&ours), e_theta(&full));
            assert!((a.norm() - b.norm()).abs() <= 0.01 * b.norm(), "R = {dist} λ, θ = {theta_deg}");
            assert!((a - b).norm() <= 1.05 / (k * big_r) * b.norm());
        }
    }
}

#[test]
fn broadside_field_is_vertical_and_falls_as_one_over_r() {
    let src = DipoleSource::new([0.0, 0.0, 1.0], 1e-3, C64::new(0.0, 0.0), F).unwrap();
    let lambda = wavelength(F);
    let amp = omega(F) * MU0 * src.moment() / (4.0 * PI);
    for i in 1..20 {
        let r = 0.5 * i as f64 * lambda;
        let e = incident_field([r, 1.1, 1.0], &src).unwrap();
        assert!(e[0].norm() < 1e-15 * e[2].norm() && e[1].norm() < 1e-15 * e[2].norm());
        assert!((e[2].norm() * r - amp).abs() < 1e-12 * amp);
    }
}

#[test]
fn pec_ground_cancels_tangential_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let src = DipoleSource::new(
            [rng.gen_range(0.0..4.0), rng.gen_range(-PI..PI), rng.gen_range(0.05..2.0)],
            1e-3,
            C64::new(1.0, 0.0),
            F,
        )
        .unwrap();
        let e = incident_field([rng.gen_range(0.0..5.0), rng.gen_range(-PI..PI), 0.0], &src).unwrap();
        let total = norm(&e);
        assert!(e[0].norm() <= 1e-10 * total && e[1].norm() <= 1e-10 * total);
    }
}

#[test]
fn fourier_sum_reconstructs_the_field() {
    let mesh = cylinder_mesh();
    let src = DipoleSource::new([1.0, 0.4, 0.1], 1.0, C64::new(0.3, 0.0), F).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let hinc = azimuthal_decompose_with(&mesh, &src, 11, 256, Exec::default()).unwrap();
    let wide = azimuthal_decompose_with(&mesh, &src, 40, 256, Exec::default()).unwrap();
    let n = hinc.points().len();
    for _ in 0..8 {
        let q = rng.gen_range(0..n);
        let phi = rng.gen_range(-PI..PI);
        let [rho, z] = hinc.points()[q];
        let e = incident_field([rho, phi + 0.4, z], &src).unwrap();
        let exact = norm(&e);

        let e40 = wide.synthesize(q, phi);
        let err40 = norm(&[e40[0] - e[0], e40[1] - e[1], e40[2] - e[2]]);
        assert!(err40 <= 1e-6 * exact, "M = 40 error {}", err40 / exact);

        // With M = 11 the truncated tail bounds the residual.
        let e11 = hinc.synthesize(q, phi);
        let err11 = norm(&[e11[0] - e[0], e11[1] - e[1], e11[2] - e[2]]);
        let tail: f64 = (12..=40).map(|m| norm(&wide.sample(m, q))).sum::<f64>() / PI.sqrt();
        assert!(err11 <= tail + 1e-9 * exact, "error {err11} tail {tail}");
    }
}

#[test]
fn axial_source_excites_only_m0() {
    let mesh = cylinder_mesh();
    let z_top = mesh.bounds().z_max();
    for gamma in [0.0, 0.3] {
        let src = DipoleSource::new([0.0, 0.0, z_top + 0.5], 1.0, C64::new(gamma, 0.0), F).unwrap();
        let hinc = azimuthal_decompose(&mesh, &src, 11).unwrap();
        let scale = (0..hinc.points().len()).map(|q| norm(&hinc.sample(0, q))).fold(0.0, f64::max);
        for m in 1..=11 {
            for q in 0..hinc.points().len() {
                assert!(norm(&hinc.sample(m, q)) <= 1e-10 * scale);
            }
        }
        let k = assemble_rhs(&hinc, &mesh, C64::new(52.7, -12.76)).unwrap();
        let k0 = norm(&k[0]);
        assert!(k0 > 0.0);
        for km in &k[1..] {
            assert!(norm(km) <= 1e-10 * k0);
        }
    }
}

#[test]
fn cosine_projection_of_azimuthal_component_vanishes() {
    let src = DipoleSource::new([1.0, 0.0, 0.3], 1.0, C64::new(0.3, 0.0), F).unwrap();
    let n = 512;
    for &(rho, z) in &[(0.05, 0.1), (0.1, 0.3)] {
        let samples: Vec<[C64; 3]> = (0..n)
            .map(|k| incident_field([rho, 2.0 * PI * k as f64 / n as f64, z], &src).unwrap())
            .collect();
        let scale = samples.iter().map(|e| e[1].norm()).fold(0.0, f64::max);
        for m in 0..12 {
            let s: C64 = samples
                .iter()
                .enumerate()
                .map(|(k, e)| e[1] * (m as f64 * 2.0 * PI * k as f64 / n as f64).cos())
                .sum::<C64>()
                / n as f64;
            assert!(s.norm() <= 1e-12 * scale, "m = {m}");
        }
    }
}

#[test]
fn known_terms_vanish_without_contrast_and_scale_with_moment() {
    let mesh = cylinder_mesh();
    let src = DipoleSource::new([1.0, 0.0, 0.1], 1.0, C64::new(0.3, 0.0), F).unwrap();
    let hinc = azimuthal_decompose(&mesh, &src, 11).unwrap();
    for k in assemble_rhs(&hinc, &mesh, C64::new(1.0, 0.0)).unwrap() {
        assert!(k.iter().all(|v| *v == C64::new(0.0, 0.0)));
    }
    let eps = C64::new(52.7, -12.76);
    let base = assemble_rhs(&hinc, &mesh, eps).unwrap();
    let src4 = DipoleSource { power: 4.0, ..src };
    let doubled = assemble_rhs(&azimuthal_decompose(&mesh, &src4, 11).unwrap(), &mesh, eps).unwrap();
    for (a, b) in base.iter().zip(&doubled) {
        let scale = norm(a);
        for (x, y) in a.iter().zip(b) {
            assert!((2.0 * x - y).norm() <= 1e-12 * scale);
        }
    }
}

#[test]
fn harmonics_follow_the_source_azimuth() {
    let mesh = cylinder_mesh();
    let a = DipoleSource::new([1.0, 0.0, 0.1], 1.0, C64::new(0.3, 0.0), F).unwrap();
    let b = DipoleSource::new([1.0, 1.3, 0.1], 1.0, C64::new(0.3, 0.0), F).unwrap();
    let ha = azimuthal_decompose(&mesh, &a, 5).unwrap();
    let hb = azimuthal_decompose(&mesh, &b, 5).unwrap();
    assert_eq!(hb.source_azimuth, 1.3);
    for m in 0..=5 {
        for q in (0..ha.points().len()).step_by(97) {
            assert_eq!(ha.sample(m, q), hb.sample(m, q));
        }
    }
    let q = 11;
    let [rho, z] = hb.points()[q];
    let e = incident_field([rho, 1.3 + 0.2, z], &b).unwrap();
    let s = hb.synthesize(q, 0.2);
    let err = norm(&[s[0] - e[0], s[1] - e[1], s[2] - e[2]]);
    assert!(err < 1e-3 * norm(&e));
}

#[test]
fn source_inside_the_domain_is_rejected() {
    let mesh = cylinder_mesh();
    let src = DipoleSource::new([0.15, 0.0, 0.1], 1.0, C64::new(0.3, 0.0), F).unwrap();
    assert!(matches!(azimuthal_decompose(&mesh, &src, 11), Err(borfem::Error::Domain(_))));
}
