use std::f64::consts::PI;

use mie_oracle::{amplitudes, coefficients, far_field_magnitude, solve};
use num_complex::Complex64;

#[test]
fn matched_sphere_does_not_scatter() {
    for (a, b) in coefficients(3.7, Complex64::new(1.0, 0.0)) {
        assert!(a.norm() < 1e-13 && b.norm() < 1e-13);
    }
}

#[test]
fn small_sphere_matches_dipole_polarizability() {
    let x: f64 = 0.01;
    let m = Complex64::new(2.0, 0.25);
    let m2 = m * m;
    let s = -Complex64::i() * x.powi(3) * (m2 - 1.0) / (m2 + 2.0);
    for theta in [0.0, 0.6, 1.3, 2.4] {
        let amp = amplitudes(x, m, &[theta])[0];
        assert!((amp.s1 - s).norm() <= 1e-3 * s.norm());
        assert!((amp.s2 - s * theta.cos()).norm() <= 1e-3 * s.norm());
    }
}

#[test]
fn forward_and_backward_amplitudes() {
    let amps = amplitudes(4.2, Complex64::new(1.6, 0.05), &[0.0, PI]);
    assert!((amps[0].s1 - amps[0].s2).norm() < 1e-12 * amps[0].s1.norm());
    assert!((amps[1].s1 + amps[1].s2).norm() < 1e-10 * amps[1].s1.norm());
}

#[test]
fn angular_integral_gives_scattering_efficiency() {
    let x = 2.6;
    let m = Complex64::new(1.8, 0.2);
    let n = 4000;
    let angles: Vec<f64> = (0..n).map(|i| PI * (i as f64 + 0.5) / n as f64).collect();
    let r = solve(x, m, &angles);
    let integral: f64 = r
        .amplitudes
        .iter()
        .zip(&angles)
        .map(|(a, t)| (a.s1.norm_sqr() + a.s2.norm_sqr()) * t.sin())
        .sum::<f64>()
        * PI
        / n as f64;
    assert!((integral / (x * x) - r.q_sca).abs() < 1e-5 * r.q_sca);
    assert!(r.q_ext > r.q_sca);
}

#[test]
fn far_field_magnitude_scales_amplitude_by_wavenumber() {
    let k = 50.0;
    let m = Complex64::new(2.0, 0.1);
    let angles = [0.3, 1.7];
    let amps = amplitudes(k * 0.04, m, &angles);
    let par = far_field_magnitude(k, 0.04, m, &angles, true);
    let perp = far_field_magnitude(k, 0.04, m, &angles, false);
    for i in 0..2 {
        assert!((par[i] - amps[i].s2.norm() / k).abs() < 1e-15);
        assert!((perp[i] - amps[i].s1.norm() / k).abs() < 1e-15);
    }
}
