//! Mie-series scattering by a homogeneous sphere.
//!
//! Follows the classical Bohren–Huffman recurrences. Everything here uses the
//! physics time convention `exp(-iωt)`, so an absorbing sphere has a refractive
//! index with a *positive* imaginary part. Callers working in the engineering
//! convention `exp(+jωt)` (permittivity `ε' - jε''`) should pass
//! `refractive_index_from_eps(eps.conj())`.
//!
//! This crate is deliberately free of any dependency on the FEM solver so that
//! it can serve as an independent reference.

use num_complex::Complex64;

/// Scattering amplitudes for one scattering angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Amplitudes {
    /// Perpendicular polarization (electric field normal to the scattering plane).
    pub s1: Complex64,
    /// Parallel polarization (electric field in the scattering plane).
    pub s2: Complex64,
}

/// Efficiencies and per-angle amplitudes for a sphere.
#[derive(Clone, Debug)]
pub struct MieResult {
    pub q_ext: f64,
    pub q_sca: f64,
    pub q_back: f64,
    pub amplitudes: Vec<Amplitudes>,
}

/// Refractive index `sqrt(eps)` on the principal branch (non-negative real part).
pub fn refractive_index_from_eps(eps: Complex64) -> Complex64 {
    eps.sqrt()
}

/// Number of multipole terms used by the series for size parameter `x`.
pub fn series_length(x: f64) -> usize {
    (x + 4.0 * x.cbrt() + 2.0).ceil() as usize
}

/// Multipole coefficients `(a_n, b_n)` for `n = 1..=nstop`.
pub fn coefficients(x: f64, m: Complex64) -> Vec<(Complex64, Complex64)> {
    assert!(x > 0.0, "size parameter must be positive");
    let nstop = series_length(x);
    let y = m * x;
    let nmx = (nstop as f64).max(y.norm()).ceil() as usize + 15;

    // Logarithmic derivative D_n(mx), downward recurrence.
    let mut d = vec![Complex64::new(0.0, 0.0); nmx + 1];
    for n in (1..=nmx).rev() {
        let nf = n as f64;
        d[n - 1] = nf / y - 1.0 / (d[n] + nf / y);
    }

    let mut psi0 = x.cos();
    let mut psi1 = x.sin();
    let mut chi0 = -x.sin();
    let mut chi1 = x.cos();
    let mut xi1 = Complex64::new(psi1, -chi1);

    let mut out = Vec::with_capacity(nstop);
    for n in 1..=nstop {
        let nf = n as f64;
        let psi = (2.0 * nf - 1.0) * psi1 / x - psi0;
        let chi = (2.0 * nf - 1.0) * chi1 / x - chi0;
        let xi = Complex64::new(psi, -chi);

        let da = d[n] / m + nf / x;
        let db = d[n] * m + nf / x;
        let an = (da * psi - psi1) / (da * xi - xi1);
        let bn = (db * psi - psi1) / (db * xi - xi1);
        out.push((an, bn));

        psi0 = psi1;
        psi1 = psi;
        chi0 = chi1;
        chi1 = chi;
        xi1 = Complex64::new(psi1, -chi1);
    }
    out
}

/// Scattering amplitudes at the given scattering angles (radians, 0 = forward).
pub fn amplitudes(x: f64, m: Complex64, angles: &[f64]) -> Vec<Amplitudes> {
    let coeffs = coefficients(x, m);
    angles
        .iter()
        .map(|&theta| amplitudes_from_coefficients(&coeffs, theta))
        .collect()
}

fn amplitudes_from_coefficients(coeffs: &[(Complex64, Complex64)], theta: f64) -> Amplitudes {
    let mu = theta.cos();
    let mut pi_prev = 0.0;
    let mut pi_n = 1.0;
    let mut s1 = Complex64::new(0.0, 0.0);
    let mut s2 = Complex64::new(0.0, 0.0);
    for (idx, &(an, bn)) in coeffs.iter().enumerate() {
        let nf = (idx + 1) as f64;
        let tau_n = nf * mu * pi_n - (nf + 1.0) * pi_prev;
        let fac = (2.0 * nf + 1.0) / (nf * (nf + 1.0));
        s1 += fac * (an * pi_n + bn * tau_n);
        s2 += fac * (an * tau_n + bn * pi_n);
        let pi_next = ((2.0 * nf + 1.0) * mu * pi_n - (nf + 1.0) * pi_prev) / nf;
        pi_prev = pi_n;
        pi_n = pi_next;
    }
    Amplitudes { s1, s2 }
}

/// Full solution: efficiencies plus amplitudes at `angles`.
pub fn solve(x: f64, m: Complex64, angles: &[f64]) -> MieResult {
    let coeffs = coefficients(x, m);
    let mut q_sca = 0.0;
    let mut q_ext = 0.0;
    let mut back = Complex64::new(0.0, 0.0);
    for (idx, &(an, bn)) in coeffs.iter().enumerate() {
        let nf = (idx + 1) as f64;
        let w = 2.0 * nf + 1.0;
        q_sca += w * (an.norm_sqr() + bn.norm_sqr());
        q_ext += w * (an + bn).re;
        let sign = if idx % 2 == 0 { -1.0 } else { 1.0 };
        back += w * sign * (an - bn);
    }
    let x2 = x * x;
    MieResult {
        q_ext: 2.0 * q_ext / x2,
        q_sca: 2.0 * q_sca / x2,
        q_back: back.norm_sqr() / x2,
        amplitudes: angles
            .iter()
            .map(|&t| amplitudes_from_coefficients(&coeffs, t))
            .collect(),
    }
}

/// Far-field scattered amplitude `r·|E_s|` for unit incident amplitude,
/// wavenumber `k` (rad/m) and sphere radius `radius` (m).
///
/// `parallel = true` selects the polarization lying in the scattering plane.
pub fn far_field_magnitude(
    k: f64,
    radius: f64,
    m: Complex64,
    angles: &[f64],
    parallel: bool,
) -> Vec<f64> {
    amplitudes(k * radius, m, angles)
        .into_iter()
        .map(|a| if parallel { a.s2.norm() } else { a.s1.norm() } / k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bohren_huffman_reference_sphere() {
        // radius 0.525 µm at 0.6328 µm, m = 1.55: the worked example that ships with BHMIE.
        let x = 2.0 * std::f64::consts::PI * 0.525 / 0.6328;
        let r = solve(x, Complex64::new(1.55, 0.0), &[0.0, std::f64::consts::PI]);
        assert_relative_eq!(r.q_sca, 3.10543, max_relative = 1e-4);
        assert_relative_eq!(r.q_ext, 3.10543, max_relative = 1e-4);
        assert_relative_eq!(r.q_back, 2.92534, max_relative = 1e-4);
    }

    #[test]
    fn optical_theorem() {
        let x = 5.1;
        let m = Complex64::new(2.0, 0.12);
        let r = solve(x, m, &[0.0]);
        let s0 = r.amplitudes[0].s1;
        assert_relative_eq!(r.q_ext, 4.0 / (x * x) * s0.re, max_relative = 1e-10);
        // forward amplitudes coincide
        assert_relative_eq!((r.amplitudes[0].s1 - r.amplitudes[0].s2).norm(), 0.0, epsilon = 1e-10);
        assert!(r.q_ext > r.q_sca, "absorbing sphere must extinguish more than it scatters");
    }

    #[test]
    fn rayleigh_limit() {
        let x = 0.01;
        let m = Complex64::new(1.5, 0.0);
        let r = solve(x, m, &[]);
        let m2 = m * m;
        let pol = ((m2 - 1.0) / (m2 + 2.0)).norm_sqr();
        assert_relative_eq!(r.q_sca, 8.0 / 3.0 * x.powi(4) * pol, max_relative = 1e-3);
    }

    #[test]
    fn lossless_sphere_conserves_energy() {
        let r = solve(4.0, Complex64::new(1.33, 0.0), &[]);
        assert_relative_eq!(r.q_ext, r.q_sca, max_relative = 1e-10);
    }

    #[test]
    fn side_scatter_polarizations_differ() {
        let amps = amplitudes(2.0, Complex64::new(1.5, 0.0), &[std::f64::consts::FRAC_PI_2]);
        // At 90° the parallel channel is strongly suppressed for small spheres.
        assert!(amps[0].s2.norm() < amps[0].s1.norm());
    }
}
