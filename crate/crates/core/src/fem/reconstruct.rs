//! Interior fields from harmonic coefficients.
//!
//! For harmonic `m` the `ρ`, `z` components of `E` and the `φ` component of
//! `H` vary as `c_m(φ)`; the others vary as `s_m(φ)`, where
//! `c_m = cos(mφ)/√(πε_m)` (`ε_0 = 2`, else 1) and `s_m = sin(mφ)/√π`.

use std::f64::consts::PI;

use crate::constants::MU0;
use crate::fem::basis::Element;
use crate::fem::solve::HarmonicSolution;
use crate::geometry::Mesh2D;
use crate::{Error, Result, C64};

/// Relative offset used to evaluate on the axis itself.
const AXIS_NUDGE: f64 = 1e-7;

pub fn c_m(m: usize, phi: f64) -> f64 {
    let eps = if m == 0 { 2.0 } else { 1.0 };
    (m as f64 * phi).cos() / (PI * eps).sqrt()
}

pub fn s_m(m: usize, phi: f64) -> f64 {
    (m as f64 * phi).sin() / PI.sqrt()
}

/// One harmonic of `E` and `H` at a meridian-plane point, components
/// `[ρ, φ, z]`, with the azimuthal factors removed.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HarmonicSample {
    pub e: [C64; 3],
    pub h: [C64; 3],
}

impl HarmonicSample {
    /// Fields at azimuth `phi`.
    pub fn at(&self, m: usize, phi: f64) -> ([C64; 3], [C64; 3]) {
        let (c, s) = (c_m(m, phi), s_m(m, phi));
        (
            [self.e[0] * c, self.e[1] * s, self.e[2] * c],
            [self.h[0] * s, self.h[1] * c, self.h[2] * s],
        )
    }
}

/// Basis values at a fixed point, reusable across harmonics and solutions.
#[derive(Clone, Debug)]
pub struct Probe {
    rho: f64,
    t_dofs: [usize; 8],
    phi_dofs: [usize; 6],
    tau: [[f64; 2]; 8],
    curl: [f64; 8],
    phi: [f64; 6],
    gphi: [[f64; 2]; 6],
}

impl Probe {
    /// Locates `p = [ρ, z]`; fails outside the physical (non-PML) region.
    pub fn new(mesh: &Mesh2D, p: [f64; 2]) -> Result<Self> {
        let outside = || Error::Location { rho: p[0], z: p[1] };
        if !(p[0] >= 0.0) || !mesh.bounds().in_physical(p) {
            return Err(outside());
        }
        let (t, _) = mesh.locate(p).ok_or_else(outside)?;
        let tri = mesh.triangles()[t];
        let nodes = mesh.nodes();
        let e = Element::new(
            [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]],
            [mesh.edge_sign(t, 0), mesh.edge_sign(t, 1), mesh.edge_sign(t, 2)],
        );
        let rho = p[0].max(AXIS_NUDGE * mesh.longest_edge(t));
        let l = e.barycentric([rho, p[1]]);
        let (tau, curl) = e.edge_basis(l);
        let (phi, gphi) = e.nodal_basis(l);
        let n_t = mesh.num_t_dofs();
        let mut phi_dofs = mesh.phi_dofs(t);
        for d in &mut phi_dofs {
            *d -= n_t;
        }
        Ok(Probe {
            rho,
            t_dofs: mesh.t_dofs(t),
            phi_dofs,
            tau,
            curl,
            phi,
            gphi,
        })
    }

    /// Harmonic `m` of `E` and `H` from in-plane coefficients `u_t` and
    /// nodal coefficients `u_phi`.
    pub fn sample(&self, u_t: &[C64], u_phi: &[C64], m: usize, omega: f64) -> HarmonicSample {
        let zero = C64::new(0.0, 0.0);
        let (mut et, mut curl) = ([zero; 2], zero);
        for (k, &d) in self.t_dofs.iter().enumerate() {
            let u = u_t[d];
            et[0] += u * self.tau[k][0];
            et[1] += u * self.tau[k][1];
            curl += u * self.curl[k];
        }
        let (mut psi, mut dpsi) = (zero, [zero; 2]);
        for (k, &d) in self.phi_dofs.iter().enumerate() {
            let v = u_phi[d];
            psi += v * self.phi[k];
            dpsi[0] += v * self.gphi[k][0];
            dpsi[1] += v * self.gphi[k][1];
        }
        let mf = m as f64;
        let rho = self.rho;
        let e = [et[0], psi / rho, et[1]];
        let curl_e = [
            (-mf * et[1] - dpsi[1]) / rho,
            -curl,
            (mf * et[0] + dpsi[0]) / rho,
        ];
        let k = C64::new(0.0, -omega * MU0);
        HarmonicSample {
            e,
            h: [curl_e[0] / k, curl_e[1] / k, curl_e[2] / k],
        }
    }
}

impl HarmonicSolution {
    /// Harmonic samples at `p = [ρ, z]` for `m = 0..=M`.
    pub fn harmonics_at(&self, p: [f64; 2]) -> Result<Vec<HarmonicSample>> {
        let probe = Probe::new(&self.mesh, p)?;
        let omega = crate::constants::omega(self.freq);
        Ok((0..self.harmonics.len())
            .map(|m| probe.sample(self.u_t(m), self.u_phi(m), m, omega))
            .collect())
    }
}

/// Scattered `E` and `H` (cylindrical components) at each `(ρ, φ, z)`.
pub fn reconstruct_fields(sol: &HarmonicSolution, points: &[[f64; 3]]) -> Result<Vec<([C64; 3], [C64; 3])>> {
    points
        .iter()
        .map(|&[rho, phi, z]| {
            let hs = sol.harmonics_at([rho, z])?;
            let zero = C64::new(0.0, 0.0);
            let (mut e, mut h) = ([zero; 3], [zero; 3]);
            for (m, s) in hs.iter().enumerate() {
                let (em, hm) = s.at(m, phi);
                for i in 0..3 {
                    e[i] += em[i];
                    h[i] += hm[i];
                }
            }
            Ok((e, h))
        })
        .collect()
}
