//! Vertical Hertzian dipole over a partially reflecting ground: incident field,
//! its azimuthal harmonics on the body, and the FEM known terms.
//!
//! The dipole radiates `E = -jωμ₀ p_⊥ e^{-jkR}/(4πR)` (radiation term only);
//! the ground adds an image at `(ρ_s, φ_s, -z_s)` with moment `Γp`.

use std::f64::consts::PI;

use log::warn;

use crate::constants::{omega, wavelength, wavenumber, ETA0, MU0};
use crate::exec::Exec;
use crate::fem::basis::Element;
use crate::fem::quadrature::TRI7;
use crate::fem::reconstruct::{c_m, s_m};
use crate::geometry::{Mesh2D, Region};
use crate::{Error, Result, C64};

/// Distance below which the radiation-only field is flagged, in wavelengths.
pub const NEAR_ZONE_WAVELENGTHS: f64 = 5.0;

/// Default number of azimuthal samples for `M` harmonics.
pub fn default_azimuth_samples(max_harmonic: usize) -> usize {
    256.max(16 * (max_harmonic + 1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipoleSource {
    /// `(ρ_s, φ_s, z_s)` in metres and radians.
    pub position: [f64; 3],
    /// Radiated power `P_r` in watts.
    pub power: f64,
    /// Ground image coefficient `Γ`.
    pub gamma: C64,
    pub freq: f64,
}

impl DipoleSource {
    pub fn new(position: [f64; 3], power: f64, gamma: C64, freq: f64) -> Result<Self> {
        let src = DipoleSource {
            position,
            power,
            gamma,
            freq,
        };
        src.validate()?;
        Ok(src)
    }

    /// Source at the room point `(x, y, z)` relative to the body axis.
    pub fn at_xyz(p: [f64; 3], power: f64, gamma: C64, freq: f64) -> Result<Self> {
        Self::new([p[0].hypot(p[1]), p[1].atan2(p[0]), p[2]], power, gamma, freq)
    }

    pub fn validate(&self) -> Result<()> {
        let [rho, phi, z] = self.position;
        if !(rho >= 0.0) || !phi.is_finite() || !rho.is_finite() {
            return Err(Error::Parameter(format!("source position {:?} is invalid", self.position)));
        }
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::Parameter(format!("source height must be positive, got {z}")));
        }
        if !(self.power > 0.0) || !self.power.is_finite() {
            return Err(Error::Parameter(format!("radiated power must be positive, got {}", self.power)));
        }
        if !(self.gamma.norm() <= 1.0) {
            return Err(Error::Parameter(format!("|Γ| must not exceed 1, got {}", self.gamma.norm())));
        }
        if !(self.freq > 0.0) || !self.freq.is_finite() {
            return Err(Error::Parameter(format!("frequency must be positive, got {}", self.freq)));
        }
        Ok(())
    }

    pub fn moment(&self) -> f64 {
        dipole_moment(self.power, self.freq)
    }

    pub fn xyz(&self) -> [f64; 3] {
        let [rho, phi, z] = self.position;
        [rho * phi.cos(), rho * phi.sin(), z]
    }

    /// The same source rotated to `φ_s = 0`.
    pub fn normalized(&self) -> Self {
        let mut s = *self;
        s.position[1] = 0.0;
        s
    }

    /// Cylindrical components `[ρ, φ, z]` at `(ρ, φ, z)` given `cos φ` and
    /// `sin φ`, with the source taken at `φ_s = 0`.
    fn field_in_source_frame(&self, rho: f64, cos_phi: f64, sin_phi: f64, z: f64) -> Result<[C64; 3]> {
        let k = wavenumber(self.freq);
        let amp = C64::new(0.0, -omega(self.freq) * MU0 * self.moment());
        let [rho_s, _, z_s] = self.position;
        let d_rho = rho - rho_s * cos_phi;
        let d_phi = rho_s * sin_phi;
        let term = |dz: f64| -> Result<[C64; 3]> {
            let big_r = (d_rho * d_rho + d_phi * d_phi + dz * dz).sqrt();
            if !(big_r > 1e-12 * (1.0 + z_s)) {
                return Err(Error::Singularity(format!(
                    "incident field evaluated at a source point (ρ = {rho}, z = {z})"
                )));
            }
            let nz = dz / big_r;
            let g = C64::from_polar(1.0 / (4.0 * PI * big_r), -k * big_r);
            Ok([g * (-nz * d_rho / big_r), g * (-nz * d_phi / big_r), g * (1.0 - nz * nz)])
        };
        let mut e = term(z - z_s)?;
        if self.gamma != C64::new(0.0, 0.0) {
            let img = term(z + z_s)?;
            for i in 0..3 {
                e[i] += self.gamma * img[i];
            }
        }
        Ok(e.map(|v| v * amp))
    }

    /// Incident field at the Cartesian point `r`, Cartesian components.
    pub fn field_xyz(&self, r: [f64; 3]) -> Result<[C64; 3]> {
        let k = wavenumber(self.freq);
        let amp = C64::new(0.0, -omega(self.freq) * MU0 * self.moment());
        let s = self.xyz();
        let mut e = radiation_term(r, s, k, C64::new(1.0, 0.0))?;
        if self.gamma != C64::new(0.0, 0.0) {
            let img = radiation_term(r, [s[0], s[1], -s[2]], k, self.gamma)?;
            for i in 0..3 {
                e[i] += img[i];
            }
        }
        Ok(e.map(|v| v * amp))
    }
}

/// `p_⊥ e^{-jkR}/(4πR)` for a unit vertical moment scaled by `scale`.
fn radiation_term(r: [f64; 3], s: [f64; 3], k: f64, scale: C64) -> Result<[C64; 3]> {
    let d = [r[0] - s[0], r[1] - s[1], r[2] - s[2]];
    let big_r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(big_r > 1e-12 * (1.0 + s[2].abs())) {
        return Err(Error::Singularity(format!(
            "incident field evaluated at a source point ({}, {}, {})",
            s[0], s[1], s[2]
        )));
    }
    let n = [d[0] / big_r, d[1] / big_r, d[2] / big_r];
    let p_perp = [-n[2] * n[0], -n[2] * n[1], 1.0 - n[2] * n[2]];
    let g = scale * C64::from_polar(1.0 / (4.0 * PI * big_r), -k * big_r);
    Ok(p_perp.map(|v| g * v))
}

/// Source moment `Il` of a dipole radiating `power` watts.
pub fn dipole_moment(power: f64, freq: f64) -> f64 {
    let lambda = wavelength(freq);
    (3.0 * power * lambda * lambda / (PI * ETA0)).sqrt()
}

/// Incident field at `r = (ρ, φ, z)`, cylindrical components `[ρ, φ, z]`.
pub fn incident_field(r: [f64; 3], src: &DipoleSource) -> Result<[C64; 3]> {
    let [rho, phi, z] = r;
    let (s, c) = phi.sin_cos();
    let e = src.field_xyz([rho * c, rho * s, z])?;
    Ok([e[0] * c + e[1] * s, -e[0] * s + e[1] * c, e[2]])
}

/// Azimuthal harmonics of the incident field on the body quadrature points,
/// for a source rotated to `φ_s = 0`.
#[derive(Clone, Debug)]
pub struct HarmonicIncidentField {
    pub max_harmonic: usize,
    /// Azimuth of the original source; fields at `φ` correspond to `φ - φ_s`.
    pub source_azimuth: f64,
    num_triangles: usize,
    /// BODY triangles in mesh order.
    triangles: Vec<usize>,
    /// `(ρ, z)` of the 7 quadrature points of each BODY triangle.
    points: Vec<[f64; 2]>,
    e_rho: Vec<Vec<C64>>,
    e_z: Vec<Vec<C64>>,
    /// Sine projections; entry 0 is identically zero.
    e_phi: Vec<Vec<C64>>,
}

impl HarmonicIncidentField {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn triangles(&self) -> &[usize] {
        &self.triangles
    }

    /// `(e_ρ, e_φ, e_z)` of harmonic `m` at sample `q`.
    pub fn sample(&self, m: usize, q: usize) -> [C64; 3] {
        [self.e_rho[m][q], self.e_phi[m][q], self.e_z[m][q]]
    }

    /// Partial Fourier sum at sample `q` and azimuth `φ` (source frame).
    pub fn synthesize(&self, q: usize, phi: f64) -> [C64; 3] {
        let mut e = [C64::new(0.0, 0.0); 3];
        for m in 0..=self.max_harmonic {
            let (c, s) = (c_m(m, phi), s_m(m, phi));
            e[0] += self.e_rho[m][q] * c;
            e[1] += self.e_phi[m][q] * s;
            e[2] += self.e_z[m][q] * c;
        }
        e
    }
}

/// Harmonics `0..=max_harmonic` with the default sample count.
pub fn azimuthal_decompose(mesh: &Mesh2D, src: &DipoleSource, max_harmonic: usize) -> Result<HarmonicIncidentField> {
    azimuthal_decompose_with(mesh, src, max_harmonic, default_azimuth_samples(max_harmonic), Exec::default())
}

pub fn azimuthal_decompose_with(
    mesh: &Mesh2D,
    src: &DipoleSource,
    max_harmonic: usize,
    n_phi: usize,
    exec: Exec,
) -> Result<HarmonicIncidentField> {
    src.validate()?;
    if max_harmonic < 1 {
        return Err(Error::Configuration("at least one harmonic above m = 0 is required".into()));
    }
    if n_phi < 4 * (max_harmonic + 1) {
        return Err(Error::Configuration(format!(
            "{n_phi} azimuthal samples cannot resolve {} harmonics (need at least {})",
            max_harmonic + 1,
            4 * (max_harmonic + 1)
        )));
    }
    let b = mesh.bounds();
    let [rho_s, _, z_s] = src.position;
    if rho_s < b.rho_max() && z_s < b.z_max() && z_s > b.z_min() {
        return Err(Error::Domain(format!(
            "source at (ρ, z) = ({rho_s}, {z_s}) lies inside the FEM domain"
        )));
    }
    let src0 = src.normalized();
    let triangles: Vec<usize> = (0..mesh.num_triangles()).filter(|&t| mesh.region(t) == Region::Body).collect();
    let points: Vec<[f64; 2]> = triangles
        .iter()
        .flat_map(|&t| {
            let e = element(mesh, t);
            TRI7.iter().map(move |&(l, _)| e.point(l))
        })
        .collect();

    let lambda = wavelength(src.freq);
    let nearest = points
        .iter()
        .map(|p| (p[0] - rho_s).hypot(p[1] - z_s))
        .fold(f64::INFINITY, f64::min);
    if nearest < NEAR_ZONE_WAVELENGTHS * lambda {
        warn!(
            "body lies {:.2} wavelengths from the source; the radiation-only incident field is inaccurate there",
            nearest / lambda
        );
    }

    // With the source at φ = 0 every projected integrand is even in φ, so the
    // trapezoid sum folds onto [0, π].
    let dphi = 2.0 * PI / n_phi as f64;
    let half = n_phi / 2;
    let fold = |k: usize| if k == 0 || 2 * k == n_phi { 1.0 } else { 2.0 };
    let cos_tab: Vec<Vec<f64>> = (0..=max_harmonic)
        .map(|m| (0..=half).map(|k| c_m(m, k as f64 * dphi) * dphi * fold(k)).collect())
        .collect();
    let sin_tab: Vec<Vec<f64>> = (0..=max_harmonic)
        .map(|m| (0..=half).map(|k| s_m(m, k as f64 * dphi) * dphi * fold(k)).collect())
        .collect();

    let trig: Vec<(f64, f64)> = (0..=half).map(|k| (k as f64 * dphi).cos()).zip((0..=half).map(|k| (k as f64 * dphi).sin())).collect();
    let per_point = exec.map_slice(&points, |&[rho, z]| -> Result<Vec<[C64; 3]>> {
        let field: Vec<[C64; 3]> = trig
            .iter()
            .map(|&(c, s)| src0.field_in_source_frame(rho, c, s, z))
            .collect::<Result<_>>()?;
        Ok((0..=max_harmonic)
            .map(|m| {
                let mut acc = [C64::new(0.0, 0.0); 3];
                for (k, e) in field.iter().enumerate() {
                    acc[0] += e[0] * cos_tab[m][k];
                    acc[1] += e[1] * sin_tab[m][k];
                    acc[2] += e[2] * cos_tab[m][k];
                }
                acc
            })
            .collect())
    });

    let n = points.len();
    let zero = C64::new(0.0, 0.0);
    let mut e_rho = vec![vec![zero; n]; max_harmonic + 1];
    let mut e_phi = vec![vec![zero; n]; max_harmonic + 1];
    let mut e_z = vec![vec![zero; n]; max_harmonic + 1];
    for (q, r) in per_point.into_iter().enumerate() {
        for (m, v) in r?.into_iter().enumerate() {
            e_rho[m][q] = v[0];
            e_phi[m][q] = v[1];
            e_z[m][q] = v[2];
        }
    }
    Ok(HarmonicIncidentField {
        max_harmonic,
        source_azimuth: src.position[1],
        num_triangles: mesh.num_triangles(),
        triangles,
        points,
        e_rho,
        e_z,
        e_phi,
    })
}

fn element(mesh: &Mesh2D, t: usize) -> Element {
    let tri = mesh.triangles()[t];
    let nodes = mesh.nodes();
    Element::new(
        [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]],
        [mesh.edge_sign(t, 0), mesh.edge_sign(t, 1), mesh.edge_sign(t, 2)],
    )
}

/// Known terms `K^{(m)} = [K_t; K_φ]` over all mesh unknowns, `m = 0..=M`.
pub fn assemble_rhs(hinc: &HarmonicIncidentField, mesh: &Mesh2D, body_eps: C64) -> Result<Vec<Vec<C64>>> {
    let body: Vec<usize> = (0..mesh.num_triangles()).filter(|&t| mesh.region(t) == Region::Body).collect();
    if hinc.num_triangles != mesh.num_triangles() || hinc.triangles != body {
        return Err(Error::Consistency(
            "incident-field samples were taken on a different mesh".into(),
        ));
    }
    let contrast = body_eps - 1.0;
    let zero = C64::new(0.0, 0.0);
    let mut out = vec![vec![zero; mesh.num_dofs()]; hinc.max_harmonic + 1];
    for (i, &t) in hinc.triangles.iter().enumerate() {
        let e = element(mesh, t);
        let t_dofs = mesh.t_dofs(t);
        let phi_dofs = mesh.phi_dofs(t);
        for (j, &(l, w)) in TRI7.iter().enumerate() {
            let q = 7 * i + j;
            let [rho, _] = hinc.points[q];
            let w = w * e.area;
            let (tau, _) = e.edge_basis(l);
            let (phi, _) = e.nodal_basis(l);
            for (m, k) in out.iter_mut().enumerate() {
                let (er, ez, ep) = (hinc.e_rho[m][q], hinc.e_z[m][q], hinc.e_phi[m][q]);
                for (a, &d) in t_dofs.iter().enumerate() {
                    k[d] += contrast * (er * tau[a][0] + ez * tau[a][1]) * (w * rho);
                }
                if m > 0 {
                    for (a, &d) in phi_dofs.iter().enumerate() {
                        k[d] += contrast * ep * (w * phi[a]);
                    }
                }
            }
        }
    }
    Ok(out)
}
