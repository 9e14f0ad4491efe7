//! Equivalent currents on a cylindrical Huygens surface around the body and
//! the scattered field they radiate, with ground images scaled by `Γ`.
//!
//! Image convention for the plane `z = 0`: an electric current keeps its
//! vertical component and flips its horizontal ones; a magnetic current does
//! the opposite. Both images are scaled by `Γ`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::{omega, wavelength, wavenumber, MU0};
use crate::exec::Exec;
use crate::excitation::DipoleSource;
use crate::fem::reconstruct::{HarmonicSample, Probe};
use crate::fem::solve::HarmonicSolution;
use crate::geometry::{Mesh2D, Region};
use crate::{Error, Result, C64};

/// Clearance between the body and the default surface, in wavelengths.
pub const SURFACE_CLEARANCE_WAVELENGTHS: f64 = 0.15;
/// Default generatrix spacing, in wavelengths.
pub const GENERATRIX_SPACING_WAVELENGTHS: f64 = 1.0 / 12.0;
/// Minimum distance from the surface for the radiation kernels, in wavelengths.
pub const MIN_OBSERVATION_WAVELENGTHS: f64 = 2.0;

/// Green's-function terms kept when radiating the equivalent currents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `1/R` terms only.
    #[default]
    Radiation,
    /// Exact free-space dyadic, including `1/R²` and `1/R³` terms.
    Full,
}

/// Geometry and sampling of the Huygens cylinder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSpec {
    pub radius: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    /// Azimuthal samples.
    pub n_az: usize,
    /// Target spacing along the generatrix (m).
    pub spacing: f64,
    /// Whether the bottom cap is sampled; off when the ground closes the surface.
    pub bottom_cap: bool,
}

impl SurfaceSpec {
    /// Default cylinder around the BODY region of `mesh`.
    pub fn around(mesh: &Mesh2D, freq: f64, max_harmonic: usize) -> Result<Self> {
        let (rho_max, z_min, z_max) = body_extent(mesh)?;
        let lambda = wavelength(freq);
        let gap = SURFACE_CLEARANCE_WAVELENGTHS * lambda;
        let ground = mesh.bounds().ground;
        Ok(SurfaceSpec {
            radius: rho_max + gap,
            z_lo: if ground { 0.0 } else { z_min - gap },
            z_hi: z_max + gap,
            n_az: 16 * (max_harmonic + 1),
            spacing: GENERATRIX_SPACING_WAVELENGTHS * lambda,
            bottom_cap: !ground,
        })
    }

    pub fn with_sampling(mut self, n_az: usize, spacing: f64) -> Self {
        self.n_az = n_az;
        self.spacing = spacing;
        self
    }

    /// Checks that the surface encloses the body and stays in the physical region.
    pub fn validate(&self, mesh: &Mesh2D) -> Result<()> {
        if !(self.spacing > 0.0) || self.n_az < 4 || !(self.z_hi > self.z_lo) || !(self.radius > 0.0) {
            return Err(Error::Configuration(format!("invalid equivalent-surface sampling {self:?}")));
        }
        let (rho_max, z_min, z_max) = body_extent(mesh)?;
        let b = mesh.bounds();
        if self.radius <= rho_max || self.z_hi <= z_max || (self.bottom_cap && self.z_lo >= z_min) {
            return Err(Error::Geometry("equivalent surface intersects the body".into()));
        }
        if !self.bottom_cap && !(b.ground && self.z_lo == 0.0) {
            return Err(Error::Geometry("an open-bottom equivalent surface must rest on the ground".into()));
        }
        if self.radius >= b.air_radius || self.z_hi >= b.air_top || (self.bottom_cap && self.z_lo <= b.air_bottom) {
            return Err(Error::Geometry("equivalent surface reaches the absorbing layer".into()));
        }
        Ok(())
    }

    /// Generatrix samples: `([ρ, z], [n_ρ, n_z], ρ·dl)`.
    fn generatrix(&self) -> Vec<([f64; 2], [f64; 2], f64)> {
        let mut out = Vec::new();
        let cap = |z: f64, nz: f64, out: &mut Vec<_>| {
            let n = (self.radius / self.spacing).ceil().max(1.0) as usize;
            let d = self.radius / n as f64;
            for i in 0..n {
                let rho = (i as f64 + 0.5) * d;
                out.push(([rho, z], [0.0, nz], rho * d));
            }
        };
        if self.bottom_cap {
            cap(self.z_lo, -1.0, &mut out);
        }
        let h = self.z_hi - self.z_lo;
        let n = (h / self.spacing).ceil().max(1.0) as usize;
        let d = h / n as f64;
        for i in 0..n {
            out.push(([self.radius, self.z_lo + (i as f64 + 0.5) * d], [1.0, 0.0], self.radius * d));
        }
        cap(self.z_hi, 1.0, &mut out);
        out
    }
}

fn body_extent(mesh: &Mesh2D) -> Result<(f64, f64, f64)> {
    let mut ext = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for t in (0..mesh.num_triangles()).filter(|&t| mesh.region(t) == Region::Body) {
        for &v in &mesh.triangles()[t] {
            let [rho, z] = mesh.nodes()[v];
            ext = (ext.0.max(rho), ext.1.min(z), ext.2.max(z));
        }
    }
    if !ext.1.is_finite() {
        return Err(Error::Geometry("mesh has no body region".into()));
    }
    Ok(ext)
}

/// One surface patch: Cartesian position, outward normal, area and currents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    pub position: [f64; 3],
    pub normal: [f64; 3],
    pub area: f64,
    pub j: [C64; 3],
    pub m: [C64; 3],
}

#[derive(Clone, Debug)]
pub struct EquivalentSurface {
    pub spec: SurfaceSpec,
    pub freq: f64,
    pub samples: Vec<SurfaceSample>,
    pub kernel: Kernel,
    /// Rotation from the solution frame (source at `φ = 0`) to the room frame.
    pub frame_azimuth: f64,
}

/// Cartesian components of a cylindrical vector at azimuth `phi`.
fn to_xyz(v: [C64; 3], phi: f64) -> [C64; 3] {
    let (s, c) = phi.sin_cos();
    [v[0] * c - v[1] * s, v[0] * s + v[1] * c, v[2]]
}

fn cross(a: [C64; 3], b: [C64; 3]) -> [C64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn real(v: [f64; 3]) -> [C64; 3] {
    v.map(|x| C64::new(x, 0.0))
}

/// Field probes at the generatrix samples of a surface, reusable across
/// solutions on the same mesh.
#[derive(Clone, Debug)]
pub struct SurfaceProbes {
    spec: SurfaceSpec,
    generatrix: Vec<([f64; 2], [f64; 2], f64)>,
    probes: Vec<Probe>,
}

impl SurfaceProbes {
    pub fn new(mesh: &Mesh2D, spec: &SurfaceSpec) -> Result<Self> {
        spec.validate(mesh)?;
        let generatrix = spec.generatrix();
        let probes = generatrix
            .iter()
            .map(|&(p, _, _)| {
                Probe::new(mesh, p).map_err(|e| match e {
                    Error::Location { rho, z } => {
                        Error::Geometry(format!("equivalent surface leaves the physical region at ({rho}, {z})"))
                    }
                    other => other,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SurfaceProbes {
            spec: *spec,
            generatrix,
            probes,
        })
    }

    pub fn spec(&self) -> &SurfaceSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    /// Harmonic `m` of the fields at every generatrix sample.
    pub fn sample(&self, u_t: &[C64], u_phi: &[C64], m: usize, omega: f64) -> Vec<HarmonicSample> {
        self.probes.iter().map(|p| p.sample(u_t, u_phi, m, omega)).collect()
    }

    /// Currents from per-harmonic samples `harmonics[m][g]`.
    pub fn surface(&self, freq: f64, harmonics: &[Vec<HarmonicSample>]) -> EquivalentSurface {
        let spec = &self.spec;
        let dphi = 2.0 * PI / spec.n_az as f64;
        let zero = C64::new(0.0, 0.0);
        let mut samples = Vec::with_capacity(self.generatrix.len() * spec.n_az);
        for (g, &([rho, z], [nr, nz], w)) in self.generatrix.iter().enumerate() {
            for k in 0..spec.n_az {
                let phi = k as f64 * dphi;
                let (mut e, mut h) = ([zero; 3], [zero; 3]);
                for (m, hm) in harmonics.iter().enumerate() {
                    let (em, hm) = hm[g].at(m, phi);
                    for i in 0..3 {
                        e[i] += em[i];
                        h[i] += hm[i];
                    }
                }
                let (e, h) = (to_xyz(e, phi), to_xyz(h, phi));
                let (sp, cp) = phi.sin_cos();
                let normal = [nr * cp, nr * sp, nz];
                let n = real(normal);
                samples.push(SurfaceSample {
                    position: [rho * cp, rho * sp, z],
                    normal,
                    area: w * dphi,
                    j: cross(n, h),
                    m: cross(n, e).map(|v| -v),
                });
            }
        }
        EquivalentSurface {
            spec: *spec,
            freq,
            samples,
            kernel: Kernel::default(),
            frame_azimuth: 0.0,
        }
    }
}

/// `J = n × H` and `M = -n × E` at every surface sample.
pub fn extract_currents(sol: &HarmonicSolution, spec: &SurfaceSpec, exec: Exec) -> Result<EquivalentSurface> {
    let probes = SurfaceProbes::new(&sol.mesh, spec)?;
    let omega = omega(sol.freq);
    let harmonics = exec.map_range(sol.harmonics.len(), |m| probes.sample(sol.u_t(m), sol.u_phi(m), m, omega));
    Ok(probes.surface(sol.freq, &harmonics))
}

fn rotate_z(p: [f64; 3], a: f64) -> [f64; 3] {
    let (s, c) = a.sin_cos();
    [p[0] * c - p[1] * s, p[0] * s + p[1] * c, p[2]]
}

fn rotate_z_c(v: [C64; 3], a: f64) -> [C64; 3] {
    let (s, c) = a.sin_cos();
    [v[0] * c - v[1] * s, v[0] * s + v[1] * c, v[2]]
}

impl EquivalentSurface {
    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_frame_azimuth(mut self, phi: f64) -> Self {
        self.frame_azimuth = phi;
        self
    }

    /// Every current multiplied by `s`.
    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        for p in &mut out.samples {
            p.j = p.j.map(|v| v * s);
            p.m = p.m.map(|v| v * s);
        }
        out
    }

    fn local(&self, r: [f64; 3]) -> [f64; 3] {
        rotate_z(r, -self.frame_azimuth)
    }

    fn inside(&self, p: [f64; 3]) -> bool {
        let s = &self.spec;
        let below = if s.bottom_cap { p[2] <= s.z_lo } else { p[2] < 0.0 };
        p[0].hypot(p[1]) < s.radius && p[2] < s.z_hi && !below
    }

    /// Distance from a room-frame point to the cylinder.
    pub fn distance(&self, r: [f64; 3]) -> f64 {
        let p = self.local(r);
        let s = &self.spec;
        let rho = p[0].hypot(p[1]);
        let dr = (rho - s.radius).max(0.0);
        let dz = (p[2] - s.z_hi).max(s.z_lo - p[2]).max(0.0);
        if dr == 0.0 && dz == 0.0 {
            let side = s.radius - rho;
            let cap = (s.z_hi - p[2]).min(if s.bottom_cap { p[2] - s.z_lo } else { f64::INFINITY });
            return side.min(cap);
        }
        dr.hypot(dz)
    }

    /// Whether `r` is far enough from the surface for the radiation kernels.
    pub fn is_far(&self, r: [f64; 3]) -> bool {
        self.distance(r) >= MIN_OBSERVATION_WAVELENGTHS * wavelength(self.freq)
    }

    /// Scattered `E` (Cartesian, room frame) at the room-frame point `r`.
    pub fn exterior_field(&self, r: [f64; 3], gamma: C64) -> Result<[C64; 3]> {
        let p = self.local(r);
        if self.inside(p) {
            return Err(Error::Domain(format!(
                "point ({}, {}, {}) lies inside the equivalent surface",
                r[0], r[1], r[2]
            )));
        }
        if !self.spec.bottom_cap && p[2] < 0.0 {
            return Err(Error::Domain(format!("point ({}, {}, {}) lies below the ground", r[0], r[1], r[2])));
        }
        Ok(rotate_z_c(self.radiate(p, gamma), self.frame_azimuth))
    }

    /// Field of the currents at a solution-frame point, without domain checks.
    pub fn radiate(&self, p: [f64; 3], gamma: C64) -> [C64; 3] {
        let k = wavenumber(self.freq);
        let wmu = C64::new(0.0, -omega(self.freq) * MU0);
        let zero = C64::new(0.0, 0.0);
        let mut e = [zero; 3];
        let with_image = gamma != zero;
        for s in &self.samples {
            let c = self.kernel_terms(p, s.position, s.j, s.m, k, wmu);
            for i in 0..3 {
                e[i] += c[i] * s.area;
            }
            if with_image {
                let pos = [s.position[0], s.position[1], -s.position[2]];
                let j = [-s.j[0], -s.j[1], s.j[2]];
                let m = [s.m[0], s.m[1], -s.m[2]];
                let c = self.kernel_terms(p, pos, j, m, k, wmu);
                for i in 0..3 {
                    e[i] += gamma * c[i] * s.area;
                }
            }
        }
        e
    }

    fn kernel_terms(&self, p: [f64; 3], q: [f64; 3], j: [C64; 3], m: [C64; 3], k: f64, wmu: C64) -> [C64; 3] {
        let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let n = [d[0] / r, d[1] / r, d[2] / r];
        let g = C64::from_polar(1.0 / (4.0 * PI * r), -k * r);
        let jn = j[0] * n[0] + j[1] * n[1] + j[2] * n[2];
        let (a, b, c) = match self.kernel {
            Kernel::Radiation => (C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0)),
            Kernel::Full => {
                let u = 1.0 / C64::new(0.0, k * r);
                (1.0 + u + u * u, 1.0 + 3.0 * u + 3.0 * u * u, 1.0 + u)
            }
        };
        let nm = cross(real(n), m);
        let jk = C64::new(0.0, k);
        let mut out = [C64::new(0.0, 0.0); 3];
        for i in 0..3 {
            out[i] = g * (wmu * (a * j[i] - b * jn * n[i]) + jk * c * nm[i]);
        }
        out
    }
}

/// Far-field cut `E(θ)` on the half-plane `φ`, with `e^{-jkr}/r` removed.
#[derive(Clone, Debug, PartialEq)]
pub struct FarFieldPattern {
    pub phi: f64,
    pub theta: Vec<f64>,
    pub e_theta: Vec<C64>,
    pub e_phi: Vec<C64>,
    /// `|E|²` normalized to its maximum, in dB.
    pub directivity_db: Vec<f64>,
}

impl FarFieldPattern {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "theta_deg,phi_deg,e_theta_re,e_theta_im,e_phi_re,e_phi_im,directivity_db")?;
        for i in 0..self.theta.len() {
            writeln!(
                out,
                "{:.6},{:.6},{:.9e},{:.9e},{:.9e},{:.9e},{:.6}",
                self.theta[i].to_degrees(),
                self.phi.to_degrees(),
                self.e_theta[i].re,
                self.e_theta[i].im,
                self.e_phi[i].re,
                self.e_phi[i].im,
                self.directivity_db[i]
            )?;
        }
        Ok(())
    }
}

/// Asymptotic field of the surface currents (and of the dipole itself when
/// `source` is given) along the directions `(θ, φ)`, room frame.
pub fn far_field(
    surf: &EquivalentSurface,
    source: Option<&DipoleSource>,
    gamma: C64,
    theta: &[f64],
    phi: f64,
) -> Result<FarFieldPattern> {
    if !surf.spec.bottom_cap && theta.iter().any(|&t| !(t >= 0.0 && t <= PI / 2.0)) {
        return Err(Error::Domain("far-field directions must lie in the upper half-space over ground".into()));
    }
    let k = wavenumber(surf.freq);
    let wmu = C64::new(0.0, -omega(surf.freq) * MU0);
    let jk = C64::new(0.0, k);
    let zero = C64::new(0.0, 0.0);
    let phi_local = phi - surf.frame_azimuth;
    let mut e_theta = Vec::with_capacity(theta.len());
    let mut e_phi = Vec::with_capacity(theta.len());
    for &t in theta {
        let (st, ct) = t.sin_cos();
        let (sp, cp) = phi_local.sin_cos();
        let n = [st * cp, st * sp, ct];
        let mut e = [zero; 3];
        let mut add = |q: [f64; 3], j: [C64; 3], m: [C64; 3], w: C64| {
            let phase = C64::from_polar(1.0 / (4.0 * PI), k * (n[0] * q[0] + n[1] * q[1] + n[2] * q[2])) * w;
            let jn = j[0] * n[0] + j[1] * n[1] + j[2] * n[2];
            let nm = cross(real(n), m);
            for i in 0..3 {
                e[i] += phase * (wmu * (j[i] - jn * n[i]) + jk * nm[i]);
            }
        };
        for s in &surf.samples {
            add(s.position, s.j, s.m, C64::new(s.area, 0.0));
            if gamma != zero {
                let q = [s.position[0], s.position[1], -s.position[2]];
                add(q, [-s.j[0], -s.j[1], s.j[2]], [s.m[0], s.m[1], -s.m[2]], gamma * s.area);
            }
        }
        if let Some(src) = source {
            let il = C64::new(src.moment(), 0.0);
            let q = rotate_z(src.xyz(), -surf.frame_azimuth);
            add(q, [zero, zero, il], [zero; 3], C64::new(1.0, 0.0));
            if gamma != zero {
                add([q[0], q[1], -q[2]], [zero, zero, il], [zero; 3], gamma);
            }
        }
        let th = [ct * cp, ct * sp, -st];
        let ph = [-sp, cp, 0.0];
        e_theta.push(e[0] * th[0] + e[1] * th[1] + e[2] * th[2]);
        e_phi.push(e[0] * ph[0] + e[1] * ph[1] + e[2] * ph[2]);
    }
    let power: Vec<f64> = e_theta.iter().zip(&e_phi).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
    let peak = power.iter().cloned().fold(0.0, f64::max);
    let directivity_db = power
        .iter()
        .map(|&p| if peak > 0.0 { 10.0 * (p / peak).max(1e-30).log10() } else { f64::NEG_INFINITY })
        .collect();
    Ok(FarFieldPattern {
        phi,
        theta: theta.to_vec(),
        e_theta,
        e_phi,
        directivity_db,
    })
}
