//! Reference problems with known answers: a body with no contrast, a
//! dielectric sphere against the Mie series, and the cylinder on a ground
//! plane checked against a larger FEM domain.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use crate::constants::{omega, wavelength, wavenumber, MU0};
use crate::excitation::DipoleSource;
use crate::exterior::{far_field, EquivalentSurface, FarFieldPattern, Kernel};
use crate::fem::reconstruct_fields;
use crate::geometry::{build_cylinder_profile, build_sphere_profile, BoRProfile};
use crate::simulation::{BodyModel, ModelOptions};
use crate::{Error, Result, C64};

pub const DEFAULT_FREQ: f64 = 2.43e9;
/// Muscle at 2.43 GHz as used for the cylinder reference case.
pub const CYLINDER_EPS: C64 = C64::new(52.7, -12.76);

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroContrastReport {
    /// `‖u^{(m)}‖ / ‖k₀² K_ref^{(m)}‖` per harmonic, where `K_ref` is the known
    /// term of the same source with unit contrast.
    pub ratios: Vec<f64>,
    pub elapsed: Duration,
}

impl ZeroContrastReport {
    pub fn worst(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

/// Solves the cylinder case with `ε_r = 1` for each source.
pub fn zero_contrast(sources: &[DipoleSource], max_harmonic: usize, mesh_scale: f64) -> Result<ZeroContrastReport> {
    let t = Instant::now();
    let opts = ModelOptions {
        mesh_scale,
        ..ModelOptions::default()
    };
    let freq = sources.first().map_or(DEFAULT_FREQ, |s| s.freq);
    let profile = build_cylinder_profile(0.1, 0.2)?;
    let vacuum = BodyModel::build(profile.clone(), freq, C64::new(1.0, 0.0), true, opts)?;
    let reference = BodyModel::build(profile, freq, C64::new(2.0, 0.0), true, opts)?;
    let sols = vacuum.solve(sources, max_harmonic)?;
    let k2 = wavenumber(freq).powi(2);
    let norm = |v: &[C64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let mut ratios = vec![0.0f64; max_harmonic + 1];
    for (src, sol) in sources.iter().zip(&sols) {
        let k_ref = reference.rhs(src, max_harmonic)?;
        for m in 0..=max_harmonic {
            let scale = k2 * norm(&k_ref[m]);
            let u = norm(&sol.harmonics[m]);
            let r = if scale > 0.0 { u / scale } else { u };
            ratios[m] = ratios[m].max(r);
        }
    }
    Ok(ZeroContrastReport {
        ratios,
        elapsed: t.elapsed(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MieCase {
    pub radius: f64,
    pub eps: C64,
    pub freq: f64,
    /// Dipole distance from the sphere centre, in wavelengths.
    pub distance_wavelengths: f64,
    pub max_harmonic: usize,
    pub mesh_scale: f64,
    /// Scattering angles in the E-plane, degrees from forward.
    pub angles_deg: Vec<f64>,
}

impl Default for MieCase {
    fn default() -> Self {
        MieCase {
            radius: 0.1,
            eps: C64::new(4.0, -0.5),
            freq: DEFAULT_FREQ,
            distance_wavelengths: 20.0,
            max_harmonic: 11,
            mesh_scale: 1.0,
            angles_deg: (5..=175).map(f64::from).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MieReport {
    pub angles_deg: Vec<f64>,
    /// `r·|E_s| / |E_inc|` from the FEM and the series.
    pub fem: Vec<f64>,
    pub mie: Vec<f64>,
    /// Relative L2 difference over the angles.
    pub l2_error: f64,
    pub triangles: usize,
    pub unknowns: usize,
    pub elapsed: Duration,
}

/// Free-space sphere lit by a distant dipole; scattered far field in the
/// plane containing the incidence direction and the polarization.
pub fn mie_sphere(case: &MieCase) -> Result<MieReport> {
    let t = Instant::now();
    let lambda = wavelength(case.freq);
    let center = 0.5;
    let profile = build_sphere_profile(case.radius, center, false)?;
    let model = BodyModel::build(
        profile,
        case.freq,
        case.eps,
        false,
        ModelOptions {
            mesh_scale: case.mesh_scale,
            ..ModelOptions::default()
        },
    )?;
    let r0 = case.distance_wavelengths * lambda;
    let src = DipoleSource::new([r0, 0.0, center], 1.0, C64::new(0.0, 0.0), case.freq)?;
    let surf = single_surface(&model, &src, case.max_harmonic)?;
    let e_inc = omega(case.freq) * MU0 * src.moment() / (4.0 * PI * r0);

    // The wave travels along -x; the scattering angle is measured from -x
    // towards +z, so the cut visits φ = π first and φ = 0 past 90°. The
    // far-field phase reference is the origin, which only affects phase.
    let mut fem = Vec::with_capacity(case.angles_deg.len());
    for &deg in &case.angles_deg {
        let sc = deg.to_radians();
        let (phi, theta) = if sc <= FRAC_PI_2 { (PI, FRAC_PI_2 - sc) } else { (0.0, sc - FRAC_PI_2) };
        let ff = far_field(&surf, None, C64::new(0.0, 0.0), &[theta], phi)?;
        fem.push((ff.e_theta[0].norm_sqr() + ff.e_phi[0].norm_sqr()).sqrt() / e_inc);
    }
    let k = wavenumber(case.freq);
    let index = mie_oracle::refractive_index_from_eps(case.eps.conj());
    let angles: Vec<f64> = case.angles_deg.iter().map(|d| d.to_radians()).collect();
    let mie = mie_oracle::far_field_magnitude(k, case.radius, index, &angles, true);
    Ok(MieReport {
        angles_deg: case.angles_deg.clone(),
        l2_error: relative_l2(&fem, &mie),
        fem,
        mie,
        triangles: model.mesh().num_triangles(),
        unknowns: model.system().dim(),
        elapsed: t.elapsed(),
    })
}

fn relative_l2(a: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(reference).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = reference.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn single_surface(model: &BodyModel, src: &DipoleSource, max_harmonic: usize) -> Result<EquivalentSurface> {
    let spec = model.default_surface(max_harmonic)?;
    let mut out = None;
    model.surfaces(std::slice::from_ref(src), max_harmonic, &spec, |_, s| {
        out = Some(s);
        Ok(())
    })?;
    out.ok_or_else(|| Error::Consistency("no surface produced".into()))
}

/// Dielectric cylinder standing on a ground plane, lit by a vertical dipole.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderCase {
    pub radius: f64,
    pub height: f64,
    pub eps: C64,
    pub freq: f64,
    /// Dipole at `(ρ, φ, z)`.
    pub source: [f64; 3],
    pub gamma: C64,
    pub max_harmonic: usize,
    pub mesh_scale: f64,
    /// Probe ring distance outside the equivalent surface, in wavelengths.
    pub ring_offset_wavelengths: f64,
    pub ring_height: f64,
    pub ring_points: usize,
    pub kernel: Kernel,
}

impl Default for CylinderCase {
    fn default() -> Self {
        CylinderCase {
            radius: 0.1,
            height: 0.2,
            eps: CYLINDER_EPS,
            freq: DEFAULT_FREQ,
            source: [1.0, 0.0, 0.1],
            gamma: C64::new(1.0, 0.0),
            max_harmonic: 11,
            mesh_scale: 1.0,
            ring_offset_wavelengths: 2.5,
            ring_height: 0.1,
            ring_points: 72,
            kernel: Kernel::default(),
        }
    }
}

impl CylinderCase {
    pub fn profile(&self) -> Result<BoRProfile> {
        build_cylinder_profile(self.radius, self.height)
    }

    pub fn dipole(&self) -> Result<DipoleSource> {
        DipoleSource::new(self.source, 1.0, self.gamma, self.freq)
    }

    pub fn model(&self, enlarge: Option<[f64; 2]>) -> Result<BodyModel> {
        BodyModel::build(
            self.profile()?,
            self.freq,
            self.eps,
            true,
            ModelOptions {
                mesh_scale: self.mesh_scale,
                enlarge,
                ..ModelOptions::default()
            },
        )
    }

    /// Equivalent currents of the standard-size model.
    pub fn surface(&self) -> Result<(BodyModel, EquivalentSurface)> {
        let model = self.model(None)?;
        let surf = single_surface(&model, &self.dipole()?, self.max_harmonic)?.with_kernel(self.kernel);
        Ok((model, surf))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub ring_radius: f64,
    /// Complex relative L2 difference of `E` over the ring.
    pub l2_error: f64,
    /// Relative L2 difference of `|E|` over the ring.
    pub magnitude_error: f64,
    pub triangles: usize,
    pub enlarged_triangles: usize,
    pub elapsed: Duration,
}

/// Exterior field of the equivalent currents against a direct FEM solution on
/// an enlarged domain, on a horizontal ring around the cylinder.
pub fn cylinder_consistency(case: &CylinderCase) -> Result<ConsistencyReport> {
    let t = Instant::now();
    let lambda = wavelength(case.freq);
    let (model, surf) = case.surface()?;
    let ring = surf.spec.radius + case.ring_offset_wavelengths * lambda;
    let big = case.model(Some([ring + 0.5 * lambda, case.ring_height.max(surf.spec.z_hi) + 0.5 * lambda]))?;
    let sol = big.solve(&[case.dipole()?], case.max_harmonic)?.remove(0);
    let pts: Vec<[f64; 3]> = (0..case.ring_points)
        .map(|i| [ring, 2.0 * PI * i as f64 / case.ring_points as f64, case.ring_height])
        .collect();
    let fem = reconstruct_fields(&sol, &pts)?;
    let (mut num, mut den, mut mag_num) = (0.0, 0.0, 0.0);
    for (p, (e_fem, _)) in pts.iter().zip(&fem) {
        let (s, c) = p[1].sin_cos();
        let ex = surf.exterior_field([p[0] * c, p[0] * s, p[2]], case.gamma)?;
        let e_ext = [ex[0] * c + ex[1] * s, -ex[0] * s + ex[1] * c, ex[2]];
        let norm = |v: &[C64; 3]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..3 {
            num += (e_ext[i] - e_fem[i]).norm_sqr();
            den += e_fem[i].norm_sqr();
        }
        mag_num += (norm(&e_ext) - norm(e_fem)).powi(2);
    }
    Ok(ConsistencyReport {
        ring_radius: ring,
        l2_error: (num / den).sqrt(),
        magnitude_error: (mag_num / den).sqrt(),
        triangles: model.mesh().num_triangles(),
        enlarged_triangles: big.mesh().num_triangles(),
        elapsed: t.elapsed(),
    })
}

/// Normalized directivity of dipole plus cylinder over the ground in the
/// `φ = 0` half-plane, `θ` from zenith to horizon.
pub fn cylinder_directivity(case: &CylinderCase, theta_deg: &[f64]) -> Result<FarFieldPattern> {
    let (_, surf) = case.surface()?;
    let theta: Vec<f64> = theta_deg.iter().map(|d| d.to_radians()).collect();
    far_field(&surf, Some(&case.dipole()?), case.gamma, &theta, case.source[1])
}
