//! One body of revolution, many sources: assembles once, factorizes each
//! harmonic once per batch of sources and hands back per-source results.

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use log::{debug, info};

use crate::constants::omega;
use crate::exec::Exec;
use crate::excitation::{assemble_rhs, azimuthal_decompose_with, default_azimuth_samples, DipoleSource};
use crate::exterior::{EquivalentSurface, SurfaceProbes, SurfaceSpec};
use crate::fem::assembly::{AssemblyOptions, HarmonicSystem};
use crate::fem::pml::{PmlMap, DEFAULT_ORDER, DEFAULT_REFLECTION};
use crate::fem::reconstruct::HarmonicSample;
use crate::fem::solve::{HarmonicSolution, HarmonicSolver};
use crate::geometry::{triangulate, BoRProfile, DomainSpec, Mesh2D};
use crate::{Error, Result, C64};

/// Default memory set aside for right-hand sides of one batch.
pub const DEFAULT_BATCH_BYTES: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelOptions {
    /// Multiplies every target element size.
    pub mesh_scale: f64,
    /// Ground surface impedance (Ω); zero makes the ground a perfect conductor.
    pub zeta: C64,
    /// Grows the physical region to at least `(ρ, z_top)`.
    pub enlarge: Option<[f64; 2]>,
    pub pml_reflection: f64,
    /// Azimuthal samples for the incident field; `None` picks the default.
    pub azimuth_samples: Option<usize>,
    pub batch_bytes: usize,
    pub exec: Exec,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            mesh_scale: 1.0,
            zeta: C64::new(0.0, 0.0),
            enlarge: None,
            pml_reflection: DEFAULT_REFLECTION,
            azimuth_samples: None,
            batch_bytes: DEFAULT_BATCH_BYTES,
            exec: Exec::default(),
        }
    }
}

/// Wall-clock time spent on one harmonic, summed over batches.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HarmonicTiming {
    pub m: usize,
    pub factor: Duration,
    pub solve: Duration,
    pub sources: usize,
}

/// Assembled FEM model of a homogeneous body.
pub struct BodyModel {
    system: HarmonicSystem,
    opts: ModelOptions,
    assembly: Duration,
    timings: Mutex<Vec<HarmonicTiming>>,
}

impl BodyModel {
    pub fn build(profile: BoRProfile, freq: f64, body_eps: C64, ground: bool, opts: ModelOptions) -> Result<Self> {
        let mut spec = DomainSpec::around(profile, freq, body_eps, ground)?.with_mesh_scale(opts.mesh_scale);
        if let Some([rho, z]) = opts.enlarge {
            spec = spec.enlarged_to(rho, z);
        }
        let t = Instant::now();
        let mesh = Arc::new(triangulate(&spec)?);
        let pml = PmlMap::new(mesh.bounds(), omega(freq), DEFAULT_ORDER, opts.pml_reflection);
        let system = HarmonicSystem::assemble(
            mesh,
            freq,
            body_eps,
            pml,
            AssemblyOptions {
                zeta: opts.zeta,
                exec: opts.exec,
            },
        )?;
        info!(
            "body model: {} triangles, {} unknowns per harmonic, {} nonzeros",
            system.mesh().num_triangles(),
            system.dim(),
            system.nnz()
        );
        Ok(BodyModel {
            system,
            opts,
            assembly: t.elapsed(),
            timings: Mutex::new(Vec::new()),
        })
    }

    pub fn system(&self) -> &HarmonicSystem {
        &self.system
    }

    pub fn mesh(&self) -> &Arc<Mesh2D> {
        self.system.mesh()
    }

    pub fn freq(&self) -> f64 {
        self.system.freq()
    }

    pub fn body_eps(&self) -> C64 {
        self.system.body_eps()
    }

    /// Meshing plus assembly time.
    pub fn assembly_time(&self) -> Duration {
        self.assembly
    }

    /// Factorization and solve times per harmonic accumulated by every run so far.
    pub fn timings(&self) -> Vec<HarmonicTiming> {
        self.timings.lock().expect("timing lock").clone()
    }

    fn record(&self, m: usize, factor: Duration, solve: Duration, sources: usize) {
        let mut t = self.timings.lock().expect("timing lock");
        while t.len() <= m {
            let m = t.len();
            t.push(HarmonicTiming {
                m,
                ..HarmonicTiming::default()
            });
        }
        t[m].factor += factor;
        t[m].solve += solve;
        t[m].sources += sources;
    }

    /// Default equivalent surface for `max_harmonic` harmonics.
    pub fn default_surface(&self, max_harmonic: usize) -> Result<SurfaceSpec> {
        SurfaceSpec::around(self.mesh(), self.freq(), max_harmonic)
    }

    /// Known terms of every harmonic for one source (rotated to `φ_s = 0`).
    pub fn rhs(&self, src: &DipoleSource, max_harmonic: usize) -> Result<Vec<Vec<C64>>> {
        if (src.freq - self.freq()).abs() > 1e-9 * self.freq() {
            return Err(Error::Consistency(format!(
                "source frequency {} differs from model frequency {}",
                src.freq,
                self.freq()
            )));
        }
        let n_phi = self.opts.azimuth_samples.unwrap_or_else(|| default_azimuth_samples(max_harmonic));
        let hinc = azimuthal_decompose_with(self.mesh(), src, max_harmonic, n_phi, self.opts.exec)?;
        assemble_rhs(&hinc, self.mesh(), self.body_eps())
    }

    fn batch_len(&self, max_harmonic: usize) -> usize {
        let per_source = self.system.dim() * (max_harmonic + 1) * std::mem::size_of::<C64>();
        (self.opts.batch_bytes / per_source.max(1)).max(1)
    }

    /// Solves every source, calling `sink(source, m, u)` with each harmonic
    /// solution; sources are visited batch by batch, harmonics in order.
    pub fn run<F>(&self, sources: &[DipoleSource], max_harmonic: usize, mut sink: F) -> Result<()>
    where
        F: FnMut(usize, usize, &[C64]) -> Result<()>,
    {
        let batch = self.batch_len(max_harmonic);
        let solver = HarmonicSolver::new(&self.system, self.opts.exec);
        for (b, chunk) in sources.chunks(batch).enumerate() {
            let first = b * batch;
            debug!("sources {}..{}: building known terms", first, first + chunk.len());
            let rhs: Vec<Vec<Vec<C64>>> = chunk
                .iter()
                .map(|s| self.rhs(s, max_harmonic))
                .collect::<Result<_>>()?;
            for m in 0..=max_harmonic {
                let t0 = Instant::now();
                let f = solver.factor(m)?;
                let t1 = Instant::now();
                let ks: Vec<&[C64]> = rhs.iter().map(|r| r[m].as_slice()).collect();
                let us = f.solve(&ks)?;
                self.record(m, t1 - t0, t1.elapsed(), chunk.len());
                for (i, u) in us.into_iter().enumerate() {
                    sink(first + i, m, &u)?;
                }
            }
        }
        Ok(())
    }

    /// Full scattered-field solutions, one per source.
    pub fn solve(&self, sources: &[DipoleSource], max_harmonic: usize) -> Result<Vec<HarmonicSolution>> {
        let mut out: Vec<HarmonicSolution> = sources
            .iter()
            .map(|_| HarmonicSolution {
                mesh: self.mesh().clone(),
                freq: self.freq(),
                harmonics: Vec::with_capacity(max_harmonic + 1),
            })
            .collect();
        self.run(sources, max_harmonic, |i, _, u| {
            out[i].harmonics.push(u.to_vec());
            Ok(())
        })?;
        Ok(out)
    }

    /// Equivalent surface of each source, in the room frame of that source,
    /// passed to `sink` as soon as its last harmonic is solved.
    pub fn surfaces<F>(&self, sources: &[DipoleSource], max_harmonic: usize, spec: &SurfaceSpec, mut sink: F) -> Result<()>
    where
        F: FnMut(usize, EquivalentSurface) -> Result<()>,
    {
        let probes = SurfaceProbes::new(self.mesh(), spec)?;
        let w = omega(self.freq());
        let n_t = self.system.num_t();
        let mut pending: Vec<Vec<Vec<HarmonicSample>>> = vec![Vec::new(); sources.len()];
        self.run(sources, max_harmonic, |i, m, u| {
            pending[i].push(probes.sample(&u[..n_t], &u[n_t..], m, w));
            if m == max_harmonic {
                let h = std::mem::take(&mut pending[i]);
                let surf = probes.surface(self.freq(), &h).with_frame_azimuth(sources[i].position[1]);
                sink(i, surf)?;
            }
            Ok(())
        })
    }
}
