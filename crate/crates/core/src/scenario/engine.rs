//! Link-level field synthesis for a scenario.
//!
//! The body model is built once. Moving the body or switching transmitters only
//! moves the dipole relative to the body axis, so every (transmitter, body
//! placement) pair becomes one more right-hand side for the same system.

use std::collections::HashMap;
use std::io::Write;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{RssiRecord, FLAG_NEAR_FIELD};
use super::{Antenna, MicroMovementGrid, Scenario};
use crate::excitation::DipoleSource;
use crate::exterior::{EquivalentSurface, SurfaceSpec};
use crate::geometry::build_human_profile;
use crate::simulation::{BodyModel, ModelOptions};
use crate::{Error, Result, C64};

/// One transmitter with the body axis at `center`, or without the body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Job {
    pub tx_id: u32,
    pub center: Option<[f64; 2]>,
}

/// Vertical field at one receiver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RxField {
    pub rx_id: u32,
    /// Total `E_z` (incident plus scattered).
    pub e_z: C64,
    pub incident: C64,
    /// The receiver is too close to the equivalent surface for the kernels.
    pub near_field: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Plane {
    /// Horizontal plane in room coordinates.
    Xy,
    /// Vertical half-plane through the body axis.
    Rz,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Scattered,
    Total,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldMapSpec {
    pub plane: Plane,
    pub quantity: Quantity,
    /// Height of an `Xy` map or room-frame azimuth of an `Rz` map. `None`
    /// picks the transmitter height or the direction of the transmitter.
    pub cut: Option<f64>,
    pub grid: [usize; 2],
    /// `[u_min, u_max, v_min, v_max]`; `None` covers the room (`Xy`) or
    /// `ρ ∈ [0, 3]`, `z ∈ [0, 2.5]` (`Rz`).
    pub extent: Option<[f64; 4]>,
}

/// One grid point in room coordinates; `e_z` is `None` where the field is not
/// computed (inside the equivalent surface, below ground or at the source).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldPoint {
    pub u: f64,
    pub v: f64,
    pub xyz: [f64; 3],
    pub e_z: Option<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldMap {
    pub plane: Plane,
    pub quantity: Quantity,
    pub cut: f64,
    pub grid: [usize; 2],
    /// Row-major: `v` outer, `u` inner.
    pub points: Vec<FieldPoint>,
}

impl FieldMap {
    pub fn masked(&self) -> usize {
        self.points.iter().filter(|p| p.e_z.is_none()).count()
    }

    /// `u,v,x,y,z,ez_re,ez_im,ez_abs,masked`; masked rows carry `NaN`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "v", "x", "y", "z", "ez_re", "ez_im", "ez_abs", "masked"])?;
        for p in &self.points {
            let e = p.e_z.unwrap_or(C64::new(f64::NAN, f64::NAN));
            w.write_record([
                p.u.to_string(),
                p.v.to_string(),
                p.xyz[0].to_string(),
                p.xyz[1].to_string(),
                p.xyz[2].to_string(),
                e.re.to_string(),
                e.im.to_string(),
                e.norm().to_string(),
                u8::from(p.e_z.is_none()).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub struct Engine {
    scn: Scenario,
    model: BodyModel,
    surface: SurfaceSpec,
}

impl Engine {
    pub fn new(scn: Scenario) -> Result<Self> {
        scn.validate()?;
        let eps = scn.body.permittivity(scn.frequency)?;
        let s = &scn.solver;
        let opts = ModelOptions {
            mesh_scale: s.mesh_scale,
            zeta: C64::new(s.zeta[0], s.zeta[1]),
            pml_reflection: s.pml_reflection,
            azimuth_samples: s.azimuth_samples,
            batch_bytes: s.batch_mib.max(1) << 20,
            ..ModelOptions::default()
        };
        let profile = build_human_profile(scn.body.height, scn.body.girth)?;
        let model = BodyModel::build(profile, scn.frequency, eps, true, opts)?;
        let mut surface = model.default_surface(scn.max_harmonic)?;
        if let Some(n) = s.surface_azimuth {
            surface.n_az = n;
        }
        if let Some(d) = s.surface_spacing {
            surface.spacing = d;
        }
        surface.validate(model.mesh())?;
        info!("body permittivity {eps:.3}");
        Ok(Engine { scn, model, surface })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scn
    }

    pub fn model(&self) -> &BodyModel {
        &self.model
    }

    pub fn surface(&self) -> &SurfaceSpec {
        &self.surface
    }

    pub fn rssi_dbm(&self, e_z: C64) -> f64 {
        10.0 * e_z.norm_sqr().log10() + self.scn.dbm_offset
    }

    fn source(&self, tx: &Antenna, center: [f64; 2]) -> Result<DipoleSource> {
        DipoleSource::at_xyz(
            [tx.x - center[0], tx.y - center[1], tx.z],
            self.scn.tx_power,
            self.scn.gamma(),
            self.scn.frequency,
        )
    }

    /// Whether a source at `src` lies outside the FEM domain.
    fn source_fits(&self, src: &DipoleSource) -> bool {
        let b = self.model.mesh().bounds();
        src.position[0] >= b.rho_max() || src.position[2] >= b.z_max()
    }

    fn incident(&self, tx: &Antenna, rx: &Antenna) -> Result<C64> {
        let src = self.source(tx, [0.0, 0.0])?;
        Ok(src.field_xyz(rx.xyz())?[2])
    }

    /// Field at every receiver of each job. A job whose transmitter falls
    /// inside the FEM domain yields `None`; receivers inside the equivalent
    /// surface are left out.
    pub fn simulate(&self, jobs: &[Job]) -> Result<Vec<Option<Vec<RxField>>>> {
        let mut out: Vec<Option<Vec<RxField>>> = vec![None; jobs.len()];
        let mut sources = Vec::new();
        let mut owner = Vec::new();
        for (j, job) in jobs.iter().enumerate() {
            let tx = self.scn.antenna(job.tx_id)?;
            match job.center {
                None => {
                    let fields = self
                        .scn
                        .receivers(job.tx_id)
                        .into_iter()
                        .map(|rx| {
                            let e = self.incident(tx, rx)?;
                            Ok(RxField {
                                rx_id: rx.id,
                                e_z: e,
                                incident: e,
                                near_field: false,
                            })
                        })
                        .collect::<Result<_>>()?;
                    out[j] = Some(fields);
                }
                Some(c) => {
                    let src = self.source(tx, c)?;
                    if self.source_fits(&src) {
                        sources.push(src);
                        owner.push(j);
                    } else {
                        warn!("transmitter {} lies inside the FEM domain of the body at {c:?}; job skipped", tx.id);
                    }
                }
            }
        }
        let gamma = self.scn.gamma();
        let kernel = self.scn.solver.kernel;
        self.model.surfaces(&sources, self.scn.max_harmonic, &self.surface, |i, surf| {
            let job = jobs[owner[i]];
            let c = job.center.expect("body jobs have a center");
            let tx = self.scn.antenna(job.tx_id)?;
            let surf = surf.with_kernel(kernel);
            let mut fields = Vec::new();
            for rx in self.scn.receivers(job.tx_id) {
                let r = [rx.x - c[0], rx.y - c[1], rx.z];
                let scattered = match surf.exterior_field(r, gamma) {
                    Ok(e) => e[2],
                    Err(Error::Domain(_)) => {
                        warn!("receiver {} lies inside the equivalent surface; link {}→{} skipped", rx.id, tx.id, rx.id);
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let incident = self.incident(tx, rx)?;
                fields.push(RxField {
                    rx_id: rx.id,
                    e_z: incident + scattered,
                    incident,
                    near_field: !surf.is_far(r),
                });
            }
            out[owner[i]] = Some(fields);
            Ok(())
        })?;
        Ok(out)
    }

    /// Equivalent surface of transmitter `tx_id` with the body axis at
    /// `center`, in coordinates relative to that axis.
    pub fn surface_for(&self, tx_id: u32, center: [f64; 2]) -> Result<EquivalentSurface> {
        let src = self.source(self.scn.antenna(tx_id)?, center)?;
        if !self.source_fits(&src) {
            return Err(Error::Domain(format!(
                "transmitter {tx_id} lies inside the FEM domain of the body at {center:?}"
            )));
        }
        let mut out = None;
        self.model.surfaces(&[src], self.scn.max_harmonic, &self.surface, |_, s| {
            out = Some(s.with_kernel(self.scn.solver.kernel));
            Ok(())
        })?;
        out.ok_or_else(|| Error::Consistency("no surface produced".into()))
    }

    /// Vertical field on a grid with the body at position `pos`.
    pub fn field_map(&self, tx_id: u32, pos: u32, spec: &FieldMapSpec) -> Result<FieldMap> {
        let [nu, nv] = spec.grid;
        if nu < 2 || nv < 2 {
            return Err(Error::Parameter(format!("field map grid must be at least 2 x 2, got {nu} x {nv}")));
        }
        let tx = *self.scn.antenna(tx_id)?;
        let p = self.scn.position(pos)?;
        let c = [p.x, p.y];
        let cut = spec.cut.unwrap_or(match spec.plane {
            Plane::Xy => tx.z,
            Plane::Rz => (tx.y - c[1]).atan2(tx.x - c[0]),
        });
        let ext = spec.extent.unwrap_or(match spec.plane {
            Plane::Xy => [0.0, self.scn.room.width, 0.0, self.scn.room.depth],
            Plane::Rz => [0.0, 3.0, 0.0, 2.5],
        });
        if !(ext[1] > ext[0] && ext[3] > ext[2]) {
            return Err(Error::Parameter(format!("field map extent {ext:?} is empty")));
        }
        match spec.plane {
            Plane::Xy if cut < 0.0 => {
                return Err(Error::Domain(format!("plane z = {cut} lies below the ground")));
            }
            Plane::Rz if ext[0] < 0.0 || ext[2] < 0.0 => {
                return Err(Error::Domain(format!("extent {ext:?} leaves the half-plane ρ ≥ 0, z ≥ 0")));
            }
            _ => {}
        }
        let surf = self.surface_for(tx_id, c)?;
        let gamma = self.scn.gamma();
        let free = self.source(&tx, [0.0, 0.0])?;
        let (us, vs) = (linspace(ext[0], ext[1], nu), linspace(ext[2], ext[3], nv));
        let (sin_c, cos_c) = cut.sin_cos();
        let mut points = Vec::with_capacity(nu * nv);
        for &v in &vs {
            for &u in &us {
                let xyz = match spec.plane {
                    Plane::Xy => [u, v, cut],
                    Plane::Rz => [c[0] + u * cos_c, c[1] + u * sin_c, v],
                };
                let rel = [xyz[0] - c[0], xyz[1] - c[1], xyz[2]];
                let scattered = match surf.exterior_field(rel, gamma) {
                    Ok(e) => Some(e[2]),
                    Err(Error::Domain(_)) => None,
                    Err(e) => return Err(e),
                };
                let e_z = match (scattered, spec.quantity) {
                    (None, _) => None,
                    (Some(s), Quantity::Scattered) => Some(s),
                    (Some(s), Quantity::Total) => match free.field_xyz(xyz) {
                        Ok(e) => Some(s + e[2]),
                        Err(Error::Singularity(_)) => None,
                        Err(e) => return Err(e),
                    },
                };
                points.push(FieldPoint { u, v, xyz, e_z });
            }
        }
        Ok(FieldMap {
            plane: spec.plane,
            quantity: spec.quantity,
            cut,
            grid: spec.grid,
            points,
        })
    }

    /// Receivers of `tx_id` with the body axis at `center` (or no body).
    pub fn simulate_link_set(&self, tx_id: u32, center: Option<[f64; 2]>) -> Result<Vec<RxField>> {
        self.simulate(&[Job { tx_id, center }])?.remove(0).ok_or_else(|| {
            Error::Domain(format!("transmitter {tx_id} lies inside the FEM domain of the body"))
        })
    }

    /// Records for the body placements `(position id, offset)` and every
    /// transmitter in `txs`, preceded by the free-space rows of those
    /// transmitters.
    pub fn records(&self, txs: &[u32], placements: &[(u32, [f64; 2])]) -> Result<Vec<RssiRecord>> {
        let mut jobs: Vec<Job> = txs.iter().map(|&tx_id| Job { tx_id, center: None }).collect();
        let mut meta: Vec<Option<(u32, [f64; 2])>> = vec![None; txs.len()];
        for &(pos, off) in placements {
            let p = self.scn.position(pos)?;
            let (x, y) = (p.x + off[0], p.y + off[1]);
            if !self.scn.room.contains(x, y) {
                return Err(Error::Parameter(format!(
                    "body position {pos} with offset {off:?} leaves the room"
                )));
            }
            for &tx_id in txs {
                jobs.push(Job {
                    tx_id,
                    center: Some([x, y]),
                });
                meta.push(Some((pos, off)));
            }
        }
        let fields = self.simulate(&jobs)?;

        let mut records = Vec::new();
        for ((job, m), f) in jobs.iter().zip(&meta).zip(fields) {
            let Some(f) = f else { continue };
            for rx in f {
                let p = self.rssi_dbm(rx.e_z);
                let (body_pos_id, [dx, dy]) = match m {
                    Some((pos, off)) => (Some(*pos), *off),
                    None => (None, [0.0, 0.0]),
                };
                records.push(RssiRecord {
                    tx_id: job.tx_id,
                    rx_id: rx.rx_id,
                    body_pos_id,
                    dx,
                    dy,
                    rssi_dbm: p,
                    rssi_free_dbm: p,
                    delta_rssi_db: 0.0,
                    flags: if rx.near_field { FLAG_NEAR_FIELD.to_string() } else { String::new() },
                });
            }
        }
        self.apply_noise(&mut records)?;
        let free: HashMap<(u32, u32), f64> = records
            .iter()
            .filter(|r| r.body_pos_id.is_none())
            .map(|r| ((r.tx_id, r.rx_id), r.rssi_dbm))
            .collect();
        for r in records.iter_mut() {
            let f = free[&(r.tx_id, r.rx_id)];
            r.rssi_free_dbm = f;
            r.delta_rssi_db = f - r.rssi_dbm;
        }
        Ok(records)
    }

    fn apply_noise(&self, records: &mut [RssiRecord]) -> Result<()> {
        let sigma = self.scn.noise.sigma_db;
        if sigma == 0.0 {
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.scn.noise.seed);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Configuration(e.to_string()))?;
        for r in records.iter_mut() {
            r.rssi_dbm += normal.sample(&mut rng);
        }
        Ok(())
    }

    /// Every transmitter at every nominal position.
    pub fn dataset(&self) -> Result<Vec<RssiRecord>> {
        let txs: Vec<u32> = self.scn.antennas.iter().map(|a| a.id).collect();
        let placements: Vec<(u32, [f64; 2])> = self.scn.positions.iter().map(|p| (p.id, [0.0, 0.0])).collect();
        self.records(&txs, &placements)
    }

    /// Every transmitter at every position and micro-movement offset.
    pub fn dataset_with_micro(&self, grid: &MicroMovementGrid) -> Result<Vec<RssiRecord>> {
        let txs: Vec<u32> = self.scn.antennas.iter().map(|a| a.id).collect();
        let offsets = grid.offsets();
        let placements: Vec<(u32, [f64; 2])> = self
            .scn
            .positions
            .iter()
            .flat_map(|p| offsets.iter().map(move |&o| (p.id, o)))
            .collect();
        self.records(&txs, &placements)
    }

    /// One transmitter over the offsets of `grid` around position `pos`.
    pub fn micro_sweep(&self, tx_id: u32, pos: u32, grid: &MicroMovementGrid) -> Result<Vec<RssiRecord>> {
        let placements: Vec<(u32, [f64; 2])> = grid.offsets().into_iter().map(|o| (pos, o)).collect();
        self.records(&[tx_id], &placements)
    }
}
