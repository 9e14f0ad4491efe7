//! Indoor RF-sensing scenarios: antennas, body placements, RSSI synthesis and
//! dataset export.

mod dataset;
mod engine;

pub use dataset::{
    calibrate, calibrate_records, empirical_pdf, parse_dataset, read_dataset, read_reference, write_dataset,
    CalibrationFactor, EmpiricalPdf, RssiRecord, FLAG_NEAR_FIELD,
};
pub use engine::{Engine, FieldMap, FieldMapSpec, FieldPoint, Job, Plane, Quantity, RxField};

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::exterior::Kernel;
use crate::fem::pml::DEFAULT_REFLECTION;
use crate::materials::{Material, TissueLibrary};
use crate::{Error, Result, C64};

/// The room, antennas and body positions of the reference deployment.
pub const TABLE1: &str = include_str!("../../data/table1.toml");

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Antenna {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Antenna {
    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyPosition {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub width: f64,
    pub depth: f64,
}

impl Room {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.depth).contains(&y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    /// Height `h` (m).
    pub height: f64,
    /// Girth control `R_h` (m).
    pub girth: f64,
    /// Tissue name in the built-in Cole–Cole library.
    #[serde(default)]
    pub tissue: Option<String>,
    /// Fixed relative permittivity `[re, im]`; overrides `tissue`.
    #[serde(default)]
    pub eps: Option<[f64; 2]>,
}

impl BodySpec {
    pub fn permittivity(&self, freq: f64) -> Result<C64> {
        match (&self.eps, &self.tissue) {
            (Some([re, im]), _) => Material::fixed(C64::new(*re, *im))?.permittivity(freq),
            (None, Some(name)) => TissueLibrary::builtin().get(name)?.permittivity(freq),
            (None, None) => Err(Error::Configuration("body needs either 'tissue' or 'eps'".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub mesh_scale: f64,
    pub pml_reflection: f64,
    /// Ground surface impedance `[re, im]` (Ω); zero is a perfect conductor.
    pub zeta: [f64; 2],
    pub kernel: Kernel,
    /// Azimuthal samples of the incident field.
    pub azimuth_samples: Option<usize>,
    /// Azimuthal samples on the equivalent surface.
    pub surface_azimuth: Option<usize>,
    /// Generatrix spacing on the equivalent surface (m).
    pub surface_spacing: Option<f64>,
    /// Memory budget for one batch of right-hand sides (MiB).
    pub batch_mib: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            mesh_scale: 1.0,
            pml_reflection: DEFAULT_REFLECTION,
            zeta: [0.0, 0.0],
            kernel: Kernel::default(),
            azimuth_samples: None,
            surface_azimuth: None,
            surface_spacing: None,
            batch_mib: 1024,
        }
    }
}

/// `n × n` body offsets uniformly spanning a `span × span` square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicroMovementGrid {
    pub n: usize,
    pub span: f64,
}

impl Default for MicroMovementGrid {
    fn default() -> Self {
        MicroMovementGrid { n: 5, span: 0.4 }
    }
}

impl MicroMovementGrid {
    /// Offsets `(dx, dy)`, rows of increasing `dy`, each of increasing `dx`.
    pub fn offsets(&self) -> Vec<[f64; 2]> {
        let axis: Vec<f64> = if self.n <= 1 {
            vec![0.0]
        } else {
            let c = (self.n - 1) as f64 / 2.0;
            let step = self.span / (self.n - 1) as f64;
            (0..self.n).map(|i| (i as f64 - c) * step).collect()
        };
        axis.iter().flat_map(|&dy| axis.iter().map(move |&dx| [dx, dy])).collect()
    }
}

/// Optional additive Gaussian noise on exported RSSI values (dB).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    pub sigma_db: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub frequency: f64,
    /// Radiated power of each transmitter (W).
    pub tx_power: f64,
    /// Ground image coefficient `[re, im]`.
    pub gamma: [f64; 2],
    pub max_harmonic: usize,
    /// Added to `10·log10 |E_z|²` to form the dBm scale.
    #[serde(default)]
    pub dbm_offset: f64,
    pub room: Room,
    pub body: BodySpec,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub micro: MicroMovementGrid,
    #[serde(default)]
    pub noise: NoiseSettings,
    pub antennas: Vec<Antenna>,
    pub positions: Vec<BodyPosition>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let scn: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The built-in reference deployment.
    pub fn table1() -> Self {
        Self::parse(TABLE1).expect("built-in scenario is valid")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn gamma(&self) -> C64 {
        C64::new(self.gamma[0], self.gamma[1])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if !(self.frequency > 0.0) || !(self.tx_power > 0.0) {
            return bad("frequency and tx_power must be positive".into());
        }
        if self.gamma().norm() > 1.0 {
            return bad(format!("|Γ| = {} exceeds 1", self.gamma().norm()));
        }
        if self.max_harmonic < 1 {
            return bad("max_harmonic must be at least 1".into());
        }
        if !(self.room.width > 0.0 && self.room.depth > 0.0) {
            return bad("room dimensions must be positive".into());
        }
        if !(self.body.height > 0.0 && self.body.girth > 0.0) {
            return bad("body height and girth must be positive".into());
        }
        if !(self.solver.mesh_scale > 0.0) {
            return bad("mesh_scale must be positive".into());
        }
        if !(self.noise.sigma_db >= 0.0) {
            return bad("noise sigma_db must be non-negative".into());
        }
        let mut ids = HashSet::new();
        for a in &self.antennas {
            if !ids.insert(a.id) {
                return bad(format!("duplicate antenna id {}", a.id));
            }
            if !(a.z > 0.0) {
                return bad(format!("antenna {} must be above the ground", a.id));
            }
        }
        if self.antennas.len() < 2 {
            log::warn!("fewer than two antennas: the scenario has no links");
        }
        let mut ids = HashSet::new();
        for p in &self.positions {
            if !ids.insert(p.id) {
                return bad(format!("duplicate body position id {}", p.id));
            }
            if !self.room.contains(p.x, p.y) {
                return bad(format!("body position {} lies outside the room", p.id));
            }
        }
        Ok(())
    }

    pub fn antenna(&self, id: u32) -> Result<&Antenna> {
        self.antennas
            .iter()
            .find(|a| a.id == id)
            .ok_or_else(|| Error::Parameter(format!("unknown antenna {id}")))
    }

    pub fn position(&self, id: u32) -> Result<&BodyPosition> {
        self.positions
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| Error::Parameter(format!("unknown body position {id}")))
    }

    /// Receivers of `tx`: every other antenna, in declaration order.
    pub fn receivers(&self, tx: u32) -> Vec<&Antenna> {
        self.antennas.iter().filter(|a| a.id != tx).collect()
    }

    /// Receiver of `tx` closest to it.
    pub fn nearest_receiver(&self, tx: u32) -> Result<u32> {
        let t = *self.antenna(tx)?;
        let d = |a: &Antenna| (a.x - t.x).hypot(a.y - t.y);
        Ok(self
            .receivers(tx)
            .into_iter()
            .min_by(|a, b| d(a).total_cmp(&d(b)))
            .expect("at least one receiver")
            .id)
    }

    /// Receiver whose link from `tx` passes closest to the body axis at
    /// `pos`, among links where the body lies between the two antennas.
    pub fn most_shadowed_receiver(&self, tx: u32, pos: u32) -> Result<u32> {
        let t = *self.antenna(tx)?;
        let p = *self.position(pos)?;
        let mut best: Option<(f64, u32)> = None;
        for r in self.receivers(tx) {
            let (ux, uy) = (r.x - t.x, r.y - t.y);
            let len2 = ux * ux + uy * uy;
            let s = ((p.x - t.x) * ux + (p.y - t.y) * uy) / len2;
            if !(0.0..=1.0).contains(&s) {
                continue;
            }
            let d = (p.x - t.x - s * ux).hypot(p.y - t.y - s * uy);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, r.id));
            }
        }
        best.map(|(_, id)| id)
            .ok_or_else(|| Error::Parameter(format!("no link from antenna {tx} crosses body position {pos}")))
    }
}
