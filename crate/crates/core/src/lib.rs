//! 2.5-D body-of-revolution finite elements for human-body scattering under a
//! vertical Hertzian dipole, with equivalent-source exterior fields and an RSSI
//! scenario engine for device-free-localization datasets.
//!
//! The pipeline for one body and one source is
//! [`geometry`] → [`excitation`] → [`fem`] → [`exterior`]; [`scenario`] drives
//! it over antenna sets and body placements.

pub mod constants;
pub mod error;
pub mod exec;
pub mod excitation;
pub mod exterior;
pub mod fem;
pub mod geometry;
pub mod materials;
pub mod simulation;
pub mod scenario;
pub mod validation;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
