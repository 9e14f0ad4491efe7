//! Free-space constants (SI).

use std::f64::consts::PI;

pub const C0: f64 = 299_792_458.0;
pub const MU0: f64 = 4.0e-7 * PI;
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);
/// Free-space impedance, rounded as in the dipole-moment formula.
pub const ETA0: f64 = 376.73;

pub fn wavelength(freq: f64) -> f64 {
    C0 / freq
}

pub fn wavenumber(freq: f64) -> f64 {
    2.0 * PI * freq / C0
}

pub fn omega(freq: f64) -> f64 {
    2.0 * PI * freq
}
