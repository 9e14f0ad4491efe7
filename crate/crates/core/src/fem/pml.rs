//! Complex coordinate stretching for the perfectly matched layer.
//!
//! Inside the layer `s(ξ) = 1 − jσ(ξ)/(ωε₀)` with `σ(ξ) = σ_max (ξ/d)^n`,
//! where `ξ` is the depth into the layer and `d` its thickness. The stretched
//! radius `ρ̃ = ∫₀^ρ s_ρ` is available in closed form.

use serde::{Deserialize, Serialize};

use crate::constants::{C0, EPS0};
use crate::geometry::DomainBounds;
use crate::C64;

/// Polynomial grading order.
pub const DEFAULT_ORDER: u32 = 2;
/// Theoretical normal-incidence reflection of the layer.
pub const DEFAULT_REFLECTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmlMap {
    pub omega: f64,
    pub order: u32,
    pub sigma_max: f64,
    pub rho_start: f64,
    pub z_top_start: f64,
    /// Start of the bottom layer (absent with a ground plane).
    pub z_bottom_start: Option<f64>,
    pub thickness: f64,
}

impl PmlMap {
    /// Layer matching `bounds` at angular frequency `omega`, graded for the
    /// given theoretical reflection coefficient.
    pub fn new(bounds: &DomainBounds, omega: f64, order: u32, reflection: f64) -> Self {
        let d = bounds.pml_thickness;
        let n = f64::from(order);
        let sigma_max = -(n + 1.0) * EPS0 * C0 * reflection.ln() / (2.0 * d);
        PmlMap {
            omega,
            order,
            sigma_max,
            rho_start: bounds.air_radius,
            z_top_start: bounds.air_top,
            z_bottom_start: (!bounds.ground).then_some(bounds.air_bottom),
            thickness: d,
        }
    }

    pub fn with_defaults(bounds: &DomainBounds, omega: f64) -> Self {
        Self::new(bounds, omega, DEFAULT_ORDER, DEFAULT_REFLECTION)
    }

    /// A map that stretches nothing.
    pub fn identity(omega: f64) -> Self {
        PmlMap {
            omega,
            order: DEFAULT_ORDER,
            sigma_max: 0.0,
            rho_start: f64::INFINITY,
            z_top_start: f64::INFINITY,
            z_bottom_start: None,
            thickness: 1.0,
        }
    }

    fn stretch(&self, depth: f64) -> C64 {
        if depth <= 0.0 {
            return C64::new(1.0, 0.0);
        }
        let sigma = self.sigma_max * (depth / self.thickness).powi(self.order as i32);
        C64::new(1.0, -sigma / (self.omega * EPS0))
    }

    fn z_depth(&self, z: f64) -> f64 {
        let top = z - self.z_top_start;
        match self.z_bottom_start {
            Some(b) if z < b => b - z,
            _ => top,
        }
    }

    pub fn s_rho(&self, rho: f64) -> C64 {
        self.stretch(rho - self.rho_start)
    }

    pub fn s_z(&self, z: f64) -> C64 {
        self.stretch(self.z_depth(z))
    }

    /// Stretched radius `ρ̃(ρ)`.
    pub fn rho_tilde(&self, rho: f64) -> C64 {
        let depth = rho - self.rho_start;
        if depth <= 0.0 {
            return C64::new(rho, 0.0);
        }
        let n = f64::from(self.order);
        let integral = self.sigma_max * self.thickness / (n + 1.0) * (depth / self.thickness).powi(self.order as i32 + 1);
        C64::new(rho, -integral / (self.omega * EPS0))
    }

    pub fn is_inside(&self, p: [f64; 2]) -> bool {
        p[0] > self.rho_start || self.z_depth(p[1]) > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> DomainBounds {
        DomainBounds {
            air_radius: 1.0,
            air_top: 2.0,
            air_bottom: -1.0,
            pml_thickness: 0.5,
            ground: false,
        }
    }

    #[test]
    fn identity_outside_and_continuous_at_interface() {
        let m = PmlMap::with_defaults(&bounds(), 2.0 * std::f64::consts::PI * 1e9);
        assert_eq!(m.s_rho(0.3), C64::new(1.0, 0.0));
        assert_eq!(m.s_z(1.9), C64::new(1.0, 0.0));
        assert_eq!(m.rho_tilde(0.7), C64::new(0.7, 0.0));
        assert!((m.s_rho(1.0 + 1e-9) - 1.0).norm() < 1e-9);
        assert!((m.s_z(-1.0 - 1e-9) - 1.0).norm() < 1e-9);
        assert!(m.s_rho(1.4).im < 0.0 && m.s_z(2.3).im < 0.0 && m.s_z(-1.3).im < 0.0);
    }

    #[test]
    fn stretched_radius_integrates_the_stretch() {
        let m = PmlMap::with_defaults(&bounds(), 2.0 * std::f64::consts::PI * 1e9);
        let (a, b) = (1.0, 1.45);
        let n = 2000;
        let h = (b - a) / n as f64;
        let mut acc = C64::new(a, 0.0);
        for i in 0..n {
            let x = a + (i as f64 + 0.5) * h;
            acc += m.s_rho(x) * h;
        }
        assert!((acc - m.rho_tilde(b)).norm() < 1e-7);
    }

    #[test]
    fn design_reflection_is_met() {
        let bounds = bounds();
        let m = PmlMap::with_defaults(&bounds, 1e9);
        // Round trip attenuation exp(-2 ∫σ/(ε₀c)) equals the design value.
        let integral = m.sigma_max * m.thickness / 3.0;
        let r = (-2.0 * integral / (EPS0 * C0)).exp();
        assert!((r - DEFAULT_REFLECTION).abs() < 1e-12);
    }
}
