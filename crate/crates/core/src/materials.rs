//! Complex relative permittivity of tissues.
//!
//! Engineering time convention `exp(+jωt)`: a lossy medium has a negative
//! imaginary part.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::constants::EPS0;
use crate::{Error, Result, C64};

/// Tissue table shipped with the crate.
pub const DEFAULT_TISSUES: &str = include_str!("../data/tissues.toml");

pub const MAX_TERMS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColeColeTerm {
    pub delta: f64,
    /// Relaxation time in seconds.
    pub tau: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColeColeParams {
    pub eps_inf: f64,
    #[serde(default)]
    pub terms: Vec<ColeColeTerm>,
    /// Static ionic conductivity in S/m.
    #[serde(default)]
    pub sigma: f64,
}

impl ColeColeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_inf >= 1.0) {
            return Err(Error::Parameter(format!("eps_inf = {} < 1", self.eps_inf)));
        }
        if self.terms.len() > MAX_TERMS {
            return Err(Error::Parameter(format!("at most {MAX_TERMS} dispersion terms")));
        }
        for t in &self.terms {
            if !(t.delta >= 0.0 && t.tau > 0.0 && (0.0..1.0).contains(&t.alpha)) {
                return Err(Error::Parameter(format!("invalid Cole-Cole term {t:?}")));
            }
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Parameter(format!("sigma = {} < 0", self.sigma)));
        }
        Ok(())
    }

    /// ε_r at angular frequency `omega` (rad/s).
    pub fn at_omega(&self, omega: f64) -> C64 {
        let mut eps = C64::new(self.eps_inf, 0.0);
        for t in &self.terms {
            // (jωτ)^(1-α) = (ωτ)^(1-α) · exp(jπ(1-α)/2)
            let p = 1.0 - t.alpha;
            let x = C64::from_polar((omega * t.tau).powf(p), std::f64::consts::FRAC_PI_2 * p);
            eps += t.delta / (1.0 + x);
        }
        eps - C64::new(0.0, self.sigma / (omega * EPS0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Material {
    ColeCole(ColeColeParams),
    Fixed { re: f64, im: f64 },
}

impl Material {
    pub fn fixed(eps: C64) -> Result<Self> {
        if eps.im > 0.0 {
            return Err(Error::Parameter(format!(
                "permittivity {eps} is active; the imaginary part must be ≤ 0"
            )));
        }
        Ok(Material::Fixed { re: eps.re, im: eps.im })
    }

    pub fn cole_cole(params: ColeColeParams) -> Result<Self> {
        params.validate()?;
        Ok(Material::ColeCole(params))
    }

    pub fn vacuum() -> Self {
        Material::Fixed { re: 1.0, im: 0.0 }
    }

    /// Relative permittivity at `freq` Hz.
    pub fn permittivity(&self, freq: f64) -> Result<C64> {
        if !(freq > 0.0) {
            return Err(Error::Parameter(format!("frequency must be positive, got {freq}")));
        }
        Ok(match self {
            Material::ColeCole(p) => p.at_omega(2.0 * std::f64::consts::PI * freq),
            Material::Fixed { re, im } => C64::new(*re, *im),
        })
    }
}

/// Tissue parameters keyed by name.
#[derive(Clone, Debug, Default)]
pub struct TissueLibrary {
    tissues: BTreeMap<String, ColeColeParams>,
}

impl TissueLibrary {
    pub fn parse(text: &str) -> Result<Self> {
        let tissues: BTreeMap<String, ColeColeParams> =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        for (name, p) in &tissues {
            p.validate()
                .map_err(|e| Error::Parse(format!("tissue '{name}': {e}")))?;
        }
        Ok(TissueLibrary { tissues })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The bundled table.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TISSUES).expect("bundled tissue table is valid")
    }

    pub fn get(&self, name: &str) -> Result<Material> {
        self.tissues
            .get(name)
            .cloned()
            .map(Material::ColeCole)
            .ok_or_else(|| Error::Parameter(format!("unknown tissue '{name}'")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tissues.keys().map(String::as_str)
    }
}
