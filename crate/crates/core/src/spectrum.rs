//! X-ray spectra and metal attenuation tables.
//!
//! Mass attenuation is tabulated in cm²/g and density in g/cm³, as in the
//! usual published tables. Geometry lengths are millimetres, so the linear
//! attenuation used against a path length is `lambda * rho / 10` per mm.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MetalMask;

/// Centimetres per millimetre.
pub const CM_PER_MM: f64 = 0.1;

const NORMALIZATION_TOL: f64 = 1e-9;

/// Bundled 120 kVp tungsten-anode spectrum in 5 keV bins with a titanium
/// table interpolated log-log from NIST XCOM totals.
pub const DEFAULT_SPECTRUM_JSON: &str = include_str!("../data/spectrum_120kvp_titanium.json");

/// Discrete spectrum: photon fraction per energy bin.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    energies_kev: Vec<f64>,
    weights: Vec<f64>,
}

impl Spectrum {
    /// Weights must be nonnegative and sum to one; energies strictly increasing.
    pub fn new(energies_kev: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidSpectrum(m));
        if energies_kev.is_empty() {
            return bad("spectrum has no energy bins".into());
        }
        if energies_kev.len() != weights.len() {
            return bad(format!(
                "{} energies but {} weights",
                energies_kev.len(),
                weights.len()
            ));
        }
        if energies_kev.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("energies must be positive".into());
        }
        if !energies_kev.windows(2).all(|w| w[0] < w[1]) {
            return bad("energies must be strictly increasing".into());
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be nonnegative".into());
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return bad(format!("weights sum to {total}, not 1"));
        }
        Ok(Spectrum {
            energies_kev,
            weights,
        })
    }

    /// Rescales relative weights to sum to one.
    pub fn from_relative(energies_kev: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidSpectrum("weights sum to zero".into()));
        }
        Spectrum::new(energies_kev, weights.iter().map(|w| w / total).collect())
    }

    pub fn monochromatic(energy_kev: f64) -> Result<Self> {
        Spectrum::new(vec![energy_kev], vec![1.0])
    }

    pub fn energies_kev(&self) -> &[f64] {
        &self.energies_kev
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialEntry {
    /// Mass attenuation per energy bin, cm²/g.
    pub lambda: Vec<f64>,
    /// Density, g/cm³.
    pub rho: f64,
}

/// On-disk spectrum and material table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    #[serde(rename = "energies_keV")]
    pub energies_kev: Vec<f64>,
    pub weights: Vec<f64>,
    pub materials: BTreeMap<String, MaterialEntry>,
}

impl SpectrumConfig {
    pub fn bundled() -> Self {
        serde_json::from_str(DEFAULT_SPECTRUM_JSON).expect("bundled spectrum parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        SpectrumConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::new(self.energies_kev.clone(), self.weights.clone())
    }

    pub fn material(&self, name: &str) -> Result<&MaterialEntry> {
        self.materials
            .get(name)
            .ok_or_else(|| Error::InvalidSpectrum(format!("no material named {name:?}")))
    }

    /// Metal insert for `mask` made of material `name`.
    pub fn insert(&self, name: &str, mask: MetalMask) -> Result<MetalInsert> {
        let m = self.material(name)?;
        MetalInsert::new(mask, name, m.rho, m.lambda.clone())
    }
}

/// A metal implant: where it is and what it is made of.
#[derive(Clone, Debug, PartialEq)]
pub struct MetalInsert {
    pub mask: MetalMask,
    pub material: String,
    rho: f64,
    lambda: Vec<f64>,
}

impl MetalInsert {
    pub fn new(mask: MetalMask, material: &str, rho: f64, lambda: Vec<f64>) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "density must be positive, got {rho}"
            )));
        }
        if lambda.is_empty() || lambda.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidSpectrum(
                "attenuation table must be strictly positive".into(),
            ));
        }
        Ok(MetalInsert {
            mask,
            material: material.to_string(),
            rho,
            lambda,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Linear attenuation per mm in each energy bin.
    pub fn mu_per_mm(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .map(|l| l * self.rho * CM_PER_MM)
            .collect()
    }

    pub fn check_spectrum(&self, spec: &Spectrum) -> Result<()> {
        if self.lambda.len() == spec.len() {
            Ok(())
        } else {
            Err(Error::InvalidSpectrum(format!(
                "material table has {} bins, spectrum has {}",
                self.lambda.len(),
                spec.len()
            )))
        }
    }
}
