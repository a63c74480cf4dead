//! Run configuration: one TOML or JSON file, with command-line flags
//! applied on top.

use std::path::{Path, PathBuf};

use mar_core::encoding::LossWeights;
use mar_core::marbase::{MarMethod, NmarParams};
use mar_core::physics::{IngestParams, Noise, SimParams};
use mar_core::projector::{FilterWindow, RampFilter};
use mar_core::spectrum::{MetalInsert, Spectrum, SpectrumConfig};
use mar_core::units::{SizeThresholds, DEFAULT_MU_WATER};
use mar_core::{Geometry, MetalMask};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmarConfig {
    pub air_hu: f64,
    pub bone_hu: f64,
    pub smooth_sigma: f64,
    pub bone_mu: Option<f64>,
}

impl Default for NmarConfig {
    fn default() -> Self {
        let p = NmarParams::default();
        NmarConfig {
            air_hu: p.air_hu,
            bone_hu: p.bone_hu,
            smooth_sigma: p.smooth_sigma,
            bone_mu: p.bone_mu,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub metal_hu_threshold: f64,
    pub selection_hu: f64,
    pub selection_min_pixels: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        let p = IngestParams::default();
        IngestConfig {
            metal_hu_threshold: p.metal_hu_threshold,
            selection_hu: p.selection_hu,
            selection_min_pixels: p.selection_min_pixels,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub filter: FilterWindow,
    /// Spectrum and material table; the bundled 120 kVp titanium table when unset.
    pub spectrum_file: Option<PathBuf>,
    pub material: String,
    pub mu_water: f64,
    pub size_thresholds: SizeThresholds,
    /// Detector bins added on each side of the metal trace before inpainting.
    pub trace_dilation: usize,
    /// Poisson noise on the corrupted sinogram, photons per ray.
    pub noise_photons: Option<f64>,
    pub method: MarMethod,
    pub nmar: NmarConfig,
    pub ingest: IngestConfig,
    pub pad_angles: usize,
    pub pad_detectors: usize,
    pub pyramid_depth: usize,
    pub loss_weights: LossWeights,
    pub out: PathBuf,
    /// Defaults to the available parallelism.
    pub workers: Option<usize>,
    pub seed: u64,
    /// Synthetic cases per size group when `simulate` gets no input dirs.
    pub synthetic_per_group: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: Geometry::default(),
            filter: FilterWindow::Ramp,
            spectrum_file: None,
            material: "titanium".into(),
            mu_water: DEFAULT_MU_WATER,
            size_thresholds: SizeThresholds::default(),
            trace_dilation: 1,
            noise_photons: None,
            method: MarMethod::Li,
            nmar: NmarConfig::default(),
            ingest: IngestConfig::default(),
            pad_angles: 16,
            pad_detectors: 0,
            pyramid_depth: 4,
            loss_weights: LossWeights::default(),
            out: PathBuf::from("out"),
            workers: None,
            seed: 0,
            synthetic_per_group: 2,
        }
    }
}

impl RunConfig {
    /// Parses by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        cfg.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.geometry
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(p) = &self.spectrum_file {
            if !p.is_file() {
                return Err(CliError::Config(format!(
                    "spectrum file {} does not exist",
                    p.display()
                )));
            }
        }
        if !(self.mu_water.is_finite() && self.mu_water > 0.0) {
            return Err(CliError::Config("mu_water must be positive".into()));
        }
        if self.pyramid_depth == 0 {
            return Err(CliError::Config("pyramid_depth must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if let Some(n) = self.noise_photons {
            if !(n.is_finite() && n > 0.0) {
                return Err(CliError::Config("noise_photons must be positive".into()));
            }
        }
        let w = &self.loss_weights;
        if [w.se, w.rc, w.ie].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(CliError::Config("loss weights must be nonnegative".into()));
        }
        let table = self.spectrum_config()?;
        table
            .material(&self.material)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn spectrum_config(&self) -> CliResult<SpectrumConfig> {
        match &self.spectrum_file {
            None => Ok(SpectrumConfig::bundled()),
            Some(p) => SpectrumConfig::load(p).map_err(|e| CliError::Config(e.to_string())),
        }
    }

    pub fn spectrum(&self) -> CliResult<Spectrum> {
        self.spectrum_config()?
            .spectrum()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn insert(&self, mask: MetalMask) -> CliResult<MetalInsert> {
        Ok(self.spectrum_config()?.insert(&self.material, mask)?)
    }

    pub fn ramp(&self) -> RampFilter {
        RampFilter::for_geometry(&self.geometry, self.filter)
    }

    /// Simulation knobs for the case at position `index` in the run; noise
    /// gets its own seed per case so workers never share a stream.
    pub fn sim_params(&self, index: usize) -> SimParams {
        SimParams {
            mu_water: self.mu_water,
            size_thresholds: self.size_thresholds,
            trace_dilation: self.trace_dilation,
            noise: match self.noise_photons {
                None => Noise::Off,
                Some(incident_photons) => Noise::Poisson {
                    incident_photons,
                    seed: self.seed.wrapping_add(index as u64),
                },
            },
        }
    }

    pub fn nmar_params(&self) -> NmarParams {
        NmarParams {
            air_hu: self.nmar.air_hu,
            bone_hu: self.nmar.bone_hu,
            smooth_sigma: self.nmar.smooth_sigma,
            mu_water: self.mu_water,
            bone_mu: self.nmar.bone_mu,
        }
    }

    pub fn ingest_params(&self) -> IngestParams {
        IngestParams {
            metal_hu_threshold: self.ingest.metal_hu_threshold,
            mu_water: self.mu_water,
            selection_hu: self.ingest.selection_hu,
            selection_min_pixels: self.ingest.selection_min_pixels,
        }
    }

    pub fn thread_pool(&self) -> CliResult<rayon::ThreadPool> {
        let workers = self
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))
    }
}
