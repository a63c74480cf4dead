//! Polychromatic metal artifact simulation.
//!
//! With the implant written as `lambda_m(E) * rho_m * M`, linearity of the
//! projector gives the corrupted sinogram
//!
//! ```text
//! S_ma = P(X_r) - ln sum_E eta(E) exp(-lambda_m(E) rho_m M_p),   M_p = P(M)
//! ```
//!
//! so the artifact term depends on the metal only through `M_p`.

use ndarray::{Array2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::geometry::Geometry;
use crate::grid::{Image, ImageUnit, MetalMask, MetalTrace, Sinogram, SinogramUnit};
use crate::marbase::{li_inpaint, Inpainted};
use crate::projector::{self, RampFilter};
use crate::spectrum::{MetalInsert, Spectrum};
use crate::units::{hu_to_mu, mu_to_hu, metal_size_group, SizeThresholds, DEFAULT_MU_WATER};

/// Entries of `M_p` below this magnitude count as zero.
pub const TRACE_TOL: f64 = 1e-12;

pub fn metal_mask_projection(mask: &MetalMask, geo: &Geometry) -> Result<Sinogram> {
    mask.check_geometry(geo)?;
    Ok(projector::project_values(&mask.to_values(), geo))
}

/// `M_t = [M_p > 0]`, treating `|v| < TRACE_TOL` as zero.
pub fn metal_trace(m_p: &Sinogram) -> Result<MetalTrace> {
    if let Some(((row, col), &value)) = m_p.values().indexed_iter().find(|(_, &v)| v <= -TRACE_TOL)
    {
        return Err(Error::NegativeProjection { row, col, value });
    }
    Ok(MetalTrace::new(m_p.values().mapv(|v| v >= TRACE_TOL)))
}

/// `-ln sum_E w(E) exp(-mu(E) * length)` for one path length.
///
/// Evaluated relative to the smallest exponent so long metal paths do not
/// underflow.
pub fn beam_hardening_term(weights: &[f64], mu: &[f64], length: f64) -> f64 {
    let min = mu
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(m, _)| m * length)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return 0.0;
    }
    let sum: f64 = mu
        .iter()
        .zip(weights)
        .map(|(m, w)| w * (min - m * length).exp())
        .sum();
    min - sum.ln()
}

/// Optional quantum noise on the corrupted sinogram. Off unless requested.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    #[default]
    Off,
    /// Poisson counts with `incident_photons` per ray, seeded per case.
    Poisson { incident_photons: f64, seed: u64 },
}

fn apply_noise(sino: &mut Array2<f64>, noise: Noise) -> Result<()> {
    let Noise::Poisson {
        incident_photons,
        seed,
    } = noise
    else {
        return Ok(());
    };
    if !(incident_photons > 0.0) {
        return Err(Error::InvalidArgument("incident photons must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in sino.iter_mut() {
        let expected = incident_photons * (-*v).exp();
        let counts = if expected > 0.0 {
            Poisson::new(expected)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(&mut rng)
        } else {
            0.0
        };
        *v = -(counts.max(1.0) / incident_photons).ln();
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetalSinograms {
    pub s_ma: Sinogram,
    pub s_gt: Sinogram,
    pub m_p: Sinogram,
}

/// Corrupted, clean and metal-mask projections for one residual image.
///
/// `x_r` is the attenuation image with the implant pixels already zeroed.
pub fn simulate_metal_sinogram(
    x_r: &Image,
    insert: &MetalInsert,
    spec: &Spectrum,
    geo: &Geometry,
) -> Result<MetalSinograms> {
    x_r.expect_unit(ImageUnit::Attenuation)?;
    x_r.check_geometry(geo)?;
    insert.mask.check_geometry(geo)?;
    insert.check_spectrum(spec)?;
    if let Some(((r, c), _)) = Zip::indexed(x_r.values())
        .and(insert.mask.bits())
        .fold(None, |found, idx, &v, &m| {
            found.or(if m && v != 0.0 { Some((idx, v)) } else { None })
        })
    {
        return Err(Error::InvalidArgument(format!(
            "residual image is nonzero inside the metal mask at ({r}, {c})"
        )));
    }
    let s_gt = projector::forward_project(x_r, geo)?;
    let m_p = metal_mask_projection(&insert.mask, geo)?;
    let trace = metal_trace(&m_p)?;
    let mu = insert.mu_per_mm();
    let weights = spec.weights();
    let mut s_ma = s_gt.values().clone();
    Zip::from(&mut s_ma)
        .and(m_p.values())
        .and(trace.bits())
        .for_each(|s, &len, &hit| {
            if hit {
                *s += beam_hardening_term(weights, &mu, len);
            }
        });
    Ok(MetalSinograms {
        s_ma: Sinogram::new(s_ma, SinogramUnit::LineIntegral)?,
        s_gt,
        m_p,
    })
}

/// Knobs shared by case simulation and ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub mu_water: f64,
    pub size_thresholds: SizeThresholds,
    /// Detector bins added on each side of the trace before LI.
    pub trace_dilation: usize,
    pub noise: Noise,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            mu_water: DEFAULT_MU_WATER,
            size_thresholds: SizeThresholds::default(),
            trace_dilation: 1,
            noise: Noise::Off,
        }
    }
}

/// Everything derived from one clean slice and one implant.
#[derive(Clone, Debug, PartialEq)]
pub struct SimCase {
    /// Clean image, HU.
    pub x_gt: Image,
    pub mask: MetalMask,
    pub s_gt: Sinogram,
    pub s_ma: Sinogram,
    /// Corrupted reconstruction, HU.
    pub x_ma: Image,
    pub m_p: Sinogram,
    pub m_t: MetalTrace,
    pub s_li: Sinogram,
    /// `None` for an empty mask.
    pub metal_size_group: Option<u8>,
}

pub fn residual_image(x_gt: &Image, mask: &MetalMask, mu_water: f64) -> Result<Image> {
    check_dims(x_gt.shape(), mask.shape())?;
    let mut mu = hu_to_mu(x_gt, mu_water)?.into_values();
    Zip::from(&mut mu).and(mask.bits()).for_each(|v, &m| {
        if m {
            *v = 0.0;
        }
    });
    Image::new(mu, ImageUnit::Attenuation)
}

pub fn simulate_case(
    x_gt: &Image,
    mask: &MetalMask,
    insert: &MetalInsert,
    spec: &Spectrum,
    geo: &Geometry,
    filt: &RampFilter,
    params: &SimParams,
) -> Result<SimCase> {
    x_gt.expect_unit(ImageUnit::Hu)?;
    x_gt.check_geometry(geo)?;
    mask.check_geometry(geo)?;
    if insert.mask != *mask {
        return Err(Error::InvalidArgument(
            "implant material was built for a different mask".into(),
        ));
    }
    let x_r = residual_image(x_gt, mask, params.mu_water)?;
    let MetalSinograms {
        mut s_ma,
        s_gt,
        m_p,
    } = simulate_metal_sinogram(&x_r, insert, spec, geo)?;
    if params.noise != Noise::Off {
        let mut noisy = s_ma.into_values();
        apply_noise(&mut noisy, params.noise)?;
        s_ma = Sinogram::new(noisy, SinogramUnit::LineIntegral)?;
    }
    let m_t = metal_trace(&m_p)?;
    let x_ma = mu_to_hu(&projector::fbp(&s_ma, geo, filt)?, params.mu_water)?;
    let Inpainted {
        sinogram: s_li, ..
    } = li_inpaint(&s_ma, &m_t.dilate_detectors(params.trace_dilation))?;
    let metal_size_group = match metal_size_group(mask, &params.size_thresholds) {
        Ok(g) => Some(g),
        Err(Error::NoMetal) => None,
        Err(e) => return Err(e),
    };
    Ok(SimCase {
        x_gt: x_gt.clone(),
        mask: mask.clone(),
        s_gt,
        s_ma,
        x_ma,
        m_p,
        m_t,
        s_li,
        metal_size_group,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestParams {
    pub metal_hu_threshold: f64,
    pub mu_water: f64,
    /// Slice selection: more than `selection_min_pixels` above `selection_hu`.
    pub selection_hu: f64,
    pub selection_min_pixels: usize,
}

impl Default for IngestParams {
    fn default() -> Self {
        IngestParams {
            metal_hu_threshold: 2500.0,
            mu_water: DEFAULT_MU_WATER,
            selection_hu: 3000.0,
            selection_min_pixels: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IngestWarning {
    /// No pixel reached the metal threshold.
    EmptyMetal,
    /// Too few bright pixels to pass slice selection.
    BelowSelection { pixels_above: usize, required_more_than: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestedCase {
    pub s_ma: Sinogram,
    pub mask: MetalMask,
    pub m_p: Sinogram,
    pub m_t: MetalTrace,
    pub warnings: Vec<IngestWarning>,
}

/// Clinical slice in HU, already at the geometry's image size.
pub fn clinical_ingest(
    x_clinical: &Image,
    geo: &Geometry,
    params: &IngestParams,
) -> Result<IngestedCase> {
    x_clinical.expect_unit(ImageUnit::Hu)?;
    x_clinical.check_geometry(geo)?;
    let mask = MetalMask::new(x_clinical.values().mapv(|v| v >= params.metal_hu_threshold));
    let mut warnings = Vec::new();
    if mask.is_empty() {
        warnings.push(IngestWarning::EmptyMetal);
    }
    let bright = x_clinical
        .values()
        .iter()
        .filter(|&&v| v > params.selection_hu)
        .count();
    if bright <= params.selection_min_pixels {
        warnings.push(IngestWarning::BelowSelection {
            pixels_above: bright,
            required_more_than: params.selection_min_pixels,
        });
    }
    let s_ma = projector::forward_project(&hu_to_mu(x_clinical, params.mu_water)?, geo)?;
    let m_p = metal_mask_projection(&mask, geo)?;
    let m_t = metal_trace(&m_p)?;
    Ok(IngestedCase {
        s_ma,
        mask,
        m_p,
        m_t,
        warnings,
    })
}
