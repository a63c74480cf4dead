//! Sinogram inpainting baselines: per-view linear interpolation (LI) and
//! normalized MAR (NMAR).

use ndarray::{Array1, Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::geometry::Geometry;
use crate::grid::{Image, ImageUnit, MetalMask, MetalTrace, Sinogram};
use crate::projector::{self, RampFilter};
use crate::units::{mu_to_hu, DEFAULT_MU_WATER};

/// Inpainted sinogram plus the views that had no anchors along the
/// detector axis and were filled along the angle axis instead.
#[derive(Clone, Debug, PartialEq)]
pub struct Inpainted {
    pub sinogram: Sinogram,
    pub angle_fallback_rows: Vec<usize>,
}

/// Maximal runs of `true` as half-open ranges.
fn runs(bits: impl Iterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut len = 0;
    for (i, b) in bits.enumerate() {
        match (b, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
        len = i + 1;
    }
    if let Some(s) = start {
        out.push((s, len));
    }
    out
}

/// Value of anchor `a` carried over to bin `k`. Plain LI copies the anchor;
/// NMAR rescales it by `prior[k] / prior[a]`, which is exactly 1 for a
/// constant prior.
trait Carry {
    fn carry(&self, values: &[f64], anchor: usize, k: usize) -> f64;
    /// The value that is actually interpolated.
    fn normalized(&self, values: &[f64], anchor: usize) -> f64;
}

struct Plain;

impl Carry for Plain {
    fn carry(&self, values: &[f64], anchor: usize, _k: usize) -> f64 {
        values[anchor]
    }

    fn normalized(&self, values: &[f64], anchor: usize) -> f64 {
        values[anchor]
    }
}

struct Scaled<'a>(&'a [f64]);

impl Carry for Scaled<'_> {
    fn carry(&self, values: &[f64], anchor: usize, k: usize) -> f64 {
        values[anchor] * (self.0[k] / self.0[anchor])
    }

    fn normalized(&self, values: &[f64], anchor: usize) -> f64 {
        values[anchor] / self.0[anchor]
    }
}

/// Linear interpolation over `[lo, hi)` between anchors `lo - 1` and `hi`,
/// as `(1 - t) left + t right`. Equal anchors give a flat fill; a missing
/// anchor on one side repeats the other anchor.
fn fill_gap(values: &mut [f64], lo: usize, hi: usize, carry: &impl Carry) {
    let n = values.len();
    let left = lo.checked_sub(1);
    let right = (hi < n).then_some(hi);
    match (left, right) {
        (Some(l), Some(r)) => {
            let span = (hi - lo + 1) as f64;
            let flat = carry.normalized(values, l) == carry.normalized(values, r);
            for k in lo..hi {
                let from_l = carry.carry(values, l, k);
                values[k] = if flat {
                    from_l
                } else {
                    let t = (k - lo + 1) as f64 / span;
                    (1.0 - t) * from_l + t * carry.carry(values, r, k)
                };
            }
        }
        (Some(a), None) | (None, Some(a)) => {
            for k in lo..hi {
                values[k] = carry.carry(values, a, k);
            }
        }
        (None, None) => {}
    }
}

/// Shared LI driver: per-view intervals, then angle-axis fallback for views
/// that lie entirely inside the trace. `guard` switches on NMAR rescaling.
fn inpaint(sino: &Sinogram, trace: &MetalTrace, guard: Option<&Array2<f64>>) -> Result<Inpainted> {
    check_dims(sino.shape(), trace.shape())?;
    let (n_views, n_det) = sino.shape();
    let mut out = sino.values().clone();
    let mut full_rows = Vec::new();
    for view in 0..n_views {
        let gaps = runs(trace.bits().row(view).iter().copied());
        if gaps.first() == Some(&(0, n_det)) {
            full_rows.push(view);
            continue;
        }
        let mut row = out.row_mut(view);
        let slice = row.as_slice_mut().expect("contiguous row");
        for (lo, hi) in gaps {
            match guard {
                None => fill_gap(slice, lo, hi, &Plain),
                Some(g) => fill_gap(slice, lo, hi, &Scaled(g.row(view).as_slice().expect("contiguous row"))),
            }
        }
    }
    if !full_rows.is_empty() {
        if full_rows.len() == n_views {
            return Err(Error::InvalidArgument(
                "metal trace covers the whole sinogram".into(),
            ));
        }
        // Rows fully inside the trace: interpolate each detector column
        // along the angle axis between the nearest usable views.
        let mut blocked = vec![false; n_views];
        for &r in &full_rows {
            blocked[r] = true;
        }
        let blocked_runs = runs(blocked.iter().copied());
        let mut column = Array1::zeros(n_views);
        let mut guard_column = Array1::zeros(n_views);
        for det in 0..n_det {
            column.assign(&out.column(det));
            let col = column.as_slice_mut().expect("owned column");
            if let Some(g) = guard {
                guard_column.assign(&g.column(det));
            }
            let scale = Scaled(guard_column.as_slice().expect("owned column"));
            for &(lo, hi) in &blocked_runs {
                match guard {
                    None => fill_gap(col, lo, hi, &Plain),
                    Some(_) => fill_gap(col, lo, hi, &scale),
                }
            }
            out.column_mut(det).assign(&column);
        }
    }
    Ok(Inpainted {
        sinogram: Sinogram::new(out, sino.unit())?,
        angle_fallback_rows: full_rows,
    })
}

/// Per-view linear interpolation across every maximal trace interval.
/// Bins outside `trace` are returned unchanged.
pub fn li_inpaint(sino: &Sinogram, trace: &MetalTrace) -> Result<Inpainted> {
    inpaint(sino, trace, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSource {
    ThresholdSegmented,
    ExternallySupplied,
}

/// Strictly positive attenuation image used to flatten the sinogram.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorImage {
    image: Image,
    pub source: PriorSource,
}

impl PriorImage {
    /// Wraps an attenuation image, flooring it at `floor > 0`.
    pub fn external(image: &Image, floor: f64) -> Result<Self> {
        image.expect_unit(ImageUnit::Attenuation)?;
        if !(floor > 0.0) {
            return Err(Error::InvalidArgument("prior floor must be positive".into()));
        }
        Ok(PriorImage {
            image: image.map(|v| v.max(floor))?,
            source: PriorSource::ExternallySupplied,
        })
    }

    pub fn image(&self) -> &Image {
        &self.image
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmarParams {
    /// Below this HU a pixel is air.
    pub air_hu: f64,
    /// Above this HU a pixel is bone.
    pub bone_hu: f64,
    /// Gaussian sigma in pixels applied to the class image.
    pub smooth_sigma: f64,
    pub mu_water: f64,
    /// Bone representative attenuation; `None` means twice `mu_water`.
    pub bone_mu: Option<f64>,
}

impl Default for NmarParams {
    fn default() -> Self {
        NmarParams {
            air_hu: -500.0,
            bone_hu: 350.0,
            smooth_sigma: 1.0,
            mu_water: DEFAULT_MU_WATER,
            bone_mu: None,
        }
    }
}

impl NmarParams {
    pub fn bone_mu(&self) -> f64 {
        self.bone_mu.unwrap_or(2.0 * self.mu_water)
    }

    /// Floor keeping the prior strictly positive in air.
    pub fn floor(&self) -> f64 {
        1e-6 * self.mu_water
    }
}

/// Separable Gaussian blur with edge replication, truncated at 3 sigma.
pub(crate) fn gaussian_blur(values: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma <= 0.0 {
        return values.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = taps.iter().sum();
    let taps: Vec<f64> = taps.iter().map(|t| t / norm).collect();
    let blur_axis = |src: &Array2<f64>, axis: Axis| {
        let mut dst = Array2::zeros(src.dim());
        for (lane_in, mut lane_out) in src.lanes(axis).into_iter().zip(dst.lanes_mut(axis)) {
            let n = lane_in.len() as isize;
            for i in 0..n {
                let mut acc = 0.0;
                for (t, k) in taps.iter().zip(-radius..=radius) {
                    let j = (i + k).clamp(0, n - 1);
                    acc += t * lane_in[j as usize];
                }
                lane_out[i as usize] = acc;
            }
        }
        dst
    };
    blur_axis(&blur_axis(values, Axis(1)), Axis(0))
}

/// Three-class prior from a corrupted HU image: air, soft tissue and bone
/// replaced by representative attenuations, metal pixels forced to soft
/// tissue, then Gaussian smoothed and floored.
pub fn nmar_prior(x_ma: &Image, metal: &MetalMask, params: &NmarParams) -> Result<PriorImage> {
    x_ma.expect_unit(ImageUnit::Hu)?;
    check_dims(x_ma.shape(), metal.shape())?;
    if !(params.air_hu < params.bone_hu) {
        return Err(Error::InvalidArgument(format!(
            "segmentation cut points must ascend: air {} bone {}",
            params.air_hu, params.bone_hu
        )));
    }
    if !(params.mu_water > 0.0 && params.bone_mu() > 0.0 && params.smooth_sigma >= 0.0) {
        return Err(Error::InvalidArgument("invalid NMAR prior parameters".into()));
    }
    let bone_mu = params.bone_mu();
    let mut classes = Array2::zeros(x_ma.shape());
    Zip::from(&mut classes)
        .and(x_ma.values())
        .and(metal.bits())
        .for_each(|c, &hu, &is_metal| {
            *c = if is_metal {
                params.mu_water
            } else if hu < params.air_hu {
                0.0
            } else if hu > params.bone_hu {
                bone_mu
            } else {
                params.mu_water
            };
        });
    let floor = params.floor();
    let smoothed = gaussian_blur(&classes, params.smooth_sigma).mapv(|v| v.max(floor));
    Ok(PriorImage {
        image: Image::new(smoothed, ImageUnit::Attenuation)?,
        source: PriorSource::ThresholdSegmented,
    })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// NMAR given the forward-projected prior directly.
///
/// Equivalent to `guard * LI(sino / guard)` with `guard = max(P(prior), eps)`
/// and `eps` a millionth of the median nonzero prior projection. Anchors are
/// carried to each bin by the ratio of guard values, so a constant prior
/// reproduces LI bit for bit. Bins outside `trace` are returned unchanged.
pub fn nmar_inpaint_with_projection(
    sino: &Sinogram,
    trace: &MetalTrace,
    prior_projection: &Sinogram,
) -> Result<Inpainted> {
    check_dims(sino.shape(), trace.shape())?;
    check_dims(sino.shape(), prior_projection.shape())?;
    let nonzero: Vec<f64> = prior_projection
        .values()
        .iter()
        .copied()
        .filter(|&v| v != 0.0)
        .collect();
    let eps = median(nonzero).map_or(f64::MIN_POSITIVE, |m| 1e-6 * m.abs());
    let guard = prior_projection.values().mapv(|p| p.max(eps));
    inpaint(sino, trace, Some(&guard))
}

/// Normalized MAR with the prior projected through `geo`.
pub fn nmar_inpaint(
    sino: &Sinogram,
    trace: &MetalTrace,
    prior: &PriorImage,
    geo: &Geometry,
) -> Result<Inpainted> {
    sino.check_geometry(geo)?;
    let projected = projector::forward_project(prior.image(), geo)?;
    nmar_inpaint_with_projection(sino, trace, &projected)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarMethod {
    Li,
    Nmar,
}

impl std::str::FromStr for MarMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "li" => Ok(MarMethod::Li),
            "nmar" => Ok(MarMethod::Nmar),
            other => Err(Error::InvalidArgument(format!(
                "unknown MAR method {other:?}, expected li or nmar"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corrected {
    pub sinogram: Sinogram,
    /// Reconstruction in HU.
    pub image: Image,
    /// Only set for NMAR.
    pub prior: Option<PriorImage>,
}

/// Runs one baseline end to end. NMAR segments its prior from the LI
/// reconstruction.
pub fn correct(
    s_ma: &Sinogram,
    trace: &MetalTrace,
    mask: &MetalMask,
    method: MarMethod,
    geo: &Geometry,
    filt: &RampFilter,
    params: &NmarParams,
) -> Result<Corrected> {
    let li = li_inpaint(s_ma, trace)?.sinogram;
    let to_hu = |s: &Sinogram| mu_to_hu(&projector::fbp(s, geo, filt)?, params.mu_water);
    match method {
        MarMethod::Li => Ok(Corrected {
            image: to_hu(&li)?,
            sinogram: li,
            prior: None,
        }),
        MarMethod::Nmar => {
            let prior = nmar_prior(&to_hu(&li)?, mask, params)?;
            let sinogram = nmar_inpaint(s_ma, trace, &prior, geo)?.sinogram;
            Ok(Corrected {
                image: to_hu(&sinogram)?,
                sinogram,
                prior: Some(prior),
            })
        }
    }
}
