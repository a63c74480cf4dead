//! Network-input encodings and the dual-domain training objective.
//!
//! - [`pool_pyramid`]: the metal mask projection averaged down a 2x2
//!   pyramid so it can be fused with multi-scale sinogram features.
//! - [`periodic_pad`]: sinogram padding that wraps the angle axis and zero
//!   pads the detector axis.
//! - [`total_loss`]: sinogram L1 plus metal-masked image L1 terms.

use std::f64::consts::PI;

use ndarray::{s, Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::geometry::Geometry;
use crate::grid::{Image, MetalMask, Sinogram, SinogramUnit};

#[derive(Clone, Debug, PartialEq)]
pub struct PoolPyramid {
    pub levels: Vec<Array2<f64>>,
}

impl PoolPyramid {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

/// Stride-2 mean over 2x2 windows; edge windows average the cells that exist.
pub fn avg_pool2(grid: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = grid.dim();
    let out_shape = (rows.div_ceil(2), cols.div_ceil(2));
    Array2::from_shape_fn(out_shape, |(r, c)| {
        let window = grid.slice(s![2 * r..(2 * r + 2).min(rows), 2 * c..(2 * c + 2).min(cols)]);
        window.sum() / window.len() as f64
    })
}

pub fn pool_pyramid(m_p: &Sinogram, depth: usize) -> Result<PoolPyramid> {
    if depth == 0 {
        return Err(Error::InvalidArgument("pyramid depth must be at least 1".into()));
    }
    let smallest = m_p.n_angles().min(m_p.n_detectors());
    if depth > usize::BITS as usize || (1usize << (depth - 1)) > smallest {
        return Err(Error::InvalidArgument(format!(
            "pyramid depth {depth} too deep for a {}x{} sinogram",
            m_p.n_angles(),
            m_p.n_detectors()
        )));
    }
    let mut levels = Vec::with_capacity(depth);
    levels.push(m_p.values().clone());
    for _ in 1..depth {
        let next = avg_pool2(levels.last().expect("nonempty"));
        levels.push(next);
    }
    Ok(PoolPyramid { levels })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadMode {
    /// Cyclic along angles; needs a full turn.
    #[default]
    Periodic,
    /// Parallel half turn: row `n + q` is row `q` with the detector axis
    /// reversed, from `S(theta + pi, s) = S(theta, -s)`.
    FlipWrap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PaddedSinogram {
    pub values: Array2<f64>,
    pub pad_angles: usize,
    pub pad_detectors: usize,
    pub unit: SinogramUnit,
}

impl PaddedSinogram {
    /// The unpadded interior.
    pub fn interior(&self) -> Sinogram {
        let (rows, cols) = self.values.dim();
        let inner = self
            .values
            .slice(s![
                self.pad_angles..rows - self.pad_angles,
                self.pad_detectors..cols - self.pad_detectors
            ])
            .to_owned();
        Sinogram::from_parts_unchecked(inner, self.unit)
    }
}

pub fn periodic_pad(
    sino: &Sinogram,
    pad_angles: usize,
    pad_detectors: usize,
    geo: &Geometry,
    mode: PadMode,
) -> Result<PaddedSinogram> {
    sino.check_geometry(geo)?;
    match mode {
        PadMode::Periodic if !geo.is_full_turn() => return Err(Error::NotPeriodic),
        PadMode::FlipWrap if !(geo.is_parallel() && (geo.angle_range - PI).abs() < 1e-9) => {
            return Err(Error::InvalidArgument(
                "flip-wrap padding needs a parallel half-turn scan".into(),
            ))
        }
        _ => {}
    }
    let (n_views, n_det) = sino.shape();
    if pad_angles >= n_views {
        return Err(Error::InvalidArgument(format!(
            "angle padding {pad_angles} must be smaller than {n_views} views"
        )));
    }
    let src = sino.values();
    let mut out = Array2::zeros((n_views + 2 * pad_angles, n_det + 2 * pad_detectors));
    for r in 0..out.nrows() {
        let view = r as isize - pad_angles as isize;
        let wrapped = view.rem_euclid(n_views as isize) as usize;
        // Number of half turns crossed; odd means the row is mirrored.
        let flip = mode == PadMode::FlipWrap && view.div_euclid(n_views as isize) % 2 != 0;
        let mut dst = out.slice_mut(s![r, pad_detectors..pad_detectors + n_det]);
        if flip {
            dst.assign(&src.slice(s![wrapped, ..;-1]));
        } else {
            dst.assign(&src.row(wrapped));
        }
    }
    Ok(PaddedSinogram {
        values: out,
        pad_angles,
        pad_detectors,
        unit: sino.unit(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub se: f64,
    pub rc: f64,
    pub ie: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            se: 1.0,
            rc: 1.0,
            ie: 1.0,
        }
    }
}

/// Weighted terms of the training objective and their sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// `alpha_se * mean |S_se - S_gt|`.
    pub sinogram: f64,
    /// `alpha_rc * masked mean |X_se - X_gt|`.
    pub radon_consistency: f64,
    /// `alpha_ie * masked mean |X_out - X_gt|`.
    pub image: f64,
    pub total: f64,
}

/// Image terms average over non-metal pixels only, so their scale does not
/// depend on implant size. An all-metal mask zeroes them.
#[allow(clippy::too_many_arguments)]
pub fn total_loss(
    s_se: &Sinogram,
    s_gt: &Sinogram,
    x_se: &Image,
    x_out: &Image,
    x_gt: &Image,
    mask: &MetalMask,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    check_dims(s_gt.shape(), s_se.shape())?;
    check_dims(x_gt.shape(), x_se.shape())?;
    check_dims(x_gt.shape(), x_out.shape())?;
    check_dims(x_gt.shape(), mask.shape())?;
    if [weights.se, weights.rc, weights.ie]
        .iter()
        .any(|w| !(w.is_finite() && *w >= 0.0))
    {
        return Err(Error::InvalidArgument(format!(
            "loss weights must be nonnegative, got {weights:?}"
        )));
    }
    let n_sino = s_gt.values().len() as f64;
    let sino_l1 = Zip::from(s_se.values())
        .and(s_gt.values())
        .fold(0.0, |acc, &a, &b| acc + (a - b).abs())
        / n_sino;
    let (mut rc_sum, mut ie_sum, mut count) = (0.0, 0.0, 0usize);
    Zip::from(x_se.values())
        .and(x_out.values())
        .and(x_gt.values())
        .and(mask.bits())
        .for_each(|&se, &out, &gt, &metal| {
            if !metal {
                rc_sum += (se - gt).abs();
                ie_sum += (out - gt).abs();
                count += 1;
            }
        });
    let (rc, ie) = if count == 0 {
        (0.0, 0.0)
    } else {
        (rc_sum / count as f64, ie_sum / count as f64)
    };
    let sinogram = weights.se * sino_l1;
    let radon_consistency = weights.rc * rc;
    let image = weights.ie * ie;
    Ok(LossBreakdown {
        sinogram,
        radon_consistency,
        image,
        total: sinogram + radon_consistency + image,
    })
}
