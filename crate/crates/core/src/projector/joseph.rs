//! Interpolated ray-sum kernel and its exact transpose.
//!
//! A ray `(theta, s)` is the line `x cos(theta) + y sin(theta) = s`. It is
//! sampled at `t_k = (k - (K - 1) / 2) * h` along the direction
//! `(-sin(theta), cos(theta))` with `h = pixel_size / 2`; each sample reads
//! the image by bilinear interpolation (zero outside the grid) and the ray
//! sum is multiplied by `h`. The transpose scatters with the same weights in
//! the same order, so `<P x, y> = <x, P^T y>` holds to round-off.
//!
//! Summation order: forward rays are summed sample by sample in increasing
//! `k`. The transpose walks views in index order inside [`BACKPROJECT_BLOCKS`]
//! fixed view blocks and then adds block images in block order, so results
//! do not depend on the worker count.

use ndarray::{s, Array2, ArrayViewMut1, Axis};
use ndarray::parallel::prelude::*;

/// Fixed number of view blocks for the transpose reduction.
pub const BACKPROJECT_BLOCKS: usize = 16;

/// Samples per pixel length along a ray.
const SAMPLES_PER_PIXEL: f64 = 2.0;

/// Precomputed sampling of one image grid.
#[derive(Clone, Copy, Debug)]
pub(crate) struct RaySampler {
    n: usize,
    pixel_size: f64,
    step: f64,
    n_samples: usize,
}

/// Per-ray stepping in pixel coordinates.
struct RayWalk {
    k_lo: usize,
    k_hi: usize,
    col0: f64,
    row0: f64,
    dcol: f64,
    drow: f64,
}

impl RaySampler {
    pub fn new(image_size: usize, pixel_size: f64) -> Self {
        let step = pixel_size / SAMPLES_PER_PIXEL;
        // Half extent of the bilinear support: one pixel past the outer centers.
        let half = (image_size as f64 + 1.0) / 2.0 * pixel_size;
        let reach = half * std::f64::consts::SQRT_2;
        let n_samples = 2 * (reach / step).ceil() as usize + 1;
        RaySampler {
            n: image_size,
            pixel_size,
            step,
            n_samples,
        }
    }

    #[cfg(test)]
    fn step(&self) -> f64 {
        self.step
    }

    fn walk(&self, theta: f64, offset: f64) -> Option<RayWalk> {
        let (sin, cos) = theta.sin_cos();
        let center = (self.n as f64 - 1.0) / 2.0;
        let half_k = (self.n_samples as f64 - 1.0) / 2.0;
        // Physical point for sample k: offset * (cos, sin) + t_k * (-sin, cos).
        let x_at = |t: f64| offset * cos - t * sin;
        let y_at = |t: f64| offset * sin + t * cos;
        let t0 = -half_k * self.step;
        // Clip the sample range to the open box where bilinear reads can be
        // nonzero: pixel coordinates in (-1, n).
        let box_half = (self.n as f64 + 1.0) / 2.0 * self.pixel_size;
        let mut t_lo = f64::NEG_INFINITY;
        let mut t_hi = f64::INFINITY;
        for (p0, dp) in [(offset * cos, -sin), (offset * sin, cos)] {
            if dp.abs() < 1e-12 {
                if p0.abs() >= box_half {
                    return None;
                }
            } else {
                let a = (-box_half - p0) / dp;
                let b = (box_half - p0) / dp;
                t_lo = t_lo.max(a.min(b));
                t_hi = t_hi.min(a.max(b));
            }
        }
        if t_lo >= t_hi {
            return None;
        }
        let k_lo = ((t_lo - t0) / self.step).floor().max(0.0) as usize;
        let k_hi = (((t_hi - t0) / self.step).ceil() as usize + 1).min(self.n_samples);
        if k_lo >= k_hi {
            return None;
        }
        let inv_pix = 1.0 / self.pixel_size;
        Some(RayWalk {
            k_lo,
            k_hi,
            col0: x_at(t0) * inv_pix + center,
            row0: center - y_at(t0) * inv_pix,
            dcol: -sin * self.step * inv_pix,
            drow: -cos * self.step * inv_pix,
        })
    }

    /// Ray sum over an image padded by one zero pixel on every side.
    fn ray_sum(&self, padded: &Array2<f64>, theta: f64, offset: f64) -> f64 {
        let Some(w) = self.walk(theta, offset) else {
            return 0.0;
        };
        let limit = self.n as f64;
        let mut acc = 0.0;
        for k in w.k_lo..w.k_hi {
            let col = w.col0 + k as f64 * w.dcol;
            let row = w.row0 + k as f64 * w.drow;
            if !(col > -1.0 && col < limit && row > -1.0 && row < limit) {
                continue;
            }
            let cf = col.floor();
            let rf = row.floor();
            let fx = col - cf;
            let fy = row - rf;
            // Padded index = pixel index + 1.
            let c = (cf as isize + 1) as usize;
            let r = (rf as isize + 1) as usize;
            let top = (1.0 - fx) * padded[(r, c)] + fx * padded[(r, c + 1)];
            let bottom = (1.0 - fx) * padded[(r + 1, c)] + fx * padded[(r + 1, c + 1)];
            acc += (1.0 - fy) * top + fy * bottom;
        }
        acc * self.step
    }

    /// Adds `value` times the ray's sampling weights into a padded image.
    fn ray_scatter(&self, padded: &mut Array2<f64>, theta: f64, offset: f64, value: f64) {
        if value == 0.0 {
            return;
        }
        let Some(w) = self.walk(theta, offset) else {
            return;
        };
        let limit = self.n as f64;
        let v = value * self.step;
        for k in w.k_lo..w.k_hi {
            let col = w.col0 + k as f64 * w.dcol;
            let row = w.row0 + k as f64 * w.drow;
            if !(col > -1.0 && col < limit && row > -1.0 && row < limit) {
                continue;
            }
            let cf = col.floor();
            let rf = row.floor();
            let fx = col - cf;
            let fy = row - rf;
            let c = (cf as isize + 1) as usize;
            let r = (rf as isize + 1) as usize;
            let top = (1.0 - fy) * v;
            let bottom = fy * v;
            padded[(r, c)] += (1.0 - fx) * top;
            padded[(r, c + 1)] += fx * top;
            padded[(r + 1, c)] += (1.0 - fx) * bottom;
            padded[(r + 1, c + 1)] += fx * bottom;
        }
    }
}

fn pad(image: &Array2<f64>) -> Array2<f64> {
    let (h, w) = image.dim();
    let mut padded = Array2::zeros((h + 2, w + 2));
    padded.slice_mut(s![1..h + 1, 1..w + 1]).assign(image);
    padded
}

/// Forward projection of `image` onto rays `ray(view, detector) -> (theta, s)`.
pub(crate) fn project<F>(
    image: &Array2<f64>,
    pixel_size: f64,
    shape: (usize, usize),
    ray: F,
) -> Array2<f64>
where
    F: Fn(usize, usize) -> (f64, f64) + Sync,
{
    let sampler = RaySampler::new(image.nrows(), pixel_size);
    let padded = pad(image);
    let mut out = Array2::zeros(shape);
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(view, mut row): (usize, ArrayViewMut1<f64>)| {
            for (det, v) in row.iter_mut().enumerate() {
                let (theta, offset) = ray(view, det);
                *v = sampler.ray_sum(&padded, theta, offset);
            }
        });
    out
}

/// Exact transpose of [`project`].
pub(crate) fn backproject<F>(
    sino: &Array2<f64>,
    image_size: usize,
    pixel_size: f64,
    ray: F,
) -> Array2<f64>
where
    F: Fn(usize, usize) -> (f64, f64) + Sync,
{
    let sampler = RaySampler::new(image_size, pixel_size);
    let n_views = sino.nrows();
    let blocks = BACKPROJECT_BLOCKS.min(n_views.max(1));
    let partials: Vec<Array2<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut padded = Array2::zeros((image_size + 2, image_size + 2));
            let lo = b * n_views / blocks;
            let hi = (b + 1) * n_views / blocks;
            for view in lo..hi {
                for (det, &value) in sino.row(view).iter().enumerate() {
                    let (theta, offset) = ray(view, det);
                    sampler.ray_scatter(&mut padded, theta, offset, value);
                }
            }
            padded
        })
        .collect();
    let mut total = Array2::zeros((image_size + 2, image_size + 2));
    for p in &partials {
        total += p;
    }
    total
        .slice(s![1..image_size + 1, 1..image_size + 1])
        .to_owned()
}
