//! Analytic ellipse phantoms and synthetic metal masks.
//!
//! Coordinates are normalized: the image square spans `[-1, 1]` on both
//! axes with `y` pointing up.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Image, ImageUnit, MetalMask};
use crate::units::SizeThresholds;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    /// Counter-clockwise rotation in degrees.
    pub angle_deg: f64,
    /// Additive value inside the ellipse.
    pub value: f64,
}

impl Ellipse {
    pub fn new(cx: f64, cy: f64, a: f64, b: f64, angle_deg: f64, value: f64) -> Self {
        Ellipse {
            cx,
            cy,
            a,
            b,
            angle_deg,
            value,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

/// Sum of ellipses on top of `background`, averaged over `supersample`²
/// sub-pixel points per pixel.
pub fn rasterize(
    size: usize,
    background: f64,
    ellipses: &[Ellipse],
    supersample: usize,
) -> Array2<f64> {
    let ss = supersample.max(1);
    let n = size as f64;
    Array2::from_shape_fn((size, size), |(r, c)| {
        let mut acc = 0.0;
        for sr in 0..ss {
            for sc in 0..ss {
                let px = c as f64 + (sc as f64 + 0.5) / ss as f64;
                let py = r as f64 + (sr as f64 + 0.5) / ss as f64;
                let x = 2.0 * px / n - 1.0;
                let y = 1.0 - 2.0 * py / n;
                acc += ellipses
                    .iter()
                    .filter(|e| e.contains(x, y))
                    .map(|e| e.value)
                    .sum::<f64>();
            }
        }
        background + acc / (ss * ss) as f64
    })
}

/// Shepp-Logan layout with HU contrasts: air outside, a 700 HU skull,
/// 40 HU brain, 0 HU ventricles and 70 HU small features.
pub fn shepp_logan_ellipses() -> Vec<Ellipse> {
    vec![
        Ellipse::new(0.0, 0.0, 0.69, 0.92, 0.0, 1700.0),
        Ellipse::new(0.0, -0.0184, 0.6624, 0.874, 0.0, -660.0),
        Ellipse::new(0.22, 0.0, 0.11, 0.31, -18.0, -40.0),
        Ellipse::new(-0.22, 0.0, 0.16, 0.41, 18.0, -40.0),
        Ellipse::new(0.0, 0.35, 0.21, 0.25, 0.0, 30.0),
        Ellipse::new(0.0, 0.1, 0.046, 0.046, 0.0, 30.0),
        Ellipse::new(0.0, -0.1, 0.046, 0.046, 0.0, 30.0),
        Ellipse::new(-0.08, -0.605, 0.046, 0.023, 0.0, 30.0),
        Ellipse::new(0.0, -0.606, 0.023, 0.023, 0.0, 30.0),
        Ellipse::new(0.06, -0.605, 0.023, 0.046, 0.0, 30.0),
    ]
}

pub fn shepp_logan_hu(size: usize) -> Image {
    let values = rasterize(size, -1000.0, &shepp_logan_ellipses(), 3);
    Image::new(values, ImageUnit::Hu).expect("finite phantom")
}

/// Randomized torso-like slice in HU: a soft-tissue body with a fat rim,
/// a few organs and several bone structures.
pub fn random_body_hu<R: Rng>(size: usize, rng: &mut R) -> Image {
    let mut ellipses = Vec::new();
    let body_a = rng.gen_range(0.72..0.86);
    let body_b = rng.gen_range(0.55..0.72);
    // Fat rim: body at -100 HU, inner soft tissue at +40 HU.
    ellipses.push(Ellipse::new(0.0, 0.0, body_a, body_b, 0.0, 900.0));
    ellipses.push(Ellipse::new(0.0, 0.0, body_a - 0.05, body_b - 0.05, 0.0, 140.0));
    for _ in 0..rng.gen_range(2..5) {
        ellipses.push(Ellipse::new(
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.25..0.3),
            rng.gen_range(0.08..0.22),
            rng.gen_range(0.06..0.18),
            rng.gen_range(0.0..180.0),
            rng.gen_range(-60.0..60.0),
        ));
    }
    // Vertebral body and ribs/pelvis-like bone blobs.
    let spine_y = -body_b + rng.gen_range(0.18..0.26);
    ellipses.push(Ellipse::new(
        rng.gen_range(-0.03..0.03),
        spine_y,
        rng.gen_range(0.08..0.12),
        rng.gen_range(0.07..0.1),
        0.0,
        rng.gen_range(350.0..600.0),
    ));
    for side in [-1.0, 1.0] {
        ellipses.push(Ellipse::new(
            side * rng.gen_range(0.35..0.55),
            rng.gen_range(-0.2..0.1),
            rng.gen_range(0.05..0.1),
            rng.gen_range(0.1..0.2),
            rng.gen_range(-30.0..30.0),
            rng.gen_range(400.0..800.0),
        ));
    }
    let values = rasterize(size, -1000.0, &ellipses, 2);
    Image::new(values, ImageUnit::Hu).expect("finite phantom")
}

/// Random implant mask made of one to three ellipses with roughly
/// `target_area` pixels in total, placed inside the central body region.
pub fn random_metal_mask<R: Rng>(size: usize, target_area: f64, rng: &mut R) -> MetalMask {
    let pieces = rng.gen_range(1..=3usize);
    let n = size as f64;
    let mut ellipses = Vec::with_capacity(pieces);
    for _ in 0..pieces {
        let area_px = target_area / pieces as f64;
        // Area in normalized units: pi a b with a pixel being (2 / n)^2.
        let area_norm = area_px * (2.0 / n).powi(2);
        let aspect = rng.gen_range(1.0..2.5);
        let b = (area_norm / (std::f64::consts::PI * aspect)).sqrt();
        let a = aspect * b;
        ellipses.push(Ellipse::new(
            rng.gen_range(-0.35..0.35),
            rng.gen_range(-0.3..0.2),
            a,
            b,
            rng.gen_range(0.0..180.0),
            1.0,
        ));
    }
    let values = rasterize(size, 0.0, &ellipses, 1);
    MetalMask::new(values.mapv(|v| v > 0.0))
}

/// Implant area aimed at the middle of a size group: the geometric mean of
/// the group's pixel-count range. The open ends are closed at half the
/// smallest cut and two and a half times the largest.
pub fn group_target_area(group: u8, thresholds: &SizeThresholds) -> Result<f64> {
    let c = thresholds.cuts().map(|v| v as f64);
    let (lo, hi) = match group {
        1 => (c[3], 2.5 * c[3]),
        2 => (c[2], c[3]),
        3 => (c[1], c[2]),
        4 => (c[0], c[1]),
        5 => (0.5 * c[0], c[0]),
        g => {
            return Err(Error::InvalidArgument(format!(
                "size group must be 1 to 5, got {g}"
            )))
        }
    };
    Ok((lo * hi).sqrt())
}

/// Random body slice plus an implant sized for `group`. The mask may land
/// in a neighbouring group; callers regroup from the actual pixel count.
pub fn synthetic_pair<R: Rng>(
    size: usize,
    group: u8,
    thresholds: &SizeThresholds,
    rng: &mut R,
) -> Result<(Image, MetalMask)> {
    let target = group_target_area(group, thresholds)?;
    let body = random_body_hu(size, rng);
    let mut mask = random_metal_mask(size, target, rng);
    while mask.is_empty() {
        mask = random_metal_mask(size, target, rng);
    }
    Ok((body, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shepp_logan_values() {
        let img = shepp_logan_hu(128);
        let v = img.values();
        assert_eq!(v[(0, 0)], -1000.0);
        // Center of the brain region between the ventricles.
        assert!((v[(64, 64)] - 40.0).abs() < 1e-9, "{}", v[(64, 64)]);
    }

    #[test]
    fn metal_area_tracks_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for target in [50.0, 400.0, 2000.0] {
            let m = random_metal_mask(416, target, &mut rng);
            let count = m.count() as f64;
            assert!(count > 0.5 * target && count < 1.5 * target, "{count} vs {target}");
        }
    }

    #[test]
    fn group_targets_sit_inside_their_groups() {
        let t = SizeThresholds::default();
        for g in 1..=5u8 {
            let area = group_target_area(g, &t).unwrap();
            assert_eq!(t.group_of(area.round() as usize).unwrap(), g);
        }
        assert!(group_target_area(0, &t).is_err());
    }
}
