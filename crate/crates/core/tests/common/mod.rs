#![allow(dead_code)]

use mar_core::phantom::{rasterize, Ellipse};
use mar_core::physics::{simulate_case, SimCase, SimParams};
use mar_core::projector::{FilterWindow, RampFilter};
use mar_core::spectrum::SpectrumConfig;
use mar_core::{BeamModel, Geometry, Image, ImageUnit, MetalMask, MetalTrace, Sinogram, SinogramUnit};
use ndarray::{Array2, Zip};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(shape: (usize, usize), rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

pub fn random_image(geo: &Geometry, rng: &mut impl Rng) -> Image {
    Image::new(random_grid(geo.image_shape(), rng), ImageUnit::Attenuation).unwrap()
}

pub fn random_sino(geo: &Geometry, rng: &mut impl Rng) -> Sinogram {
    Sinogram::new(random_grid(geo.sinogram_shape(), rng), SinogramUnit::LineIntegral).unwrap()
}

pub fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + x * y)
}

pub fn norm(a: &Array2<f64>) -> f64 {
    dot(a, a).sqrt()
}

/// 64x64 image, 90 views, 65 detectors.
pub fn desk_geometry() -> Geometry {
    Geometry::parallel(64, 90, 65).unwrap()
}

pub fn desk_fan_geometry() -> Geometry {
    Geometry::parallel(64, 90, 65)
        .unwrap()
        .with_beam_model(BeamModel::FanEquiangular {
            source_distance: 150.0,
        })
        .unwrap()
}

/// Uniform disk of `value` and radius `r` pixels centred on the grid,
/// rasterised with `ss` x `ss` sub-samples per pixel.
pub fn disk(n: usize, r: f64, value: f64, ss: usize) -> Image {
    let c = (n as f64 - 1.0) / 2.0;
    Image::from_fn((n, n), ImageUnit::Attenuation, |(i, j)| {
        let mut hits = 0;
        for a in 0..ss {
            for b in 0..ss {
                let y = i as f64 - 0.5 + (a as f64 + 0.5) / ss as f64 - c;
                let x = j as f64 - 0.5 + (b as f64 + 0.5) / ss as f64 - c;
                if x * x + y * y <= r * r {
                    hits += 1;
                }
            }
        }
        value * hits as f64 / (ss * ss) as f64
    })
    .unwrap()
}

/// Soft-tissue body crossed by a horizontal bone ridge with a small implant
/// sitting on the ridge.
pub fn ridge_case() -> (Geometry, SimCase) {
    let n = 64;
    let geo = Geometry::parallel(n, 90, 65).unwrap();
    let hu = rasterize(
        n,
        -1000.0,
        &[
            Ellipse::new(0.0, 0.0, 0.85, 0.7, 0.0, 1040.0),
            Ellipse::new(0.0, 0.0, 0.75, 0.1, 0.0, 700.0),
        ],
        4,
    );
    let x_gt = Image::new(hu, ImageUnit::Hu).unwrap();
    let c = (n as f64 - 1.0) / 2.0;
    let mask = MetalMask::new(Array2::from_shape_fn((n, n), |(i, j)| {
        (i as f64 - c).powi(2) + (j as f64 - c - 10.0).powi(2) <= 6.0
    }));
    let cfg = SpectrumConfig::bundled();
    let insert = cfg.insert("titanium", mask.clone()).unwrap();
    let spec = cfg.spectrum().unwrap();
    let filt = RampFilter::for_geometry(&geo, FilterWindow::Ramp);
    let case = simulate_case(&x_gt, &mask, &insert, &spec, &geo, &filt, &SimParams::default()).unwrap();
    (geo, case)
}

pub fn in_trace_l2(a: &Sinogram, b: &Sinogram, t: &MetalTrace) -> f64 {
    Zip::from(a.values())
        .and(b.values())
        .and(t.bits())
        .fold(0.0, |acc, &x, &y, &m| if m { acc + (x - y).powi(2) } else { acc })
        .sqrt()
}
