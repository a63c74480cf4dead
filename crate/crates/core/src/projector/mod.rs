//! Forward projector `P`, its transpose, filtered back projection and the
//! vector-Jacobian product of the reconstruction layer.
//!
//! All arithmetic is `f64`. Fan-beam data is reconstructed by rebinning to
//! the parallel geometry with the same sampling, so a single transpose-exact
//! kernel backs every geometry.

mod filter;
mod joseph;
mod rebin;

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{BeamModel, Geometry};
use crate::grid::{Image, ImageUnit, Sinogram, SinogramUnit};

pub use filter::{FilterWindow, RampFilter};
pub use joseph::BACKPROJECT_BLOCKS;

fn rays(geo: &Geometry) -> impl Fn(usize, usize) -> (f64, f64) + Sync + '_ {
    move |i, j| geo.ray(i, j)
}

/// Discrete line integrals of an attenuation image.
pub fn forward_project(img: &Image, geo: &Geometry) -> Result<Sinogram> {
    img.expect_unit(ImageUnit::Attenuation)?;
    img.check_geometry(geo)?;
    Ok(project_values(img.values(), geo))
}

pub(crate) fn project_values(values: &ndarray::Array2<f64>, geo: &Geometry) -> Sinogram {
    let out = joseph::project(values, geo.pixel_size, geo.sinogram_shape(), rays(geo));
    Sinogram::from_parts_unchecked(out, SinogramUnit::LineIntegral)
}

/// Exact transpose of [`forward_project`].
pub fn back_project(sino: &Sinogram, geo: &Geometry) -> Result<Image> {
    sino.check_geometry(geo)?;
    let out = joseph::backproject(sino.values(), geo.image_size, geo.pixel_size, rays(geo));
    Ok(Image::from_parts_unchecked(out, ImageUnit::Attenuation))
}

fn check_filter(filt: &RampFilter, geo: &Geometry) -> Result<()> {
    if filt.n_detectors() != geo.n_detectors
        || (filt.detector_spacing() - geo.detector_spacing).abs() > 1e-12 * geo.detector_spacing
    {
        return Err(Error::InvalidArgument(format!(
            "ramp filter built for {} detectors at spacing {}, geometry has {} at {}",
            filt.n_detectors(),
            filt.detector_spacing(),
            geo.n_detectors,
            geo.detector_spacing
        )));
    }
    Ok(())
}

/// Scale turning the transpose of filtered data into attenuation: the
/// angular weight `pi / n_angles` (views over a full turn count each line
/// twice) times `detector_spacing / pixel_size^2`, the inverse sample
/// density of the ray-driven transpose.
fn fbp_scale(geo: &Geometry) -> f64 {
    PI / geo.n_angles as f64 * geo.detector_spacing / (geo.pixel_size * geo.pixel_size)
}

fn parallel_fbp(sino: &ndarray::Array2<f64>, geo: &Geometry, filt: &RampFilter) -> Image {
    let filtered = filt.apply(sino);
    let mut out = joseph::backproject(&filtered, geo.image_size, geo.pixel_size, rays(geo));
    out *= fbp_scale(geo);
    Image::from_parts_unchecked(out, ImageUnit::Attenuation)
}

/// Filtered back projection, `P^-1`. Linear in `sino`.
pub fn fbp(sino: &Sinogram, geo: &Geometry, filt: &RampFilter) -> Result<Image> {
    sino.check_geometry(geo)?;
    check_filter(filt, geo)?;
    Ok(match geo.beam_model {
        BeamModel::Parallel => parallel_fbp(sino.values(), geo, filt),
        BeamModel::FanEquiangular { .. } => {
            let rebinned = rebin::Rebinner::new(geo).apply(sino.values());
            parallel_fbp(&rebinned, &geo.parallel_equivalent(), filt)
        }
    })
}

/// Vector-Jacobian product of [`fbp`]: maps an image-space cotangent to the
/// sinogram-space gradient. Since the ramp filter is symmetric this is
/// projection followed by filtering.
pub fn ril_vjp(cotangent: &Image, geo: &Geometry, filt: &RampFilter) -> Result<Sinogram> {
    cotangent.check_geometry(geo)?;
    check_filter(filt, geo)?;
    let par = geo.parallel_equivalent();
    let projected = joseph::project(
        cotangent.values(),
        par.pixel_size,
        par.sinogram_shape(),
        rays(&par),
    );
    let mut grad = filt.apply(&projected);
    grad *= fbp_scale(&par);
    if !geo.is_parallel() {
        grad = rebin::Rebinner::new(geo).transpose(&grad);
    }
    Ok(Sinogram::from_parts_unchecked(grad, SinogramUnit::LineIntegral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn geo() -> Geometry {
        Geometry::parallel(16, 12, 17).unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let g = geo();
        let f = RampFilter::for_geometry(&g, FilterWindow::Ramp);
        let img = Image::zeros(g.image_shape(), ImageUnit::Attenuation);
        let sino = Sinogram::zeros(g.sinogram_shape());
        assert!(forward_project(&img, &g).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(back_project(&sino, &g).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(fbp(&sino, &g, &f).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(ril_vjp(&img, &g, &f).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_and_unit_errors() {
        let g = geo();
        let f = RampFilter::for_geometry(&g, FilterWindow::Ramp);
        let wrong = Image::zeros((15, 16), ImageUnit::Attenuation);
        assert!(matches!(
            forward_project(&wrong, &g),
            Err(Error::DimensionMismatch { .. })
        ));
        let hu = Image::zeros(g.image_shape(), ImageUnit::Hu);
        assert!(matches!(forward_project(&hu, &g), Err(Error::UnitMismatch { .. })));
        let bad = Sinogram::zeros((12, 16));
        assert!(back_project(&bad, &g).is_err());
        assert!(fbp(&bad, &g, &f).is_err());
        assert!(ril_vjp(&wrong, &g, &f).is_err());
        let other = RampFilter::new(33, 1.0, FilterWindow::Ramp);
        let sino = Sinogram::zeros(g.sinogram_shape());
        assert!(fbp(&sino, &g, &other).is_err());
    }

    #[test]
    fn one_hot_backprojection_stays_on_the_ray() {
        let g = Geometry::parallel(32, 8, 33).unwrap();
        let mut values = Array2::zeros(g.sinogram_shape());
        // View 0 (theta = 0) measures the vertical line x = s.
        let det = 20;
        values[(0, det)] = 1.0;
        let sino = Sinogram::new(values, SinogramUnit::LineIntegral).unwrap();
        let img = back_project(&sino, &g).unwrap();
        let x = g.detector_offset(det);
        let center = (g.image_size as f64 - 1.0) / 2.0;
        let mut total = 0.0;
        for ((_, c), &v) in img.values().indexed_iter() {
            let px = c as f64 - center;
            if (px - x).abs() >= 1.0 {
                assert_eq!(v, 0.0);
            }
            total += v;
        }
        assert!(total > 0.0);
    }
}
