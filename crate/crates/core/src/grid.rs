//! Unit-tagged 2D grids: images, sinograms and binary masks.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::geometry::Geometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageUnit {
    #[serde(rename = "HU")]
    Hu,
    /// Linear attenuation per unit length (1/mm with the default geometry).
    Attenuation,
    /// Display-windowed values in [0, 1].
    Normalized,
}

impl ImageUnit {
    pub fn name(self) -> &'static str {
        match self {
            ImageUnit::Hu => "HU",
            ImageUnit::Attenuation => "attenuation",
            ImageUnit::Normalized => "normalized",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinogramUnit {
    LineIntegral,
    Dimensionless,
}

impl SinogramUnit {
    pub fn name(self) -> &'static str {
        match self {
            SinogramUnit::LineIntegral => "line_integral",
            SinogramUnit::Dimensionless => "dimensionless",
        }
    }
}

fn all_finite(values: &Array2<f64>) -> Result<()> {
    match values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        Some(((r, c), v)) => Err(Error::InvalidArgument(format!(
            "non-finite value {v} at ({r}, {c})"
        ))),
        None => Ok(()),
    }
}

/// A square-or-rectangular image; rows run top to bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    values: Array2<f64>,
    unit: ImageUnit,
}

impl Image {
    pub fn new(values: Array2<f64>, unit: ImageUnit) -> Result<Self> {
        all_finite(&values)?;
        Ok(Image { values, unit })
    }

    pub fn zeros(shape: (usize, usize), unit: ImageUnit) -> Self {
        Image {
            values: Array2::zeros(shape),
            unit,
        }
    }

    pub fn from_fn(
        shape: (usize, usize),
        unit: ImageUnit,
        f: impl FnMut((usize, usize)) -> f64,
    ) -> Result<Self> {
        Image::new(Array2::from_shape_fn(shape, f), unit)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn unit(&self) -> ImageUnit {
        self.unit
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn height(&self) -> usize {
        self.values.nrows()
    }

    pub fn expect_unit(&self, unit: ImageUnit) -> Result<()> {
        if self.unit == unit {
            Ok(())
        } else {
            Err(Error::UnitMismatch {
                expected: unit.name(),
                found: self.unit.name(),
            })
        }
    }

    pub fn check_geometry(&self, geo: &Geometry) -> Result<()> {
        check_dims(geo.image_shape(), self.shape())
    }

    /// Elementwise map keeping the unit tag. Non-finite results are rejected.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Image> {
        Image::new(self.values.mapv(f), self.unit)
    }

    pub(crate) fn from_parts_unchecked(values: Array2<f64>, unit: ImageUnit) -> Self {
        Image { values, unit }
    }
}

/// Projection data indexed `(angle, detector)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    values: Array2<f64>,
    unit: SinogramUnit,
}

impl Sinogram {
    pub fn new(values: Array2<f64>, unit: SinogramUnit) -> Result<Self> {
        all_finite(&values)?;
        Ok(Sinogram { values, unit })
    }

    pub fn zeros(shape: (usize, usize)) -> Self {
        Sinogram {
            values: Array2::zeros(shape),
            unit: SinogramUnit::LineIntegral,
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn unit(&self) -> SinogramUnit {
        self.unit
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn n_angles(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_detectors(&self) -> usize {
        self.values.ncols()
    }

    pub fn check_geometry(&self, geo: &Geometry) -> Result<()> {
        check_dims(geo.sinogram_shape(), self.shape())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Sinogram> {
        Sinogram::new(self.values.mapv(f), self.unit)
    }

    pub(crate) fn from_parts_unchecked(values: Array2<f64>, unit: SinogramUnit) -> Self {
        Sinogram { values, unit }
    }
}

macro_rules! binary_grid {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq)]
        pub struct $name {
            bits: Array2<bool>,
        }

        impl $name {
            pub fn new(bits: Array2<bool>) -> Self {
                $name { bits }
            }

            pub fn empty(shape: (usize, usize)) -> Self {
                $name {
                    bits: Array2::from_elem(shape, false),
                }
            }

            /// Accepts only exact 0.0 / 1.0 values.
            pub fn from_values(values: &Array2<f64>) -> Result<Self> {
                if let Some(((r, c), v)) = values
                    .indexed_iter()
                    .find(|(_, &v)| v != 0.0 && v != 1.0)
                {
                    return Err(Error::InvalidArgument(format!(
                        "binary grid holds {v} at ({r}, {c})"
                    )));
                }
                Ok($name {
                    bits: values.mapv(|v| v == 1.0),
                })
            }

            pub fn bits(&self) -> &Array2<bool> {
                &self.bits
            }

            pub fn shape(&self) -> (usize, usize) {
                self.bits.dim()
            }

            pub fn count(&self) -> usize {
                self.bits.iter().filter(|&&b| b).count()
            }

            pub fn is_empty(&self) -> bool {
                !self.bits.iter().any(|&b| b)
            }

            pub fn get(&self, index: (usize, usize)) -> bool {
                self.bits[index]
            }

            /// Values as exactly 0.0 / 1.0.
            pub fn to_values(&self) -> Array2<f64> {
                self.bits.mapv(|b| if b { 1.0 } else { 0.0 })
            }
        }
    };
}

binary_grid!(
    /// Image-domain metal indicator.
    MetalMask
);

binary_grid!(
    /// Sinogram-domain metal indicator, `M_t = [M_p > 0]`.
    MetalTrace
);

impl MetalMask {
    pub fn check_geometry(&self, geo: &Geometry) -> Result<()> {
        check_dims(geo.image_shape(), self.shape())
    }

    pub fn to_image(&self) -> Image {
        Image::from_parts_unchecked(self.to_values(), ImageUnit::Attenuation)
    }
}

impl MetalTrace {
    pub fn to_sinogram(&self) -> Sinogram {
        Sinogram::from_parts_unchecked(self.to_values(), SinogramUnit::Dimensionless)
    }

    /// Grows the trace by `bins` detector bins on each side, per view.
    pub fn dilate_detectors(&self, bins: usize) -> MetalTrace {
        if bins == 0 {
            return self.clone();
        }
        let (rows, cols) = self.shape();
        let mut out = Array2::from_elem((rows, cols), false);
        for ((r, c), &b) in self.bits.indexed_iter() {
            if b {
                let lo = c.saturating_sub(bins);
                let hi = (c + bins).min(cols - 1);
                for cc in lo..=hi {
                    out[(r, cc)] = true;
                }
            }
        }
        MetalTrace { bits: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_finite() {
        let v = array![[0.0, f64::NAN]];
        assert!(Image::new(v.clone(), ImageUnit::Hu).is_err());
        assert!(Sinogram::new(v, SinogramUnit::LineIntegral).is_err());
    }

    #[test]
    fn binary_from_values_is_strict() {
        assert!(MetalMask::from_values(&array![[0.0, 1.0]]).is_ok());
        assert!(MetalMask::from_values(&array![[0.0, 0.5]]).is_err());
    }

    #[test]
    fn dilation_clips_at_array_edges() {
        let t = MetalTrace::new(array![[true, false, false, false, false]]);
        let d = t.dilate_detectors(1);
        assert_eq!(d.bits(), &array![[true, true, false, false, false]]);
        let t = MetalTrace::new(array![[false, false, true, false, false]]);
        assert_eq!(t.dilate_detectors(1).count(), 3);
        assert_eq!(t.dilate_detectors(0), t);
    }

    #[test]
    fn unit_check() {
        let img = Image::zeros((2, 2), ImageUnit::Hu);
        assert!(img.expect_unit(ImageUnit::Hu).is_ok());
        assert!(matches!(
            img.expect_unit(ImageUnit::Attenuation),
            Err(Error::UnitMismatch { .. })
        ));
    }
}
