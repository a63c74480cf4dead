//! Hounsfield conversions and metal-size grouping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Image, ImageUnit, MetalMask};

/// Water attenuation at roughly 70 keV, in 1/mm.
pub const DEFAULT_MU_WATER: f64 = 0.02;

fn check_mu_water(mu_water: f64) -> Result<()> {
    if mu_water.is_finite() && mu_water > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "mu_water must be positive, got {mu_water}"
        )))
    }
}

/// `mu = mu_water * (1 + HU / 1000)`, clamped below at zero.
pub fn hu_to_mu(img: &Image, mu_water: f64) -> Result<Image> {
    img.expect_unit(ImageUnit::Hu)?;
    check_mu_water(mu_water)?;
    let values = img
        .values()
        .mapv(|hu| (mu_water * (1.0 + hu / 1000.0)).max(0.0));
    Image::new(values, ImageUnit::Attenuation)
}

pub fn mu_to_hu(img: &Image, mu_water: f64) -> Result<Image> {
    img.expect_unit(ImageUnit::Attenuation)?;
    check_mu_water(mu_water)?;
    let values = img.values().mapv(|mu| 1000.0 * (mu / mu_water - 1.0));
    Image::new(values, ImageUnit::Hu)
}

/// Pixel-count cut points separating the five metal-size groups.
///
/// The defaults split a log-uniform library of 30 to 3000 pixel implants
/// into roughly equal fifths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SizeThresholds([usize; 4]);

impl Default for SizeThresholds {
    fn default() -> Self {
        SizeThresholds([75, 190, 475, 1200])
    }
}

impl SizeThresholds {
    pub fn new(cuts: [usize; 4]) -> Result<Self> {
        if cuts.windows(2).all(|w| w[0] < w[1]) {
            Ok(SizeThresholds(cuts))
        } else {
            Err(Error::InvalidArgument(format!(
                "size thresholds must be strictly ascending, got {cuts:?}"
            )))
        }
    }

    pub fn cuts(&self) -> [usize; 4] {
        self.0
    }

    /// Group of a metal pixel count: 1 is the largest metal, 5 the smallest.
    /// A count equal to a cut point falls on the smaller-metal side.
    pub fn group_of(&self, count: usize) -> Result<u8> {
        if count == 0 {
            return Err(Error::NoMetal);
        }
        let above = self.0.iter().filter(|&&t| count > t).count();
        Ok(5 - above as u8)
    }
}

pub fn metal_size_group(mask: &MetalMask, thresholds: &SizeThresholds) -> Result<u8> {
    thresholds.group_of(mask.count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn hu(values: Array2<f64>) -> Image {
        Image::new(values, ImageUnit::Hu).unwrap()
    }

    #[test]
    fn hu_scale_anchors() {
        let mu = hu_to_mu(&hu(array![[0.0, -1000.0, 1000.0, -3000.0]]), 0.02).unwrap();
        assert_eq!(mu.values(), &array![[0.02, 0.0, 0.04, 0.0]]);
        assert_eq!(mu.unit(), ImageUnit::Attenuation);
    }

    #[test]
    fn inverse_anchors() {
        let back = mu_to_hu(
            &Image::new(array![[0.02, 0.0]], ImageUnit::Attenuation).unwrap(),
            0.02,
        )
        .unwrap();
        assert_eq!(back.values(), &array![[0.0, -1000.0]]);
    }

    #[test]
    fn round_trip_above_air() {
        let src = hu(array![[-1000.0, -532.25, 0.0, 40.0, 1234.5, 3000.0]]);
        let back = mu_to_hu(&hu_to_mu(&src, 0.0193).unwrap(), 0.0193).unwrap();
        for (a, b) in src.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn unit_mismatch_is_reported() {
        let att = Image::zeros((1, 1), ImageUnit::Attenuation);
        assert!(matches!(hu_to_mu(&att, 0.02), Err(Error::UnitMismatch { .. })));
        let h = Image::zeros((1, 1), ImageUnit::Hu);
        assert!(matches!(mu_to_hu(&h, 0.02), Err(Error::UnitMismatch { .. })));
        assert!(hu_to_mu(&h, 0.0).is_err());
    }

    #[test]
    fn size_groups() {
        let t = SizeThresholds::new([10, 20, 30, 40]).unwrap();
        assert_eq!(t.group_of(41).unwrap(), 1);
        assert_eq!(t.group_of(40).unwrap(), 2);
        assert_eq!(t.group_of(25).unwrap(), 3);
        assert_eq!(t.group_of(20).unwrap(), 4);
        assert_eq!(t.group_of(11).unwrap(), 4);
        assert_eq!(t.group_of(10).unwrap(), 5);
        assert_eq!(t.group_of(1).unwrap(), 5);
        assert!(matches!(t.group_of(0), Err(Error::NoMetal)));
        assert!(SizeThresholds::new([10, 10, 30, 40]).is_err());
    }

    #[test]
    fn group_of_mask() {
        let mut bits = Array2::from_elem((16, 16), false);
        bits.slice_mut(ndarray::s![0..10, 0..10]).fill(true);
        let mask = MetalMask::new(bits);
        assert_eq!(metal_size_group(&mask, &SizeThresholds::default()).unwrap(), 4);
        let empty = MetalMask::empty((4, 4));
        assert!(matches!(
            metal_size_group(&empty, &SizeThresholds::default()),
            Err(Error::NoMetal)
        ));
    }
}
