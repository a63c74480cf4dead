//! Scan geometry.
//!
//! Angles are sampled as `theta_i = i * angle_range / n_angles`, so a full
//! turn never repeats its first view. Detector `j` sits at signed offset
//! `(j - (n_detectors - 1) / 2) * detector_spacing` from the rotation center.
//! Image pixel `(row, col)` has its center at
//! `x = (col - (n - 1) / 2) * pixel_size`, `y = ((n - 1) / 2 - row) * pixel_size`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FULL_TURN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BeamModel {
    Parallel,
    /// Equiangular fan. `detector_spacing` is then the arc length per
    /// detector measured at the rotation center, so the fan-angle step is
    /// `detector_spacing / source_distance`.
    FanEquiangular { source_distance: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub n_angles: usize,
    pub angle_range: f64,
    pub n_detectors: usize,
    pub detector_spacing: f64,
    pub pixel_size: f64,
    pub image_size: usize,
    pub beam_model: BeamModel,
}

impl Default for Geometry {
    /// 416x416 images, 640 views over a full turn, 641 detectors, 1 mm
    /// pixels and detector bins, parallel beam.
    fn default() -> Self {
        Geometry {
            n_angles: 640,
            angle_range: TAU,
            n_detectors: 641,
            detector_spacing: 1.0,
            pixel_size: 1.0,
            image_size: 416,
            beam_model: BeamModel::Parallel,
        }
    }
}

impl Geometry {
    /// Parallel-beam geometry with unit pixel and detector spacing over a
    /// full turn.
    pub fn parallel(image_size: usize, n_angles: usize, n_detectors: usize) -> Result<Self> {
        let geo = Geometry {
            n_angles,
            n_detectors,
            image_size,
            ..Geometry::default()
        };
        geo.validate()?;
        Ok(geo)
    }

    pub fn with_angle_range(mut self, angle_range: f64) -> Result<Self> {
        self.angle_range = angle_range;
        self.validate()?;
        Ok(self)
    }

    pub fn with_beam_model(mut self, beam_model: BeamModel) -> Result<Self> {
        self.beam_model = beam_model;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidGeometry(msg.to_string()));
        if self.n_angles == 0 {
            return bad("n_angles must be at least 1");
        }
        if self.n_detectors == 0 {
            return bad("n_detectors must be at least 1");
        }
        if self.image_size == 0 {
            return bad("image_size must be at least 1");
        }
        if !(self.angle_range.is_finite() && self.angle_range > 0.0) {
            return bad("angle_range must be positive");
        }
        if !(self.detector_spacing.is_finite() && self.detector_spacing > 0.0) {
            return bad("detector_spacing must be positive");
        }
        if !(self.pixel_size.is_finite() && self.pixel_size > 0.0) {
            return bad("pixel_size must be positive");
        }
        if let BeamModel::FanEquiangular { source_distance } = self.beam_model {
            if !(source_distance.is_finite() && source_distance > 0.0) {
                return bad("source_distance must be positive");
            }
            if source_distance <= self.field_radius() {
                return bad("source lies inside the reconstruction field");
            }
            let half_fan = self.detector_offset(self.n_detectors - 1) / source_distance;
            if half_fan >= PI / 2.0 {
                return bad("fan wider than a half plane");
            }
            if !self.is_full_turn() {
                return bad("fan-beam scans must cover a full turn");
            }
        }
        Ok(())
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.image_size, self.image_size)
    }

    pub fn sinogram_shape(&self) -> (usize, usize) {
        (self.n_angles, self.n_detectors)
    }

    pub fn angle_step(&self) -> f64 {
        self.angle_range / self.n_angles as f64
    }

    pub fn angle(&self, i: usize) -> f64 {
        i as f64 * self.angle_step()
    }

    /// Signed distance of detector `j` from the central detector. For fan
    /// geometries this is the arc length at the rotation center.
    pub fn detector_offset(&self, j: usize) -> f64 {
        (j as f64 - (self.n_detectors as f64 - 1.0) / 2.0) * self.detector_spacing
    }

    pub fn is_full_turn(&self) -> bool {
        (self.angle_range - TAU).abs() < FULL_TURN_TOL
    }

    pub fn is_parallel(&self) -> bool {
        matches!(self.beam_model, BeamModel::Parallel)
    }

    /// Half diagonal of the image square.
    pub fn field_radius(&self) -> f64 {
        self.image_size as f64 * self.pixel_size * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Parallel geometry with the same sampling, used as the rebinning
    /// target for fan-beam data.
    pub fn parallel_equivalent(&self) -> Geometry {
        Geometry {
            beam_model: BeamModel::Parallel,
            ..self.clone()
        }
    }

    /// Parallel-beam line `(theta, s)` measured by view `i`, detector `j`.
    pub fn ray(&self, i: usize, j: usize) -> (f64, f64) {
        let beta = self.angle(i);
        let offset = self.detector_offset(j);
        match self.beam_model {
            BeamModel::Parallel => (beta, offset),
            BeamModel::FanEquiangular { source_distance } => {
                let gamma = offset / source_distance;
                (beta + gamma, source_distance * gamma.sin())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_scan_protocol() {
        let geo = Geometry::default();
        assert_eq!(geo.image_shape(), (416, 416));
        assert_eq!(geo.sinogram_shape(), (640, 641));
        assert!(geo.is_full_turn());
        geo.validate().unwrap();
    }

    #[test]
    fn central_detector_is_exact() {
        let geo = Geometry::default();
        assert_eq!(geo.detector_offset(320), 0.0);
        assert_eq!(geo.detector_offset(0), -320.0);
    }

    #[test]
    fn rejects_degenerate_counts() {
        assert!(Geometry::parallel(0, 10, 10).is_err());
        assert!(Geometry::parallel(10, 0, 10).is_err());
        assert!(Geometry::parallel(10, 10, 0).is_err());
        let mut geo = Geometry::default();
        geo.pixel_size = 0.0;
        assert!(geo.validate().is_err());
    }

    #[test]
    fn fan_requires_source_outside_field() {
        let geo = Geometry::parallel(64, 90, 65).unwrap();
        assert!(geo
            .clone()
            .with_beam_model(BeamModel::FanEquiangular { source_distance: 20.0 })
            .is_err());
        assert!(geo
            .clone()
            .with_beam_model(BeamModel::FanEquiangular { source_distance: 200.0 })
            .is_ok());
        let half = geo.with_angle_range(PI).unwrap();
        assert!(half
            .with_beam_model(BeamModel::FanEquiangular { source_distance: 200.0 })
            .is_err());
    }

    #[test]
    fn half_turn_is_not_periodic() {
        let geo = Geometry::parallel(8, 8, 9).unwrap().with_angle_range(PI).unwrap();
        assert!(!geo.is_full_turn());
    }
}
