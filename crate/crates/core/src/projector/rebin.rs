//! Fan-to-parallel rebinning as an explicit sparse linear map.

use ndarray::Array2;

use crate::geometry::{BeamModel, Geometry};

/// Bilinear fan-to-parallel resampling. Each parallel bin `(theta, s)`
/// reads the fan bin with `gamma = asin(s / D)` and `beta = theta - gamma`,
/// cyclic along `beta` and zero outside the fan.
#[derive(Clone, Debug)]
pub(crate) struct Rebinner {
    fan_shape: (usize, usize),
    par_shape: (usize, usize),
    /// Per parallel bin (row-major): up to four `(fan flat index, weight)`.
    taps: Vec<[(usize, f64); 4]>,
}

impl Rebinner {
    pub fn new(fan: &Geometry) -> Self {
        let BeamModel::FanEquiangular { source_distance } = fan.beam_model else {
            panic!("rebinning needs a fan geometry");
        };
        let par = fan.parallel_equivalent();
        let (n_views, n_det) = fan.sinogram_shape();
        let gamma_step = fan.detector_spacing / source_distance;
        let det_center = (n_det as f64 - 1.0) / 2.0;
        let beta_step = fan.angle_step();
        let mut taps = Vec::with_capacity(n_views * n_det);
        for i in 0..n_views {
            let theta = par.angle(i);
            for j in 0..n_det {
                let s = par.detector_offset(j);
                let mut entry = [(0, 0.0); 4];
                let ratio = s / source_distance;
                if ratio.abs() < 1.0 {
                    let gamma = ratio.asin();
                    let fj = gamma / gamma_step + det_center;
                    let fi = ((theta - gamma) / beta_step).rem_euclid(n_views as f64);
                    let j0 = fj.floor();
                    let wj = fj - j0;
                    let i0 = fi.floor();
                    let wi = fi - i0;
                    let i0 = i0 as usize % n_views;
                    let i1 = (i0 + 1) % n_views;
                    let mut slot = 0;
                    for (jj, wjj) in [(j0, 1.0 - wj), (j0 + 1.0, wj)] {
                        if jj < 0.0 || jj > n_det as f64 - 1.0 {
                            continue;
                        }
                        let jj = jj as usize;
                        for (ii, wii) in [(i0, 1.0 - wi), (i1, wi)] {
                            entry[slot] = (ii * n_det + jj, wii * wjj);
                            slot += 1;
                        }
                    }
                }
                taps.push(entry);
            }
        }
        Rebinner {
            fan_shape: fan.sinogram_shape(),
            par_shape: par.sinogram_shape(),
            taps,
        }
    }

    pub fn apply(&self, fan: &Array2<f64>) -> Array2<f64> {
        assert_eq!(fan.dim(), self.fan_shape);
        let flat = fan.as_slice().expect("standard layout");
        let values: Vec<f64> = self
            .taps
            .iter()
            .map(|t| t.iter().map(|&(idx, w)| w * flat[idx]).sum())
            .collect();
        Array2::from_shape_vec(self.par_shape, values).expect("shape")
    }

    pub fn transpose(&self, par: &Array2<f64>) -> Array2<f64> {
        assert_eq!(par.dim(), self.par_shape);
        let mut out = vec![0.0; self.fan_shape.0 * self.fan_shape.1];
        for (t, &v) in self.taps.iter().zip(par.iter()) {
            for &(idx, w) in t {
                out[idx] += w * v;
            }
        }
        Array2::from_shape_vec(self.fan_shape, out).expect("shape")
    }
}
