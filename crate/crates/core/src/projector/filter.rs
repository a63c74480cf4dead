use std::sync::Arc;

use ndarray::{Array2, ArrayViewMut1, Axis};
use ndarray::parallel::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterWindow {
    /// Plain Ram-Lak.
    #[default]
    Ramp,
    /// Ram-Lak multiplied by a Hann window reaching zero at Nyquist.
    Hann,
}

/// Detector-axis ramp filter.
///
/// The response is the DFT of the band-limited Ram-Lak kernel, zero-padded
/// to a power of two at least [`PAD_FACTOR`] times the detector count, with
/// the DC bin set to zero. It is real and even, so filtering is a symmetric
/// operator.
/// Zeroing DC shifts every filtered row by about `1 / len^2` of its sum, so
/// the padding is kept well above the 2x needed to avoid circular wrap.
pub const PAD_FACTOR: usize = 8;

#[derive(Clone)]
pub struct RampFilter {
    n_detectors: usize,
    detector_spacing: f64,
    window: FilterWindow,
    response: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RampFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RampFilter")
            .field("n_detectors", &self.n_detectors)
            .field("detector_spacing", &self.detector_spacing)
            .field("window", &self.window)
            .field("padded_len", &self.response.len())
            .finish()
    }
}

impl RampFilter {
    pub fn new(n_detectors: usize, detector_spacing: f64, window: FilterWindow) -> Self {
        let len = (PAD_FACTOR * n_detectors.max(1)).next_power_of_two();
        let mut kernel = vec![Complex64::new(0.0, 0.0); len];
        // Spatial Ram-Lak taps, already multiplied by the detector spacing
        // that turns the discrete convolution into a Riemann sum.
        kernel[0].re = 0.25 / detector_spacing;
        for k in (1..=len / 2).step_by(2) {
            let tap = -1.0 / (std::f64::consts::PI * k as f64).powi(2) / detector_spacing;
            kernel[k].re = tap;
            if k != len - k {
                kernel[len - k].re = tap;
            }
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(len);
        let ifft = planner.plan_fft_inverse(len);
        fft.process(&mut kernel);
        let mut response: Vec<f64> = kernel.iter().map(|c| c.re).collect();
        response[0] = 0.0;
        if window == FilterWindow::Hann {
            for (k, r) in response.iter_mut().enumerate() {
                let freq = k.min(len - k) as f64 / len as f64;
                *r *= 0.5 * (1.0 + (2.0 * std::f64::consts::PI * freq).cos());
            }
        }
        RampFilter {
            n_detectors,
            detector_spacing,
            window,
            response,
            fft,
            ifft,
        }
    }

    pub fn for_geometry(geo: &crate::geometry::Geometry, window: FilterWindow) -> Self {
        RampFilter::new(geo.n_detectors, geo.detector_spacing, window)
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }

    pub fn window(&self) -> FilterWindow {
        self.window
    }

    /// Frequency response over the padded FFT bins.
    pub fn response(&self) -> &[f64] {
        &self.response
    }

    fn filter_row(&self, mut row: ArrayViewMut1<f64>, buf: &mut [Complex64]) {
        let n = row.len();
        buf.fill(Complex64::new(0.0, 0.0));
        for (b, &v) in buf.iter_mut().zip(row.iter()) {
            b.re = v;
        }
        self.fft.process(buf);
        for (b, &r) in buf.iter_mut().zip(&self.response) {
            *b *= r;
        }
        self.ifft.process(buf);
        let scale = 1.0 / buf.len() as f64;
        for (v, b) in row.iter_mut().zip(&buf[..n]) {
            *v = b.re * scale;
        }
    }

    /// Filters every row of `sino` along the detector axis.
    pub fn apply(&self, sino: &Array2<f64>) -> Array2<f64> {
        assert_eq!(sino.ncols(), self.n_detectors, "detector count");
        let mut out = sino.clone();
        let len = self.response.len();
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .for_each_init(
                || vec![Complex64::new(0.0, 0.0); len],
                |buf, row| self.filter_row(row, buf),
            );
        out
    }
}
