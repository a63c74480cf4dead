//! Image and sinogram quality metrics with metal-size grouped reporting.
//!
//! Image metrics work on HU images clamped to a display window and mapped
//! to `[0, 1]` (soft-tissue window `[-175, 275]` HU by default), so the data
//! range is 1.

use std::io::Write;

use ndarray::{s, Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::grid::{Image, ImageUnit, MetalTrace, Sinogram};
use crate::physics::SimCase;

/// Reported PSNR for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub const N_GROUPS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HuWindow {
    pub lo: f64,
    pub hi: f64,
}

impl Default for HuWindow {
    fn default() -> Self {
        HuWindow {
            lo: -175.0,
            hi: 275.0,
        }
    }
}

impl HuWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo < hi {
            Ok(HuWindow { lo, hi })
        } else {
            Err(Error::InvalidArgument(format!("window [{lo}, {hi}] is empty")))
        }
    }

    pub fn apply(&self, hu: f64) -> f64 {
        (hu.clamp(self.lo, self.hi) - self.lo) / (self.hi - self.lo)
    }
}

pub fn window_image(img: &Image, window: &HuWindow) -> Result<Image> {
    img.expect_unit(ImageUnit::Hu)?;
    Image::new(img.values().mapv(|v| window.apply(v)), ImageUnit::Normalized)
}

fn windowed_pair(a: &Image, b: &Image, window: &HuWindow) -> Result<(Array2<f64>, Array2<f64>)> {
    check_dims(a.shape(), b.shape())?;
    Ok((
        window_image(a, window)?.into_values(),
        window_image(b, window)?.into_values(),
    ))
}

/// `10 log10(1 / mse)` on windowed images; [`PSNR_CAP_DB`] when equal.
pub fn psnr(a: &Image, b: &Image, window: &HuWindow) -> Result<f64> {
    let (wa, wb) = windowed_pair(a, b, window)?;
    let mse = Zip::from(&wa)
        .and(&wb)
        .fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y))
        / wa.len() as f64;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP_DB
    } else {
        -10.0 * mse.log10()
    }
}

fn gaussian_taps() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let taps: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Separable Gaussian filter keeping only fully covered windows.
fn filter_valid(src: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
    let k = taps.len();
    let (rows, cols) = src.dim();
    let horiz = Array2::from_shape_fn((rows, cols - k + 1), |(r, c)| {
        taps.iter()
            .zip(src.slice(s![r, c..c + k]))
            .map(|(t, v)| t * v)
            .sum::<f64>()
    });
    Array2::from_shape_fn((rows - k + 1, cols - k + 1), |(r, c)| {
        taps.iter()
            .zip(horiz.slice(s![r..r + k, c]))
            .map(|(t, v)| t * v)
            .sum::<f64>()
    })
}

/// Mean local SSIM over windowed images with an 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03 and data range 1.
pub fn ssim(a: &Image, b: &Image, window: &HuWindow) -> Result<f64> {
    let (wa, wb) = windowed_pair(a, b, window)?;
    let (rows, cols) = wa.dim();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {rows}x{cols}"
        )));
    }
    let taps = gaussian_taps();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mu_a = filter_valid(&wa, &taps);
    let mu_b = filter_valid(&wb, &taps);
    let aa = filter_valid(&(&wa * &wa), &taps);
    let bb = filter_valid(&(&wb * &wb), &taps);
    let ab = filter_valid(&(&wa * &wb), &taps);
    let mut total = 0.0;
    Zip::from(&mu_a)
        .and(&mu_b)
        .and(&aa)
        .and(&bb)
        .and(&ab)
        .for_each(|&ma, &mb, &eaa, &ebb, &eab| {
            let var_a = eaa - ma * ma;
            let var_b = ebb - mb * mb;
            let cov = eab - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
            total += num / den;
        });
    Ok(total / mu_a.len() as f64)
}

/// Mean squared sinogram difference, optionally restricted to `trace`.
/// Returns `None` when the trace is empty.
pub fn sino_mse(a: &Sinogram, b: &Sinogram, trace: Option<&MetalTrace>) -> Result<Option<f64>> {
    check_dims(a.shape(), b.shape())?;
    if let Some(t) = trace {
        check_dims(a.shape(), t.shape())?;
    }
    let (mut sum, mut count) = (0.0, 0usize);
    Zip::indexed(a.values())
        .and(b.values())
        .for_each(|idx, &x, &y| {
            if trace.is_none_or(|t| t.get(idx)) {
                sum += (x - y) * (x - y);
                count += 1;
            }
        });
    Ok((count > 0).then(|| sum / count as f64))
}

/// One case to score: the truth and a candidate reconstruction.
#[derive(Clone, Debug)]
pub struct EvalCase {
    pub case_id: String,
    pub group: Option<u8>,
    pub x_gt: Image,
    pub x_candidate: Image,
    pub s_gt: Option<Sinogram>,
    pub s_candidate: Option<Sinogram>,
    pub trace: Option<MetalTrace>,
}

impl EvalCase {
    pub fn from_sim(
        case_id: impl Into<String>,
        case: &SimCase,
        x_candidate: Image,
        s_candidate: Option<Sinogram>,
    ) -> Self {
        EvalCase {
            case_id: case_id.into(),
            group: case.metal_size_group,
            x_gt: case.x_gt.clone(),
            x_candidate,
            s_gt: Some(case.s_gt.clone()),
            s_candidate,
            trace: Some(case.m_t.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub group: Option<u8>,
    pub psnr_db: f64,
    pub ssim: f64,
    pub sino_mse: Option<f64>,
    pub sino_mse_trace: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub sino_mse: Option<f64>,
    pub sino_mse_trace: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Count-weighted mean of per-part means: `sum n_k m_k / sum n_k`.
fn pooled(parts: impl Iterator<Item = (usize, Option<f64>)>) -> Option<f64> {
    let (sum, n) = parts.fold((0.0, 0usize), |(s, n), (k, m)| match m {
        Some(m) if k > 0 => (s + k as f64 * m, n + k),
        _ => (s, n),
    });
    (n > 0).then(|| sum / n as f64)
}

/// Mean of one metric plus the number of cases that carry it.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Part {
    n: usize,
    mean: Option<f64>,
}

impl Part {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        Part {
            n: values.clone().count(),
            mean: mean(values),
        }
    }

    fn pool(parts: &[Part]) -> Option<f64> {
        pooled(parts.iter().map(|p| (p.n, p.mean)))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Parts {
    count: usize,
    psnr_db: Part,
    ssim: Part,
    sino_mse: Part,
    sino_mse_trace: Part,
}

impl Parts {
    fn of<'a>(cases: impl Iterator<Item = &'a CaseMetrics> + Clone) -> Self {
        Parts {
            count: cases.clone().count(),
            psnr_db: Part::of(cases.clone().map(|c| c.psnr_db)),
            ssim: Part::of(cases.clone().map(|c| c.ssim)),
            sino_mse: Part::of(cases.clone().filter_map(|c| c.sino_mse)),
            sino_mse_trace: Part::of(cases.filter_map(|c| c.sino_mse_trace)),
        }
    }

    fn aggregate(&self) -> Aggregate {
        Aggregate {
            count: self.count,
            psnr_db: self.psnr_db.mean,
            ssim: self.ssim.mean,
            sino_mse: self.sino_mse.mean,
            sino_mse_trace: self.sino_mse_trace.mean,
        }
    }

    /// Overall aggregate as the count-weighted mean of the part means.
    fn pool(parts: &[Parts]) -> Aggregate {
        let field = |f: fn(&Parts) -> Part| Part::pool(&parts.iter().map(f).collect::<Vec<_>>());
        Aggregate {
            count: parts.iter().map(|p| p.count).sum(),
            psnr_db: field(|p| p.psnr_db),
            ssim: field(|p| p.ssim),
            sino_mse: field(|p| p.sino_mse),
            sino_mse_trace: field(|p| p.sino_mse_trace),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cases: Vec<CaseMetrics>,
    /// Index 0 is group 1 (largest metal).
    pub groups: [Aggregate; N_GROUPS],
    /// Count-weighted mean of the group means, with ungrouped cases
    /// weighted as one more group.
    pub overall: Aggregate,
}

pub const CSV_HEADER: [&str; 6] = [
    "case_id",
    "group",
    "psnr_db",
    "ssim",
    "sino_mse",
    "sino_mse_trace",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn score_case(case: &EvalCase, window: &HuWindow) -> Result<CaseMetrics> {
    let (sino_mse_all, sino_mse_trace) = match (&case.s_gt, &case.s_candidate) {
        (Some(gt), Some(cand)) => (
            sino_mse(cand, gt, None)?,
            match &case.trace {
                Some(t) => sino_mse(cand, gt, Some(t))?,
                None => None,
            },
        ),
        _ => (None, None),
    };
    Ok(CaseMetrics {
        case_id: case.case_id.clone(),
        group: case.group,
        psnr_db: psnr(&case.x_candidate, &case.x_gt, window)?,
        ssim: ssim(&case.x_candidate, &case.x_gt, window)?,
        sino_mse: sino_mse_all,
        sino_mse_trace,
    })
}

impl EvalReport {
    /// Aggregates per-case metrics in the given order.
    pub fn from_cases(cases: Vec<CaseMetrics>) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::InvalidArgument("no cases to evaluate".into()));
        }
        // Cases without metal have no group and form their own part.
        let parts: Vec<Parts> = (1..=N_GROUPS as u8)
            .map(Some)
            .chain(std::iter::once(None))
            .map(|g| Parts::of(cases.iter().filter(move |c| c.group == g)))
            .collect();
        let groups = std::array::from_fn(|g| parts[g].aggregate());
        let overall = Parts::pool(&parts);
        Ok(EvalReport {
            cases,
            groups,
            overall,
        })
    }

    /// One row per case, then `group_1`..`group_5` and `overall`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for c in &self.cases {
            w.write_record([
                c.case_id.clone(),
                c.group.map(|g| g.to_string()).unwrap_or_default(),
                c.psnr_db.to_string(),
                c.ssim.to_string(),
                opt(c.sino_mse),
                opt(c.sino_mse_trace),
            ])
            .map_err(csv_err)?;
        }
        let aggregate_rows = self
            .groups
            .iter()
            .enumerate()
            .map(|(g, a)| (format!("group_{}", g + 1), (g + 1).to_string(), a))
            .chain(std::iter::once(("overall".to_string(), "all".to_string(), &self.overall)));
        for (id, group, a) in aggregate_rows {
            w.write_record([
                id,
                group,
                opt(a.psnr_db),
                opt(a.ssim),
                opt(a.sino_mse),
                opt(a.sino_mse_trace),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    }

    /// Markdown table in the grouped layout: five metal-size columns from
    /// large to small plus the average, cells as `PSNR/SSIM%`.
    pub fn render_table(&self, method: &str) -> String {
        let cell = |a: &Aggregate| match (a.psnr_db, a.ssim) {
            (Some(p), Some(s)) => format!("{p:.2}/{:.1}", 100.0 * s),
            _ => "-".to_string(),
        };
        let mut out = String::new();
        out.push_str("| Method | Large Metal | → | → | → | Small Metal | Average |\n");
        out.push_str("|---|---|---|---|---|---|---|\n");
        out.push_str(&format!("| {method} |"));
        for g in &self.groups {
            out.push_str(&format!(" {} |", cell(g)));
        }
        out.push_str(&format!(" {} |\n", cell(&self.overall)));
        out
    }
}

/// Scores every case and aggregates into the grouped report.
pub fn evaluate_dataset(cases: &[EvalCase], window: &HuWindow) -> Result<EvalReport> {
    let scored = cases
        .iter()
        .map(|c| score_case(c, window))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_cases(scored)
}
