//! Grid file format: `<base>.raw` holds little-endian `f32` values in
//! row-major order, `<base>.json` holds `{"width","height","unit","kind"}`.
//! Binary masks use exactly 0.0 and 1.0.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Image, ImageUnit, MetalMask, MetalTrace, Sinogram, SinogramUnit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Image,
    Sinogram,
    Mask,
    Trace,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub width: usize,
    pub height: usize,
    pub unit: String,
    pub kind: GridKind,
}

pub fn raw_path(base: &Path) -> PathBuf {
    with_suffix(base, "raw")
}

pub fn sidecar_path(base: &Path) -> PathBuf {
    with_suffix(base, "json")
}

fn with_suffix(base: &Path, ext: &str) -> PathBuf {
    let mut name = base.as_os_str().to_owned();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

fn format_err(base: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: base.display().to_string(),
        reason: reason.into(),
    }
}

pub fn write_grid(base: &Path, values: &Array2<f64>, unit: &str, kind: GridKind) -> Result<()> {
    let (height, width) = values.dim();
    let mut bytes = Vec::with_capacity(width * height * 4);
    for &v in values.iter() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    if let Some(parent) = base.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(raw_path(base), bytes)?;
    let sidecar = Sidecar {
        width,
        height,
        unit: unit.to_string(),
        kind,
    };
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    fs::write(sidecar_path(base), json)?;
    Ok(())
}

pub fn read_grid(base: &Path) -> Result<(Sidecar, Array2<f64>)> {
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(base))?)?;
    let bytes = fs::read(raw_path(base))?;
    let expected = sidecar.width * sidecar.height * 4;
    if bytes.len() != expected {
        return Err(format_err(
            base,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let grid = Array2::from_shape_vec((sidecar.height, sidecar.width), values)
        .map_err(|e| format_err(base, e.to_string()))?;
    Ok((sidecar, grid))
}

fn expect_kind(base: &Path, sidecar: &Sidecar, kind: GridKind) -> Result<()> {
    if sidecar.kind == kind {
        Ok(())
    } else {
        Err(format_err(
            base,
            format!("expected kind {kind:?}, found {:?}", sidecar.kind),
        ))
    }
}

fn parse_image_unit(base: &Path, unit: &str) -> Result<ImageUnit> {
    match unit {
        "HU" => Ok(ImageUnit::Hu),
        "attenuation" => Ok(ImageUnit::Attenuation),
        "normalized" => Ok(ImageUnit::Normalized),
        other => Err(format_err(base, format!("unknown image unit {other:?}"))),
    }
}

fn parse_sinogram_unit(base: &Path, unit: &str) -> Result<SinogramUnit> {
    match unit {
        "line_integral" => Ok(SinogramUnit::LineIntegral),
        "dimensionless" => Ok(SinogramUnit::Dimensionless),
        other => Err(format_err(base, format!("unknown sinogram unit {other:?}"))),
    }
}

pub fn write_image(base: &Path, img: &Image) -> Result<()> {
    write_grid(base, img.values(), img.unit().name(), GridKind::Image)
}

pub fn read_image(base: &Path) -> Result<Image> {
    let (sidecar, values) = read_grid(base)?;
    expect_kind(base, &sidecar, GridKind::Image)?;
    let unit = parse_image_unit(base, &sidecar.unit)?;
    Image::new(values, unit)
}

pub fn write_sinogram(base: &Path, sino: &Sinogram) -> Result<()> {
    write_grid(base, sino.values(), sino.unit().name(), GridKind::Sinogram)
}

pub fn read_sinogram(base: &Path) -> Result<Sinogram> {
    let (sidecar, values) = read_grid(base)?;
    expect_kind(base, &sidecar, GridKind::Sinogram)?;
    let unit = parse_sinogram_unit(base, &sidecar.unit)?;
    Sinogram::new(values, unit)
}

pub fn write_mask(base: &Path, mask: &MetalMask) -> Result<()> {
    write_grid(base, &mask.to_values(), "binary", GridKind::Mask)
}

pub fn read_mask(base: &Path) -> Result<MetalMask> {
    let (sidecar, values) = read_grid(base)?;
    expect_kind(base, &sidecar, GridKind::Mask)?;
    MetalMask::from_values(&values)
}

pub fn write_trace(base: &Path, trace: &MetalTrace) -> Result<()> {
    write_grid(base, &trace.to_values(), "binary", GridKind::Trace)
}

pub fn read_trace(base: &Path) -> Result<MetalTrace> {
    let (sidecar, values) = read_grid(base)?;
    expect_kind(base, &sidecar, GridKind::Trace)?;
    MetalTrace::from_values(&values)
}
