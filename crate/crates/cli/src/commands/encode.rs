use std::f64::consts::PI;
use std::path::Path;

use mar_core::encoding::{periodic_pad, pool_pyramid, PadMode};
use mar_core::{Sinogram, SinogramUnit};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::store::{case_ids, fail_on_errors, write_json, CaseDir, CaseEntry, M_P, S_MA};

pub const PADDED: &str = "s_ma_padded";

/// Grid name of pyramid level `k`; level 0 is the full-size projection.
pub fn level_name(k: usize) -> String {
    format!("m_p_level{k}")
}

#[derive(Clone, Debug, Serialize)]
pub struct EncodeInfo {
    pub level_shapes: Vec<(usize, usize)>,
    pub padded_shape: (usize, usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct EncodeManifest {
    pub command: &'static str,
    pub pad_mode: PadMode,
    pub cases: Vec<CaseEntry<EncodeInfo>>,
}

fn pad_mode(cfg: &RunConfig) -> CliResult<PadMode> {
    let geo = &cfg.geometry;
    if geo.is_full_turn() {
        Ok(PadMode::Periodic)
    } else if geo.is_parallel() && (geo.angle_range - PI).abs() < 1e-9 {
        Ok(PadMode::FlipWrap)
    } else {
        Err(CliError::Config(
            "angle padding needs a full turn or a parallel half turn".into(),
        ))
    }
}

fn run_one(cfg: &RunConfig, src: &CaseDir, dst: &CaseDir, mode: PadMode) -> CliResult<EncodeInfo> {
    let m_p = src.sinogram(M_P)?;
    let pyramid = pool_pyramid(&m_p, cfg.pyramid_depth)?;
    for (k, level) in pyramid.levels.iter().enumerate() {
        let s = Sinogram::new(level.clone(), m_p.unit())?;
        dst.write_sinogram(&level_name(k), &s)?;
    }
    let s_ma = src.sinogram(S_MA)?;
    let padded = periodic_pad(&s_ma, cfg.pad_angles, cfg.pad_detectors, &cfg.geometry, mode)?;
    let padded_shape = padded.values.dim();
    let unit: SinogramUnit = padded.unit;
    dst.write_sinogram(PADDED, &Sinogram::new(padded.values, unit)?)?;
    Ok(EncodeInfo {
        level_shapes: pyramid.levels.iter().map(|l| l.dim()).collect(),
        padded_shape,
    })
}

/// Writes the metal-projection pyramid and the padded corrupted sinogram
/// of every case under `cases` into `cfg.out/<id>/`.
pub fn cmd_encode(cfg: &RunConfig, cases: &Path) -> CliResult<EncodeManifest> {
    cfg.validate()?;
    let mode = pad_mode(cfg)?;
    let ids = case_ids(cases, M_P)?;
    if ids.is_empty() {
        return Err(CliError::Data(format!("no cases under {}", cases.display())));
    }
    let pool = cfg.thread_pool()?;
    let entries: Vec<CaseEntry<EncodeInfo>> = pool.install(|| {
        ids.par_iter()
            .map(|id| {
                let result = run_one(cfg, &CaseDir::new(cases, id), &CaseDir::new(&cfg.out, id), mode);
                CaseEntry::from_result(id.clone(), result)
            })
            .collect()
    });
    let manifest = EncodeManifest {
        command: "encode",
        pad_mode: mode,
        cases: entries,
    };
    write_json(&cfg.out.join("encode.json"), &manifest)?;
    fail_on_errors("encode", &manifest.cases)?;
    Ok(manifest)
}
