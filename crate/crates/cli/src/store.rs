//! On-disk case layout: one directory per case holding named grids.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use mar_core::io;
use mar_core::physics::SimCase;
use mar_core::{Image, MetalMask, MetalTrace, Sinogram};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const X_GT: &str = "x_gt";
pub const MASK: &str = "mask";
pub const S_GT: &str = "s_gt";
pub const S_MA: &str = "s_ma";
pub const X_MA: &str = "x_ma";
pub const M_P: &str = "m_p";
pub const M_T: &str = "m_t";
pub const S_LI: &str = "s_li";

/// Basenames of the grids directly inside `dir`, sorted.
pub fn grid_names(dir: &Path) -> CliResult<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") && path.with_extension("raw").is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.insert(stem.to_string());
            }
        }
    }
    Ok(names)
}

/// Case directories under `root` that hold a grid called `required`, sorted.
pub fn case_ids(root: &Path, required: &str) -> CliResult<Vec<String>> {
    let entries = fs::read_dir(root)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", root.display())))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.is_dir() && io::sidecar_path(&path.join(required)).is_file() {
            if let Some(name) = path.file_name().and_then(|s| s.to_str()) {
                ids.push(name.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

pub struct CaseDir(pub PathBuf);

impl CaseDir {
    pub fn new(root: &Path, id: &str) -> Self {
        CaseDir(root.join(id))
    }

    pub fn grid(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn has(&self, name: &str) -> bool {
        io::sidecar_path(&self.grid(name)).is_file()
    }

    pub fn image(&self, name: &str) -> CliResult<Image> {
        Ok(io::read_image(&self.grid(name))?)
    }

    pub fn sinogram(&self, name: &str) -> CliResult<Sinogram> {
        Ok(io::read_sinogram(&self.grid(name))?)
    }

    pub fn mask(&self) -> CliResult<MetalMask> {
        Ok(io::read_mask(&self.grid(MASK))?)
    }

    pub fn trace(&self) -> CliResult<MetalTrace> {
        Ok(io::read_trace(&self.grid(M_T))?)
    }

    pub fn write_image(&self, name: &str, img: &Image) -> CliResult<()> {
        Ok(io::write_image(&self.grid(name), img)?)
    }

    pub fn write_sinogram(&self, name: &str, s: &Sinogram) -> CliResult<()> {
        Ok(io::write_sinogram(&self.grid(name), s)?)
    }

    pub fn write_mask(&self, mask: &MetalMask) -> CliResult<()> {
        Ok(io::write_mask(&self.grid(MASK), mask)?)
    }

    pub fn write_trace(&self, trace: &MetalTrace) -> CliResult<()> {
        Ok(io::write_trace(&self.grid(M_T), trace)?)
    }

    /// The eight grids of a simulated case.
    pub fn write_sim_case(&self, case: &SimCase) -> CliResult<()> {
        self.write_image(X_GT, &case.x_gt)?;
        self.write_mask(&case.mask)?;
        self.write_sinogram(S_GT, &case.s_gt)?;
        self.write_sinogram(S_MA, &case.s_ma)?;
        self.write_image(X_MA, &case.x_ma)?;
        self.write_sinogram(M_P, &case.m_p)?;
        self.write_trace(&case.m_t)?;
        self.write_sinogram(S_LI, &case.s_li)
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Per-case outcome recorded in a manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseEntry<T> {
    pub id: String,
    #[serde(flatten)]
    pub info: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl<T> CaseEntry<T> {
    pub fn from_result(id: String, result: CliResult<T>) -> Self {
        match result {
            Ok(info) => CaseEntry { id, info: Some(info), error: None },
            Err(e) => CaseEntry { id, info: None, error: Some(e.to_string()) },
        }
    }
}

/// Turns per-case failures into one data error once the manifest is out.
pub fn fail_on_errors<T>(what: &str, entries: &[CaseEntry<T>]) -> CliResult<()> {
    let failed: Vec<&str> = entries
        .iter()
        .filter(|e| e.error.is_some())
        .map(|e| e.id.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{what}: {} of {} cases failed: {}",
            failed.len(),
            entries.len(),
            failed.join(", ")
        )))
    }
}
