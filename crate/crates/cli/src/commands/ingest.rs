use std::path::Path;

use mar_core::io;
use mar_core::physics::{clinical_ingest, IngestWarning};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::store::{fail_on_errors, grid_names, write_json, CaseDir, CaseEntry, M_P, S_MA};

#[derive(Clone, Debug, Serialize)]
pub struct IngestInfo {
    pub metal_pixels: usize,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IngestManifest {
    pub command: &'static str,
    pub cases: Vec<CaseEntry<IngestInfo>>,
}

/// Turns clinical HU slices into corrupted-sinogram cases under `cfg.out`.
/// Selection and empty-metal warnings go to stderr and the manifest; such
/// slices are still processed.
pub fn cmd_ingest(cfg: &RunConfig, images: &Path) -> CliResult<IngestManifest> {
    cfg.validate()?;
    let names: Vec<String> = grid_names(images)?.into_iter().collect();
    if names.is_empty() {
        return Err(CliError::Data(format!("no grids found in {}", images.display())));
    }
    let params = cfg.ingest_params();
    let pool = cfg.thread_pool()?;
    let cases: Vec<CaseEntry<IngestInfo>> = pool.install(|| {
        names
            .par_iter()
            .map(|name| {
                let result = (|| -> CliResult<IngestInfo> {
                    let x = io::read_image(&images.join(name))?;
                    let case = clinical_ingest(&x, &cfg.geometry, &params)?;
                    let dst = CaseDir::new(&cfg.out, name);
                    dst.write_sinogram(S_MA, &case.s_ma)?;
                    dst.write_mask(&case.mask)?;
                    dst.write_sinogram(M_P, &case.m_p)?;
                    dst.write_trace(&case.m_t)?;
                    Ok(IngestInfo {
                        metal_pixels: case.mask.count(),
                        warnings: case.warnings,
                    })
                })();
                CaseEntry::from_result(name.clone(), result)
            })
            .collect()
    });
    for case in &cases {
        for w in case.info.iter().flat_map(|i| &i.warnings) {
            match w {
                IngestWarning::EmptyMetal => {
                    eprintln!("warning: {}: no pixel reaches the metal threshold", case.id)
                }
                IngestWarning::BelowSelection { pixels_above, required_more_than } => eprintln!(
                    "warning: {}: {pixels_above} bright pixels, selection wants more than {required_more_than}",
                    case.id
                ),
            }
        }
    }
    let manifest = IngestManifest {
        command: "ingest",
        cases,
    };
    write_json(&cfg.out.join("ingest.json"), &manifest)?;
    fail_on_errors("ingest", &manifest.cases)?;
    Ok(manifest)
}
