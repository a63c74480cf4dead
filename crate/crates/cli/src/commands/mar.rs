use std::path::Path;

use mar_core::marbase::{correct, MarMethod};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::store::{case_ids, fail_on_errors, write_json, CaseDir, CaseEntry, MASK, S_MA};

pub const PRIOR: &str = "prior";

fn method_name(method: MarMethod) -> &'static str {
    match method {
        MarMethod::Li => "li",
        MarMethod::Nmar => "nmar",
    }
}

/// Output grid names for a method: corrected sinogram and image.
pub fn output_names(method: MarMethod) -> (String, String) {
    let m = method_name(method);
    (format!("s_{m}"), format!("x_{m}"))
}

#[derive(Clone, Debug, Serialize)]
pub struct MarInfo {
    pub trace_bins: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MarManifest {
    pub command: &'static str,
    pub method: MarMethod,
    pub cases: Vec<CaseEntry<MarInfo>>,
}

fn run_one(cfg: &RunConfig, src: &CaseDir, dst: &CaseDir, method: MarMethod) -> CliResult<MarInfo> {
    let s_ma = src.sinogram(S_MA)?;
    let trace = src.trace()?.dilate_detectors(cfg.trace_dilation);
    let mask = src.mask()?;
    let out = correct(
        &s_ma,
        &trace,
        &mask,
        method,
        &cfg.geometry,
        &cfg.ramp(),
        &cfg.nmar_params(),
    )?;
    let (s_name, x_name) = output_names(method);
    dst.write_sinogram(&s_name, &out.sinogram)?;
    dst.write_image(&x_name, &out.image)?;
    if let Some(prior) = &out.prior {
        dst.write_image(PRIOR, prior.image())?;
    }
    Ok(MarInfo {
        trace_bins: trace.count(),
    })
}

/// Applies one baseline to every case under `cases` that has a corrupted
/// sinogram, trace and mask. Writes `s_<method>`, `x_<method>` and, for
/// NMAR, the prior image into `cfg.out/<id>/`.
pub fn cmd_mar(cfg: &RunConfig, cases: &Path, method: MarMethod) -> CliResult<MarManifest> {
    cfg.validate()?;
    let ids = case_ids(cases, S_MA)?;
    if ids.is_empty() {
        return Err(CliError::Data(format!("no cases under {}", cases.display())));
    }
    let pool = cfg.thread_pool()?;
    let entries: Vec<CaseEntry<MarInfo>> = pool.install(|| {
        ids.par_iter()
            .map(|id| {
                let src = CaseDir::new(cases, id);
                let result = if src.has(MASK) {
                    run_one(cfg, &src, &CaseDir::new(&cfg.out, id), method)
                } else {
                    Err(CliError::Data(format!("case {id} has no mask")))
                };
                CaseEntry::from_result(id.clone(), result)
            })
            .collect()
    });
    let manifest = MarManifest {
        command: "mar",
        method,
        cases: entries,
    };
    write_json(
        &cfg.out.join(format!("mar_{}.json", method_name(method))),
        &manifest,
    )?;
    fail_on_errors("mar", &manifest.cases)?;
    Ok(manifest)
}
