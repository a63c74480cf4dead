use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use mar_core::io;
use mar_core::phantom::synthetic_pair;
use mar_core::physics::simulate_case;
use mar_core::{Image, MetalMask};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::store::{fail_on_errors, grid_names, write_json, CaseDir, CaseEntry};

/// Where clean slices and implants come from.
#[derive(Clone, Debug)]
pub enum SimInputs {
    /// Clean HU images and masks paired by basename.
    Files { images: PathBuf, masks: PathBuf },
    /// Random bodies and implants, `synthetic_per_group` for each size group.
    Synthetic,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimInfo {
    pub group: Option<u8>,
    pub metal_pixels: usize,
    pub trace_bins: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimManifest {
    pub command: &'static str,
    pub source: &'static str,
    /// The resolved config without the output directory, so reruns into
    /// different directories write the same manifest.
    pub config: serde_json::Value,
    pub cases: Vec<CaseEntry<SimInfo>>,
}

enum Source {
    Files { image: PathBuf, mask: PathBuf },
    Synthetic { group: u8 },
}

struct Job {
    index: usize,
    id: String,
    source: Source,
}

fn pair_files(images: &Path, masks: &Path) -> CliResult<Vec<Job>> {
    let a = grid_names(images)?;
    let b = grid_names(masks)?;
    let unpaired: BTreeSet<&String> = a.symmetric_difference(&b).collect();
    if !unpaired.is_empty() {
        let names: Vec<&str> = unpaired.iter().map(|s| s.as_str()).collect();
        return Err(CliError::Data(format!(
            "unpaired basenames between {} and {}: {}",
            images.display(),
            masks.display(),
            names.join(", ")
        )));
    }
    if a.is_empty() {
        return Err(CliError::Data(format!("no grids found in {}", images.display())));
    }
    Ok(a.into_iter()
        .enumerate()
        .map(|(index, name)| Job {
            index,
            source: Source::Files {
                image: images.join(&name),
                mask: masks.join(&name),
            },
            id: name,
        })
        .collect())
}

fn synthetic_jobs(cfg: &RunConfig) -> CliResult<Vec<Job>> {
    if cfg.synthetic_per_group == 0 {
        return Err(CliError::Config("synthetic_per_group must be at least 1".into()));
    }
    let per = cfg.synthetic_per_group;
    Ok((0..5 * per)
        .map(|index| Job {
            index,
            id: format!("syn_{index:04}"),
            source: Source::Synthetic { group: (index / per) as u8 + 1 },
        })
        .collect())
}

fn load(cfg: &RunConfig, job: &Job) -> CliResult<(Image, MetalMask)> {
    match &job.source {
        Source::Files { image, mask } => Ok((io::read_image(image)?, io::read_mask(mask)?)),
        Source::Synthetic { group } => {
            // One stream per case: results do not depend on scheduling.
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(job.index as u64);
            Ok(synthetic_pair(
                cfg.geometry.image_size,
                *group,
                &cfg.size_thresholds,
                &mut rng,
            )?)
        }
    }
}

fn run_one(cfg: &RunConfig, out: &Path, job: &Job) -> CliResult<SimInfo> {
    let (x_gt, mask) = load(cfg, job)?;
    let insert = cfg.insert(mask.clone())?;
    let case = simulate_case(
        &x_gt,
        &mask,
        &insert,
        &cfg.spectrum()?,
        &cfg.geometry,
        &cfg.ramp(),
        &cfg.sim_params(job.index),
    )?;
    CaseDir::new(out, &job.id).write_sim_case(&case)?;
    Ok(SimInfo {
        group: case.metal_size_group,
        metal_pixels: mask.count(),
        trace_bins: case.m_t.count(),
    })
}

/// Simulates every case into `cfg.out/<id>/` and writes
/// `cfg.out/manifest.json`. Cases that fail are listed in the manifest and
/// turn the whole run into a data error once the rest are done.
pub fn cmd_simulate(cfg: &RunConfig, inputs: &SimInputs) -> CliResult<SimManifest> {
    cfg.validate()?;
    let (jobs, source) = match inputs {
        SimInputs::Files { images, masks } => (pair_files(images, masks)?, "files"),
        SimInputs::Synthetic => (synthetic_jobs(cfg)?, "synthetic"),
    };
    let out = cfg.out.clone();
    let pool = cfg.thread_pool()?;
    let cases: Vec<CaseEntry<SimInfo>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| CaseEntry::from_result(job.id.clone(), run_one(cfg, &out, job)))
            .collect()
    });
    let mut config = serde_json::to_value(cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(map) = config.as_object_mut() {
        map.remove("out");
        map.remove("workers");
    }
    let manifest = SimManifest {
        command: "simulate",
        source,
        config,
        cases,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    fail_on_errors("simulate", &manifest.cases)?;
    Ok(manifest)
}
