use std::fs;
use std::path::PathBuf;

use mar_core::metrics::{evaluate_dataset, EvalCase, EvalReport, HuWindow};
use mar_core::units::metal_size_group;
use mar_core::Error;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::preview::write_preview;
use crate::store::{case_ids, CaseDir, MASK, M_T, S_GT, X_GT};

#[derive(Clone, Debug)]
pub struct EvalInputs {
    /// Case tree holding `x_gt` and, when present, `mask`, `s_gt`, `m_t`.
    pub truth: PathBuf,
    /// Case tree holding the candidate grids.
    pub candidate: PathBuf,
    /// Candidate image grid name, for example `x_ma` or `x_nmar`.
    pub image: String,
    /// Candidate sinogram grid name; scored against `s_gt` when given.
    pub sinogram: Option<String>,
}

fn load_case(cfg: &RunConfig, inputs: &EvalInputs, id: &str) -> CliResult<EvalCase> {
    let truth = CaseDir::new(&inputs.truth, id);
    let cand = CaseDir::new(&inputs.candidate, id);
    let group = if truth.has(MASK) {
        match metal_size_group(&truth.mask()?, &cfg.size_thresholds) {
            Ok(g) => Some(g),
            Err(Error::NoMetal) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let (s_gt, s_candidate, trace) = match &inputs.sinogram {
        Some(name) => (
            Some(truth.sinogram(S_GT)?),
            Some(cand.sinogram(name)?),
            if truth.has(M_T) { Some(truth.trace()?) } else { None },
        ),
        None => (None, None, None),
    };
    Ok(EvalCase {
        case_id: id.to_string(),
        group,
        x_gt: truth.image(X_GT)?,
        x_candidate: cand.image(&inputs.image)?,
        s_gt,
        s_candidate,
        trace,
    })
}

/// Scores candidate reconstructions against the truth tree. Writes
/// `report.csv`, `summary.md` and windowed PNG previews under `cfg.out`.
pub fn cmd_eval(cfg: &RunConfig, inputs: &EvalInputs) -> CliResult<EvalReport> {
    cfg.validate()?;
    let truth_ids = case_ids(&inputs.truth, X_GT)?;
    let cand_ids = case_ids(&inputs.candidate, &inputs.image)?;
    let mut missing: Vec<String> = truth_ids
        .iter()
        .filter(|id| !cand_ids.contains(id))
        .map(|id| format!("{id} (no {})", inputs.image))
        .collect();
    missing.extend(
        cand_ids
            .iter()
            .filter(|id| !truth_ids.contains(id))
            .map(|id| format!("{id} (no {X_GT})")),
    );
    if let Some(name) = &inputs.sinogram {
        for id in &truth_ids {
            if !CaseDir::new(&inputs.candidate, id).has(name) {
                missing.push(format!("{id} (no {name})"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Data(format!("missing counterparts: {}", missing.join(", "))));
    }
    if truth_ids.is_empty() {
        return Err(CliError::Data(format!("no cases under {}", inputs.truth.display())));
    }
    let window = HuWindow::default();
    let pool = cfg.thread_pool()?;
    let report = pool.install(|| -> CliResult<EvalReport> {
        let cases = truth_ids
            .par_iter()
            .map(|id| load_case(cfg, inputs, id))
            .collect::<CliResult<Vec<_>>>()?;
        cases.par_iter().try_for_each(|c| -> CliResult<()> {
            let dir = cfg.out.join("previews");
            write_preview(&dir.join(format!("{}_{X_GT}.png", c.case_id)), &c.x_gt, &window)?;
            write_preview(
                &dir.join(format!("{}_{}.png", c.case_id, inputs.image)),
                &c.x_candidate,
                &window,
            )
        })?;
        Ok(evaluate_dataset(&cases, &window)?)
    })?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("report.csv"), report.to_csv_string()?)?;
    fs::write(cfg.out.join("summary.md"), report.render_table(&inputs.image))?;
    Ok(report)
}
