//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use mar_core::marbase::MarMethod;

use crate::commands::{self, EvalInputs, SimInputs};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "marct", version, about = "CT metal artifact simulation, reduction and evaluation")]
pub struct Cli {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for synthetic phantoms and noise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate metal-corrupted cases from clean slices and masks, or from
    /// synthetic phantoms when no inputs are given.
    Simulate {
        #[arg(long, requires = "masks")]
        images: Option<PathBuf>,
        #[arg(long, requires = "images")]
        masks: Option<PathBuf>,
    },
    /// Inpaint the metal trace with LI or NMAR and reconstruct.
    Mar {
        #[arg(long)]
        cases: PathBuf,
        /// li or nmar; overrides the config.
        #[arg(long)]
        method: Option<String>,
    },
    /// Score candidate images against the truth.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Candidate image grid name.
        #[arg(long, default_value = "x_ma")]
        image: String,
        /// Candidate sinogram grid name, scored against s_gt.
        #[arg(long)]
        sinogram: Option<String>,
    },
    /// Turn clinical HU slices into corrupted-sinogram cases.
    Ingest {
        #[arg(long)]
        images: PathBuf,
    },
    /// Write metal-projection pyramids and padded sinograms.
    Encode {
        #[arg(long)]
        cases: PathBuf,
    },
}

/// Config file first, then flags.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Mar { method: Some(m), .. } = &cli.command {
        cfg.method = m
            .parse::<MarMethod>()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Simulate { images, masks } => {
            let inputs = match (images, masks) {
                (Some(images), Some(masks)) => SimInputs::Files {
                    images: images.clone(),
                    masks: masks.clone(),
                },
                _ => SimInputs::Synthetic,
            };
            let m = commands::cmd_simulate(&cfg, &inputs)?;
            eprintln!("simulated {} cases into {}", m.cases.len(), cfg.out.display());
        }
        Command::Mar { cases, .. } => {
            let m = commands::cmd_mar(&cfg, cases, cfg.method)?;
            eprintln!("corrected {} cases into {}", m.cases.len(), cfg.out.display());
        }
        Command::Eval {
            truth,
            candidate,
            image,
            sinogram,
        } => {
            let report = commands::cmd_eval(
                &cfg,
                &EvalInputs {
                    truth: truth.clone(),
                    candidate: candidate.clone(),
                    image: image.clone(),
                    sinogram: sinogram.clone(),
                },
            )?;
            println!("{}", report.render_table(image));
        }
        Command::Ingest { images } => {
            let m = commands::cmd_ingest(&cfg, images)?;
            eprintln!("ingested {} slices into {}", m.cases.len(), cfg.out.display());
        }
        Command::Encode { cases } => {
            let m = commands::cmd_encode(&cfg, cases)?;
            eprintln!("encoded {} cases into {}", m.cases.len(), cfg.out.display());
        }
    }
    Ok(())
}
