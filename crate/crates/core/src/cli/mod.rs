//! The `roikit` command line.
//!
//! Exit status is 0 on success, 1 for data or validation errors and 2 for
//! usage errors. Every error line on stderr starts with `error:`.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{write_atomic, InvalidModel, UsageError};
pub use config::PipelineConfig;

#[derive(Parser, Debug)]
#[command(name = "roikit", version, about = "Object-focused view selection and splat composition")]
pub struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides run.output).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed (overrides run.seed and synth.seed).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads; more than one enables parallel evaluation.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Summarize the model and each ROI's candidate pool.
    Inspect,
    /// Order candidate views for each ROI.
    Select {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Write train/test image lists and trainer manifests.
    Partition,
    /// Replace in-box scene splats by object splats.
    Compose {
        /// Resolve overlapping boxes in favour of the earlier ROI.
        #[arg(long)]
        allow_overlap: bool,
    },
    /// Box-masked PSNR and SSIM on the held-out test views.
    Evaluate,
    /// Generate a synthetic model (and optionally splats) from the synth section.
    Synth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Static,
    Gp6,
    Gp9,
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(InvalidModel(list)) = err.downcast_ref::<InvalidModel>() {
                for v in list {
                    eprintln!("error: {v}");
                }
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(if err.chain().any(|c| c.is::<UsageError>()) { 2 } else { 1 })
        }
    }
}
