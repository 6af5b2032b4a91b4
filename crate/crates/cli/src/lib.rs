//! Experiment runner for the memlab library.
//!
//! A run reads one TOML configuration, executes its suite and writes
//! `<suite>.csv` and `<suite>.jsonl` into the output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod suites;

use std::path::{Path, PathBuf};

pub use config::{parse_config, ExperimentConfig, Suite};
pub use suites::{run_suite, SuiteOutput};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lib(#[from] memlab::Error),
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    ConfigError = 1,
    VerificationFailed = 2,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub bits: bool,
}

/// Paths of the files written by one run.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub log: PathBuf,
    pub failures: usize,
}

pub fn run_config(mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<Artifacts, CliError> {
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let dir = opts.out.clone().or_else(|| cfg.output_path.clone()).unwrap_or_else(|| PathBuf::from("."));
    let out = run_suite(&cfg, opts.bits)?;
    write_artifacts(&dir, cfg.suite, &out)
}

fn write_artifacts(dir: &Path, suite: Suite, out: &SuiteOutput) -> Result<Artifacts, CliError> {
    std::fs::create_dir_all(dir)?;
    let stem = suite.file_stem();
    let csv = dir.join(format!("{stem}.csv"));
    let log = dir.join(format!("{stem}.jsonl"));
    std::fs::write(&csv, out.table.to_csv(stem))?;
    std::fs::write(&log, output::to_jsonl(&out.log))?;
    Ok(Artifacts { csv, log, failures: out.log.iter().filter(|r| !r.pass).count() })
}

/// Reads, runs and maps the outcome to an exit status, reporting errors on stderr.
pub fn run_path(path: &Path, opts: &RunOptions) -> Exit {
    let result = std::fs::read_to_string(path)
        .map_err(CliError::from)
        .and_then(|text| parse_config(&text))
        .and_then(|cfg| run_config(cfg, opts));
    match result {
        Ok(a) if a.failures > 0 => {
            eprintln!("{} verification check(s) failed; see {}", a.failures, a.log.display());
            Exit::VerificationFailed
        }
        Ok(a) => {
            println!("wrote {} and {}", a.csv.display(), a.log.display());
            Exit::Success
        }
        Err(e) => {
            eprintln!("{e}");
            Exit::ConfigError
        }
    }
}
