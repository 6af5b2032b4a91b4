use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use memlab_cli::{run_path, RunOptions};

/// Run a memlab experiment suite from a TOML configuration.
#[derive(Parser, Debug)]
#[command(name = "memlab", version)]
struct Args {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the configured output_path or the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "MEMLAB_THREADS")]
    threads: Option<usize>,
    /// Report information quantities in bits instead of nats.
    #[arg(long)]
    bits: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("could not configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let opts = RunOptions { seed: args.seed, out: args.out, bits: args.bits };
    ExitCode::from(run_path(&args.config, &opts) as u8)
}
