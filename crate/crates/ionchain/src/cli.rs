use std::path::PathBuf;

use clap::Parser;

use crate::config::{PairSelection, RunConfig};
use crate::error::CliError;
use crate::pipeline::{run, Command, Context, Summary};

/// Uniform-density ion chains: equilibrium, transverse modes and AM/FM
/// entangling-gate pulses.
#[derive(Debug, Parser)]
#[command(name = "ionchain", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Overrides `output_dir` from the config.
    #[arg(short, long, env = "IONCHAIN_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides `[powermap] pairs`.
    #[arg(long, value_enum)]
    pub pairs: Option<PairSelection>,
    /// Run upstream commands first instead of reading their outputs.
    #[arg(long)]
    pub with_prereqs: bool,
    /// Suppress progress lines.
    #[arg(short, long)]
    pub quiet: bool,
}

impl Cli {
    pub fn context(&self) -> Result<Context, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(pairs) = self.pairs {
            cfg.powermap.pairs = pairs;
        }
        let mut ctx = Context::new(cfg);
        ctx.with_prereqs = self.with_prereqs;
        ctx.verbose = !self.quiet;
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            ctx.threads = n;
        }
        Ok(ctx)
    }

    pub fn execute(&self) -> Result<Summary, CliError> {
        let ctx = self.context()?;
        if let Some(n) = self.threads {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        run(self.command, &ctx)
    }
}
