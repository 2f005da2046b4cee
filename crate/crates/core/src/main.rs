//! Command-line entry point. Exit codes: 0 success, 1 usage, 2 data
//! error, 3 run failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cilbench::harness::{self, ExperimentConfig, HarnessError, RunOptions};

#[derive(Parser)]
#[command(name = "cilbench", version, about = "Hierarchy-aware class-incremental learning benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    /// Experiment configuration JSON; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seeds (overrides the config's seed list)
    #[arg(long, num_args = 1..)]
    seed: Vec<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Learner names (overrides the config's learner list)
    #[arg(long, num_args = 1..)]
    learner: Vec<String>,
    /// Per-class exemplar budget; 0 means unbounded
    #[arg(long)]
    buffer: Option<usize>,
    /// Epochs per task (the first task trains for twice as many)
    #[arg(long)]
    epochs: Option<usize>,
    /// Parallel seed workers
    #[arg(long)]
    threads: Option<usize>,
    /// Dump served training pools as CSV
    #[arg(long)]
    dump: bool,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if !self.learner.is_empty() {
            cfg.learners = self.learner.clone();
        }
        if let Some(b) = self.buffer {
            cfg.buffer = Some(b);
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if self.dump {
            cfg.dump = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the splits and print per-split sample counts as CSV
    Split {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write one task-configuration JSON per seed
    GenConfig {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train every learner on every seed and write reports
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Save a final parameter checkpoint per run
        #[arg(long)]
        save: bool,
        /// Warm-start parameters from a checkpoint
        #[arg(long)]
        load: Option<PathBuf>,
    },
    /// Score a predictions CSV and print `{MR, JS, pwJS}` JSON
    Eval {
        /// Predictions CSV (`sample_id,truth;truth,pred;pred`)
        predictions: PathBuf,
    },
    /// Aggregate per-task logs from run directories into a mean/stdev CSV
    Report {
        /// Run directories containing `seed_*` subdirectories
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Split { overrides } => {
            let cfg = overrides.resolve()?;
            let seed = cfg.seeds[0];
            print!("{}", harness::cmd_split_verify(&cfg, seed)?);
            Ok(())
        }
        Command::GenConfig { overrides } => {
            let cfg = overrides.resolve()?;
            for path in harness::cmd_generate_config(&cfg)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Run { overrides, save, load } => {
            let cfg = overrides.resolve()?;
            harness::cmd_run(&cfg, &RunOptions { save, load })
        }
        Command::Eval { predictions } => {
            println!("{}", harness::cmd_eval(&predictions)?);
            Ok(())
        }
        Command::Report { dirs } => {
            print!("{}", harness::cmd_report(&dirs)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are successes, bad flags are not
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
