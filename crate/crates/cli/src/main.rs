//! `enkcf` command-line tracker and benchmark runner.
//!
//! ```text
//! enkcf track --dataset DIR [--seq NAME] [--out DIR] [--overlay] ...
//! enkcf eval --dataset DIR [--seq NAME]... [--out DIR] [--jobs N] ...
//! enkcf config-dump > tracker.conf
//! ```

mod commands;
mod config;
mod frames;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use enkcf::SchedulerConfig;

use commands::RunConfig;

#[derive(Parser)]
#[command(name = "enkcf", version, about = "Ensemble-KCF single-target tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one sequence and write its per-frame predictions.
    Track(RunArgs),
    /// Track every sequence of a dataset and write metric curves.
    Eval(RunArgs),
    /// Print the configuration as an editable key = value document.
    ConfigDump {
        /// Start from this file instead of the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Dataset root, or a single sequence directory.
    #[arg(long)]
    dataset: PathBuf,
    /// Sequence name; repeat to select several.
    #[arg(long = "seq")]
    seq: Vec<String>,
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sequences and inner loops.
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write frames with the predicted box drawn.
    #[arg(long)]
    overlay: bool,
    /// Large translation filter every frame plus periodic scale search,
    /// without the particle filter.
    #[arg(long)]
    low_fps_mode: bool,
    /// Keep the particle prior as the translation on scale frames.
    #[arg(long)]
    strict_paper: bool,
    /// Color-naming lookup table (32768 rows of 11 probabilities).
    #[arg(long)]
    cn_table: Option<PathBuf>,
    /// Write zero for all timings so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn into_run_config(self) -> Result<RunConfig> {
        set_jobs(self.jobs)?;
        let mut scheduler = match &self.config {
            Some(p) => config::load(p)?,
            None => SchedulerConfig::default(),
        };
        if let Some(seed) = self.seed {
            scheduler.seed = seed;
        }
        if self.low_fps_mode {
            scheduler = scheduler.low_fps();
        }
        if self.strict_paper {
            scheduler.recenter_on_scale = false;
        }
        Ok(RunConfig {
            dataset_path: self.dataset,
            sequence_filter: self.seq,
            scheduler,
            cn_table_path: self.cn_table,
            output_dir: self.out,
            overlay: self.overlay,
            timing: !self.no_timing,
        })
    }
}

#[cfg(feature = "parallel")]
fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if jobs.is_some_and(|n| n > 1) {
        log::warn!("built without the parallel feature; --jobs ignored");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Track(args) => commands::cmd_track(&args.into_run_config()?),
        Command::Eval(args) => commands::cmd_eval(&args.into_run_config()?),
        Command::ConfigDump { config: path } => {
            let c = match path {
                Some(p) => config::load(&p)?,
                None => SchedulerConfig::default(),
            };
            print!("{}", config::render(&c));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::FAILURE
        }
    }
}
