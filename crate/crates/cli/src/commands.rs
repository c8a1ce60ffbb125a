//! `track`, `eval` and `config-dump`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use enkcf::harness::{self, MetricCurves, TrackRun};
use enkcf::{ColorNamingTable, SchedulerConfig, Sequence};
use log::{error, info};

use crate::frames;

/// Everything one invocation needs, after merging defaults, the config file
/// and command-line flags.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    pub sequence_filter: Vec<String>,
    pub scheduler: SchedulerConfig,
    pub cn_table_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub overlay: bool,
    pub timing: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.dataset_path.exists() {
            bail!(
                "dataset path {} does not exist",
                self.dataset_path.display()
            );
        }
        if let Some(p) = &self.cn_table_path {
            if !p.is_file() {
                bail!("color-naming table {} does not exist", p.display());
            }
        }
        self.scheduler.validate()?;
        Ok(())
    }

    fn table(&self) -> Result<Option<Arc<ColorNamingTable>>> {
        self.cn_table_path
            .as_ref()
            .map(|p| ColorNamingTable::load(p).map(Arc::new))
            .transpose()
            .map_err(Into::into)
    }
}

/// Sequence directories selected by the dataset path and name filter. A
/// dataset path that is itself a sequence selects just that one.
fn select_sequences(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let root = &config.dataset_path;
    if root.join("groundtruth_rect.txt").is_file() {
        return Ok(vec![root.clone()]);
    }
    let all = harness::discover_sequences(root)?;
    if config.sequence_filter.is_empty() {
        return Ok(all);
    }
    config
        .sequence_filter
        .iter()
        .map(|name| {
            all.iter()
                .find(|p| p.file_name().is_some_and(|f| f == name.as_str()))
                .cloned()
                .ok_or_else(|| anyhow!("no sequence named {:?} under {}", name, root.display()))
        })
        .collect()
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn track_one(
    dir: &Path,
    config: &RunConfig,
    table: Option<Arc<ColorNamingTable>>,
) -> Result<(TrackRun, MetricCurves, Sequence)> {
    let seq = harness::load_sequence(dir)?;
    info!("{}: {} frames", seq.name, seq.frames.len());
    let run = harness::run_sequence(&seq, &config.scheduler, table, frames::load)?;
    let curves = harness::compute_curves(&run, &seq.ground_truth)?;
    let out = &config.output_dir;
    write(
        &out.join(format!("{}_results.csv", seq.name)),
        &harness::results_csv(&run, config.timing),
    )?;
    if config.overlay {
        let dir = out.join(format!("{}_overlay", seq.name));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for (i, (frame, rect)) in seq.frames.iter().zip(&run.predictions).enumerate() {
            let path = dir.join(format!("{:04}.png", i + 1));
            frames::overlay(frame, rect)?
                .save(&path)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok((run, curves, seq))
}

fn prepare_output(config: &RunConfig) -> Result<()> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))
}

pub fn cmd_track(config: &RunConfig) -> Result<()> {
    prepare_output(config)?;
    let dirs = select_sequences(config)?;
    let dir = match dirs.as_slice() {
        [one] => one,
        [] => bail!("no sequence found under {}", config.dataset_path.display()),
        _ => bail!(
            "{} sequences under {}; pick one with --seq",
            dirs.len(),
            config.dataset_path.display()
        ),
    };
    let (run, curves, seq) = track_one(dir, config, config.table()?)?;
    println!(
        "{}: {} frames, precision@20 {:.4}, auc {:.4}, {:.1} fps",
        seq.name,
        run.predictions.len(),
        curves.precision_at_20,
        curves.auc,
        curves.fps
    );
    Ok(())
}

pub fn cmd_eval(config: &RunConfig) -> Result<()> {
    prepare_output(config)?;
    let dirs = select_sequences(config)?;
    if dirs.is_empty() {
        bail!("no sequences found under {}", config.dataset_path.display());
    }
    let table = config.table()?;
    let results = run_all(&dirs, config, &table)?;

    let mut rows = Vec::new();
    let mut failed = 0;
    for (dir, result) in dirs.iter().zip(results) {
        match result {
            Ok((_, curves, seq)) => {
                let out = &config.output_dir;
                write(
                    &out.join(format!("{}_precision.csv", seq.name)),
                    &harness::precision_csv(&curves),
                )?;
                write(
                    &out.join(format!("{}_success.csv", seq.name)),
                    &harness::success_csv(&curves),
                )?;
                rows.push((seq.name, curves));
            }
            Err(e) => {
                error!("{}: {:#}", dir.display(), e);
                failed += 1;
            }
        }
    }
    if rows.is_empty() {
        bail!("every sequence failed");
    }
    let curves: Vec<MetricCurves> = rows.iter().map(|(_, c)| c.clone()).collect();
    let all = harness::aggregate(&curves)?;
    let out = &config.output_dir;
    write(
        &out.join("all_precision.csv"),
        &harness::precision_csv(&all),
    )?;
    write(&out.join("all_success.csv"), &harness::success_csv(&all))?;
    write(
        &out.join("summary.csv"),
        &harness::summary_csv(&rows, &all, config.timing),
    )?;
    println!(
        "{} sequences, precision@20 {:.4}, auc {:.4}, {:.1} fps",
        rows.len(),
        all.precision_at_20,
        all.auc,
        all.fps
    );
    if failed > 0 {
        bail!("{} of {} sequences failed", failed, dirs.len());
    }
    Ok(())
}

type SequenceResult = Result<(TrackRun, MetricCurves, Sequence)>;

#[cfg(feature = "parallel")]
fn run_all(
    dirs: &[PathBuf],
    config: &RunConfig,
    table: &Option<Arc<ColorNamingTable>>,
) -> Result<Vec<SequenceResult>> {
    use rayon::prelude::*;
    Ok(dirs
        .par_iter()
        .map(|d| track_one(d, config, table.clone()))
        .collect())
}

#[cfg(not(feature = "parallel"))]
fn run_all(
    dirs: &[PathBuf],
    config: &RunConfig,
    table: &Option<Arc<ColorNamingTable>>,
) -> Result<Vec<SequenceResult>> {
    Ok(dirs
        .iter()
        .map(|d| track_one(d, config, table.clone()))
        .collect())
}
