//! One-pass benchmark evaluation over OTB-style sequence folders.
//!
//! A sequence folder holds an `img/` directory of frames (sorted by file
//! name) and `groundtruth_rect.txt` with one `x,y,w,h` box per line, commas,
//! tabs or spaces as separators. Boxes with non-positive size mark frames
//! without a usable annotation; they are tracked through but left out of
//! the metrics.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::features::{ColorNamingTable, Image, Roi};
use crate::scheduler::{SchedulerConfig, TargetState, Tracker};

pub const PRECISION_THRESHOLDS: usize = 51;
pub const SUCCESS_THRESHOLDS: usize = 21;
const FRAME_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "bmp", "ppm"];

/// Axis-aligned box given by its top-left corner and size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.width, self.height]
            .iter()
            .all(|v| v.is_finite())
            && self.width > 0.0
            && self.height > 0.0
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    pub fn to_roi(&self) -> Result<Roi> {
        let (cx, cy) = self.center();
        Roi::new(cx, cy, self.width, self.height)
    }

    pub fn from_roi(roi: &Roi) -> Self {
        Rect::new(
            roi.center_x - roi.width / 2.0,
            roi.center_y - roi.height / 2.0,
            roi.width,
            roi.height,
        )
    }

    pub fn from_state(state: &TargetState) -> Self {
        Rect::from_roi(&state.roi())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<PathBuf>,
    /// One entry per frame; `None` where the annotation is unusable.
    pub ground_truth: Vec<Option<Rect>>,
    pub start_box: Rect,
}

/// Parses one ground-truth line.
pub fn parse_box(line: &str) -> Option<Rect> {
    let v: Vec<f64> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .ok()?;
    if v.len() != 4 {
        return None;
    }
    let r = Rect::new(v[0], v[1], v[2], v[3]);
    r.is_valid().then_some(r)
}

/// Parses a whole ground-truth file; unparseable or degenerate lines become
/// `None`, blank lines are skipped.
pub fn parse_ground_truth(text: &str) -> Vec<Option<Rect>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_box)
        .collect()
}

pub fn load_sequence(dir: impl AsRef<Path>) -> Result<Sequence> {
    let dir = dir.as_ref();
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let seq_err = |message: String| Error::Sequence {
        name: name.clone(),
        message,
    };

    let gt_path = dir.join("groundtruth_rect.txt");
    if !gt_path.is_file() {
        return Err(seq_err(format!("missing {}", gt_path.display())));
    }
    let text = fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    let ground_truth = parse_ground_truth(&text);

    let img_dir = dir.join("img");
    let entries = fs::read_dir(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut frames = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&img_dir, e))?.path();
        let is_frame = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            .unwrap_or(false);
        if is_frame {
            frames.push(path);
        }
    }
    frames.sort();

    if frames.is_empty() {
        return Err(seq_err(format!("no frames in {}", img_dir.display())));
    }
    if frames.len() != ground_truth.len() {
        return Err(seq_err(format!(
            "{} frames but {} ground-truth boxes",
            frames.len(),
            ground_truth.len()
        )));
    }
    let start_box = ground_truth[0]
        .ok_or_else(|| seq_err("first frame has no valid ground-truth box".into()))?;
    Ok(Sequence {
        name,
        frames,
        ground_truth,
        start_box,
    })
}

/// Sub-directories of `root` that contain a ground-truth file, sorted by name.
pub fn discover_sequences(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join("groundtruth_rect.txt").is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackRun {
    pub sequence: String,
    pub predictions: Vec<Rect>,
    /// Tracker time per frame; frame 0 holds initialization.
    pub per_frame_seconds: Vec<f64>,
    pub config_digest: String,
}

/// Distance between box centers.
pub fn center_error(pred: &Rect, gt: &Rect) -> f64 {
    let (a, b) = (pred.center(), gt.center());
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Intersection over union; zero when the union is empty.
pub fn overlap_iou(pred: &Rect, gt: &Rect) -> f64 {
    let iw = (pred.x + pred.width).min(gt.x + gt.width) - pred.x.max(gt.x);
    let ih = (pred.y + pred.height).min(gt.y + gt.height) - pred.y.max(gt.y);
    let inter = iw.max(0.0) * ih.max(0.0);
    let union = pred.area() + gt.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Precision and success curves for one run or averaged over several.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricCurves {
    /// Fraction of frames with center error ≤ τ, τ = 0..=50 px.
    pub precision: Vec<f64>,
    /// Fraction of frames with IoU > θ, θ = 0, 0.05, …, 1.
    pub success: Vec<f64>,
    pub precision_at_20: f64,
    /// Mean of the success samples.
    pub auc: f64,
    pub fps: f64,
    pub frames: usize,
    pub seconds: f64,
}

pub fn precision_threshold(i: usize) -> f64 {
    i as f64
}

pub fn success_threshold(i: usize) -> f64 {
    i as f64 * 0.05
}

fn fps(frames: usize, seconds: f64) -> f64 {
    if seconds > 0.0 {
        frames as f64 / seconds
    } else {
        0.0
    }
}

/// Scores `run` against the sequence's ground truth.
pub fn compute_curves(run: &TrackRun, ground_truth: &[Option<Rect>]) -> Result<MetricCurves> {
    if run.predictions.len() != ground_truth.len() {
        return Err(Error::dim(format!(
            "{} predictions for {} ground-truth frames",
            run.predictions.len(),
            ground_truth.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = run
        .predictions
        .iter()
        .zip(ground_truth)
        .filter_map(|(p, g)| g.map(|g| (center_error(p, &g), overlap_iou(p, &g))))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Sequence {
            name: run.sequence.clone(),
            message: "no frames with valid ground truth".into(),
        });
    }
    let n = pairs.len() as f64;
    let precision: Vec<f64> = (0..PRECISION_THRESHOLDS)
        .map(|i| {
            let t = precision_threshold(i);
            pairs.iter().filter(|(e, _)| *e <= t).count() as f64 / n
        })
        .collect();
    let success: Vec<f64> = (0..SUCCESS_THRESHOLDS)
        .map(|i| {
            let t = success_threshold(i);
            pairs.iter().filter(|(_, o)| *o > t).count() as f64 / n
        })
        .collect();
    let seconds: f64 = run.per_frame_seconds.iter().sum();
    let frames = run.predictions.len();
    Ok(MetricCurves {
        precision_at_20: precision[20],
        auc: success.iter().sum::<f64>() / SUCCESS_THRESHOLDS as f64,
        precision,
        success,
        fps: fps(frames, seconds),
        frames,
        seconds,
    })
}

/// Unweighted mean of per-sequence curves; fps is total frames over total
/// seconds.
pub fn aggregate(runs: &[MetricCurves]) -> Result<MetricCurves> {
    if runs.is_empty() {
        return Err(Error::param("nothing to aggregate"));
    }
    let k = runs.len() as f64;
    let mean_curve = |get: fn(&MetricCurves) -> &Vec<f64>, len: usize| -> Vec<f64> {
        (0..len)
            .map(|i| runs.iter().map(|r| get(r)[i]).sum::<f64>() / k)
            .collect()
    };
    let frames = runs.iter().map(|r| r.frames).sum();
    let seconds = runs.iter().map(|r| r.seconds).sum();
    Ok(MetricCurves {
        precision: mean_curve(|r| &r.precision, PRECISION_THRESHOLDS),
        success: mean_curve(|r| &r.success, SUCCESS_THRESHOLDS),
        precision_at_20: runs.iter().map(|r| r.precision_at_20).sum::<f64>() / k,
        auc: runs.iter().map(|r| r.auc).sum::<f64>() / k,
        fps: fps(frames, seconds),
        frames,
        seconds,
    })
}

/// Tracks `seq` one pass from its first box. `load` decodes a frame; only
/// tracker time is measured.
pub fn run_sequence<F>(
    seq: &Sequence,
    config: &SchedulerConfig,
    table: Option<Arc<ColorNamingTable>>,
    mut load: F,
) -> Result<TrackRun>
where
    F: FnMut(&Path) -> Result<Image>,
{
    let mut predictions = Vec::with_capacity(seq.frames.len());
    let mut seconds = Vec::with_capacity(seq.frames.len());

    let first = load(&seq.frames[0])?;
    let t0 = Instant::now();
    let mut tracker = Tracker::new(&first, seq.start_box.to_roi()?, config.clone(), table)?;
    seconds.push(t0.elapsed().as_secs_f64());
    predictions.push(seq.start_box);

    for path in &seq.frames[1..] {
        let frame = load(path)?;
        let t = Instant::now();
        let state = tracker.step(&frame)?;
        seconds.push(t.elapsed().as_secs_f64());
        predictions.push(Rect::from_state(&state));
    }
    Ok(TrackRun {
        sequence: seq.name.clone(),
        predictions,
        per_frame_seconds: seconds,
        config_digest: config.digest(),
    })
}

/// Per-frame predictions as CSV. With `timing` off the seconds column is
/// written as zero so that reruns compare byte for byte.
pub fn results_csv(run: &TrackRun, timing: bool) -> String {
    let mut out = String::from("frame_index,pred_x,pred_y,pred_w,pred_h,seconds\n");
    for (i, (p, s)) in run
        .predictions
        .iter()
        .zip(&run.per_frame_seconds)
        .enumerate()
    {
        let s = if timing { *s } else { 0.0 };
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.6}",
            i, p.x, p.y, p.width, p.height, s
        );
    }
    out
}

/// `threshold,value` lines for the precision curve.
pub fn precision_csv(curves: &MetricCurves) -> String {
    let mut out = String::from("threshold_px,precision\n");
    for (i, v) in curves.precision.iter().enumerate() {
        let _ = writeln!(out, "{},{:.6}", precision_threshold(i), v);
    }
    out
}

/// `threshold,value` lines for the success curve.
pub fn success_csv(curves: &MetricCurves) -> String {
    let mut out = String::from("overlap_threshold,success\n");
    for (i, v) in curves.success.iter().enumerate() {
        let _ = writeln!(out, "{:.2},{:.6}", success_threshold(i), v);
    }
    out
}

/// Summary table: one row per sequence and an `ALL` row for the aggregate.
pub fn summary_csv(rows: &[(String, MetricCurves)], all: &MetricCurves, timing: bool) -> String {
    let mut out = String::from("sequence,precision_at_20,auc,fps\n");
    let fps = |c: &MetricCurves| if timing { c.fps } else { 0.0 };
    for (name, c) in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.2}",
            name,
            c.precision_at_20,
            c.auc,
            fps(c)
        );
    }
    let _ = writeln!(
        out,
        "ALL,{:.6},{:.6},{:.2}",
        all.precision_at_20,
        all.auc,
        fps(all)
    );
    out
}
