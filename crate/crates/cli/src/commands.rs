use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use clap::{Args, ValueEnum};
use quadtrack::dataset::{frame_file_name, load_dataset, to_luma8};
use quadtrack::eval::{
    default_al_thresholds, default_jac_thresholds, make_subsequences, mean_alignment_error, robustness_curve,
    success_curve, Curve, FailureMode, Metric, SubsequenceRun,
};
use quadtrack::synth::scenarios::{throughput_spec, Scenario};
use quadtrack::synth::{export, render};
use quadtrack::{CornerQuad, GrayImage};

use crate::{load_config, parse_dof, CliError, RunRecord, RunSpec, TrackerKind};

#[derive(Debug, Clone, Args)]
pub struct TrackArgs {
    #[arg(long, value_enum)]
    pub tracker: TrackerKind,
    #[arg(long, default_value = "4", value_parser = parse_dof)]
    pub dof: usize,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub init_frame: usize,
    /// Overrides `ransac.seed` from the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write each frame with the output quad (white) and ground truth (black).
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Write 0 for time_ms so repeated runs give identical files.
    #[arg(long)]
    pub no_timing: bool,
}

fn dataset_label(dir: &Path, name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    if s.is_empty() {
        dir.display().to_string()
    } else {
        s
    }
}

pub fn cmd_track(args: &TrackArgs) -> Result<RunRecord, CliError> {
    let config = load_config(args.config.as_deref(), args.seed)?;
    let spec = RunSpec::new(args.tracker, args.dof, config, !args.no_timing)?;
    let ds = load_dataset(&args.dataset)?;
    if args.init_frame + 1 >= ds.len() {
        return Err(CliError::Usage(format!(
            "init frame {} leaves nothing to track in {} frames",
            args.init_frame,
            ds.len()
        )));
    }
    let frames = ds.load_all_frames()?;
    let outputs = spec.run(&frames, args.init_frame, &ds.gt[args.init_frame])?;
    let rec = RunRecord {
        tracker: args.tracker.name().into(),
        dof: args.dof,
        config_hash: config.hash(),
        seed: config.rklt.ransac.seed,
        dataset: dataset_label(&args.dataset, &ds.name),
        init_frame: args.init_frame,
        frames: outputs,
    };
    rec.save(&args.out)?;
    if let Some(dir) = &args.overlay {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (i, img) in frames.iter().enumerate().skip(args.init_frame) {
            let tracked = if i == args.init_frame {
                Some(ds.gt[i])
            } else {
                rec.frames[i - args.init_frame - 1].quad
            };
            let mut canvas = img.clone();
            draw_quad(&mut canvas, &ds.gt[i], 0.0);
            if let Some(q) = tracked {
                draw_quad(&mut canvas, &q, 1.0);
            }
            let path = dir.join(frame_file_name(i));
            to_luma8(&canvas)
                .save(&path)
                .map_err(|e| CliError::io(&path, std::io::Error::other(e.to_string())))?;
        }
    }
    Ok(rec)
}

/// Draws the quad outline, 2 px wide.
pub fn draw_quad(img: &mut GrayImage, q: &CornerQuad, value: f64) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    for i in 0..4 {
        let (a, b) = (q.corners[i], q.corners[(i + 1) % 4]);
        let steps = (2.0 * a.dist(b)).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let p = a + (b - a) * (s as f64 / steps as f64);
            let (x0, y0) = (p.x.floor() as isize, p.y.floor() as isize);
            for (x, y) in [(x0, y0), (x0 + 1, y0), (x0, y0 + 1), (x0 + 1, y0 + 1)] {
                if (0..w).contains(&x) && (0..h).contains(&y) {
                    img.set(x as usize, y as usize, value);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Al,
    Jac,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Glob of results files to score (ignored with --subseq).
    #[arg(long)]
    pub results: Option<String>,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Run the tracker from this many evenly spaced initial frames.
    #[arg(long)]
    pub subseq: Option<usize>,
    #[arg(long, value_enum, default_value = "al")]
    pub metric: MetricArg,
    /// Frames after a run's first failure count as failures.
    #[arg(long)]
    pub fail_stop: bool,
    /// Success curve path; the robustness curve goes next to it with a
    /// `_robustness` suffix.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "rklt")]
    pub tracker: TrackerKind,
    #[arg(long, default_value = "4", value_parser = parse_dof)]
    pub dof: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// With --subseq, also write each run as `run_initNNNNN.csv` here.
    #[arg(long)]
    pub save_runs: Option<PathBuf>,
    /// Worker threads for --subseq (default: available cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub init_frames: Vec<usize>,
    pub frames: usize,
    pub lost: usize,
    pub mean_e_al: Option<f64>,
    pub success: Curve,
    pub robustness: Curve,
}

impl EvalSummary {
    pub fn line(&self) -> String {
        let mean = self
            .mean_e_al
            .map(|m| format!("{m:.4}"))
            .unwrap_or_else(|| "nan".into());
        format!(
            "runs={} frames={} lost={} mean_e_al={mean} success_auc={:.4} robustness_auc={:.4}",
            self.init_frames.len(),
            self.frames,
            self.lost,
            self.success.auc(),
            self.robustness.auc()
        )
    }
}

pub fn robustness_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    out.with_file_name(format!("{stem}_robustness{ext}"))
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalSummary, CliError> {
    let ds = load_dataset(&args.dataset)?;
    let label = dataset_label(&args.dataset, &ds.name);
    let records = match args.subseq {
        Some(k) => {
            if k == 0 {
                return Err(CliError::Usage("--subseq must be at least 1".into()));
            }
            let config = load_config(args.config.as_deref(), args.seed)?;
            let spec = RunSpec::new(args.tracker, args.dof, config, !args.no_timing)?;
            let frames = ds.load_all_frames()?;
            let inits = make_subsequences(ds.len(), k);
            let threads = args
                .threads
                .unwrap_or_else(|| thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
                .clamp(1, inits.len());
            let outputs = run_parallel(&spec, &frames, &ds.gt, &inits, threads)?;
            let recs: Vec<RunRecord> = inits
                .iter()
                .zip(outputs)
                .map(|(&init, frames)| RunRecord {
                    tracker: args.tracker.name().into(),
                    dof: args.dof,
                    config_hash: config.hash(),
                    seed: config.rklt.ransac.seed,
                    dataset: label.clone(),
                    init_frame: init,
                    frames,
                })
                .collect();
            if let Some(dir) = &args.save_runs {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                for r in &recs {
                    r.save(&dir.join(format!("run_init{:05}.csv", r.init_frame)))?;
                }
            }
            recs
        }
        None => {
            let pattern = args
                .results
                .as_deref()
                .ok_or_else(|| CliError::Usage("need --results GLOB or --subseq K".into()))?;
            let paths = glob::glob(pattern)
                .map_err(|e| CliError::Usage(format!("bad glob '{pattern}': {e}")))?
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::io(e.path(), std::io::Error::other(e.to_string())))?;
            if paths.is_empty() {
                return Err(CliError::Usage(format!("no files match '{pattern}'")));
            }
            paths.iter().map(|p| RunRecord::load(p)).collect::<Result<Vec<_>, _>>()?
        }
    };
    let runs = records
        .iter()
        .map(|r| SubsequenceRun::evaluate(label.clone(), r.init_frame, &r.quads(), &ds.gt))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = summarize(&runs, args.metric, args.fail_stop)?;
    write_file(&args.out, &summary.success.to_csv())?;
    write_file(&robustness_path(&args.out), &summary.robustness.to_csv())?;
    Ok(summary)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn run_parallel(
    spec: &RunSpec,
    frames: &[GrayImage],
    gt: &[CornerQuad],
    inits: &[usize],
    threads: usize,
) -> Result<Vec<Vec<crate::FrameOutput>>, CliError> {
    let chunk = inits.len().div_ceil(threads);
    thread::scope(|s| {
        let handles: Vec<_> = inits
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&i| spec.run(frames, i, &gt[i]))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(inits.len());
        for h in handles {
            out.extend(h.join().map_err(|_| CliError::Tracker("worker thread panicked".into()))??);
        }
        Ok(out)
    })
}

pub fn summarize(runs: &[SubsequenceRun], metric: MetricArg, fail_stop: bool) -> Result<EvalSummary, CliError> {
    let (metric, thresholds) = match metric {
        MetricArg::Al => (Metric::Alignment, default_al_thresholds()),
        MetricArg::Jac => (Metric::Jaccard, default_jac_thresholds()),
    };
    let mode = if fail_stop {
        FailureMode::FailStop
    } else {
        FailureMode::Independent
    };
    Ok(EvalSummary {
        init_frames: runs.iter().map(|r| r.init_frame).collect(),
        frames: runs.iter().map(|r| r.frames.len()).sum(),
        lost: runs.iter().flat_map(|r| &r.frames).filter(|f| f.is_lost()).count(),
        mean_e_al: mean_alignment_error(runs),
        success: success_curve(runs, &thresholds, metric, mode)?,
        robustness: robustness_curve(runs, &thresholds, metric)?,
    })
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub tracker: TrackerKind,
    #[arg(long, default_value = "4", value_parser = parse_dof)]
    pub dof: usize,
    /// Dataset to time; without it a 640×480 synthetic sequence is used.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub init_frame: usize,
    /// Length of the synthetic sequence.
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub tracker: TrackerKind,
    pub dof: usize,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub fps: f64,
    pub quads: Vec<Option<CornerQuad>>,
}

impl BenchReport {
    pub fn line(&self) -> String {
        format!(
            "tracker={} dof={} size={}x{} frames={} mean_ms={:.3} median_ms={:.3} fps={:.2}",
            self.tracker.name(),
            self.dof,
            self.width,
            self.height,
            self.frames,
            self.mean_ms,
            self.median_ms,
            self.fps
        )
    }
}

/// Times the tracker over frames already decoded into memory, on the
/// calling thread.
pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    let config = load_config(args.config.as_deref(), args.seed)?;
    let spec = RunSpec::new(args.tracker, args.dof, config, true)?;
    let (frames, gt) = match &args.dataset {
        Some(dir) => {
            let ds = load_dataset(dir)?;
            (ds.load_all_frames()?, ds.gt)
        }
        None => {
            if args.frames < 2 {
                return Err(CliError::Usage("--frames must be at least 2".into()));
            }
            let seq = render(&throughput_spec(args.frames, config.rklt.ransac.seed))?;
            (seq.frames, seq.gt)
        }
    };
    if args.init_frame + 1 >= frames.len() {
        return Err(CliError::Usage("nothing to track after the initial frame".into()));
    }
    let out = spec.run(&frames, args.init_frame, &gt[args.init_frame])?;
    let mut times: Vec<f64> = out.iter().map(|f| f.time_ms).collect();
    let mean_ms = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let median_ms = if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    };
    Ok(BenchReport {
        tracker: args.tracker,
        dof: args.dof,
        width: frames[0].width(),
        height: frames[0].height(),
        frames: n,
        mean_ms,
        median_ms,
        fps: 1000.0 / mean_ms,
        quads: out.iter().map(|f| f.quad).collect(),
    })
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// static, translation, rotation, scale, combined, occluded, lowtex or
    /// throughput.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace the flat background with band-limited noise.
    #[arg(long)]
    pub textured_background: bool,
    /// Sequence length for the throughput scenario.
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
}

/// Renders a named scenario into a dataset directory; returns the frame count.
pub fn cmd_synth(args: &SynthArgs) -> Result<usize, CliError> {
    let spec = if args.scenario == "throughput" {
        throughput_spec(args.frames, args.seed)
    } else {
        let sc = Scenario::from_name(&args.scenario)
            .ok_or_else(|| CliError::Usage(format!("unknown scenario '{}'", args.scenario)))?;
        if args.textured_background {
            sc.spec_textured_background(args.seed)
        } else {
            sc.spec(args.seed)
        }
    };
    let seq = render(&spec)?;
    export(&seq, &args.out)?;
    Ok(seq.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robustness_path_keeps_extension() {
        assert_eq!(robustness_path(Path::new("a/curves.csv")), PathBuf::from("a/curves_robustness.csv"));
        assert_eq!(robustness_path(Path::new("c")), PathBuf::from("c_robustness"));
    }

    #[test]
    fn quad_outline_stays_in_bounds() {
        let mut img = GrayImage::filled(20, 20, 0.5);
        draw_quad(&mut img, &CornerQuad::from_rect(-5.0, 2.0, 30.0, 10.0), 1.0);
        assert_eq!(img.get(10, 2), 1.0);
        assert_eq!(img.get(10, 7), 0.5);
    }
}
