//! Command-line front end: dataset runs, evaluation, timing and synthetic
//! sequence export.

pub mod commands;
pub mod config;
pub mod record;


use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use quadtrack::dataset::DatasetError;
use quadtrack::eval::EvalError;
use quadtrack::rklt::{RkltError, RkltState};
use quadtrack::rsst::RsstState;
use quadtrack::synth::SynthError;
use quadtrack::{CornerQuad, DofModel, GrayImage};
use thiserror::Error;

pub use commands::{cmd_bench, cmd_eval, cmd_synth, cmd_track, BenchArgs, BenchReport, EvalArgs, EvalSummary, SynthArgs, TrackArgs};
pub use config::TrackerConfig;
pub use record::{FrameOutput, RunRecord};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}:{line}: {msg}")]
    Record { path: PathBuf, line: usize, msg: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("tracker: {0}")]
    Tracker(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrackerKind {
    Rsst,
    Rklt,
}

impl TrackerKind {
    pub fn name(self) -> &'static str {
        match self {
            TrackerKind::Rsst => "rsst",
            TrackerKind::Rklt => "rklt",
        }
    }
}

/// Accepts 2, 3, 4, 6 or 8.
pub fn parse_dof(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    DofModel::from_dof(n)
        .map(|_| n)
        .ok_or_else(|| format!("{n} is not one of 2, 3, 4, 6, 8"))
}

/// Everything needed to run one tracker over a sequence.
#[derive(Debug, Clone, Copy)]
pub struct RunSpec {
    pub tracker: TrackerKind,
    pub dof: DofModel,
    pub config: TrackerConfig,
    /// Record per-frame wall time; off writes zeros so output is reproducible
    /// byte for byte.
    pub timing: bool,
}

impl RunSpec {
    pub fn new(tracker: TrackerKind, dof: usize, config: TrackerConfig, timing: bool) -> Result<Self, CliError> {
        let dof = DofModel::from_dof(dof).ok_or_else(|| CliError::Usage(format!("unsupported dof {dof}")))?;
        if tracker == TrackerKind::Rsst && dof != DofModel::Similarity4 {
            return Err(CliError::Usage("rsst estimates a 4-DoF pose only; use --dof 4".into()));
        }
        Ok(Self {
            tracker,
            dof,
            config,
            timing,
        })
    }

    /// Tracks frames `init_frame + 1 ..` after initialising on `init_quad`.
    pub fn run(&self, frames: &[GrayImage], init_frame: usize, init_quad: &CornerQuad) -> Result<Vec<FrameOutput>, CliError> {
        let first = frames
            .get(init_frame)
            .ok_or_else(|| CliError::Usage(format!("init frame {init_frame} beyond {} frames", frames.len())))?;
        let rest = &frames[init_frame + 1..];
        let mut out = Vec::with_capacity(rest.len());
        let mut push = |k: usize, quad: Option<CornerQuad>, t0: Instant| {
            let time_ms = if self.timing {
                t0.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            out.push(FrameOutput {
                frame: init_frame + 1 + k,
                quad,
                time_ms,
            });
        };
        match self.tracker {
            TrackerKind::Rsst => {
                let mut st = RsstState::init(first, init_quad, self.config.rsst)
                    .map_err(|e| CliError::Tracker(e.to_string()))?;
                for (k, img) in rest.iter().enumerate() {
                    let t0 = Instant::now();
                    let q = st.track_frame(img).map_err(|e| CliError::Tracker(e.to_string()))?;
                    push(k, Some(q), t0);
                }
            }
            TrackerKind::Rklt => {
                let mut st = RkltState::init(first, init_quad, self.dof, self.config.rklt)
                    .map_err(|e| CliError::Tracker(e.to_string()))?;
                for (k, img) in rest.iter().enumerate() {
                    let t0 = Instant::now();
                    let q = match st.track_frame(img) {
                        Ok((q, _)) => Some(q),
                        Err(RkltError::TrackingLost(_)) => None,
                        Err(e) => return Err(CliError::Tracker(e.to_string())),
                    };
                    push(k, q, t0);
                }
            }
        }
        Ok(out)
    }
}

/// Loads a config file, or defaults when `path` is `None`; `seed` overrides
/// `ransac.seed`.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<TrackerConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            TrackerConfig::parse_str(&text)?
        }
        None => TrackerConfig::default(),
    };
    if let Some(s) = seed {
        cfg.rklt.ransac.seed = s;
    }
    Ok(cfg)
}
