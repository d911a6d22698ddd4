//! Per-run results CSV.
//!
//! ```text
//! # tracker=rklt dof=4 config=0123456789abcdef seed=0 dataset=seq init_frame=0
//! frame,x1,y1,x2,y2,x3,y3,x4,y4,time_ms
//! 1,10,20,110,20,110,120,10,120,3.125
//! 2,LOST,,,,,,,,2.5
//! ```
//!
//! Coordinates use the shortest text that parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use quadtrack::CornerQuad;

use crate::CliError;

const HEADER: &str = "frame,x1,y1,x2,y2,x3,y3,x4,y4,time_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub frame: usize,
    pub quad: Option<CornerQuad>,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub tracker: String,
    pub dof: usize,
    pub config_hash: String,
    pub seed: u64,
    pub dataset: String,
    pub init_frame: usize,
    /// Frames `init_frame + 1 ..` in order.
    pub frames: Vec<FrameOutput>,
}

impl RunRecord {
    pub fn quads(&self) -> Vec<Option<CornerQuad>> {
        self.frames.iter().map(|f| f.quad).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# tracker={} dof={} config={} seed={} dataset={} init_frame={}\n{HEADER}\n",
            self.tracker, self.dof, self.config_hash, self.seed, self.dataset, self.init_frame
        );
        for f in &self.frames {
            match &f.quad {
                Some(q) => {
                    let _ = write!(s, "{}", f.frame);
                    for v in q.to_flat() {
                        let _ = write!(s, ",{v}");
                    }
                    let _ = writeln!(s, ",{}", f.time_ms);
                }
                None => {
                    let _ = writeln!(s, "{},LOST,,,,,,,,{}", f.frame, f.time_ms);
                }
            }
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let err = |line: usize, msg: String| CliError::Record {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let (_, meta) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let meta = meta
            .strip_prefix('#')
            .ok_or_else(|| err(1, "missing '#' metadata line".into()))?;
        let mut rec = RunRecord {
            tracker: String::new(),
            dof: 0,
            config_hash: String::new(),
            seed: 0,
            dataset: String::new(),
            init_frame: 0,
            frames: Vec::new(),
        };
        let mut seen_init = false;
        for tok in meta.split_whitespace() {
            let Some((k, v)) = tok.split_once('=') else { continue };
            let num = |v: &str| v.parse::<u64>().map_err(|_| err(1, format!("bad {k}='{v}'")));
            match k {
                "tracker" => rec.tracker = v.to_string(),
                "dof" => rec.dof = num(v)? as usize,
                "config" => rec.config_hash = v.to_string(),
                "seed" => rec.seed = num(v)?,
                "dataset" => rec.dataset = v.to_string(),
                "init_frame" => {
                    rec.init_frame = num(v)? as usize;
                    seen_init = true;
                }
                _ => {}
            }
        }
        if !seen_init {
            return Err(err(1, "metadata lacks init_frame".into()));
        }
        match lines.next() {
            Some((_, h)) if h.trim() == HEADER => {}
            _ => return Err(err(2, format!("expected header '{HEADER}'"))),
        }
        for (i, raw) in lines {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(err(i + 1, format!("expected 10 fields, found {}", fields.len())));
            }
            let frame = fields[0]
                .parse::<usize>()
                .map_err(|_| err(i + 1, format!("bad frame index '{}'", fields[0])))?;
            let time_ms = fields[9]
                .parse::<f64>()
                .map_err(|_| err(i + 1, format!("bad time '{}'", fields[9])))?;
            let quad = if fields[1] == "LOST" {
                None
            } else {
                let mut flat = [0.0; 8];
                for (dst, src) in flat.iter_mut().zip(&fields[1..9]) {
                    *dst = src
                        .parse::<f64>()
                        .map_err(|_| err(i + 1, format!("bad coordinate '{src}'")))?;
                }
                Some(CornerQuad::from_flat(&flat))
            };
            rec.frames.push(FrameOutput { frame, quad, time_ms });
        }
        for (k, f) in rec.frames.iter().enumerate() {
            if f.frame != rec.init_frame + 1 + k {
                return Err(err(k + 3, format!("frame {} out of sequence", f.frame)));
            }
        }
        Ok(rec)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_csv()).map_err(|e| CliError::io(path, e))
    }
}
