//! On-disk sequence layout.
//!
//! A dataset directory holds numbered frames `frameNNNNN.{png,jpg}` (at least
//! five digits, sorted numerically) and `gt.txt` with one line per frame:
//! eight whitespace-separated reals `x1 y1 x2 y2 x3 y3 x4 y4` in corner order
//! top-left, top-right, bottom-right, bottom-left. Lines starting with `#`
//! and blank lines are ignored.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use thiserror::Error;

use crate::geom::CornerQuad;
use crate::imgproc::GrayImage;

pub const GT_FILE: &str = "gt.txt";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}: ground-truth file not found")]
    MissingGt(PathBuf),
    #[error("{0}: no frames matching frameNNNNN.png/jpg")]
    NoFrames(PathBuf),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{frames} frames but {gt} ground-truth lines")]
    CountMismatch { frames: usize, gt: usize },
    #[error("{path}: cannot decode image: {msg}")]
    Decode { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub dir: PathBuf,
    pub frames: Vec<PathBuf>,
    pub gt: Vec<CornerQuad>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn load_frame(&self, index: usize) -> Result<GrayImage, DatasetError> {
        load_frame(&self.frames[index])
    }

    pub fn load_all_frames(&self) -> Result<Vec<GrayImage>, DatasetError> {
        self.frames.iter().map(|p| load_frame(p)).collect()
    }
}

fn frame_number(name: &str) -> Option<u64> {
    let stem = name.strip_prefix("frame")?;
    let (digits, ext) = stem.split_once('.')?;
    let ext = ext.to_ascii_lowercase();
    if digits.len() < 5 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !matches!(ext.as_str(), "png" | "jpg" | "jpeg") {
        return None;
    }
    digits.parse().ok()
}

pub fn parse_gt(text: &str, path: &Path) -> Result<Vec<CornerQuad>, DatasetError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| DatasetError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| parse_err(format!("'{t}': {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let flat: [f64; 8] = vals
            .as_slice()
            .try_into()
            .map_err(|_| parse_err(format!("expected 8 numbers, found {}", vals.len())))?;
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(parse_err("non-finite coordinate".into()));
        }
        out.push(CornerQuad::from_flat(&flat));
    }
    Ok(out)
}

pub fn format_gt(gt: &[CornerQuad]) -> String {
    let mut s = String::from("# x1 y1 x2 y2 x3 y3 x4 y4 (top-left, top-right, bottom-right, bottom-left)\n");
    for q in gt {
        let f = q.to_flat();
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {}",
            f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7]
        );
    }
    s
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let dir = dir.as_ref();
    let mut numbered = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name();
        if let Some(n) = name.to_str().and_then(frame_number) {
            numbered.push((n, entry.path()));
        }
    }
    if numbered.is_empty() {
        return Err(DatasetError::NoFrames(dir.to_path_buf()));
    }
    numbered.sort();
    let gt_path = dir.join(GT_FILE);
    if !gt_path.is_file() {
        return Err(DatasetError::MissingGt(gt_path));
    }
    let text = fs::read_to_string(&gt_path).map_err(io_err(&gt_path))?;
    let gt = parse_gt(&text, &gt_path)?;
    if gt.len() != numbered.len() {
        return Err(DatasetError::CountMismatch {
            frames: numbered.len(),
            gt: gt.len(),
        });
    }
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(Dataset {
        name,
        dir: dir.to_path_buf(),
        frames: numbered.into_iter().map(|(_, p)| p).collect(),
        gt,
    })
}

/// Decodes an image to [0, 1] grey levels; colour uses ITU-R BT.601 luma.
pub fn load_frame(path: &Path) -> Result<GrayImage, DatasetError> {
    let img = image::open(path).map_err(|e| DatasetError::Decode {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    Ok(to_gray(&img))
}

pub fn to_gray(img: &DynamicImage) -> GrayImage {
    match img {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            GrayImage::from_fn(w as usize, h as usize, |x, y| {
                g.get_pixel(x as u32, y as u32)[0] as f64 / 255.0
            })
        }
        other => {
            let rgb = other.to_rgb32f();
            let (w, h) = rgb.dimensions();
            GrayImage::from_fn(w as usize, h as usize, |x, y| {
                let p = rgb.get_pixel(x as u32, y as u32);
                0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
            })
        }
    }
}

pub fn to_luma8(img: &GrayImage) -> ImageBuffer<Luma<u8>, Vec<u8>> {
    let buf = img
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    ImageBuffer::from_raw(img.width() as u32, img.height() as u32, buf).expect("buffer size")
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame{:05}.png", index + 1)
}

/// Writes frames as 8-bit PNGs plus `gt.txt` (full-precision text).
pub fn write_dataset(
    dir: impl AsRef<Path>,
    frames: &[GrayImage],
    gt: &[CornerQuad],
) -> Result<Vec<PathBuf>, DatasetError> {
    let dir = dir.as_ref();
    if frames.len() != gt.len() {
        return Err(DatasetError::CountMismatch {
            frames: frames.len(),
            gt: gt.len(),
        });
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut paths = Vec::with_capacity(frames.len() + 1);
    for (i, f) in frames.iter().enumerate() {
        let path = dir.join(frame_file_name(i));
        to_luma8(f).save(&path).map_err(|e| DatasetError::Io {
            path: path.clone(),
            source: io::Error::other(e.to_string()),
        })?;
        paths.push(path);
    }
    let gt_path = dir.join(GT_FILE);
    fs::write(&gt_path, format_gt(gt)).map_err(io_err(&gt_path))?;
    paths.push(gt_path);
    Ok(paths)
}
