//! Synthetic sequences with analytic ground truth.
//!
//! A textured planar target is composited onto a background under a
//! per-frame similarity. Degradations are applied in a fixed order:
//! warp → illumination (gain, bias) → box blur → Gaussian noise → occluders.
//! Ground-truth quads come from the trajectory, never from pixels.

use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::dataset::{write_dataset, DatasetError};
use crate::geom::{apply_warp, params_to_matrix, CornerQuad, SimilarityParams};
use crate::imgproc::GrayImage;

pub mod scenarios;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("frame {0}: target lies entirely outside the image")]
    TargetOutside(usize),
    #[error("frame {0}: invalid pose (scale must be finite and > 0)")]
    InvalidPose(usize),
    #[error("illumination list has {got} entries for {frames} frames")]
    IllumLength { got: usize, frames: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Filled rectangle drawn over frames in `frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct Occluder {
    pub frames: Range<usize>,
    /// `(x, y, w, h)` in image pixels.
    pub rect: (f64, f64, f64, f64),
    pub intensity: f64,
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub texture: GrayImage,
    pub background: GrayImage,
    /// Pose of the texture centre for every frame.
    pub trajectory: Vec<SimilarityParams>,
    pub noise_sigma: f64,
    pub blur_radius: usize,
    pub occluders: Vec<Occluder>,
    /// Per-frame `(gain, bias)`; empty means identity on every frame.
    pub illum: Vec<(f64, f64)>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(texture: GrayImage, background: GrayImage, trajectory: Vec<SimilarityParams>) -> Self {
        Self {
            texture,
            background,
            trajectory,
            noise_sigma: 0.0,
            blur_radius: 0,
            occluders: Vec::new(),
            illum: Vec::new(),
            seed: 0,
        }
    }

    /// Target outline in texture-centred coordinates.
    pub fn base_quad(&self) -> CornerQuad {
        CornerQuad::centered_rect(self.texture.width() as f64, self.texture.height() as f64)
    }

    pub fn gt_quad(&self, frame: usize) -> CornerQuad {
        apply_warp(&params_to_matrix(&self.trajectory[frame]), &self.base_quad())
            .expect("similarity warps are affine")
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub frames: Vec<GrayImage>,
    pub gt: Vec<CornerQuad>,
}

impl SyntheticSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn frame_seed(seed: u64, frame: usize) -> u64 {
    seed ^ (frame as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn render(spec: &SynthSpec) -> Result<SyntheticSequence, SynthError> {
    let n = spec.trajectory.len();
    if n == 0 {
        return Err(SynthError::EmptyTrajectory);
    }
    if !spec.illum.is_empty() && spec.illum.len() != n {
        return Err(SynthError::IllumLength {
            got: spec.illum.len(),
            frames: n,
        });
    }
    let mut frames = Vec::with_capacity(n);
    let mut gt = Vec::with_capacity(n);
    for i in 0..n {
        let p = spec.trajectory[i];
        if !(p.scale > 0.0 && p.scale.is_finite()) {
            return Err(SynthError::InvalidPose(i));
        }
        let quad = spec.gt_quad(i);
        frames.push(render_frame(spec, i, &quad)?);
        gt.push(quad);
    }
    Ok(SyntheticSequence { frames, gt })
}

fn render_frame(spec: &SynthSpec, index: usize, quad: &CornerQuad) -> Result<GrayImage, SynthError> {
    let bg = &spec.background;
    let (w, h) = bg.dimensions();
    let mut img = bg.clone();

    let xs = quad.corners.map(|c| c.x);
    let ys = quad.corners.map(|c| c.y);
    let x0 = xs.iter().copied().fold(f64::INFINITY, f64::min).floor().max(0.0);
    let x1 = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil().min(w as f64 - 1.0);
    let y0 = ys.iter().copied().fold(f64::INFINITY, f64::min).floor().max(0.0);
    let y1 = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil().min(h as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return Err(SynthError::TargetOutside(index));
    }

    let inv = params_to_matrix(&spec.trajectory[index])
        .invert()
        .map_err(|_| SynthError::InvalidPose(index))?;
    let tex = &spec.texture;
    let (hw, hh) = (0.5 * tex.width() as f64, 0.5 * tex.height() as f64);
    let (cx, cy) = (0.5 * (tex.width() as f64 - 1.0), 0.5 * (tex.height() as f64 - 1.0));
    for y in y0 as usize..=y1 as usize {
        for x in x0 as usize..=x1 as usize {
            let (u, v) = inv.apply_affine(x as f64, y as f64);
            if u.abs() <= hw && v.abs() <= hh {
                img.set(x, y, tex.sample(u + cx, v + cy));
            }
        }
    }

    if let Some(&(gain, bias)) = spec.illum.get(index) {
        for v in img.data_mut() {
            *v = gain * *v + bias;
        }
    }
    if spec.blur_radius > 0 {
        img = box_blur(&img, spec.blur_radius);
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(spec.seed, index));
        let normal = Normal::new(0.0, spec.noise_sigma).expect("finite sigma");
        for v in img.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    for v in img.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    for occ in spec.occluders.iter().filter(|o| o.frames.contains(&index)) {
        let (ox, oy, ow, oh) = occ.rect;
        let xa = ox.max(0.0).ceil() as usize;
        let ya = oy.max(0.0).ceil() as usize;
        let xb = ((ox + ow).min(w as f64)).max(0.0) as usize;
        let yb = ((oy + oh).min(h as f64)).max(0.0) as usize;
        for y in ya..yb {
            for x in xa..xb {
                img.set(x, y, occ.intensity);
            }
        }
    }
    Ok(img)
}

/// Separable mean filter over a `(2r+1)²` window with replicated borders.
pub fn box_blur(img: &GrayImage, radius: usize) -> GrayImage {
    let (w, h) = img.dimensions();
    let r = radius as isize;
    let k = 1.0 / (2 * radius + 1) as f64;
    let horiz = GrayImage::from_fn(w, h, |x, y| {
        (-r..=r).map(|d| img.get_clamped(x as isize + d, y as isize)).sum::<f64>() * k
    });
    GrayImage::from_fn(w, h, |x, y| {
        (-r..=r).map(|d| horiz.get_clamped(x as isize, y as isize + d)).sum::<f64>() * k
    })
}

/// Per-frame bounds on a random walk's steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCaps {
    /// Euclidean translation step, pixels.
    pub translation: f64,
    /// Additive scale step.
    pub scale: f64,
    /// Rotation step, degrees.
    pub rotation: f64,
}

pub const SCALE_LIMITS: (f64, f64) = (0.5, 2.0);

/// Bounded random walk from `start`; scale is clamped to [0.5, 2].
pub fn random_trajectory(n: usize, seed: u64, start: SimilarityParams, caps: StepCaps) -> Vec<SimilarityParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let mut p = start;
    out.push(p);
    let sym = |rng: &mut ChaCha8Rng, cap: f64| {
        if cap > 0.0 {
            rng.random_range(-cap..=cap)
        } else {
            0.0
        }
    };
    for _ in 1..n {
        let r = if caps.translation > 0.0 {
            caps.translation * rng.random::<f64>().sqrt()
        } else {
            0.0
        };
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        p.tx += r * phi.cos();
        p.ty += r * phi.sin();
        p.scale = (p.scale + sym(&mut rng, caps.scale)).clamp(SCALE_LIMITS.0, SCALE_LIMITS.1);
        p.rotation += sym(&mut rng, caps.rotation);
        out.push(p);
    }
    out
}

/// `n` poses interpolated from `start` to `end` (scale geometrically).
pub fn linear_trajectory(n: usize, start: SimilarityParams, end: SimilarityParams) -> Vec<SimilarityParams> {
    if n <= 1 {
        return vec![start; n];
    }
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            SimilarityParams::new(
                start.tx + t * (end.tx - start.tx),
                start.ty + t * (end.ty - start.ty),
                start.scale * (end.scale / start.scale).powf(t),
                start.rotation + t * (end.rotation - start.rotation),
            )
        })
        .collect()
}

pub fn export(seq: &SyntheticSequence, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, SynthError> {
    Ok(write_dataset(dir, &seq.frames, &seq.gt)?)
}

/// Procedural textures so tests need no image assets.
pub mod textures {
    use super::*;

    /// Sum of random plane waves with wavelengths in `[min_wavelength, 4·min_wavelength]`,
    /// rescaled to `[lo, hi]`.
    pub fn smooth_noise(w: usize, h: usize, min_wavelength: f64, seed: u64, lo: f64, hi: f64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves: Vec<(f64, f64, f64, f64)> = (0..24)
            .map(|_| {
                let lambda = min_wavelength * rng.random_range(1.0..4.0);
                let theta = rng.random_range(0.0..std::f64::consts::PI);
                let k = std::f64::consts::TAU / lambda;
                let amp = rng.random_range(0.5..1.0);
                (k * theta.cos(), k * theta.sin(), rng.random_range(0.0..std::f64::consts::TAU), amp)
            })
            .collect();
        let raw = GrayImage::from_fn(w, h, |x, y| {
            waves
                .iter()
                .map(|&(kx, ky, ph, a)| a * (kx * x as f64 + ky * y as f64 + ph).sin())
                .sum()
        });
        rescale(&raw, lo, hi)
    }

    /// Checkerboard of `cell`-pixel squares blended with smooth noise.
    pub fn checker_noise(w: usize, h: usize, cell: usize, seed: u64) -> GrayImage {
        let noise = smooth_noise(w, h, 2.0 * cell as f64, seed, 0.0, 1.0);
        let cell = cell.max(1);
        GrayImage::from_fn(w, h, |x, y| {
            let c = if ((x / cell) + (y / cell)) % 2 == 0 { 0.25 } else { 0.75 };
            0.55 * c + 0.45 * noise.get(x, y)
        })
    }

    /// Faint, slowly varying pattern for low-texture scenarios.
    pub fn low_texture(w: usize, h: usize, seed: u64) -> GrayImage {
        smooth_noise(w, h, 0.5 * w.min(h) as f64, seed, 0.42, 0.58)
    }

    fn rescale(img: &GrayImage, lo: f64, hi: f64) -> GrayImage {
        let (mn, mx) = img
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = (mx - mn).max(1e-12);
        img.map(|v| lo + (hi - lo) * (v - mn) / span)
    }

    /// Generic pose helper: the texture centre placed at `(x, y)`.
    pub fn at(x: f64, y: f64) -> SimilarityParams {
        SimilarityParams::new(x, y, 1.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::textures::*;
    use super::*;

    fn spec(n: usize) -> SynthSpec {
        let traj = vec![SimilarityParams::new(40.0, 30.0, 1.0, 0.0); n];
        SynthSpec::new(checker_noise(24, 16, 4, 1), smooth_noise(80, 60, 10.0, 2, 0.0, 1.0), traj)
    }

    #[test]
    fn static_trajectory_repeats_frames() {
        let seq = render(&spec(4)).unwrap();
        assert!(seq.frames.iter().all(|f| *f == seq.frames[0]));
        assert_eq!(seq.gt[0], CornerQuad::from_rect(28.0, 22.0, 24.0, 16.0));
    }

    #[test]
    fn gt_matches_warped_base_quad() {
        let mut s = spec(3);
        s.trajectory[1] = SimilarityParams::new(35.0, 28.0, 1.3, 17.0);
        let seq = render(&s).unwrap();
        let expect = apply_warp(&params_to_matrix(&s.trajectory[1]), &s.base_quad()).unwrap();
        assert_eq!(seq.gt[1], expect);
    }

    #[test]
    fn noise_is_seeded() {
        let mut s = spec(2);
        s.noise_sigma = 0.05;
        s.seed = 7;
        let a = render(&s).unwrap();
        let b = render(&s).unwrap();
        assert_eq!(a.frames, b.frames);
        s.seed = 8;
        assert_ne!(render(&s).unwrap().frames, a.frames);
    }

    #[test]
    fn outside_target_is_an_error() {
        let mut s = spec(1);
        s.trajectory[0].tx = 500.0;
        assert!(matches!(render(&s), Err(SynthError::TargetOutside(0))));
    }

    #[test]
    fn occluder_and_illumination() {
        let mut s = spec(2);
        s.illum = vec![(1.0, 0.0), (0.5, 0.1)];
        s.occluders.push(Occluder {
            frames: 1..2,
            rect: (30.0, 25.0, 5.0, 5.0),
            intensity: 0.0,
        });
        let seq = render(&s).unwrap();
        assert_eq!(seq.frames[1].get(32, 27), 0.0);
        let a = seq.frames[0].get(10, 10);
        assert!((seq.frames[1].get(10, 10) - (0.5 * a + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn random_walk_caps() {
        let caps = StepCaps {
            translation: 2.0,
            scale: 0.01,
            rotation: 1.5,
        };
        let start = SimilarityParams::new(10.0, 10.0, 1.0, 0.0);
        assert_eq!(random_trajectory(1, 3, start, caps), vec![start]);
        let zero = StepCaps {
            translation: 0.0,
            scale: 0.0,
            rotation: 0.0,
        };
        assert!(random_trajectory(20, 3, start, zero).iter().all(|p| *p == start));
        assert_eq!(random_trajectory(50, 9, start, caps), random_trajectory(50, 9, start, caps));
    }
}
