//! Named test sequences at 320×240 with a ~100 px target on a plain
//! background.

use std::f64::consts::TAU;

use super::textures::{checker_noise, low_texture, smooth_noise};
use crate::imgproc::GrayImage;
use super::{box_blur, linear_trajectory, render, Occluder, SynthError, SynthSpec, SyntheticSequence};
use crate::geom::SimilarityParams;

pub const WIDTH: usize = 320;
pub const HEIGHT: usize = 240;
/// Initial frame plus 40 tracked frames.
pub const FRAMES: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Static,
    Translation,
    Rotation,
    Scale,
    Combined,
    Occluded,
    LowTextureNoisy,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Static,
        Scenario::Translation,
        Scenario::Rotation,
        Scenario::Scale,
        Scenario::Combined,
        Scenario::Occluded,
        Scenario::LowTextureNoisy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Static => "static",
            Scenario::Translation => "translation",
            Scenario::Rotation => "rotation",
            Scenario::Scale => "scale",
            Scenario::Combined => "combined",
            Scenario::Occluded => "occluded",
            Scenario::LowTextureNoisy => "lowtex",
        }
    }

    pub fn from_name(s: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn spec(self, seed: u64) -> SynthSpec {
        let centre = SimilarityParams::new(160.0, 120.0, 1.0, 0.0);
        let bg = GrayImage::filled(WIDTH, HEIGHT, 0.5);
        let textured = || box_blur(&checker_noise(100, 100, 10, seed.wrapping_add(7)), 2);
        match self {
            Scenario::Static => SynthSpec::new(textured(), bg, vec![centre; FRAMES]),
            Scenario::Translation => SynthSpec::new(
                textured(),
                bg,
                linear_trajectory(FRAMES, SimilarityParams::new(130.0, 105.0, 1.0, 0.0), SimilarityParams::new(190.0, 135.0, 1.0, 0.0)),
            ),
            Scenario::Rotation => SynthSpec::new(
                textured(),
                bg,
                linear_trajectory(FRAMES, centre, SimilarityParams { rotation: 40.0, ..centre }),
            ),
            Scenario::Scale => SynthSpec::new(
                box_blur(&checker_noise(80, 80, 8, seed.wrapping_add(7)), 2),
                bg,
                linear_trajectory(FRAMES, centre, SimilarityParams { scale: 1.5, ..centre }),
            ),
            Scenario::Combined => SynthSpec::new(textured(), bg, combined_trajectory()),
            Scenario::Occluded => {
                let mut spec = SynthSpec::new(textured(), bg, combined_trajectory());
                spec.occluders = occluders(&spec, 15..25, 0.3);
                spec
            }
            Scenario::LowTextureNoisy => {
                let traj = (0..FRAMES)
                    .map(|i| {
                        let t = i as f64 / (FRAMES - 1) as f64;
                        SimilarityParams::new(
                            160.0 + 20.0 * (TAU * t).sin(),
                            120.0 + 10.0 * (TAU * t).cos() - 10.0,
                            1.0 + 0.15 * (0.5 * TAU * t).sin(),
                            10.0 * (TAU * t).sin(),
                        )
                    })
                    .collect();
                let mut spec = SynthSpec::new(low_texture(100, 100, seed.wrapping_add(7)), bg, traj);
                spec.noise_sigma = 0.03;
                spec.seed = seed;
                spec
            }
        }
    }

    /// Same scene over a band-limited noise background.
    pub fn spec_textured_background(self, seed: u64) -> SynthSpec {
        SynthSpec {
            background: smooth_noise(WIDTH, HEIGHT, 16.0, seed.wrapping_add(101), 0.3, 0.7),
            ..self.spec(seed)
        }
    }

    pub fn render(self, seed: u64) -> Result<SyntheticSequence, SynthError> {
        render(&self.spec(seed))
    }
}

/// Rotation within ±15°, scale within [0.8, 1.3], and a circular drift.
fn combined_trajectory() -> Vec<SimilarityParams> {
    (0..FRAMES)
        .map(|i| {
            let t = i as f64 / (FRAMES - 1) as f64;
            SimilarityParams::new(
                160.0 + 25.0 * (TAU * t).sin(),
                120.0 + 15.0 * ((TAU * t).cos() - 1.0),
                1.05 + 0.25 * (TAU * t).sin(),
                15.0 * (0.5 * TAU * t).sin(),
            )
        })
        .collect()
}

/// One flat rectangle per frame covering `fraction` of the target area,
/// attached to the left side of the target's bounding box.
fn occluders(spec: &SynthSpec, frames: std::ops::Range<usize>, fraction: f64) -> Vec<Occluder> {
    frames
        .map(|i| {
            let q = spec.gt_quad(i);
            let xs = q.corners.map(|c| c.x);
            let ys = q.corners.map(|c| c.y);
            let x0 = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let y0 = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let y1 = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let h = y1 - y0;
            let w = fraction * q.area() / h;
            Occluder {
                frames: i..i + 1,
                rect: (x0, y0, w, h),
                intensity: 0.5,
            }
        })
        .collect()
}

/// 640×480 sequence with a 100×100 target drifting slowly, for timing runs.
pub fn throughput_spec(frames: usize, seed: u64) -> SynthSpec {
    let n = frames.max(1);
    let traj = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            SimilarityParams::new(
                320.0 + 60.0 * (TAU * t).sin(),
                240.0 + 40.0 * ((TAU * t).cos() - 1.0),
                1.0 + 0.15 * (TAU * t).sin(),
                10.0 * (TAU * t).sin(),
            )
        })
        .collect();
    SynthSpec::new(
        box_blur(&checker_noise(100, 100, 10, seed.wrapping_add(7)), 2),
        GrayImage::filled(640, 480, 0.5),
        traj,
    )
}
