//! Tracking metrics and benchmark curves.
//!
//! * Alignment error: RMS Euclidean distance between corresponding corners.
//! * Jaccard error: `1 − IoU` using true polygon overlap (convex clipping).
//! * Success curve: fraction of frames with error ≤ τ.
//! * Robustness curve: fraction of runs whose error never exceeds τ.
//!
//! Lost frames carry `e_al = +∞` and `e_jac = 1`; they fail at every threshold.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::{polygon_signed_area, CornerQuad, Point2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("threshold list is empty")]
    NoThresholds,
    #[error("no runs to evaluate")]
    NoRuns,
    #[error("tracker output has {outputs} frames but ground truth has {gt} (init frame {init})")]
    LengthMismatch {
        outputs: usize,
        gt: usize,
        init: usize,
    },
}

/// Root-mean-square corner distance.
pub fn alignment_error(t: &CornerQuad, g: &CornerQuad) -> f64 {
    let sum: f64 = t
        .corners
        .iter()
        .zip(&g.corners)
        .map(|(a, b)| {
            let d = *a - *b;
            d.x * d.x + d.y * d.y
        })
        .sum();
    (sum / 4.0).sqrt()
}

/// Counter-clockwise (in the y-up sense) copy of the polygon.
fn oriented(q: &CornerQuad) -> Vec<Point2> {
    let mut pts = q.corners.to_vec();
    if polygon_signed_area(&pts) < 0.0 {
        pts.reverse();
    }
    pts
}

/// Sutherland–Hodgman clip of `subject` against the convex `clip` polygon.
/// Both polygons must have positive signed area.
pub(crate) fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let edge = b - a;
        let side = |p: Point2| edge.x * (p.y - a.y) - edge.y * (p.x - a.x);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    out.push(intersect(prev, cur, sp, sc));
                }
                out.push(cur);
            } else if sp >= 0.0 {
                out.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    out
}

fn intersect(p: Point2, q: Point2, sp: f64, sq: f64) -> Point2 {
    let t = sp / (sp - sq);
    p + (q - p) * t
}

pub fn intersection_area(t: &CornerQuad, g: &CornerQuad) -> f64 {
    let (a, b) = (oriented(t), oriented(g));
    polygon_signed_area(&clip_convex(&a, &b)).max(0.0)
}

/// `1 − |A∩B| / |A∪B|` on the quads as polygons.
pub fn jaccard_error(t: &CornerQuad, g: &CornerQuad) -> f64 {
    let (at, ag) = (t.area(), g.area());
    if at <= 0.0 || ag <= 0.0 || !at.is_finite() || !ag.is_finite() {
        return 1.0;
    }
    let inter = intersection_area(t, g).min(at.min(ag));
    let union = at + ag - inter;
    (1.0 - inter / union).clamp(0.0, 1.0)
}

/// Jaccard error for axis-aligned rectangles via bounding-box arithmetic.
pub fn jaccard_error_axis_aligned(t: &CornerQuad, g: &CornerQuad) -> f64 {
    let bounds = |q: &CornerQuad| {
        let xs = q.corners.map(|p| p.x);
        let ys = q.corners.map(|p| p.y);
        let fold = |v: [f64; 4], f: fn(f64, f64) -> f64, init: f64| v.into_iter().fold(init, f);
        (
            fold(xs, f64::min, f64::INFINITY),
            fold(ys, f64::min, f64::INFINITY),
            fold(xs, f64::max, f64::NEG_INFINITY),
            fold(ys, f64::max, f64::NEG_INFINITY),
        )
    };
    let (ax0, ay0, ax1, ay1) = bounds(t);
    let (bx0, by0, bx1, by1) = bounds(g);
    let area_a = (ax1 - ax0) * (ay1 - ay0);
    let area_b = (bx1 - bx0) * (by1 - by0);
    if area_a <= 0.0 || area_b <= 0.0 {
        return 1.0;
    }
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    1.0 - inter / (area_a + area_b - inter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Alignment,
    Jaccard,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Alignment => "al",
            Metric::Jaccard => "jac",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameResult {
    pub frame_index: usize,
    /// `None` when the tracker reported the target lost.
    pub tracker_quad: Option<CornerQuad>,
    pub gt_quad: CornerQuad,
    pub e_al: f64,
    pub e_jac: f64,
}

impl FrameResult {
    pub fn new(frame_index: usize, tracker_quad: Option<CornerQuad>, gt_quad: CornerQuad) -> Self {
        let (e_al, e_jac) = match &tracker_quad {
            Some(t) => (alignment_error(t, &gt_quad), jaccard_error(t, &gt_quad)),
            None => (f64::INFINITY, 1.0),
        };
        Self {
            frame_index,
            tracker_quad,
            gt_quad,
            e_al,
            e_jac,
        }
    }

    pub fn is_lost(&self) -> bool {
        self.tracker_quad.is_none()
    }

    /// Within `tau` and not Lost; Lost frames fail at every threshold,
    /// including an infinite one.
    pub fn passes(&self, metric: Metric, tau: f64) -> bool {
        !self.is_lost() && self.error(metric) <= tau
    }

    pub fn error(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Alignment => self.e_al,
            Metric::Jaccard => self.e_jac,
        }
    }
}

/// One tracker run started from ground truth at `init_frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsequenceRun {
    pub sequence_id: String,
    pub init_frame: usize,
    pub frames: Vec<FrameResult>,
}

impl SubsequenceRun {
    /// Scores outputs for frames `init_frame+1 ..` against `gt`.
    ///
    /// `outputs[i]` is the tracker output for frame `init_frame + 1 + i`.
    pub fn evaluate(
        sequence_id: impl Into<String>,
        init_frame: usize,
        outputs: &[Option<CornerQuad>],
        gt: &[CornerQuad],
    ) -> Result<Self, EvalError> {
        let expected = gt.len().saturating_sub(init_frame + 1);
        if outputs.len() != expected {
            return Err(EvalError::LengthMismatch {
                outputs: outputs.len(),
                gt: gt.len(),
                init: init_frame,
            });
        }
        let frames = outputs
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let idx = init_frame + 1 + i;
                FrameResult::new(idx, *o, gt[idx])
            })
            .collect();
        Ok(Self {
            sequence_id: sequence_id.into(),
            init_frame,
            frames,
        })
    }

    pub fn mean_alignment_error(&self) -> Option<f64> {
        mean_alignment_error(std::slice::from_ref(self))
    }

    fn first_failure(&self, metric: Metric, tau: f64) -> Option<usize> {
        self.frames.iter().position(|f| !f.passes(metric, tau))
    }
}

/// Mean E_al over non-Lost frames of all runs.
pub fn mean_alignment_error(runs: &[SubsequenceRun]) -> Option<f64> {
    let (sum, n) = runs
        .iter()
        .flat_map(|r| &r.frames)
        .filter(|f| !f.is_lost())
        .fold((0.0, 0usize), |(s, n), f| (s + f.e_al, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Success,
    Robustness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailureMode {
    /// Every frame counts on its own.
    #[default]
    Independent,
    /// Frames after a run's first failure at τ count as failures at τ.
    FailStop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub kind: CurveKind,
    pub metric: Metric,
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    /// Trapezoidal area under the curve over the threshold range.
    pub fn auc(&self) -> f64 {
        self.thresholds
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
            .sum()
    }

    /// Normalised AUC (divided by the threshold span).
    pub fn mean_value(&self) -> f64 {
        match (self.thresholds.first(), self.thresholds.last()) {
            (Some(a), Some(b)) if b > a => self.auc() / (b - a),
            _ => self.values.first().copied().unwrap_or(0.0),
        }
    }

    /// `threshold,value` rows preceded by one `#` metadata line.
    pub fn to_csv(&self) -> String {
        let kind = match self.kind {
            CurveKind::Success => "success",
            CurveKind::Robustness => "robustness",
        };
        let definition = match (self.kind, self.metric) {
            (CurveKind::Success, Metric::Alignment) => "fraction of frames with e_al <= threshold (px)",
            (CurveKind::Success, Metric::Jaccard) => {
                "fraction of frames with e_jac <= threshold (overlap >= 1 - threshold)"
            }
            (CurveKind::Robustness, Metric::Alignment) => "fraction of runs with e_al <= threshold on every frame",
            (CurveKind::Robustness, Metric::Jaccard) => "fraction of runs with e_jac <= threshold on every frame",
        };
        let mut s = format!(
            "# curve={kind} metric={} auc={:.6} definition=\"{definition}\"\n",
            self.metric.name(),
            self.auc()
        );
        s.push_str("threshold,value\n");
        for (t, v) in self.thresholds.iter().zip(&self.values) {
            let _ = writeln!(s, "{t},{v}");
        }
        s
    }
}

/// Default E_al grid: 0, 0.5, …, 20 px.
pub fn default_al_thresholds() -> Vec<f64> {
    (0..=40).map(|i| i as f64 * 0.5).collect()
}

/// Default Jaccard grid: 0, 0.05, …, 1.
pub fn default_jac_thresholds() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.05).collect()
}

pub fn success_curve(
    runs: &[SubsequenceRun],
    thresholds: &[f64],
    metric: Metric,
    mode: FailureMode,
) -> Result<Curve, EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::NoThresholds);
    }
    if runs.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let total: usize = runs.iter().map(|r| r.frames.len()).sum();
    let values = thresholds
        .iter()
        .map(|&tau| {
            if total == 0 {
                return 0.0;
            }
            let ok: usize = runs
                .iter()
                .map(|r| {
                    let horizon = match mode {
                        FailureMode::Independent => r.frames.len(),
                        FailureMode::FailStop => r.first_failure(metric, tau).unwrap_or(r.frames.len()),
                    };
                    r.frames[..horizon]
                        .iter()
                        .filter(|f| f.passes(metric, tau))
                        .count()
                })
                .sum();
            ok as f64 / total as f64
        })
        .collect();
    Ok(Curve {
        kind: CurveKind::Success,
        metric,
        thresholds: thresholds.to_vec(),
        values,
    })
}

pub fn robustness_curve(
    runs: &[SubsequenceRun],
    thresholds: &[f64],
    metric: Metric,
) -> Result<Curve, EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::NoThresholds);
    }
    if runs.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let values = thresholds
        .iter()
        .map(|&tau| {
            let survivors = runs
                .iter()
                .filter(|r| r.first_failure(metric, tau).is_none())
                .count();
            survivors as f64 / runs.len() as f64
        })
        .collect();
    Ok(Curve {
        kind: CurveKind::Robustness,
        metric,
        thresholds: thresholds.to_vec(),
        values,
    })
}

/// Evenly spaced initialisation frames `floor(i·L/k)`, `i = 0..k`.
pub fn make_subsequences(len: usize, k: usize) -> Vec<usize> {
    if k == 0 || len <= k {
        return vec![0];
    }
    (0..k).map(|i| i * len / k).collect()
}

/// Frames scored across runs started at `inits` on a sequence of `len` frames.
pub fn effective_frames(len: usize, inits: &[usize]) -> usize {
    inits.iter().map(|&i| len.saturating_sub(i + 1)).sum()
}
