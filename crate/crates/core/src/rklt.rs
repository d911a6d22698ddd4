//! Two-layer planar tracker: grid KLT with RANSAC similarity voting, then
//! inverse-compositional NCC refinement against the first-frame template.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{
    apply_warp, fit_similarity, params_to_matrix, CornerQuad, DofModel, GeomError, Point2, SimilarityParams,
    WarpMatrix,
};
use crate::imgproc::GrayImage;
use crate::lk::{ic_refine, klt_track_pyramids, IcConfig, IcTemplate, KltConfig, LkError, Pyramid};

#[derive(Debug, Clone, PartialEq)]
pub enum LostReason {
    TooFewPoints(usize),
    LowConsensus(usize),
    LowNcc(f64),
    NoTexture,
}

impl std::fmt::Display for LostReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LostReason::TooFewPoints(n) => write!(f, "only {n} usable correspondences"),
            LostReason::LowConsensus(n) => write!(f, "best consensus has {n} inliers"),
            LostReason::LowNcc(v) => write!(f, "NCC {v:.3} below threshold"),
            LostReason::NoTexture => write!(f, "template has no texture"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RkltError {
    #[error("invalid initial region")]
    InvalidRegion,
    #[error("tracking lost: {0}")]
    TrackingLost(LostReason),
    #[error(transparent)]
    Lk(#[from] LkError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    /// Inlier reprojection threshold, pixels.
    pub thresh: f64,
    pub confidence: f64,
    pub max_iters: usize,
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            thresh: 2.0,
            confidence: 0.99,
            max_iters: 500,
            min_inliers: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkltConfig {
    /// Grid points per side.
    pub grid: usize,
    pub ransac: RansacConfig,
    /// Refined NCC below this declares the target lost.
    pub min_ncc: f64,
    pub klt: KltConfig,
    pub ic: IcConfig,
}

impl Default for RkltConfig {
    fn default() -> Self {
        Self {
            grid: 10,
            ransac: RansacConfig::default(),
            min_ncc: 0.2,
            klt: KltConfig::default(),
            ic: IcConfig::default(),
        }
    }
}

fn lex(a: &(Point2, Point2), b: &(Point2, Point2)) -> std::cmp::Ordering {
    a.0.x
        .total_cmp(&b.0.x)
        .then(a.0.y.total_cmp(&b.0.y))
        .then(a.1.x.total_cmp(&b.1.x))
        .then(a.1.y.total_cmp(&b.1.y))
}

fn inlier_mask(m: &WarpMatrix, pairs: &[(Point2, Point2)], thresh: f64) -> Vec<bool> {
    pairs
        .iter()
        .map(|(s, d)| {
            let (x, y) = m.apply_affine(s.x, s.y);
            (x - d.x).hypot(y - d.y) < thresh
        })
        .collect()
}

/// Robust similarity from `(src, dst)` pairs.
///
/// Pairs are put in a canonical order before sampling, so the result does not
/// depend on input order. The returned mask is in input order.
pub fn ransac_similarity(
    pairs: &[(Point2, Point2)],
    cfg: &RansacConfig,
) -> Result<(SimilarityParams, Vec<bool>), RkltError> {
    let n = pairs.len();
    if n < 2 {
        return Err(RkltError::TrackingLost(LostReason::TooFewPoints(n)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex(&pairs[a], &pairs[b]));
    let sorted: Vec<(Point2, Point2)> = order.iter().map(|&i| pairs[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut best: Option<(usize, Vec<bool>)> = None;
    let mut needed = cfg.max_iters;
    let mut iter = 0;
    while iter < needed.min(cfg.max_iters) {
        iter += 1;
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let (pa, pb) = (sorted[a], sorted[b]);
        if pa.0.dist(pb.0) < 1.0 || pa.1.dist(pb.1) < 1.0 {
            continue;
        }
        let Ok(p) = fit_similarity(&[pa.0, pb.0], &[pa.1, pb.1]) else { continue };
        let mask = inlier_mask(&params_to_matrix(&p), &sorted, cfg.thresh);
        let count = mask.iter().filter(|&&m| m).count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            let w = count as f64 / n as f64;
            needed = if w >= 1.0 {
                iter
            } else {
                let denom = (1.0 - w * w).ln();
                ((1.0 - cfg.confidence).ln() / denom).ceil().max(1.0) as usize
            };
            best = Some((count, mask));
        }
    }
    let min = cfg.min_inliers.max(2);
    let Some((count, mask)) = best else {
        return Err(RkltError::TrackingLost(LostReason::LowConsensus(0)));
    };
    if count < min {
        return Err(RkltError::TrackingLost(LostReason::LowConsensus(count)));
    }
    let (src, dst): (Vec<Point2>, Vec<Point2>) = sorted.iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| *p).unzip();
    let params = fit_similarity(&src, &dst)?;
    let final_sorted = inlier_mask(&params_to_matrix(&params), &sorted, cfg.thresh);
    let count = final_sorted.iter().filter(|&&m| m).count();
    if count < min {
        return Err(RkltError::TrackingLost(LostReason::LowConsensus(count)));
    }
    let mut out = vec![false; n];
    for (k, &i) in order.iter().enumerate() {
        out[i] = final_sorted[k];
    }
    Ok((params, out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkltDiagnostics {
    pub tracked_points: usize,
    pub inliers: usize,
    /// NCC of the layer-1 warp over the inlier mask.
    pub layer1_ncc: f64,
    pub ncc: f64,
    pub ic_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct RkltState {
    template: Option<IcTemplate>,
    ref_grid: Vec<Point2>,
    region: CornerQuad,
    anchor: WarpMatrix,
    anchor_inv: WarpMatrix,
    warp: WarpMatrix,
    dof: DofModel,
    cfg: RkltConfig,
    prev: Pyramid,
}

impl RkltState {
    pub fn init(img: &GrayImage, region: &CornerQuad, dof: DofModel, cfg: RkltConfig) -> Result<Self, RkltError> {
        if !region.is_valid() || cfg.grid < 3 || cfg.ransac.thresh <= 0.0 {
            return Err(RkltError::InvalidRegion);
        }
        let c = region.centroid();
        let anchor = WarpMatrix::translation(c.x, c.y).compose(&SimilarityParams::new(0.0, 0.0, 1.0, region.angle()).to_matrix());
        let anchor_inv = anchor.invert()?;
        let local = apply_warp(&anchor_inv, region)?;
        let lo = local.corners.iter().fold(Point2::new(f64::MAX, f64::MAX), |a, p| Point2::new(a.x.min(p.x), a.y.min(p.y)));
        let hi = local.corners.iter().fold(Point2::new(f64::MIN, f64::MIN), |a, p| Point2::new(a.x.max(p.x), a.y.max(p.y)));
        let template = match IcTemplate::from_image(img, anchor, lo, hi, dof, cfg.ic.template_max_side) {
            Ok(t) => Some(t),
            Err(LkError::DegenerateTemplate) => None,
            Err(e) => return Err(e.into()),
        };
        let g = cfg.grid;
        let q = &local.corners;
        let mut ref_grid = Vec::with_capacity(g * g);
        for j in 0..g {
            let b = j as f64 / (g - 1) as f64;
            for i in 0..g {
                let a = i as f64 / (g - 1) as f64;
                let top = q[0] * (1.0 - a) + q[1] * a;
                let bot = q[3] * (1.0 - a) + q[2] * a;
                ref_grid.push(top * (1.0 - b) + bot * b);
            }
        }
        Ok(Self {
            template,
            ref_grid,
            region: local,
            anchor,
            anchor_inv,
            warp: WarpMatrix::IDENTITY,
            dof,
            cfg,
            prev: Pyramid::new(img, cfg.klt.levels),
        })
    }

    pub fn dof(&self) -> DofModel {
        self.dof
    }

    /// Reference grid in template coordinates.
    pub fn ref_grid(&self) -> &[Point2] {
        &self.ref_grid
    }

    /// Warp in the DoF group, relative to the initial pose.
    pub fn warp(&self) -> &WarpMatrix {
        &self.warp
    }

    /// Template-to-image warp.
    pub fn full_warp(&self) -> WarpMatrix {
        self.anchor.compose(&self.warp)
    }

    pub fn quad(&self) -> Result<CornerQuad, RkltError> {
        Ok(apply_warp(&self.full_warp(), &self.region)?)
    }

    pub fn template(&self) -> Option<&IcTemplate> {
        self.template.as_ref()
    }

    fn support_mask(&self, tmpl: &IcTemplate, inliers: &[Point2]) -> Vec<bool> {
        let half = self.cfg.ransac.thresh + 0.5;
        let (gw, gh) = tmpl.grid_size();
        let coords = tmpl.coords();
        let sx = if gw > 1 { coords[1].x - coords[0].x } else { 1.0 };
        let sy = if gh > 1 { coords[gw].y - coords[0].y } else { 1.0 };
        let (hx, hy) = (half.max(0.5 * sx), half.max(0.5 * sy));
        coords
            .iter()
            .map(|u| inliers.iter().any(|p| (u.x - p.x).abs() <= hx && (u.y - p.y).abs() <= hy))
            .collect()
    }

    /// Advances to `img`. On `TrackingLost` the pose is kept and the frame
    /// still becomes the reference for the next KLT step.
    pub fn track_frame(&mut self, img: &GrayImage) -> Result<(CornerQuad, RkltDiagnostics), RkltError> {
        let next = Pyramid::new(img, self.cfg.klt.levels);
        let prev = std::mem::replace(&mut self.prev, next);
        let full = self.full_warp();
        let prev_pts = self
            .ref_grid
            .iter()
            .map(|&u| full.apply(u))
            .collect::<Result<Vec<_>, _>>()?;
        let tracks = klt_track_pyramids(&prev, &self.prev, &prev_pts, &self.cfg.klt);

        // Up to 4 DoF the similarity is fitted reference-to-current; richer
        // models fit the frame-to-frame motion and compose it, so the
        // previous non-similarity part is kept.
        let direct = self.dof <= DofModel::Similarity4;
        let mut idx = Vec::new();
        let mut pairs = Vec::new();
        for (i, t) in tracks.iter().enumerate() {
            if t.is_tracked() {
                idx.push(i);
                let src = if direct { self.ref_grid[i] } else { t.prev };
                pairs.push((src, t.curr));
            }
        }
        let tracked_points = pairs.len();
        let (sim, mask) = ransac_similarity(&pairs, &self.cfg.ransac)?;
        let s = params_to_matrix(&sim);
        let cand = if direct {
            self.anchor_inv.compose(&s)
        } else {
            self.anchor_inv.compose(&s).compose(&full)
        };
        let cand = self.dof.project(&cand);

        let Some(tmpl) = &self.template else {
            return Err(RkltError::TrackingLost(LostReason::NoTexture));
        };
        let inlier_pts: Vec<Point2> = idx.iter().zip(&mask).filter(|(_, &m)| m).map(|(&i, _)| self.ref_grid[i]).collect();
        let masked = tmpl.with_mask(self.support_mask(tmpl, &inlier_pts))?;
        let res = ic_refine(&masked, img, &cand, &self.cfg.ic)?;
        let diag = RkltDiagnostics {
            tracked_points,
            inliers: inlier_pts.len(),
            layer1_ncc: res.initial_ncc,
            ncc: res.ncc,
            ic_iterations: res.iterations,
        };
        if !(res.ncc >= self.cfg.min_ncc) {
            return Err(RkltError::TrackingLost(LostReason::LowNcc(res.ncc)));
        }
        self.warp = self.dof.project(&res.warp);
        Ok((self.quad()?, diag))
    }
}

/// Runs the tracker over `frames` from `init`; lost frames are `None`.
pub fn dof_variant_run(
    frames: &[GrayImage],
    init: &CornerQuad,
    dof: DofModel,
    cfg: RkltConfig,
) -> Result<Vec<Option<CornerQuad>>, RkltError> {
    let Some(first) = frames.first() else { return Ok(Vec::new()) };
    let mut state = RkltState::init(first, init, dof, cfg)?;
    let mut out = Vec::with_capacity(frames.len() - 1);
    for f in &frames[1..] {
        match state.track_frame(f) {
            Ok((q, _)) => out.push(Some(q)),
            Err(RkltError::TrackingLost(_)) => out.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
