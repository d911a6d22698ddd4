//! Rotation and scale space tracker: three correlation filters estimating
//! translation, then scale, then rotation.

use thiserror::Error;

use crate::dcf::{peak_locate, peak_locate_bin, DcfError, DcfModel};
use crate::geom::{CornerQuad, Point2, SimilarityParams};
use crate::imgproc::{
    cosine_window, cosine_window_1d, extract_patch_area, gaussian_label_1d, gaussian_label_2d, hog, FeatureMap, GrayImage,
    ImageError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RsstError {
    #[error("initial region is degenerate")]
    DegenerateRegion,
    #[error("initial region is {0:.1}×{1:.1} px, need at least 16×16")]
    RegionTooSmall(f64, f64),
    #[error("initial region centre lies outside the image")]
    RegionOutside,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dcf(#[from] DcfError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsstConfig {
    /// Half-width of the rotation search, degrees.
    pub rot_range: f64,
    pub rot_step: f64,
    /// Odd number of scale samples.
    pub n_scales: usize,
    pub scale_step: f64,
    /// Search window side relative to the target.
    pub padding: f64,
    pub lambda: f64,
    pub eta: f64,
    /// Longest side of the translation patch after downscaling.
    pub template_max_side: usize,
    /// Longest side of each scale/rotation sample patch.
    pub sample_max_side: usize,
    pub cell: usize,
    /// Label σ as a fraction of the target extent (cells) or sample count.
    pub sigma_factor: f64,
    /// Translation passes per frame; each re-centres the search window on
    /// the previous estimate.
    pub translation_iters: usize,
}

impl Default for RsstConfig {
    fn default() -> Self {
        Self {
            rot_range: 20.0,
            rot_step: 2.0,
            n_scales: 33,
            scale_step: 1.02,
            padding: 2.0,
            lambda: 0.01,
            eta: 0.025,
            template_max_side: 96,
            sample_max_side: 32,
            cell: 4,
            sigma_factor: 1.0 / 16.0,
            translation_iters: 3,
        }
    }
}

impl RsstConfig {
    pub fn validate(&self) -> Result<(), RsstError> {
        let bad = |m: &str| Err(RsstError::Config(m.into()));
        if !(self.rot_step > 0.0) || !(self.rot_range >= 0.0) {
            return bad("rotation range/step must be positive");
        }
        let ratio = self.rot_range / self.rot_step;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return bad("rot_range must be a multiple of rot_step");
        }
        if self.n_scales % 2 == 0 {
            return bad("n_scales must be odd");
        }
        if !(self.scale_step > 1.0) {
            return bad("scale_step must exceed 1");
        }
        if !(self.padding >= 1.0) {
            return bad("padding must be at least 1");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if self.translation_iters == 0 {
            return bad("translation_iters must be at least 1");
        }
        if self.cell == 0 || self.template_max_side < 2 * self.cell || self.sample_max_side < 2 * self.cell {
            return bad("patch sizes must hold at least two cells");
        }
        Ok(())
    }

    pub fn n_rotations(&self) -> usize {
        2 * (self.rot_range / self.rot_step).round() as usize + 1
    }
}

/// Output size with the given aspect, longest side `max_side`, both sides
/// multiples of `cell` and at least two cells.
fn fit_size(w: f64, h: f64, max_side: f64, cell: usize) -> (usize, usize) {
    let f = max_side / w.max(h);
    let snap = |v: f64| (((v * f) / cell as f64).round() as usize).max(2) * cell;
    (snap(w), snap(h))
}

#[derive(Debug, Clone)]
pub struct RsstState {
    position: Point2,
    scale: f64,
    rotation: f64,
    trans_model: DcfModel,
    scale_model: DcfModel,
    rot_model: DcfModel,
    init_size: (f64, f64),
    local_corners: [Point2; 4],
    search_size: (f64, f64),
    trans_out: (usize, usize),
    sample_out: (usize, usize),
    trans_window: Vec<f64>,
    scale_window: Vec<f64>,
    rot_window: Vec<f64>,
    low_confidence: bool,
    config: RsstConfig,
}

impl RsstState {
    pub fn init(img: &GrayImage, region: &CornerQuad, config: RsstConfig) -> Result<Self, RsstError> {
        config.validate()?;
        if !region.is_valid() {
            return Err(RsstError::DegenerateRegion);
        }
        let (w, h) = region.side_lengths();
        if w < 16.0 || h < 16.0 {
            return Err(RsstError::RegionTooSmall(w, h));
        }
        let c = region.centroid();
        if !img.contains(c) {
            return Err(RsstError::RegionOutside);
        }
        let r = region.angle();
        let (sin, cos) = (-r).to_radians().sin_cos();
        let local_corners = region.corners.map(|p| {
            let d = p - c;
            Point2::new(cos * d.x - sin * d.y, sin * d.x + cos * d.y)
        });

        let search_size = (config.padding * w, config.padding * h);
        let trans_out = fit_size(
            search_size.0,
            search_size.1,
            (config.template_max_side as f64).min(search_size.0.max(search_size.1)),
            config.cell,
        );
        let sample_out = fit_size(w, h, (config.sample_max_side as f64).min(w.max(h)), config.cell);
        let (cw, ch) = (trans_out.0 / config.cell, trans_out.1 / config.cell);
        let n_rot = config.n_rotations();

        let trans_label = gaussian_label_2d(
            cw,
            ch,
            config.sigma_factor * cw as f64 / config.padding,
            config.sigma_factor * ch as f64 / config.padding,
        );
        let scale_label = gaussian_label_1d(config.n_scales, config.sigma_factor * config.n_scales as f64);
        let rot_label = gaussian_label_1d(n_rot, config.sigma_factor * n_rot as f64);

        let mut st = Self {
            position: c,
            scale: 1.0,
            rotation: r,
            // Placeholders, replaced below once the extractors can run.
            trans_model: DcfModel::train_init(&FeatureMap::zeros(1, 1, 1), &[1.0], config.lambda)?,
            scale_model: DcfModel::train_init(&FeatureMap::zeros(1, 1, 1), &[1.0], config.lambda)?,
            rot_model: DcfModel::train_init(&FeatureMap::zeros(1, 1, 1), &[1.0], config.lambda)?,
            init_size: (w, h),
            local_corners,
            search_size,
            trans_out,
            sample_out,
            trans_window: cosine_window(cw, ch),
            scale_window: cosine_window_1d(config.n_scales),
            rot_window: cosine_window_1d(n_rot),
            low_confidence: false,
            config,
        };
        let patch = st.trans_patch(img)?;
        let mean = patch.mean();
        let var = patch.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / patch.data().len() as f64;
        st.low_confidence = var < 1e-8;
        st.trans_model = DcfModel::train_init(&st.trans_features(&patch)?, &trans_label, config.lambda)?;
        st.scale_model = DcfModel::train_init(&st.scale_sample(img)?, &scale_label, config.lambda)?;
        st.rot_model = DcfModel::train_init(&st.rot_sample(img)?, &rot_label, config.lambda)?;
        Ok(st)
    }

    pub fn position(&self) -> Point2 {
        self.position
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Accumulated rotation, degrees.
    pub fn rotation(&self) -> f64 {
        self.rotation
    }

    pub fn pose(&self) -> SimilarityParams {
        SimilarityParams::new(self.position.x, self.position.y, self.scale, self.rotation)
    }

    pub fn init_size(&self) -> (f64, f64) {
        self.init_size
    }

    /// Search window in image pixels at the initial scale.
    pub fn search_size(&self) -> (f64, f64) {
        self.search_size
    }

    /// Set when the initial patch has no intensity variation.
    pub fn low_confidence(&self) -> bool {
        self.low_confidence
    }

    pub fn config(&self) -> &RsstConfig {
        &self.config
    }

    pub fn models_finite(&self) -> bool {
        self.trans_model.is_finite() && self.scale_model.is_finite() && self.rot_model.is_finite()
    }

    pub fn quad(&self) -> CornerQuad {
        let (sin, cos) = self.rotation.to_radians().sin_cos();
        let s = self.scale;
        CornerQuad::new(self.local_corners.map(|d| {
            self.position + Point2::new(s * (cos * d.x - sin * d.y), s * (sin * d.x + cos * d.y))
        }))
    }

    fn trans_patch(&self, img: &GrayImage) -> Result<GrayImage, RsstError> {
        Ok(extract_patch_area(img, self.position, self.search_size, self.scale, self.rotation, self.trans_out)?)
    }

    fn trans_features(&self, patch: &GrayImage) -> Result<FeatureMap, RsstError> {
        let mut f = hog(patch, self.config.cell)?;
        f.apply_window(&self.trans_window);
        Ok(f)
    }

    /// One flattened HOG vector per sampled pose, laid out as a 1D signal
    /// whose channels are the feature entries.
    fn stack_samples(&self, img: &GrayImage, poses: &[(f64, f64)], window: &[f64]) -> Result<FeatureMap, RsstError> {
        let n = poses.len();
        let mut columns = Vec::with_capacity(n);
        for &(scale, rot) in poses {
            let patch = extract_patch_area(img, self.position, self.init_size, scale, rot, self.sample_out)?;
            columns.push(hog(&patch, self.config.cell)?);
        }
        let d = columns[0].data().len();
        let mut data = vec![0.0; d * n];
        for (i, col) in columns.iter().enumerate() {
            for (k, &v) in col.data().iter().enumerate() {
                data[k * n + i] = v * window[i];
            }
        }
        Ok(FeatureMap::from_vec(n, 1, d, data)?)
    }

    fn scale_sample(&self, img: &GrayImage) -> Result<FeatureMap, RsstError> {
        let half = (self.config.n_scales / 2) as i32;
        let poses: Vec<(f64, f64)> = (-half..=half)
            .map(|k| (self.scale * self.config.scale_step.powi(k), self.rotation))
            .collect();
        self.stack_samples(img, &poses, &self.scale_window)
    }

    fn rot_sample(&self, img: &GrayImage) -> Result<FeatureMap, RsstError> {
        let half = (self.config.n_rotations() / 2) as i32;
        let poses: Vec<(f64, f64)> = (-half..=half)
            .map(|k| (self.scale, self.rotation + k as f64 * self.config.rot_step))
            .collect();
        self.stack_samples(img, &poses, &self.rot_window)
    }

    /// Translation, then scale, then rotation; then all three filters are
    /// updated at the new pose.
    pub fn track_frame(&mut self, img: &GrayImage) -> Result<CornerQuad, RsstError> {
        let cfg = self.config;

        let cell = cfg.cell as f64;
        let (sin, cos) = self.rotation.to_radians().sin_cos();
        for _ in 0..cfg.translation_iters {
            let z = self.trans_features(&self.trans_patch(img)?)?;
            let peak = peak_locate(&self.trans_model.respond(&z)?);
            let d = Point2::new(
                peak.dx * cell * self.search_size.0 / self.trans_out.0 as f64,
                peak.dy * cell * self.search_size.1 / self.trans_out.1 as f64,
            );
            let moved = Point2::new(cos * d.x - sin * d.y, sin * d.x + cos * d.y) * self.scale;
            let p = self.position + moved;
            self.position = Point2::new(
                p.x.clamp(0.0, (img.width() - 1) as f64),
                p.y.clamp(0.0, (img.height() - 1) as f64),
            );
            if moved.norm() < 0.05 {
                break;
            }
        }

        let zs = self.scale_sample(img)?;
        let ps = peak_locate(&self.scale_model.respond(&zs)?);
        self.scale = (self.scale * cfg.scale_step.powf(ps.dx)).clamp(0.05, 20.0);

        let zr = self.rot_sample(img)?;
        let pr = peak_locate_bin(&self.rot_model.respond(&zr)?);
        self.rotation += pr.dx.round() * cfg.rot_step;

        let x = self.trans_features(&self.trans_patch(img)?)?;
        self.trans_model = self.trans_model.update(&x, cfg.eta)?;
        self.scale_model = self.scale_model.update(&self.scale_sample(img)?, cfg.eta)?;
        self.rot_model = self.rot_model.update(&self.rot_sample(img)?, cfg.eta)?;
        Ok(self.quad())
    }
}
