use nalgebra::{DMatrix, DVector};

use super::LkError;
use crate::geom::{DofModel, GeomError, Point2, WarpMatrix};
use crate::imgproc::{gradient, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcConfig {
    pub max_iters: usize,
    /// Convergence threshold on the parameter-update norm.
    pub epsilon: f64,
    pub max_halvings: usize,
    /// Longest template side in grid samples; larger regions are subsampled.
    pub template_max_side: usize,
}

impl Default for IcConfig {
    fn default() -> Self {
        Self {
            max_iters: 30,
            epsilon: 1e-4,
            max_halvings: 5,
            template_max_side: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcResult {
    pub warp: WarpMatrix,
    pub ncc: f64,
    pub initial_ncc: f64,
    pub iterations: usize,
}

/// Incremental warp `ΔW(p)` in the parameterisation of `dof`.
///
/// Parameters: translation `(tx, ty)` first; `log s` for 3/4 DoF; angle in
/// radians for 4 DoF; additive linear entries for 6/8 DoF; `(h31, h32)` last
/// for 8 DoF.
pub fn delta_warp(dof: DofModel, p: &[f64]) -> WarpMatrix {
    match dof {
        DofModel::Translation2 => WarpMatrix::translation(p[0], p[1]),
        DofModel::TransScale3 => {
            let s = p[2].exp();
            WarpMatrix([[s, 0.0, p[0]], [0.0, s, p[1]], [0.0, 0.0, 1.0]])
        }
        DofModel::Similarity4 => {
            let s = p[2].exp();
            let (sin, cos) = p[3].sin_cos();
            WarpMatrix([[s * cos, -s * sin, p[0]], [s * sin, s * cos, p[1]], [0.0, 0.0, 1.0]])
        }
        DofModel::Affine6 => WarpMatrix([[1.0 + p[2], p[3], p[0]], [p[4], 1.0 + p[5], p[1]], [0.0, 0.0, 1.0]]),
        DofModel::Homography8 => WarpMatrix([[1.0 + p[2], p[3], p[0]], [p[4], 1.0 + p[5], p[1]], [p[6], p[7], 1.0]]),
    }
}

pub fn inverse_delta_warp(dof: DofModel, p: &[f64]) -> Result<WarpMatrix, GeomError> {
    match dof {
        DofModel::Translation2 => Ok(WarpMatrix::translation(-p[0], -p[1])),
        DofModel::TransScale3 => {
            let k = (-p[2]).exp();
            Ok(WarpMatrix([[k, 0.0, -k * p[0]], [0.0, k, -k * p[1]], [0.0, 0.0, 1.0]]))
        }
        DofModel::Similarity4 => {
            let k = (-p[2]).exp();
            let (sin, cos) = p[3].sin_cos();
            let (a, b) = (k * cos, k * sin);
            // R(-θ)/s applied to -t.
            Ok(WarpMatrix([
                [a, b, -(a * p[0] + b * p[1])],
                [-b, a, -(-b * p[0] + a * p[1])],
                [0.0, 0.0, 1.0],
            ]))
        }
        DofModel::Affine6 | DofModel::Homography8 => {
            let mut inv = delta_warp(dof, p).invert()?;
            if dof == DofModel::Homography8 {
                inv = DofModel::Homography8.project(&inv);
            }
            Ok(inv)
        }
    }
}

/// Jacobian of `ΔW(p)(u)` at `p = 0`: rows x and y, `dof` columns.
fn jacobian(dof: DofModel, u: Point2) -> [[f64; 8]; 2] {
    let (x, y) = (u.x, u.y);
    match dof {
        DofModel::Translation2 => [[1.0, 0.0, 0., 0., 0., 0., 0., 0.], [0.0, 1.0, 0., 0., 0., 0., 0., 0.]],
        DofModel::TransScale3 => [[1.0, 0.0, x, 0., 0., 0., 0., 0.], [0.0, 1.0, y, 0., 0., 0., 0., 0.]],
        DofModel::Similarity4 => [[1.0, 0.0, x, -y, 0., 0., 0., 0.], [0.0, 1.0, y, x, 0., 0., 0., 0.]],
        DofModel::Affine6 => [[1.0, 0.0, x, y, 0.0, 0.0, 0., 0.], [0.0, 1.0, 0.0, 0.0, x, y, 0., 0.]],
        DofModel::Homography8 => [
            [1.0, 0.0, x, y, 0.0, 0.0, -x * x, -x * y],
            [0.0, 1.0, 0.0, 0.0, x, y, -x * y, -y * y],
        ],
    }
}

/// Zero-mean, unit-norm copy of `v`; a constant vector maps to zeros.
fn normalize(v: &mut [f64]) -> f64 {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut ss = 0.0;
    for x in v.iter_mut() {
        *x -= mean;
        ss += *x * *x;
    }
    let norm = ss.sqrt();
    if norm > 1e-12 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    norm
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reference appearance for inverse-compositional NCC alignment.
///
/// The template lives on a regular grid in template coordinates; the full
/// image warp is `anchor ∘ W` with `W` in the `dof` group.
#[derive(Debug, Clone)]
pub struct IcTemplate {
    dof: DofModel,
    anchor: WarpMatrix,
    origin: Point2,
    spacing: (f64, f64),
    values: GrayImage,
    coords: Vec<Point2>,
    sd: Vec<f64>,
    mask: Vec<bool>,
    active: Vec<usize>,
    t_hat: Vec<f64>,
    sd_hat: Vec<f64>,
    hessian: DMatrix<f64>,
}

impl IcTemplate {
    /// Samples `img` over the template-coordinate box `[lo, hi]` mapped by
    /// `anchor`.
    pub fn from_image(
        img: &GrayImage,
        anchor: WarpMatrix,
        lo: Point2,
        hi: Point2,
        dof: DofModel,
        max_side: usize,
    ) -> Result<Self, LkError> {
        if !img.all_finite() {
            return Err(LkError::NonFiniteImage);
        }
        let (w, h) = (hi.x - lo.x, hi.y - lo.y);
        if !(w > 0.0 && h > 0.0) {
            return Err(LkError::Geom(GeomError::Degenerate));
        }
        let step = (w.max(h) / max_side.max(4) as f64).max(1.0);
        let nx = ((w / step).round() as usize).max(4);
        let ny = ((h / step).round() as usize).max(4);
        let (sx, sy) = (w / nx as f64, h / ny as f64);
        let origin = Point2::new(lo.x + 0.5 * sx, lo.y + 0.5 * sy);
        let mut values = GrayImage::new(nx, ny);
        for j in 0..ny {
            for i in 0..nx {
                let u = Point2::new(origin.x + i as f64 * sx, origin.y + j as f64 * sy);
                let p = anchor.apply(u)?;
                values.set(i, j, img.sample(p.x, p.y));
            }
        }
        Self::from_grid(values, origin, (sx, sy), anchor, dof)
    }

    /// Template from explicit grid samples; node `(i, j)` sits at
    /// `origin + (i·sx, j·sy)` in template coordinates.
    pub fn from_grid(
        values: GrayImage,
        origin: Point2,
        spacing: (f64, f64),
        anchor: WarpMatrix,
        dof: DofModel,
    ) -> Result<Self, LkError> {
        if !values.all_finite() {
            return Err(LkError::NonFiniteImage);
        }
        let (nx, ny) = values.dimensions();
        let (gx, gy) = gradient(&values);
        let k = dof.dof();
        let n = nx * ny;
        let mut coords = Vec::with_capacity(n);
        let mut sd = Vec::with_capacity(n * k);
        for j in 0..ny {
            for i in 0..nx {
                let u = Point2::new(origin.x + i as f64 * spacing.0, origin.y + j as f64 * spacing.1);
                let (dx, dy) = (gx.get(i, j) / spacing.0, gy.get(i, j) / spacing.1);
                let jac = jacobian(dof, u);
                sd.extend((0..k).map(|c| dx * jac[0][c] + dy * jac[1][c]));
                coords.push(u);
            }
        }
        let mut t = Self {
            dof,
            anchor,
            origin,
            spacing,
            values,
            coords,
            sd,
            mask: vec![true; n],
            active: Vec::new(),
            t_hat: Vec::new(),
            sd_hat: Vec::new(),
            hessian: DMatrix::zeros(k, k),
        };
        t.prepare()?;
        Ok(t)
    }

    /// Copy of the template restricted to `mask` (row-major over the grid).
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self, LkError> {
        if mask.len() != self.coords.len() {
            return Err(LkError::MaskSize {
                expected: self.coords.len(),
                got: mask.len(),
            });
        }
        let mut t = self.clone();
        t.mask = mask;
        t.prepare()?;
        Ok(t)
    }

    fn prepare(&mut self) -> Result<(), LkError> {
        let k = self.dof.dof();
        self.active = (0..self.mask.len()).filter(|&i| self.mask[i]).collect();
        let m = self.active.len();
        if m < 2 * k {
            return Err(LkError::TooFewPixels { active: m, needed: 2 * k });
        }
        let vals = self.values.data();
        let mut t: Vec<f64> = self.active.iter().map(|&i| vals[i]).collect();
        let sigma = normalize(&mut t);
        if sigma <= 1e-12 {
            return Err(LkError::DegenerateTemplate);
        }
        // SD̂ = (P₀ − t̂t̂ᵀ)·SD / σ, with P₀ the centring projector.
        let mut sdh = Vec::with_capacity(m * k);
        for &i in &self.active {
            sdh.extend_from_slice(&self.sd[i * k..(i + 1) * k]);
        }
        for c in 0..k {
            let mean = (0..m).map(|r| sdh[r * k + c]).sum::<f64>() / m as f64;
            let mut proj = 0.0;
            for r in 0..m {
                sdh[r * k + c] -= mean;
                proj += t[r] * sdh[r * k + c];
            }
            for r in 0..m {
                sdh[r * k + c] = (sdh[r * k + c] - proj * t[r]) / sigma;
            }
        }
        let mut h = DMatrix::zeros(k, k);
        for r in 0..m {
            let row = &sdh[r * k..(r + 1) * k];
            for a in 0..k {
                for b in a..k {
                    h[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        self.t_hat = t;
        self.sd_hat = sdh;
        self.hessian = h;
        Ok(())
    }

    pub fn dof(&self) -> DofModel {
        self.dof
    }

    pub fn anchor(&self) -> &WarpMatrix {
        &self.anchor
    }

    pub fn grid_size(&self) -> (usize, usize) {
        self.values.dimensions()
    }

    pub fn values(&self) -> &GrayImage {
        &self.values
    }

    /// Template coordinates of every grid node, row-major.
    pub fn coords(&self) -> &[Point2] {
        &self.coords
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// Normalised template vector over the active pixels.
    pub fn t_hat(&self) -> &[f64] {
        &self.t_hat
    }

    /// Normalised image samples under `anchor ∘ warp` plus the NCC with the
    /// template.
    pub fn warped_normalized(&self, img: &GrayImage, warp: &WarpMatrix) -> Result<(Vec<f64>, f64), LkError> {
        let m = self.anchor.compose(warp);
        let mut v = Vec::with_capacity(self.active.len());
        if m.is_affine() {
            for &i in &self.active {
                let u = self.coords[i];
                let (x, y) = m.apply_affine(u.x, u.y);
                v.push(img.sample(x, y));
            }
        } else {
            for &i in &self.active {
                let p = m.apply(self.coords[i])?;
                v.push(img.sample(p.x, p.y));
            }
        }
        normalize(&mut v);
        let ncc = dot(&v, &self.t_hat);
        Ok((v, ncc))
    }

    pub fn ncc(&self, img: &GrayImage, warp: &WarpMatrix) -> Result<f64, LkError> {
        Ok(self.warped_normalized(img, warp)?.1)
    }

    /// `‖normalize(T(ΔW(dp)(u))) − target‖²` over the active pixels.
    pub fn objective(&self, target: &[f64], dp: &[f64]) -> Result<f64, LkError> {
        let dw = delta_warp(self.dof, dp);
        let mut v = Vec::with_capacity(self.active.len());
        for &i in &self.active {
            let p = dw.apply(self.coords[i])?;
            let gx = (p.x - self.origin.x) / self.spacing.0;
            let gy = (p.y - self.origin.y) / self.spacing.1;
            v.push(self.values.sample(gx, gy));
        }
        normalize(&mut v);
        Ok(v.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    /// Analytic gradient of [`IcTemplate::objective`] at `dp = 0`.
    pub fn objective_gradient(&self, target: &[f64]) -> Vec<f64> {
        let k = self.dof.dof();
        let mut g = vec![0.0; k];
        for (r, (&t, &y)) in self.t_hat.iter().zip(target).enumerate() {
            let e = 2.0 * (t - y);
            for c in 0..k {
                g[c] += e * self.sd_hat[r * k + c];
            }
        }
        g
    }

    fn solve_step(&self, i_hat: &[f64]) -> Option<Vec<f64>> {
        let k = self.dof.dof();
        let mut b = DVector::zeros(k);
        for (r, (&y, &t)) in i_hat.iter().zip(&self.t_hat).enumerate() {
            let e = y - t;
            for c in 0..k {
                b[c] += e * self.sd_hat[r * k + c];
            }
        }
        let dp = self.hessian.clone().lu().solve(&b)?;
        dp.iter().all(|v| v.is_finite()).then(|| dp.iter().copied().collect())
    }
}

/// Gauss–Newton NCC maximisation with inverse-compositional updates.
///
/// `init` is the warp in the template's DoF group (the anchor is applied on
/// top). A step that lowers NCC is halved up to `max_halvings` times; if none
/// helps, iteration stops with the current warp.
pub fn ic_refine(tmpl: &IcTemplate, img: &GrayImage, init: &WarpMatrix, cfg: &IcConfig) -> Result<IcResult, LkError> {
    if !img.all_finite() {
        return Err(LkError::NonFiniteImage);
    }
    let dof = tmpl.dof;
    let mut warp = *init;
    let (mut i_hat, mut ncc) = tmpl.warped_normalized(img, &warp)?;
    let initial_ncc = ncc;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let Some(dp) = tmpl.solve_step(&i_hat) else { break };
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let step: Vec<f64> = dp.iter().map(|v| v * alpha).collect();
            if let Ok(inv) = inverse_delta_warp(dof, &step) {
                let cand = warp.compose(&inv);
                if let Ok((ih, nc)) = tmpl.warped_normalized(img, &cand) {
                    if nc >= ncc {
                        accepted = Some((cand, ih, nc, step));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, ih, nc, step)) = accepted else { break };
        warp = cand;
        i_hat = ih;
        ncc = nc;
        if step.iter().map(|v| v * v).sum::<f64>().sqrt() < cfg.epsilon {
            break;
        }
    }
    Ok(IcResult {
        warp,
        ncc,
        initial_ncc,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::textures::smooth_noise;

    fn setup(dof: DofModel) -> (GrayImage, IcTemplate) {
        let img = smooth_noise(120, 120, 10.0, 5, 0.1, 0.9);
        let anchor = WarpMatrix::translation(60.0, 60.0);
        let t = IcTemplate::from_image(&img, anchor, Point2::new(-20.0, -20.0), Point2::new(20.0, 20.0), dof, 80)
            .unwrap();
        (img, t)
    }

    #[test]
    fn exact_init_converges_immediately() {
        let (img, t) = setup(DofModel::Similarity4);
        let r = ic_refine(&t, &img, &WarpMatrix::IDENTITY, &IcConfig::default()).unwrap();
        assert!(r.iterations <= 1);
        assert!(r.ncc >= 0.9999);
    }

    #[test]
    fn recovers_two_pixel_offset() {
        let (img, t) = setup(DofModel::Similarity4);
        let r = ic_refine(&t, &img, &WarpMatrix::translation(2.0, 0.0), &IcConfig::default()).unwrap();
        assert!(r.warp.max_abs_diff(&WarpMatrix::IDENTITY) < 0.05, "{}", r.warp);
        assert!(r.ncc >= r.initial_ncc);
    }

    #[test]
    fn translation_only_touches_translation() {
        let (img, t) = setup(DofModel::Translation2);
        let r = ic_refine(&t, &img, &WarpMatrix::translation(1.3, -0.7), &IcConfig::default()).unwrap();
        let a = r.warp.0;
        assert_eq!((a[0][0], a[0][1], a[1][0], a[1][1]), (1.0, 0.0, 0.0, 1.0));
        assert_eq!(a[2], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn mask_too_small() {
        let (_, t) = setup(DofModel::Homography8);
        let mut mask = vec![false; t.coords().len()];
        mask.iter_mut().take(15).for_each(|m| *m = true);
        assert!(matches!(t.with_mask(mask), Err(LkError::TooFewPixels { active: 15, needed: 16 })));
    }

    #[test]
    fn inverse_delta_is_inverse() {
        let p = [0.3, -0.2, 0.05, -0.02, 0.01, 0.03, 1e-4, -2e-4];
        for dof in DofModel::ALL {
            let k = dof.dof();
            let m = delta_warp(dof, &p[..k]).compose(&inverse_delta_warp(dof, &p[..k]).unwrap());
            let m = DofModel::Homography8.project(&m);
            assert!(m.max_abs_diff(&WarpMatrix::IDENTITY) < 1e-12, "{dof}");
        }
    }

    #[test]
    fn nonfinite_image_rejected() {
        let (mut img, t) = setup(DofModel::Translation2);
        img.set(3, 3, f64::NAN);
        assert_eq!(
            ic_refine(&t, &img, &WarpMatrix::IDENTITY, &IcConfig::default()).unwrap_err(),
            LkError::NonFiniteImage
        );
    }
}
