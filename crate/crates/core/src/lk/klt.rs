use crate::geom::Point2;
use crate::imgproc::{gradient, pyramid, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KltConfig {
    pub levels: usize,
    /// Odd window side in pixels.
    pub window: usize,
    pub max_iters: usize,
    /// Stop once the per-iteration update is below this many pixels.
    pub epsilon: f64,
    /// Minimum eigenvalue of the window-averaged gradient matrix.
    pub min_eigen: f64,
    /// Minimum ratio between the small and large eigenvalues.
    pub min_eigen_ratio: f64,
}

impl Default for KltConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            window: 11,
            max_iters: 30,
            epsilon: 0.01,
            min_eigen: 1e-6,
            min_eigen_ratio: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tracked,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedPoint {
    pub prev: Point2,
    pub curr: Point2,
    pub status: TrackStatus,
    /// Mean squared intensity difference over the final window.
    pub residual: f64,
}

impl TrackedPoint {
    pub fn is_tracked(&self) -> bool {
        self.status == TrackStatus::Tracked
    }

    fn lost(prev: Point2) -> Self {
        Self {
            prev,
            curr: prev,
            status: TrackStatus::Lost,
            residual: f64::INFINITY,
        }
    }
}

/// Image pyramid with per-level gradients.
#[derive(Debug, Clone)]
pub struct Pyramid {
    pub levels: Vec<GrayImage>,
    pub grad_x: Vec<GrayImage>,
    pub grad_y: Vec<GrayImage>,
}

impl Pyramid {
    pub fn new(img: &GrayImage, levels: usize) -> Self {
        let levels = pyramid(img, levels);
        let (grad_x, grad_y) = levels.iter().map(gradient).unzip();
        Self {
            levels,
            grad_x,
            grad_y,
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn base(&self) -> &GrayImage {
        &self.levels[0]
    }
}

pub fn klt_track(prev: &GrayImage, next: &GrayImage, pts: &[Point2], cfg: &KltConfig) -> Vec<TrackedPoint> {
    if pts.is_empty() {
        return Vec::new();
    }
    let a = Pyramid::new(prev, cfg.levels);
    let b = Pyramid::new(next, cfg.levels);
    klt_track_pyramids(&a, &b, pts, cfg)
}

/// Bouguet-style coarse-to-fine translation tracking of each point.
pub fn klt_track_pyramids(prev: &Pyramid, next: &Pyramid, pts: &[Point2], cfg: &KltConfig) -> Vec<TrackedPoint> {
    pts.iter().map(|&p| track_point(prev, next, p, cfg)).collect()
}

fn track_point(prev: &Pyramid, next: &Pyramid, p: Point2, cfg: &KltConfig) -> TrackedPoint {
    if !p.is_finite() || !prev.base().contains(p) {
        return TrackedPoint::lost(p);
    }
    let depth = prev.depth().min(next.depth());
    let r = (cfg.window / 2) as isize;
    let n = ((2 * r + 1) * (2 * r + 1)) as usize;
    let mut tmpl = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut guess = Point2::default();
    let mut residual = 0.0;

    for level in (0..depth).rev() {
        // Level-l pixel x covers base pixels 2^l·x .. 2^l·x + 2^l − 1.
        let f = (1u32 << level) as f64;
        let pl = (p - Point2::new(0.5 * (f - 1.0), 0.5 * (f - 1.0))) * (1.0 / f);
        let (img_i, img_j) = (&prev.levels[level], &next.levels[level]);
        let (dix, diy) = (&prev.grad_x[level], &prev.grad_y[level]);

        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        let mut idx = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (pl.x + dx as f64, pl.y + dy as f64);
                tmpl[idx] = img_i.sample(x, y);
                let (ix, iy) = (dix.sample(x, y), diy.sample(x, y));
                gx[idx] = ix;
                gy[idx] = iy;
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
                idx += 1;
            }
        }
        let inv_n = 1.0 / n as f64;
        let (a, b, c) = (gxx * inv_n, gxy * inv_n, gyy * inv_n);
        let half_tr = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let (lmin, lmax) = (half_tr - disc, half_tr + disc);
        if lmin < cfg.min_eigen || lmin < cfg.min_eigen_ratio * lmax {
            return TrackedPoint::lost(p);
        }
        let det = gxx * gyy - gxy * gxy;

        let mut nu = Point2::default();
        for _ in 0..cfg.max_iters {
            let (mut bx, mut by) = (0.0, 0.0);
            let off = pl + guess + nu;
            let mut idx = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let e = tmpl[idx] - img_j.sample(off.x + dx as f64, off.y + dy as f64);
                    bx += e * gx[idx];
                    by += e * gy[idx];
                    idx += 1;
                }
            }
            let step = Point2::new((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det);
            nu = nu + step;
            if !nu.is_finite() || nu.norm() > cfg.window as f64 {
                return TrackedPoint::lost(p);
            }
            if step.norm() < cfg.epsilon {
                break;
            }
        }

        if level == 0 {
            guess = guess + nu;
            let off = pl + guess;
            let mut sse = 0.0;
            let mut idx = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let e = tmpl[idx] - img_j.sample(off.x + dx as f64, off.y + dy as f64);
                    sse += e * e;
                    idx += 1;
                }
            }
            residual = sse * inv_n;
        } else {
            guess = (guess + nu) * 2.0;
        }
    }

    let curr = p + guess;
    if !next.base().contains(curr) {
        return TrackedPoint::lost(p);
    }
    TrackedPoint {
        prev: p,
        curr,
        status: TrackStatus::Tracked,
        residual,
    }
}
