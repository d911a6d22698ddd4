//! Grayscale images and the low-level sampling the trackers are built on.
//!
//! Pixel `(x, y)` sits at integer coordinates; sub-pixel reads are bilinear
//! and reads outside the image replicate the nearest border pixel.

mod hog;

pub use hog::{hog, HOG_BINS, HOG_CHANNELS};

use thiserror::Error;

use crate::geom::Point2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image is empty")]
    Empty,
    #[error("buffer of {len} values does not match {width}x{height}")]
    SizeMismatch {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("patch {width}x{height} is smaller than one {cell}px cell")]
    PatchTooSmall {
        width: usize,
        height: usize,
        cell: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::SizeMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Replicated-border integer read.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear read with replicated borders.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, max_x) };
        let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, max_y) };
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as usize, y0 as usize);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let row0 = y0 * self.width;
        let row1 = y1 * self.width;
        let top = self.data[row0 + x0] + fx * (self.data[row0 + x1] - self.data[row0 + x0]);
        let bot = self.data[row1 + x0] + fx * (self.data[row1 + x1] - self.data[row1 + x0]);
        top + fy * (bot - top)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width - 1) as f64 && p.y <= (self.height - 1) as f64
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Dense multi-channel feature tensor, channel-major (`data[c][y][x]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_vec(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, ImageError> {
        if data.len() != width * height * channels || channels == 0 {
            return Err(ImageError::SizeMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_image(img: &GrayImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            channels: 1,
            data: img.data.clone(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Multiplies every channel by a `width × height` weight grid.
    pub fn apply_window(&mut self, window: &[f64]) {
        let n = self.width * self.height;
        assert_eq!(window.len(), n, "window size mismatch");
        for chunk in self.data.chunks_mut(n) {
            for (v, w) in chunk.iter_mut().zip(window) {
                *v *= w;
            }
        }
    }
}

/// Samples an oriented rectangle into an `out_w × out_h` patch.
///
/// The rectangle has nominal size `size`, is scaled by `scale` and rotated by
/// `rotation` degrees about `center`. Output pixel `(i, j)` reads the source
/// at `center + scale·R·((i − (out_w−1)/2)·size_w/out_w, …)`.
pub fn extract_patch(
    img: &GrayImage,
    center: Point2,
    size: (f64, f64),
    scale: f64,
    rotation: f64,
    out_size: (usize, usize),
) -> Result<GrayImage, ImageError> {
    if img.is_empty() {
        return Err(ImageError::Empty);
    }
    let (ow, oh) = out_size;
    let (sin, cos) = rotation.to_radians().sin_cos();
    let step_x = scale * size.0 / ow as f64;
    let step_y = scale * size.1 / oh as f64;
    let half_w = 0.5 * (ow as f64 - 1.0);
    let half_h = 0.5 * (oh as f64 - 1.0);
    let mut data = Vec::with_capacity(ow * oh);
    for j in 0..oh {
        let v = (j as f64 - half_h) * step_y;
        for i in 0..ow {
            let u = (i as f64 - half_w) * step_x;
            let x = center.x + cos * u - sin * v;
            let y = center.y + sin * u + cos * v;
            data.push(img.sample(x, y));
        }
    }
    Ok(GrayImage {
        width: ow,
        height: oh,
        data,
    })
}

/// Like [`extract_patch`], but each output pixel averages an `n × n` grid of
/// bilinear samples over its footprint, `n = ceil(step)` capped at 4, so
/// downscaled patches do not alias.
pub fn extract_patch_area(
    img: &GrayImage,
    center: Point2,
    size: (f64, f64),
    scale: f64,
    rotation: f64,
    out_size: (usize, usize),
) -> Result<GrayImage, ImageError> {
    if img.is_empty() {
        return Err(ImageError::Empty);
    }
    let (ow, oh) = out_size;
    let step_x = scale * size.0 / ow as f64;
    let step_y = scale * size.1 / oh as f64;
    let nx = (step_x.ceil() as usize).clamp(1, 4);
    let ny = (step_y.ceil() as usize).clamp(1, 4);
    if nx == 1 && ny == 1 {
        return extract_patch(img, center, size, scale, rotation, out_size);
    }
    let (sin, cos) = rotation.to_radians().sin_cos();
    let half_w = 0.5 * (ow as f64 - 1.0);
    let half_h = 0.5 * (oh as f64 - 1.0);
    let offs_x: Vec<f64> = (0..nx).map(|k| ((k as f64 + 0.5) / nx as f64 - 0.5) * step_x).collect();
    let offs_y: Vec<f64> = (0..ny).map(|k| ((k as f64 + 0.5) / ny as f64 - 0.5) * step_y).collect();
    let norm = 1.0 / (nx * ny) as f64;
    let mut data = Vec::with_capacity(ow * oh);
    for j in 0..oh {
        let v0 = (j as f64 - half_h) * step_y;
        for i in 0..ow {
            let u0 = (i as f64 - half_w) * step_x;
            let mut acc = 0.0;
            for &dv in &offs_y {
                for &du in &offs_x {
                    let (u, v) = (u0 + du, v0 + dv);
                    acc += img.sample(center.x + cos * u - sin * v, center.y + sin * u + cos * v);
                }
            }
            data.push(acc * norm);
        }
    }
    Ok(GrayImage {
        width: ow,
        height: oh,
        data,
    })
}

/// Central-difference gradients with replicated borders.
pub fn gradient(img: &GrayImage) -> (GrayImage, GrayImage) {
    let (w, h) = img.dimensions();
    let mut gx = GrayImage::new(w, h);
    let mut gy = GrayImage::new(w, h);
    for y in 0..h {
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(h - 1);
        for x in 0..w {
            let xl = x.saturating_sub(1);
            let xr = (x + 1).min(w - 1);
            gx.set(x, y, 0.5 * (img.get(xr, y) - img.get(xl, y)));
            gy.set(x, y, 0.5 * (img.get(x, yd) - img.get(x, yu)));
        }
    }
    (gx, gy)
}

/// Smallest side a pyramid level may have.
pub const PYRAMID_MIN_SIDE: usize = 8;

/// 2×2 box-downsampled pyramid; stops early once a level would drop below
/// [`PYRAMID_MIN_SIDE`].
pub fn pyramid(img: &GrayImage, levels: usize) -> Vec<GrayImage> {
    let mut out = vec![img.clone()];
    while out.len() < levels.max(1) {
        let prev = out.last().expect("non-empty");
        let (w, h) = (prev.width / 2, prev.height / 2);
        if w < PYRAMID_MIN_SIDE || h < PYRAMID_MIN_SIDE {
            break;
        }
        let next = GrayImage::from_fn(w, h, |x, y| {
            let (sx, sy) = (2 * x, 2 * y);
            0.25 * (prev.get(sx, sy) + prev.get(sx + 1, sy) + prev.get(sx, sy + 1) + prev.get(sx + 1, sy + 1))
        });
        out.push(next);
    }
    out
}

fn hann(n: usize) -> Vec<f64> {
    // Endpoint-free Hann so no sample is zeroed out entirely.
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).cos()))
        .collect()
}

/// 1D Hann window of length `n`.
pub fn cosine_window_1d(n: usize) -> Vec<f64> {
    hann(n)
}

/// Separable 2D Hann window, row-major `w × h`.
pub fn cosine_window(w: usize, h: usize) -> Vec<f64> {
    let (wx, wy) = (hann(w), hann(h));
    let mut out = Vec::with_capacity(w * h);
    for &b in &wy {
        for &a in &wx {
            out.push(a * b);
        }
    }
    out
}

#[inline]
fn circular_offset(k: usize, n: usize) -> f64 {
    k.min(n - k) as f64
}

/// Gaussian of unit peak at index 0, wrapped circularly.
pub fn gaussian_label_1d(n: usize, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let d = circular_offset(k, n) / sigma;
            (-0.5 * d * d).exp()
        })
        .collect()
}

/// Row-major `w × h` Gaussian of unit peak at (0, 0), wrapped circularly.
pub fn gaussian_label_2d(w: usize, h: usize, sigma_x: f64, sigma_y: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let dy = circular_offset(y, h) / sigma_y;
        for x in 0..w {
            let dx = circular_offset(x, w) / sigma_x;
            out.push((-0.5 * (dx * dx + dy * dy)).exp());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| (x as f64 * 0.01 + y as f64 * 0.003) % 1.0)
    }

    #[test]
    fn identity_extract_copies_pixels() {
        let img = GrayImage::from_fn(20, 16, |x, y| ((x * 7 + y * 13) % 17) as f64 / 16.0);
        // 6x4 block with top-left (5, 3): centre at (5 + 2.5, 3 + 1.5).
        let p = extract_patch(&img, Point2::new(7.5, 4.5), (6.0, 4.0), 1.0, 0.0, (6, 4)).unwrap();
        for y in 0..4 {
            for x in 0..6 {
                assert_eq!(p.get(x, y), img.get(x + 5, y + 3));
            }
        }
        let again = extract_patch(&p, Point2::new(2.5, 1.5), (6.0, 4.0), 1.0, 0.0, (6, 4)).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn rotation_moves_markers() {
        let mut img = GrayImage::new(9, 9);
        // Markers right of and below the centre (4, 4).
        img.set(6, 4, 1.0);
        img.set(4, 5, 0.5);
        let p = extract_patch(&img, Point2::new(4.0, 4.0), (9.0, 9.0), 1.0, 90.0, (9, 9)).unwrap();
        // Output (i, j) reads centre + R90·(u, v) = centre + (−v, u).
        // The marker at offset (2, 0) appears where (−v, u) = (2, 0): u=0, v=−2.
        assert!((p.get(4, 2) - 1.0).abs() < 1e-12);
        // The marker at offset (0, 1) appears at u=1, v=0.
        assert!((p.get(5, 4) - 0.5).abs() < 1e-12);
        let total: f64 = p.data().iter().sum();
        assert!((total - 1.5).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_samples_replicate_border() {
        let img = GrayImage::from_fn(4, 4, |x, _| x as f64 / 3.0);
        assert_eq!(img.sample(-5.0, 1.0), 0.0);
        assert_eq!(img.sample(10.0, 1.0), 1.0);
        assert!(matches!(
            extract_patch(&GrayImage::new(0, 0), Point2::default(), (4.0, 4.0), 1.0, 0.0, (4, 4)),
            Err(ImageError::Empty)
        ));
    }

    #[test]
    fn gradient_of_ramp_and_constant() {
        let img = GrayImage::from_fn(10, 6, |x, _| 0.05 * x as f64);
        let (gx, gy) = gradient(&img);
        for y in 0..6 {
            for x in 1..9 {
                assert!((gx.get(x, y) - 0.05).abs() < 1e-12);
                assert_eq!(gy.get(x, y), 0.0);
            }
        }
        let flat = GrayImage::filled(7, 7, 0.3);
        let (gx, gy) = gradient(&flat);
        assert!(gx.data().iter().chain(gy.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn pyramid_sizes() {
        let img = ramp(64, 64);
        assert_eq!(pyramid(&img, 1).len(), 1);
        let sizes: Vec<_> = pyramid(&img, 3).iter().map(|l| l.width()).collect();
        assert_eq!(sizes, vec![64, 32, 16]);
        // 20 → 10 → (5 is too small)
        assert_eq!(pyramid(&ramp(20, 20), 5).len(), 2);
    }

    #[test]
    fn labels_peak_and_symmetry() {
        let n = 33;
        let g = gaussian_label_1d(n, 2.0);
        assert_eq!(g[0], 1.0);
        for k in 1..n {
            assert_eq!(g[k], g[n - k]);
        }
        let (w, h, s) = (12, 9, 1.7);
        let g2 = gaussian_label_2d(w, h, s, s);
        let (gx, gy) = (gaussian_label_1d(w, s), gaussian_label_1d(h, s));
        for y in 0..h {
            for x in 0..w {
                assert!((g2[y * w + x] - gx[x] * gy[y]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_window_is_separable_and_positive() {
        let w = cosine_window(5, 3);
        let (a, b) = (cosine_window_1d(5), cosine_window_1d(3));
        assert!(w.iter().all(|&v| v > 0.0));
        for y in 0..3 {
            for x in 0..5 {
                assert_eq!(w[y * 5 + x], a[x] * b[y]);
            }
        }
        assert_eq!(cosine_window_1d(1), vec![1.0]);
    }
}
