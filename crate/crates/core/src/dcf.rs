//! Multi-channel discriminative correlation filter.
//!
//! The filter is the closed-form ridge-regression solution in the Fourier
//! domain, kept in split form: per-channel numerators `N^l = F·conj(X^l)` and
//! a shared real denominator `D = Σ_k |X^k|²`. Detection evaluates
//! `y = IFFT(Σ_l N^l·Z^l / (D + λ))`, which reproduces the desired output `f`
//! when `z` is the training sample. Both the 2D translation filter and the 1D
//! scale/rotation filters use this type (1D shapes have `height == 1`).

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::fft::Fft2;
use crate::imgproc::FeatureMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DcfError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("label has {got} values, feature grid has {expected}")]
    LabelMismatch { expected: usize, got: usize },
    #[error("learning rate {0} outside (0, 1]")]
    InvalidLearningRate(f64),
    #[error("regularisation weight {0} must be finite and >= 0")]
    InvalidLambda(f64),
    #[error("feature map is empty")]
    Empty,
}

/// Real response grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ResponseMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(width * height, data.len());
        Self {
            width,
            height,
            data,
        }
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Peak of a response, as a signed circular shift in bins.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Peak {
    pub dx: f64,
    pub dy: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct DcfModel {
    width: usize,
    height: usize,
    channels: usize,
    numerators: Vec<Complex64>,
    denominator: Vec<f64>,
    label_spectrum: Vec<Complex64>,
    lambda: f64,
    fft: Fft2,
}

impl DcfModel {
    /// Trains a fresh filter on one sample (the update rule with η = 1).
    pub fn train_init(x: &FeatureMap, label: &[f64], lambda: f64) -> Result<Self, DcfError> {
        let (w, h, d) = x.shape();
        if w * h == 0 || d == 0 {
            return Err(DcfError::Empty);
        }
        if label.len() != w * h {
            return Err(DcfError::LabelMismatch {
                expected: w * h,
                got: label.len(),
            });
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(DcfError::InvalidLambda(lambda));
        }
        let fft = Fft2::new(w, h);
        let label_spectrum = fft.forward_real(label);
        let (numerators, denominator) = sample_terms(&fft, &label_spectrum, x);
        Ok(Self {
            width: w,
            height: h,
            channels: d,
            numerators,
            denominator,
            label_spectrum,
            lambda,
            fft,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn numerators(&self) -> &[Complex64] {
        &self.numerators
    }

    pub fn numerator(&self, channel: usize) -> &[Complex64] {
        let n = self.width * self.height;
        &self.numerators[channel * n..(channel + 1) * n]
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn label_spectrum(&self) -> &[Complex64] {
        &self.label_spectrum
    }

    fn check_shape(&self, x: &FeatureMap) -> Result<(), DcfError> {
        if x.shape() != self.shape() {
            return Err(DcfError::ShapeMismatch {
                expected: self.shape(),
                got: x.shape(),
            });
        }
        Ok(())
    }

    /// Running average `N ← (1−η)N + η·F·conj(X)`, `D ← (1−η)D + η·Σ|X|²`.
    pub fn update(&self, x: &FeatureMap, eta: f64) -> Result<Self, DcfError> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(DcfError::InvalidLearningRate(eta));
        }
        self.check_shape(x)?;
        let (new_num, new_den) = sample_terms(&self.fft, &self.label_spectrum, x);
        let keep = 1.0 - eta;
        let numerators = self
            .numerators
            .iter()
            .zip(&new_num)
            .map(|(&old, &new)| old * keep + new * eta)
            .collect();
        let denominator = self
            .denominator
            .iter()
            .zip(&new_den)
            .map(|(&old, &new)| old * keep + new * eta)
            .collect();
        Ok(Self {
            numerators,
            denominator,
            ..self.clone_header()
        })
    }

    fn clone_header(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            numerators: Vec::new(),
            denominator: Vec::new(),
            label_spectrum: self.label_spectrum.clone(),
            lambda: self.lambda,
            fft: self.fft.clone(),
        }
    }

    /// Copy of the model with every numerator multiplied by `alpha`.
    pub fn scaled_numerators(&self, alpha: f64) -> Self {
        Self {
            numerators: self.numerators.iter().map(|&v| v * alpha).collect(),
            denominator: self.denominator.clone(),
            ..self.clone_header()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.numerators.iter().all(|c| c.re.is_finite() && c.im.is_finite())
            && self.denominator.iter().all(|v| v.is_finite())
    }

    pub fn respond(&self, z: &FeatureMap) -> Result<ResponseMap, DcfError> {
        self.check_shape(z)?;
        let n = self.width * self.height;
        let mut acc = vec![Complex64::default(); n];
        for c in 0..self.channels {
            let zf = self.fft.forward_real(z.channel(c));
            for ((a, &num), &zv) in acc.iter_mut().zip(self.numerator(c)).zip(&zf) {
                *a += num * zv;
            }
        }
        for (a, &d) in acc.iter_mut().zip(&self.denominator) {
            let denom = d + self.lambda;
            *a = if denom > 0.0 {
                *a / denom
            } else {
                Complex64::default()
            };
        }
        self.fft.run(&mut acc, true);
        Ok(ResponseMap::new(
            self.width,
            self.height,
            acc.into_iter().map(|c| c.re).collect(),
        ))
    }
}

fn sample_terms(fft: &Fft2, label: &[Complex64], x: &FeatureMap) -> (Vec<Complex64>, Vec<f64>) {
    let n = fft.len();
    let mut numerators = Vec::with_capacity(n * x.channels());
    let mut denominator = vec![0.0; n];
    for c in 0..x.channels() {
        let xf = fft.forward_real(x.channel(c));
        for ((&xv, &fv), d) in xf.iter().zip(label).zip(denominator.iter_mut()) {
            numerators.push(fv * xv.conj());
            *d += xv.norm_sqr();
        }
    }
    (numerators, denominator)
}

fn wrap_shift(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Vertex offset of the parabola through `(−1, left), (0, mid), (1, right)`.
pub fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom.abs() < 1e-15 || !denom.is_finite() {
        return 0.0;
    }
    let off = (left - right) / (2.0 * denom);
    off.clamp(-0.5, 0.5)
}

/// Argmax of a response, refined per axis with a parabola through the peak
/// and its two circular neighbours; ties resolve to the lowest linear index.
pub fn peak_locate(response: &ResponseMap) -> Peak {
    let (w, h) = (response.width, response.height);
    if response.data.is_empty() {
        return Peak::default();
    }
    let best = argmax(&response.data);
    let (px, py) = (best % w, best / w);
    let at = |x: usize, y: usize| response.data[y * w + x];
    let peak = at(px, py);
    let mut dx = wrap_shift(px, w);
    let mut dy = wrap_shift(py, h);
    if w >= 3 {
        dx += parabolic_offset(at((px + w - 1) % w, py), peak, at((px + 1) % w, py));
    }
    if h >= 3 {
        dy += parabolic_offset(at(px, (py + h - 1) % h), peak, at(px, (py + 1) % h));
    }
    Peak {
        dx,
        dy,
        value: peak,
    }
}

fn argmax(data: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in data.iter().enumerate() {
        if v > data[best] {
            best = i;
        }
    }
    best
}

/// Integer argmax only, as a signed shift.
pub fn peak_locate_bin(response: &ResponseMap) -> Peak {
    if response.data.is_empty() {
        return Peak::default();
    }
    let (w, h) = (response.width, response.height);
    let best = argmax(&response.data);
    Peak {
        dx: wrap_shift(best % w, w),
        dy: wrap_shift(best / w, h),
        value: response.data[best],
    }
}
