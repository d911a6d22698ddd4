//! Planar motion models and the small amount of projective geometry the
//! trackers share.
//!
//! Warps are 3×3 homogeneous matrices acting on column vectors `(x, y, 1)`.
//! Tracker warps map *template coordinates* (centred on the target region)
//! into image coordinates, so a similarity's scale and rotation act about the
//! target centre.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("warp matrix is singular (|det| = {0:e})")]
    Singular(f64),
    #[error("point maps to infinity under the homography")]
    PointAtInfinity,
    #[error("need at least {needed} correspondences, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("source points are degenerate (all coincident)")]
    Degenerate,
    #[error("correspondence lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// 4-DoF pose: translation in pixels, isotropic scale, rotation in degrees.
///
/// Rotation is kept unwrapped so trackers can accumulate it across frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityParams {
    pub tx: f64,
    pub ty: f64,
    pub scale: f64,
    pub rotation: f64,
}

impl SimilarityParams {
    pub const IDENTITY: SimilarityParams = SimilarityParams {
        tx: 0.0,
        ty: 0.0,
        scale: 1.0,
        rotation: 0.0,
    };

    pub fn new(tx: f64, ty: f64, scale: f64, rotation: f64) -> Self {
        Self {
            tx,
            ty,
            scale,
            rotation,
        }
    }

    pub fn translation(&self) -> Point2 {
        Point2::new(self.tx, self.ty)
    }

    pub fn to_matrix(&self) -> WarpMatrix {
        params_to_matrix(self)
    }
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Row-major homogeneous 3×3 warp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpMatrix(pub [[f64; 3]; 3]);

impl WarpMatrix {
    pub const IDENTITY: WarpMatrix =
        WarpMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn translation(tx: f64, ty: f64) -> Self {
        WarpMatrix([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[r][c]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &WarpMatrix) -> WarpMatrix {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
            }
        }
        WarpMatrix(out)
    }

    pub fn invert(&self) -> Result<WarpMatrix, GeomError> {
        let m = &self.0;
        let det = self.determinant();
        let scale = self
            .0
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        if !det.is_finite() || det.abs() <= 1e-14 * scale.powi(3) {
            return Err(GeomError::Singular(det));
        }
        let inv_det = 1.0 / det;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let mut out = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        for v in out.iter_mut().flatten() {
            *v *= inv_det;
        }
        // Affine inverses keep an exact (0, 0, 1) bottom row.
        if m[2][0] == 0.0 && m[2][1] == 0.0 && m[2][2] == 1.0 {
            out[2] = [0.0, 0.0, 1.0];
        }
        Ok(WarpMatrix(out))
    }

    pub fn apply(&self, p: Point2) -> Result<Point2, GeomError> {
        let m = &self.0;
        let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        if w.abs() < 1e-12 {
            return Err(GeomError::PointAtInfinity);
        }
        let x = m[0][0] * p.x + m[0][1] * p.y + m[0][2];
        let y = m[1][0] * p.x + m[1][1] * p.y + m[1][2];
        if w == 1.0 {
            Ok(Point2::new(x, y))
        } else {
            Ok(Point2::new(x / w, y / w))
        }
    }

    /// Applies the affine part only; callers guarantee a (0,0,1) bottom row.
    #[inline]
    pub fn apply_affine(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        (
            m[0][0] * x + m[0][1] * y + m[0][2],
            m[1][0] * x + m[1][1] * y + m[1][2],
        )
    }

    pub fn is_affine(&self) -> bool {
        self.0[2] == [0.0, 0.0, 1.0]
    }

    pub fn max_abs_diff(&self, other: &WarpMatrix) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl Default for WarpMatrix {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl fmt::Display for WarpMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.0 {
            writeln!(f, "[{:>12.6} {:>12.6} {:>12.6}]", row[0], row[1], row[2])?;
        }
        Ok(())
    }
}

pub fn params_to_matrix(p: &SimilarityParams) -> WarpMatrix {
    let (sin, cos) = p.rotation.to_radians().sin_cos();
    let (a, b) = (p.scale * cos, p.scale * sin);
    WarpMatrix([[a, -b, p.tx], [b, a, p.ty], [0.0, 0.0, 1.0]])
}

/// Reads back a similarity; rotation is returned in (-180, 180].
pub fn matrix_to_params(m: &WarpMatrix) -> SimilarityParams {
    let a = &m.0;
    let scale = a[0][0].hypot(a[1][0]);
    let rotation = a[1][0].atan2(a[0][0]).to_degrees();
    SimilarityParams::new(a[0][2], a[1][2], scale, rotation)
}

/// Planar motion models ordered by degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DofModel {
    Translation2,
    TransScale3,
    Similarity4,
    Affine6,
    Homography8,
}

impl DofModel {
    pub const ALL: [DofModel; 5] = [
        DofModel::Translation2,
        DofModel::TransScale3,
        DofModel::Similarity4,
        DofModel::Affine6,
        DofModel::Homography8,
    ];

    pub fn dof(self) -> usize {
        match self {
            DofModel::Translation2 => 2,
            DofModel::TransScale3 => 3,
            DofModel::Similarity4 => 4,
            DofModel::Affine6 => 6,
            DofModel::Homography8 => 8,
        }
    }

    pub fn from_dof(n: usize) -> Option<DofModel> {
        DofModel::ALL.into_iter().find(|m| m.dof() == n)
    }

    /// Nearest member of the group, obtained by dropping the components the
    /// model cannot represent (rotation for 2/3 DoF, scale for 2 DoF,
    /// projective row for everything below 8 DoF).
    pub fn project(self, m: &WarpMatrix) -> WarpMatrix {
        let a = &m.0;
        match self {
            DofModel::Translation2 => WarpMatrix::translation(a[0][2], a[1][2]),
            DofModel::TransScale3 => {
                let s = (a[0][0] * a[1][1] - a[0][1] * a[1][0]).abs().sqrt();
                WarpMatrix([[s, 0.0, a[0][2]], [0.0, s, a[1][2]], [0.0, 0.0, 1.0]])
            }
            DofModel::Similarity4 => {
                // Closest scaled rotation to the linear part (Frobenius).
                let c = 0.5 * (a[0][0] + a[1][1]);
                let s = 0.5 * (a[1][0] - a[0][1]);
                WarpMatrix([[c, -s, a[0][2]], [s, c, a[1][2]], [0.0, 0.0, 1.0]])
            }
            DofModel::Affine6 => {
                WarpMatrix([a[0], a[1], [0.0, 0.0, 1.0]])
            }
            DofModel::Homography8 => {
                let k = a[2][2];
                let mut out = *m;
                if k != 0.0 && k != 1.0 {
                    for v in out.0.iter_mut().flatten() {
                        *v /= k;
                    }
                }
                out
            }
        }
    }

    /// Structural membership test, used by the closure checks.
    pub fn contains(self, m: &WarpMatrix, tol: f64) -> bool {
        let a = &m.0;
        let affine = a[2][0].abs() <= tol && a[2][1].abs() <= tol && (a[2][2] - 1.0).abs() <= tol;
        match self {
            DofModel::Translation2 => {
                affine
                    && (a[0][0] - 1.0).abs() <= tol
                    && (a[1][1] - 1.0).abs() <= tol
                    && a[0][1].abs() <= tol
                    && a[1][0].abs() <= tol
            }
            DofModel::TransScale3 => {
                affine
                    && (a[0][0] - a[1][1]).abs() <= tol
                    && a[0][1].abs() <= tol
                    && a[1][0].abs() <= tol
                    && a[0][0] > 0.0
            }
            DofModel::Similarity4 => {
                affine && (a[0][0] - a[1][1]).abs() <= tol && (a[0][1] + a[1][0]).abs() <= tol
            }
            DofModel::Affine6 => affine,
            DofModel::Homography8 => m.determinant().abs() > tol,
        }
    }
}

impl fmt::Display for DofModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.dof())
    }
}

/// Four ordered corners: top-left, top-right, bottom-right, bottom-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerQuad {
    pub corners: [Point2; 4],
}

impl CornerQuad {
    pub fn new(corners: [Point2; 4]) -> Self {
        Self { corners }
    }

    /// Axis-aligned rectangle from its top-left corner and size.
    pub fn from_rect(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self::new([
            Point2::new(x, y),
            Point2::new(x + w, y),
            Point2::new(x + w, y + h),
            Point2::new(x, y + h),
        ])
    }

    /// Rectangle of size `w × h` centred on the origin.
    pub fn centered_rect(w: f64, h: f64) -> Self {
        Self::from_rect(-0.5 * w, -0.5 * h, w, h)
    }

    pub fn from_flat(v: &[f64; 8]) -> Self {
        Self::new([
            Point2::new(v[0], v[1]),
            Point2::new(v[2], v[3]),
            Point2::new(v[4], v[5]),
            Point2::new(v[6], v[7]),
        ])
    }

    pub fn to_flat(&self) -> [f64; 8] {
        let c = &self.corners;
        [
            c[0].x, c[0].y, c[1].x, c[1].y, c[2].x, c[2].y, c[3].x, c[3].y,
        ]
    }

    /// Shoelace area; positive for the documented corner order in image
    /// coordinates (y pointing down).
    pub fn signed_area(&self) -> f64 {
        polygon_signed_area(&self.corners)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point2 {
        let c = &self.corners;
        Point2::new(
            0.25 * (c[0].x + c[1].x + c[2].x + c[3].x),
            0.25 * (c[0].y + c[1].y + c[2].y + c[3].y),
        )
    }

    pub fn is_convex(&self) -> bool {
        let c = &self.corners;
        let mut sign = 0.0f64;
        for i in 0..4 {
            let (a, b, d) = (c[i], c[(i + 1) % 4], c[(i + 2) % 4]);
            let cross = (b.x - a.x) * (d.y - b.y) - (b.y - a.y) * (d.x - b.x);
            if cross.abs() < 1e-12 {
                continue;
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
        sign != 0.0
    }

    pub fn is_valid(&self) -> bool {
        self.corners.iter().all(|p| p.is_finite()) && self.area() > 1e-9 && self.is_convex()
    }

    /// Mean lengths of the (top, bottom) and (left, right) edge pairs.
    pub fn side_lengths(&self) -> (f64, f64) {
        let c = &self.corners;
        let w = 0.5 * (c[0].dist(c[1]) + c[3].dist(c[2]));
        let h = 0.5 * (c[0].dist(c[3]) + c[1].dist(c[2]));
        (w, h)
    }

    /// In-plane angle of the top edge, degrees.
    pub fn angle(&self) -> f64 {
        let c = &self.corners;
        let d = (c[1] - c[0]) + (c[2] - c[3]);
        d.y.atan2(d.x).to_degrees()
    }

    pub fn translated(&self, d: Point2) -> Self {
        Self::new(self.corners.map(|p| p + d))
    }
}

pub(crate) fn polygon_signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

pub fn apply_warp(w: &WarpMatrix, q: &CornerQuad) -> Result<CornerQuad, GeomError> {
    let c = &q.corners;
    Ok(CornerQuad::new([
        w.apply(c[0])?,
        w.apply(c[1])?,
        w.apply(c[2])?,
        w.apply(c[3])?,
    ]))
}

/// Closed-form least-squares similarity mapping `src` onto `dst`.
///
/// Minimises `Σ ‖dst_i − s·R·src_i − t‖²`. The returned translation is the
/// matrix translation (about the image origin).
pub fn fit_similarity(src: &[Point2], dst: &[Point2]) -> Result<SimilarityParams, GeomError> {
    if src.len() != dst.len() {
        return Err(GeomError::LengthMismatch(src.len(), dst.len()));
    }
    let n = src.len();
    if n < 2 {
        return Err(GeomError::TooFewPoints { needed: 2, got: n });
    }
    let inv_n = 1.0 / n as f64;
    let mean = |pts: &[Point2]| {
        let s = pts.iter().fold(Point2::default(), |acc, &p| acc + p);
        s * inv_n
    };
    let (ms, md) = (mean(src), mean(dst));
    let (mut dot, mut cross, mut var) = (0.0, 0.0, 0.0);
    for (&s, &d) in src.iter().zip(dst) {
        let (s, d) = (s - ms, d - md);
        dot += s.x * d.x + s.y * d.y;
        cross += s.x * d.y - s.y * d.x;
        var += s.x * s.x + s.y * s.y;
    }
    let spread = src.iter().fold(0.0f64, |acc, &p| acc.max((p - ms).norm()));
    if var <= 0.0 || spread < 1e-12 * (1.0 + ms.norm()) {
        return Err(GeomError::Degenerate);
    }
    let (a, b) = (dot / var, cross / var);
    let scale = a.hypot(b);
    let rotation = b.atan2(a).to_degrees();
    let tx = md.x - (a * ms.x - b * ms.y);
    let ty = md.y - (b * ms.x + a * ms.y);
    Ok(SimilarityParams::new(tx, ty, scale, rotation))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_params_give_identity_matrix() {
        let m = params_to_matrix(&SimilarityParams::IDENTITY);
        assert_eq!(m, WarpMatrix::IDENTITY);
    }

    #[test]
    fn similarity_applied_to_unit_x() {
        let m = params_to_matrix(&SimilarityParams::new(2.0, -1.0, 1.5, 30.0));
        let p = m.apply(Point2::new(1.0, 0.0)).unwrap();
        let c30 = 30f64.to_radians().cos();
        assert!(close(p.x, 2.0 + 1.5 * c30, 1e-12));
        assert!(close(p.y, -1.0 + 1.5 * 0.5, 1e-12));
    }

    #[test]
    fn matrix_roundtrip() {
        let p = SimilarityParams::new(-3.5, 7.25, 0.8, -137.0);
        let q = matrix_to_params(&params_to_matrix(&p));
        assert!(close(p.tx, q.tx, 1e-12) && close(p.ty, q.ty, 1e-12));
        assert!(close(p.scale, q.scale, 1e-12));
        assert!(close(p.rotation, q.rotation, 1e-12));
    }

    #[test]
    fn translations_add() {
        let a = WarpMatrix::translation(3.0, 4.0);
        let b = WarpMatrix::translation(1.0, -1.0);
        assert_eq!(a.compose(&b), WarpMatrix::translation(4.0, 3.0));
    }

    #[test]
    fn invert_identity_and_singular() {
        assert_eq!(WarpMatrix::IDENTITY.invert().unwrap(), WarpMatrix::IDENTITY);
        let singular = WarpMatrix([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(singular.invert(), Err(GeomError::Singular(_))));
    }

    #[test]
    fn apply_warp_translation_and_infinity() {
        let q = CornerQuad::from_rect(0.0, 0.0, 1.0, 1.0);
        let moved = apply_warp(&WarpMatrix::translation(5.0, 0.0), &q).unwrap();
        assert_eq!(moved, CornerQuad::from_rect(5.0, 0.0, 1.0, 1.0));
        assert_eq!(apply_warp(&WarpMatrix::IDENTITY, &q).unwrap(), q);

        let h = WarpMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]);
        let at_origin = CornerQuad::from_rect(0.0, 0.0, 1.0, 1.0);
        assert_eq!(apply_warp(&h, &at_origin), Err(GeomError::PointAtInfinity));
    }

    #[test]
    fn rotation_about_centroid_keeps_centroid_and_area() {
        let q = CornerQuad::from_rect(2.0, 3.0, 4.0, 2.0);
        let c = q.centroid();
        let w = WarpMatrix::translation(c.x, c.y)
            .compose(&params_to_matrix(&SimilarityParams::new(0.0, 0.0, 1.0, 90.0)))
            .compose(&WarpMatrix::translation(-c.x, -c.y));
        let r = apply_warp(&w, &q).unwrap();
        assert!(r.centroid().dist(c) < 1e-12);
        assert!(close(r.area(), q.area(), 1e-12));
    }

    #[test]
    fn fit_similarity_identity_and_errors() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(3.0, 1.0), Point2::new(-2.0, 5.0)];
        let p = fit_similarity(&pts, &pts).unwrap();
        assert!(close(p.tx, 0.0, 1e-12) && close(p.ty, 0.0, 1e-12));
        assert!(close(p.scale, 1.0, 1e-12) && close(p.rotation, 0.0, 1e-12));

        assert!(matches!(
            fit_similarity(&pts[..1], &pts[..1]),
            Err(GeomError::TooFewPoints { .. })
        ));
        let same = [Point2::new(1.0, 1.0); 3];
        assert_eq!(fit_similarity(&same, &pts), Err(GeomError::Degenerate));
    }

    #[test]
    fn minimal_two_point_fit_is_exact() {
        let truth = SimilarityParams::new(2.0, -1.0, 1.5, 30.0);
        let m = truth.to_matrix();
        let src = [Point2::new(-4.0, 2.0), Point2::new(7.0, 9.0)];
        let dst = src.map(|p| m.apply(p).unwrap());
        let got = fit_similarity(&src, &dst).unwrap();
        assert!(close(got.tx, 2.0, 1e-9) && close(got.ty, -1.0, 1e-9));
        assert!(close(got.scale, 1.5, 1e-9) && close(got.rotation, 30.0, 1e-9));
    }

    #[test]
    fn dof_projection_lands_in_group() {
        let m = params_to_matrix(&SimilarityParams::new(4.0, -2.0, 1.3, 25.0));
        for model in DofModel::ALL {
            assert!(model.contains(&model.project(&m), 1e-12), "{model:?}");
        }
        assert_eq!(DofModel::from_dof(4), Some(DofModel::Similarity4));
        assert_eq!(DofModel::from_dof(5), None);
    }

    #[test]
    fn quad_helpers() {
        let q = CornerQuad::from_rect(0.0, 0.0, 10.0, 4.0);
        assert!(close(q.signed_area(), 40.0, 1e-12));
        assert!(q.is_convex() && q.is_valid());
        assert_eq!(q.side_lengths(), (10.0, 4.0));
        assert!(close(q.angle(), 0.0, 1e-12));
        let bow = CornerQuad::new([
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ]);
        assert!(!bow.is_convex());
    }
}
