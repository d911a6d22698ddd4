use std::f64::consts::PI;

use super::{gradient, FeatureMap, GrayImage, ImageError};

/// Unsigned orientation bins per cell.
pub const HOG_BINS: usize = 9;
/// Orientation bins plus the mean-intensity channel.
pub const HOG_CHANNELS: usize = HOG_BINS + 1;

const NORM_EPS: f64 = 1e-6;
const CLIP: f64 = 0.2;

/// Cell-wise HOG with 2×2 block normalisation and a mean-intensity channel.
///
/// Each pixel votes its gradient magnitude bilinearly into the two nearest
/// orientation bins and the four nearest cells. A cell's final histogram is
/// the average of its normalised share in each of the four blocks that cover
/// it (L2, clip at 0.2, L2 again). Blocks at the border reuse clamped cells.
pub fn hog(patch: &GrayImage, cell: usize) -> Result<FeatureMap, ImageError> {
    let (w, h) = patch.dimensions();
    let cell = cell.max(1);
    let (nx, ny) = (w / cell, h / cell);
    if nx == 0 || ny == 0 {
        return Err(ImageError::PatchTooSmall {
            width: w,
            height: h,
            cell,
        });
    }

    let (gx, gy) = gradient(patch);
    let mut hist = vec![0.0; nx * ny * HOG_BINS];
    let mut intensity = vec![0.0; nx * ny];
    let inv_cell = 1.0 / cell as f64;
    let bin_width = PI / HOG_BINS as f64;

    for y in 0..ny * cell {
        let fy = (y as f64 + 0.5) * inv_cell - 0.5;
        let cy0 = fy.floor();
        let wy = fy - cy0;
        let cy0 = cy0 as isize;
        let rows = [
            (cy0.clamp(0, ny as isize - 1) as usize, 1.0 - wy),
            ((cy0 + 1).clamp(0, ny as isize - 1) as usize, wy),
        ];
        for x in 0..nx * cell {
            intensity[(y / cell) * nx + x / cell] += patch.get(x, y);

            let (dx, dy) = (gx.get(x, y), gy.get(x, y));
            let mag = dx.hypot(dy);
            if mag == 0.0 {
                continue;
            }
            let mut angle = dy.atan2(dx);
            if angle < 0.0 {
                angle += PI;
            }
            let b = angle / bin_width;
            let b0f = b.floor();
            let wb = b - b0f;
            let b0 = (b0f as usize) % HOG_BINS;
            let b1 = (b0 + 1) % HOG_BINS;

            let fx = (x as f64 + 0.5) * inv_cell - 0.5;
            let cx0 = fx.floor();
            let wx = fx - cx0;
            let cx0 = cx0 as isize;
            let cols = [
                (cx0.clamp(0, nx as isize - 1) as usize, 1.0 - wx),
                ((cx0 + 1).clamp(0, nx as isize - 1) as usize, wx),
            ];
            for &(cy, wyy) in &rows {
                for &(cx, wxx) in &cols {
                    let wgt = mag * wyy * wxx;
                    if wgt == 0.0 {
                        continue;
                    }
                    let base = (cy * nx + cx) * HOG_BINS;
                    hist[base + b0] += wgt * (1.0 - wb);
                    hist[base + b1] += wgt * wb;
                }
            }
        }
    }

    // Normalised block for every block origin in [-1, n-1]².
    let (bw, bh) = (nx + 1, ny + 1);
    let mut blocks = vec![0.0; bw * bh * 4 * HOG_BINS];
    let clamp_x = |v: isize| v.clamp(0, nx as isize - 1) as usize;
    let clamp_y = |v: isize| v.clamp(0, ny as isize - 1) as usize;
    let mut v = [0.0; 4 * HOG_BINS];
    for oy in 0..bh {
        for ox in 0..bw {
            let (bx, by) = (ox as isize - 1, oy as isize - 1);
            for (k, (ddx, ddy)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                let c = clamp_y(by + ddy) * nx + clamp_x(bx + ddx);
                v[k * HOG_BINS..(k + 1) * HOG_BINS]
                    .copy_from_slice(&hist[c * HOG_BINS..(c + 1) * HOG_BINS]);
            }
            l2_normalize(&mut v);
            for e in v.iter_mut() {
                *e = e.min(CLIP);
            }
            l2_normalize(&mut v);
            let off = (oy * bw + ox) * 4 * HOG_BINS;
            blocks[off..off + 4 * HOG_BINS].copy_from_slice(&v);
        }
    }

    let mut out = FeatureMap::zeros(nx, ny, HOG_CHANNELS);
    let inv_area = 1.0 / (cell * cell) as f64;
    for cy in 0..ny {
        for cx in 0..nx {
            // The cell sits at slot (1-dx, 1-dy) of the block with origin (cx-1+dx, cy-1+dy).
            let mut acc = [0.0; HOG_BINS];
            for (ddx, ddy) in [(0usize, 0usize), (1, 0), (0, 1), (1, 1)] {
                let (ox, oy) = (cx + ddx, cy + ddy);
                let slot = (1 - ddx) + 2 * (1 - ddy);
                let off = (oy * bw + ox) * 4 * HOG_BINS + slot * HOG_BINS;
                for (a, &b) in acc.iter_mut().zip(&blocks[off..off + HOG_BINS]) {
                    *a += 0.25 * b;
                }
            }
            for (bin, &val) in acc.iter().enumerate() {
                out.set(bin, cx, cy, val);
            }
            out.set(HOG_BINS, cx, cy, intensity[cy * nx + cx] * inv_area);
        }
    }
    Ok(out)
}

fn l2_normalize(v: &mut [f64]) {
    let norm = (v.iter().map(|x| x * x).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 + 0.2 * (0.37 * x + 0.11 * y).sin() + 0.15 * (0.23 * y - 0.41 * x).cos()
        })
    }

    #[test]
    fn constant_patch() {
        let f = hog(&GrayImage::filled(16, 12, 0.42), 4).unwrap();
        assert_eq!(f.shape(), (4, 3, HOG_CHANNELS));
        for c in 0..HOG_BINS {
            assert!(f.channel(c).iter().all(|&v| v.abs() < 1e-12));
        }
        assert!(f.channel(HOG_BINS).iter().all(|&v| (v - 0.42).abs() < 1e-12));
    }

    #[test]
    fn vertical_edge_votes_horizontal_gradient_bin() {
        let img = GrayImage::from_fn(16, 16, |x, _| if x < 8 { 0.1 } else { 0.9 });
        let f = hog(&img, 4).unwrap();
        let mut energy = [0.0; HOG_BINS];
        for (b, e) in energy.iter_mut().enumerate() {
            *e = f.channel(b).iter().sum();
        }
        let best = (0..HOG_BINS)
            .max_by(|&a, &b| energy[a].total_cmp(&energy[b]))
            .unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn values_bounded() {
        let f = hog(&texture(24, 20), 4).unwrap();
        assert!(f.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn gradient_channels_ignore_offset_and_gain() {
        let base = texture(32, 24);
        let a = hog(&base, 4).unwrap();
        let shifted = hog(&base.map(|v| v + 0.25), 4).unwrap();
        let scaled = hog(&base.map(|v| 1.7 * v), 4).unwrap();
        for c in 0..HOG_BINS {
            for ((x, y), z) in a.channel(c).iter().zip(shifted.channel(c)).zip(scaled.channel(c)) {
                assert!((x - y).abs() < 1e-9);
                assert!((x - z).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            hog(&GrayImage::new(3, 8), 4),
            Err(ImageError::PatchTooSmall { .. })
        ));
    }
}
