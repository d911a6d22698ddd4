//! Exact-size 2D FFTs over row-major grids (1D when `height == 1`).

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fft2({}x{})", self.width, self.height)
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            row_fwd: plan(width, false),
            row_inv: plan(width, true),
            col_fwd: plan(height, false),
            col_inv: plan(height, true),
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&mut buf, false);
        buf
    }

    /// Unnormalised transform in place; `inverse` divides by `len()`.
    pub fn run(&self, buf: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(buf.len(), self.len());
        let (w, h) = (self.width, self.height);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        if w > 1 {
            row.process(buf);
        }
        if h > 1 {
            let mut column = vec![Complex64::default(); h];
            for x in 0..w {
                for (y, c) in column.iter_mut().enumerate() {
                    *c = buf[y * w + x];
                }
                col.process(&mut column);
                for (y, c) in column.iter().enumerate() {
                    buf[y * w + x] = *c;
                }
            }
        }
        if inverse {
            let k = 1.0 / self.len() as f64;
            for v in buf.iter_mut() {
                *v *= k;
            }
        }
    }
}
