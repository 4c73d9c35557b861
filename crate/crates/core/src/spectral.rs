//! FFT plumbing shared by the propagator, observables and the CSL noise field.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::qstate::Grid1D;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward/inverse pair for one transform length. The inverse is normalized.
#[derive(Clone)]
pub(crate) struct Fft1d {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fft1d {
    pub(crate) fn new(n: usize) -> Self {
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        });
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Fft1d {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// Transforms every contiguous length-`n` row of `buf`.
    pub(crate) fn forward(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    pub(crate) fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }
}

/// Angular wavenumbers in FFT order.
pub(crate) fn wavenumbers(grid: &Grid1D) -> Vec<f64> {
    let n = grid.n_points();
    let dk = 2.0 * PI / (n as f64 * grid.dx());
    (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            m * dk
        })
        .collect()
}

/// In-place transpose of a square row-major matrix.
pub(crate) fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Circular convolution with a fixed real kernel, done in Fourier space.
#[derive(Clone)]
pub(crate) struct PeriodicConvolver {
    fft: Fft1d,
    kernel_hat: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl PeriodicConvolver {
    /// `kernel[k]` is the kernel value at offset `k` (mod n).
    pub(crate) fn new(kernel: &[f64]) -> Self {
        let n = kernel.len();
        let mut fft = Fft1d::new(n);
        let mut kernel_hat: Vec<Complex64> = kernel.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut kernel_hat);
        PeriodicConvolver {
            fft,
            kernel_hat,
            buf: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// out[j] = sum_l kernel[(j - l) mod n] * input[l]
    pub(crate) fn convolve(&mut self, input: &[f64], out: &mut [f64]) {
        for (b, &v) in self.buf.iter_mut().zip(input) {
            *b = Complex64::new(v, 0.0);
        }
        self.fft.forward(&mut self.buf);
        for (b, k) in self.buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.fft.inverse(&mut self.buf);
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re;
        }
    }
}
