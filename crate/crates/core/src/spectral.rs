use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse FFT pair of a fixed length with its own scratch buffer.
/// Neither direction is normalised.
pub(crate) struct Fourier {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// `X_k = Σ_j x_j e^{-2πi jk/n}`
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// `x_j = Σ_k X_k e^{+2πi jk/n}`
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }
}

/// Signed frequency index for FFT bin `k` of an `n`-point transform.
pub(crate) fn signed_index(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// FFT bin holding signed frequency index `k`.
pub(crate) fn bin_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// `e^{-i·phase}`
pub(crate) fn phase(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, -theta)
}
