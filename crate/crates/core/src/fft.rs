use num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::{from_usize, Scalar};

/// Forward DFT of a real sequence, zero-padded to `len`.
pub(crate) fn forward_real<T: Scalar>(x: &[T], len: usize) -> Vec<Complex<T>> {
    let mut buf: Vec<Complex<T>> = x
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
        .take(len)
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    buf
}

/// Inverse DFT including the 1/len factor.
pub(crate) fn inverse_in_place<T: Scalar>(buf: &mut [Complex<T>]) {
    let len = buf.len();
    FftPlanner::new().plan_fft_inverse(len).process(buf);
    let k = T::one() / from_usize(len);
    buf.iter_mut().for_each(|c| *c = *c * k);
}
