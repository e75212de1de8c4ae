//! Wavelet tools: db4 soft-threshold denoising and analytic continuous
//! wavelet transforms (Morlet, Morse, Bump) with the wavelet energy spectrum.

mod cwt;
mod dwt;

pub use cwt::{cwt, wes, CwtMatrix, ScaleGrid, WaveletKind};
pub use dwt::{dwt_db4, dwt_denoise_db4, idwt_db4, Decomposition};
