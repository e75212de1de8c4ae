//! Phonocardiogram (PCG) analysis toolkit.
//!
//! The crate covers the full batch pipeline from recorded heart sounds to
//! heart-rate and blood-pressure estimates:
//!
//! - [`signal`]: waveform type, detrending, normalization, framing,
//!   resampling and zero-phase Butterworth filtering
//! - [`io`]: WAV/ECG ingestion, dataset layout, ECG/PCG stream alignment
//! - [`wavelets`]: db4 denoising, continuous wavelet transform, wavelet
//!   energy spectrum
//! - [`envelope`]: Hilbert, Shannon-energy and wavelet-energy envelopes
//! - [`segmentation`]: peak picking, S1/S2 labeling, timing features
//! - [`hr`]: heart rate from ECG and from PCG segmentation
//! - [`bp`]: semi-empirical SBP/DBP regression, fitting and LOOCV
//! - [`quality`]: spectral band, STFT, MFCC, NRMSE and SNR checks
//! - [`eval`]: agreement statistics (Pearson, MAE/RMSE, Bland-Altman, box)
//! - [`synth`]: seeded synthetic PCG/ECG generator with ground truth
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations.

pub mod bp;
pub mod envelope;
pub mod error;
pub mod eval;
mod fft;
pub mod hr;
pub mod io;
pub mod quality;
pub mod scalar;
pub mod segmentation;
pub mod signal;
pub mod synth;
pub mod wavelets;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use signal::{Label, SampledSignal};

/// Double-precision waveform.
pub type Signal = SampledSignal<f64>;
/// Single-precision waveform.
pub type SignalF32 = SampledSignal<f32>;
/// Double-precision envelope.
pub type Envelope = envelope::Envelope<f64>;
pub type CycleSegmentation = segmentation::CycleSegmentation<f64>;
pub type PcgFeatureVector = bp::PcgFeatureVector<f64>;
pub type BpCoefficients = bp::BpCoefficients<f64>;
pub type AgreementReport = eval::AgreementReport<f64>;
