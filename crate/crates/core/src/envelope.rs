//! PCG envelope detectors (Hilbert amplitude, Shannon energy, wavelet energy
//! spectrum) and the shared zero-phase smoothing step.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{forward_real, inverse_in_place};
use crate::scalar::{lit, max_abs, to_f64, Scalar};
use crate::signal::{butterworth_lowpass_zero_phase, Label, SampledSignal};
use crate::wavelets::{wes, ScaleGrid, WaveletKind};

/// Added inside the Shannon-energy logarithm.
pub const SHANNON_EPS: f64 = 1e-12;
pub const DEFAULT_SMOOTHING_HZ: f64 = 20.0;
pub const DEFAULT_SMOOTHING_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EnvelopeMethod {
    Hilbert,
    Shannon,
    Wes,
}

impl EnvelopeMethod {
    pub const ALL: [EnvelopeMethod; 3] = [Self::Hilbert, Self::Shannon, Self::Wes];

    pub fn name(self) -> &'static str {
        match self {
            Self::Hilbert => "hilbert",
            Self::Shannon => "shannon",
            Self::Wes => "wes",
        }
    }
}

impl std::str::FromStr for EnvelopeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hilbert" => Ok(Self::Hilbert),
            "shannon" => Ok(Self::Shannon),
            "wes" => Ok(Self::Wes),
            other => Err(Error::Config(format!("unknown envelope method {other:?}"))),
        }
    }
}

/// Amplitude track of a frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope<T> {
    pub track: SampledSignal<T>,
    pub method: EnvelopeMethod,
    /// Cutoff of the smoothing filter, once applied.
    pub smoothing_cutoff_hz: Option<f64>,
}

impl<T: Scalar> Envelope<T> {
    fn raw(track: SampledSignal<T>, method: EnvelopeMethod) -> Self {
        Self {
            track: track.with_label(Label::Envelope),
            method,
            smoothing_cutoff_hz: None,
        }
    }

    pub fn samples(&self) -> &[T] {
        self.track.samples()
    }

    pub fn rate_hz(&self) -> T {
        self.track.rate_hz()
    }
}

/// Quadrature component via the FFT analytic signal: negative frequencies
/// zeroed, positive ones doubled, DC and Nyquist kept.
pub fn hilbert_quadrature<T: Scalar>(x: &[T]) -> Vec<T> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut spec = forward_real(x, n);
    let two = lit::<T>(2.0);
    let half = n / 2;
    let doubled_end = if n % 2 == 0 { half } else { half + 1 };
    for (k, c) in spec.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            continue;
        }
        *c = if k < doubled_end {
            *c * two
        } else {
            Complex::new(T::zero(), T::zero())
        };
    }
    inverse_in_place(&mut spec);
    spec.into_iter().map(|c| c.im).collect()
}

/// Instantaneous amplitude `sqrt(x^2 + H{x}^2)`.
pub fn hilbert_envelope<T: Scalar>(frame: &SampledSignal<T>) -> Result<Envelope<T>> {
    frame.require_non_empty()?;
    let q = hilbert_quadrature(frame.samples());
    let e = frame
        .samples()
        .iter()
        .zip(q)
        .map(|(&a, b)| (a * a + b * b).sqrt())
        .collect();
    Ok(Envelope::raw(frame.with_samples(e), EnvelopeMethod::Hilbert))
}

/// Shannon energy `-x^2 ln(x^2 + eps)`. The frame must already be scaled to
/// `max|x| <= 1`; values that round below zero at `|x| = 1` are clamped.
pub fn shannon_energy_envelope<T: Scalar>(frame: &SampledSignal<T>) -> Result<Envelope<T>> {
    frame.require_non_empty()?;
    let peak = to_f64(max_abs(frame.samples()));
    if peak > 1.0 + 1e-9 {
        return Err(Error::ContractViolation(format!(
            "Shannon energy needs max|x| <= 1, got {peak}"
        )));
    }
    let eps = lit::<T>(SHANNON_EPS);
    let e = frame
        .samples()
        .iter()
        .map(|&x| {
            let u = x * x;
            (-u * (u + eps).ln()).max(T::zero())
        })
        .collect();
    Ok(Envelope::raw(frame.with_samples(e), EnvelopeMethod::Shannon))
}

/// Wavelet energy spectrum over the default PCG scale grid.
pub fn wes_envelope<T: Scalar>(frame: &SampledSignal<T>, kind: &WaveletKind) -> Result<Envelope<T>> {
    let grid = ScaleGrid::pcg_default(kind, to_f64(frame.rate_hz()))?;
    Ok(Envelope::raw(wes(frame, kind, &grid)?, EnvelopeMethod::Wes))
}

/// Unsmoothed envelope by `method`; `kind` is only used for WES.
pub fn envelope<T: Scalar>(
    frame: &SampledSignal<T>,
    method: EnvelopeMethod,
    kind: &WaveletKind,
) -> Result<Envelope<T>> {
    match method {
        EnvelopeMethod::Hilbert => hilbert_envelope(frame),
        EnvelopeMethod::Shannon => shannon_energy_envelope(frame),
        EnvelopeMethod::Wes => wes_envelope(frame, kind),
    }
}

/// Zero-phase Butterworth smoothing; negative filter overshoot is clipped.
pub fn smooth<T: Scalar>(e: &Envelope<T>, cutoff_hz: f64, order: usize) -> Result<Envelope<T>> {
    let y = butterworth_lowpass_zero_phase(&e.track, cutoff_hz, order)?;
    let clipped = y.samples().iter().map(|&v| v.max(T::zero())).collect();
    Ok(Envelope {
        track: y.with_samples(clipped),
        method: e.method,
        smoothing_cutoff_hz: Some(cutoff_hz),
    })
}

/// Rescales to a maximum of 1. An all-zero envelope is returned unchanged.
pub fn renormalize<T: Scalar>(e: &Envelope<T>) -> Envelope<T> {
    let peak = max_abs(e.samples());
    if peak == T::zero() {
        return e.clone();
    }
    Envelope {
        track: e.track.scaled(T::one() / peak),
        ..e.clone()
    }
}
