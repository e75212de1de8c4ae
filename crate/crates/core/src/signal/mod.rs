//! Uniformly sampled waveforms and the basic conditioning steps shared by
//! every pipeline: detrending, max-abs normalization, framing, resampling and
//! zero-phase Butterworth filtering.

mod filter;
mod resample;

pub use filter::{butterworth_lowpass_zero_phase, ButterworthLowpass};
pub use resample::{rational_ratio, resample_rational, MAX_RATIO_DENOMINATOR};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, max_abs, to_f64, Scalar};

/// What a waveform represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Pcg,
    Ecg,
    Envelope,
    Other,
}

/// A uniformly sampled real waveform.
///
/// Samples are always finite and the rate is strictly positive. `start_s` is
/// the offset of the first sample from the beginning of the recording it was
/// cut from (zero for whole recordings).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledSignal<T> {
    samples: Vec<T>,
    rate_hz: T,
    label: Label,
    start_s: T,
}

impl<T: Scalar> SampledSignal<T> {
    pub fn new(samples: Vec<T>, rate_hz: T, label: Label) -> Result<Self> {
        if !(rate_hz > T::zero()) || !rate_hz.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive and finite, got {rate_hz}"
            )));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            samples,
            rate_hz,
            label,
            start_s: T::zero(),
        })
    }

    /// Builds a signal from values already known to be finite.
    pub(crate) fn from_parts(samples: Vec<T>, rate_hz: T, label: Label, start_s: T) -> Self {
        debug_assert!(samples.iter().all(|v| v.is_finite()));
        Self {
            samples,
            rate_hz,
            label,
            start_s,
        }
    }

    /// Same rate, label and start offset, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<T>) -> Self {
        Self::from_parts(samples, self.rate_hz, self.label, self.start_s)
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn with_start(mut self, start_s: T) -> Self {
        self.start_s = start_s;
        self
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn rate_hz(&self) -> T {
        self.rate_hz
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn start_s(&self) -> T {
        self.start_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> T {
        from_usize::<T>(self.samples.len()) / self.rate_hz
    }

    pub fn nyquist_hz(&self) -> T {
        self.rate_hz / lit(2.0)
    }

    pub(crate) fn require_non_empty(&self) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::InvalidInput("signal has no samples".into()))
        } else {
            Ok(())
        }
    }

    /// Time-reversed copy.
    pub fn reversed(&self) -> Self {
        let mut s = self.samples.clone();
        s.reverse();
        self.with_samples(s)
    }

    /// Multiplies every sample by `k`.
    pub fn scaled(&self, k: T) -> Self {
        self.with_samples(self.samples.iter().map(|&v| v * k).collect())
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> SampledSignal<U> {
        let conv = |v: T| U::from_f64(to_f64(v)).expect("finite value");
        SampledSignal::from_parts(
            self.samples.iter().map(|&v| conv(v)).collect(),
            conv(self.rate_hz),
            self.label,
            conv(self.start_s),
        )
    }
}

/// Removes the least-squares straight line from the signal.
pub fn detrend<T: Scalar>(s: &SampledSignal<T>) -> Result<SampledSignal<T>> {
    s.require_non_empty()?;
    let n = s.len();
    let centre = from_usize::<T>(n - 1) / lit(2.0);
    let mean = crate::scalar::mean(s.samples());
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (i, &v) in s.samples().iter().enumerate() {
        let t = from_usize::<T>(i) - centre;
        sxy = sxy + t * (v - mean);
        sxx = sxx + t * t;
    }
    let slope = if sxx > T::zero() { sxy / sxx } else { T::zero() };
    let out = s
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &v)| v - mean - slope * (from_usize::<T>(i) - centre))
        .collect();
    Ok(s.with_samples(out))
}

/// Result of [`normalize_max_abs`]: the rescaled signal and the divisor used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalized<T> {
    pub signal: SampledSignal<T>,
    /// Maximum absolute amplitude of the input; `signal = input / scale`.
    pub scale: T,
}

/// Divides the signal by its maximum absolute amplitude.
pub fn normalize_max_abs<T: Scalar>(s: &SampledSignal<T>) -> Result<Normalized<T>> {
    s.require_non_empty()?;
    let scale = max_abs(s.samples());
    if scale <= T::zero() {
        return Err(Error::DegenerateSignal(
            "cannot normalize an all-zero signal".into(),
        ));
    }
    let signal = s.with_samples(s.samples().iter().map(|&v| v / scale).collect());
    Ok(Normalized { signal, scale })
}

/// Frame length and hop, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub frame_len_s: f64,
    pub hop_s: f64,
}

impl FramePlan {
    /// Back-to-back frames of `frame_len_s`.
    pub fn non_overlapping(frame_len_s: f64) -> Self {
        Self {
            frame_len_s,
            hop_s: frame_len_s,
        }
    }

    fn validate(&self, rate_hz: f64) -> Result<(usize, usize)> {
        if !(self.frame_len_s > 0.0) || !(self.hop_s > 0.0) {
            return Err(Error::InvalidInput(
                "frame length and hop must be positive".into(),
            ));
        }
        if self.hop_s > self.frame_len_s {
            return Err(Error::InvalidInput(
                "hop must not exceed the frame length".into(),
            ));
        }
        let len = (self.frame_len_s * rate_hz).round() as usize;
        let hop = ((self.hop_s * rate_hz).round() as usize).max(1);
        if len < 2 {
            return Err(Error::InvalidInput(format!(
                "frame of {} s at {rate_hz} Hz holds fewer than 2 samples",
                self.frame_len_s
            )));
        }
        Ok((len, hop))
    }
}

impl Default for FramePlan {
    fn default() -> Self {
        Self::non_overlapping(4.0)
    }
}

/// Cuts the signal into frames; a trailing partial frame is dropped.
pub fn segment_frames<T: Scalar>(
    s: &SampledSignal<T>,
    plan: FramePlan,
) -> Result<Vec<SampledSignal<T>>> {
    let rate = to_f64(s.rate_hz());
    let (len, hop) = plan.validate(rate)?;
    if s.len() < len {
        return Err(Error::TooShort {
            available_s: s.len() as f64 / rate,
            frame_s: plan.frame_len_s,
        });
    }
    let count = (s.len() - len) / hop + 1;
    Ok((0..count)
        .map(|k| {
            let start = k * hop;
            SampledSignal::from_parts(
                s.samples()[start..start + len].to_vec(),
                s.rate_hz(),
                s.label(),
                s.start_s() + from_usize::<T>(start) / s.rate_hz(),
            )
        })
        .collect())
}
