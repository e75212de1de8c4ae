use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Scalar};
use crate::signal::{Label, SampledSignal};

/// `pi^(-1/4) * sqrt(2 pi)`.
const MORLET_NORM: f64 = 1.882_792_527_553_429_4;

/// Analytic mother wavelet, defined by its Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "UPPERCASE")]
pub enum WaveletKind {
    Morlet { center_freq_param: f64 },
    Morse { gamma: f64, beta: f64 },
    Bump { mu: f64, sigma: f64 },
}

impl WaveletKind {
    pub const fn morlet() -> Self {
        WaveletKind::Morlet {
            center_freq_param: 6.0,
        }
    }

    pub const fn morse() -> Self {
        WaveletKind::Morse {
            gamma: 3.0,
            beta: 20.0,
        }
    }

    pub const fn bump() -> Self {
        WaveletKind::Bump { mu: 5.0, sigma: 0.6 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WaveletKind::Morlet { .. } => "morlet",
            WaveletKind::Morse { .. } => "morse",
            WaveletKind::Bump { .. } => "bump",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params: &[f64] = match self {
            WaveletKind::Morlet { center_freq_param } => &[*center_freq_param],
            WaveletKind::Morse { gamma, beta } => &[*gamma, *beta],
            WaveletKind::Bump { mu, sigma } => {
                if sigma >= mu {
                    return Err(Error::InvalidInput(
                        "bump wavelet needs sigma < mu to stay analytic".into(),
                    ));
                }
                &[*mu, *sigma]
            }
        };
        if params.iter().all(|p| *p > 0.0 && p.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "wavelet shape parameters must be positive: {self:?}"
            )))
        }
    }

    /// Angular frequency (radians per unit time at scale 1) where the
    /// spectrum peaks.
    pub fn peak_omega(&self) -> f64 {
        match *self {
            WaveletKind::Morlet { center_freq_param } => center_freq_param,
            WaveletKind::Morse { gamma, beta } => (beta / gamma).powf(1.0 / gamma),
            WaveletKind::Bump { mu, .. } => mu,
        }
    }

    /// Fourier transform of the mother wavelet; zero for non-positive
    /// frequencies.
    pub fn spectrum(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        match *self {
            WaveletKind::Morlet { center_freq_param } => {
                MORLET_NORM * (-0.5 * (omega - center_freq_param).powi(2)).exp()
            }
            WaveletKind::Morse { gamma, beta } => {
                // Normalized so the peak value is 2.
                let log_a = (beta / gamma) * (1.0 + gamma.ln() - beta.ln());
                2.0 * (log_a + beta * omega.ln() - omega.powf(gamma)).exp()
            }
            WaveletKind::Bump { mu, sigma } => {
                let u = (omega - mu) / sigma;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - u * u)).exp()
                }
            }
        }
    }

    /// Angular-frequency interval outside which the spectrum stays below
    /// 1e-16 of its peak value.
    pub fn passband(&self) -> (f64, f64) {
        const REL: f64 = 1e-16;
        let peak = self.peak_omega();
        let floor = REL * self.spectrum(peak);
        let above = |w: f64| self.spectrum(w) > floor;
        let mut hi = 2.0 * peak;
        while above(hi) {
            hi *= 2.0;
        }
        let (mut a, mut b) = (peak, hi);
        let (mut c, mut d) = (0.0, peak);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if above(m) { a = m } else { b = m }
            let m = 0.5 * (c + d);
            if above(m) { d = m } else { c = m }
        }
        (c, b)
    }

    /// Half-width, in units of scale, outside which the time-domain wavelet
    /// magnitude stays below 1e-4 of its peak.
    pub fn support_per_scale(&self) -> f64 {
        const REF_SCALE: f64 = 32.0;
        const LEN: usize = 1 << 14;
        let mut buf: Vec<Complex<f64>> = (0..LEN)
            .map(|k| {
                let omega = 2.0 * PI * k as f64 / LEN as f64;
                let omega = if k > LEN / 2 { omega - 2.0 * PI } else { omega };
                Complex::new(self.spectrum(REF_SCALE * omega), 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_inverse(LEN).process(&mut buf);
        let mag: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
        let peak = mag.iter().cloned().fold(0.0, f64::max);
        // Time lag t maps to index t (positive) and LEN - t (negative).
        let half = (1..LEN / 2)
            .rev()
            .find(|&t| mag[t].max(mag[LEN - t]) > 1e-4 * peak)
            .unwrap_or(1);
        (half + 1) as f64 / REF_SCALE
    }
}

impl Default for WaveletKind {
    fn default() -> Self {
        Self::morlet()
    }
}

/// Scales and their pseudo-frequencies, highest frequency first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleGrid {
    /// Scales in samples.
    scales: Vec<f64>,
    pseudo_freqs_hz: Vec<f64>,
}

impl ScaleGrid {
    pub const DEFAULT_LOW_HZ: f64 = 10.0;
    pub const DEFAULT_HIGH_HZ: f64 = 500.0;
    pub const DEFAULT_COUNT: usize = 64;

    /// Grid whose scales put the wavelet's spectral peak on each requested
    /// frequency. Frequencies must be strictly decreasing, positive and below
    /// the Nyquist frequency.
    pub fn for_frequencies(kind: &WaveletKind, rate_hz: f64, freqs_hz: Vec<f64>) -> Result<Self> {
        kind.validate()?;
        if freqs_hz.is_empty() {
            return Err(Error::InvalidGrid("no scales".into()));
        }
        if freqs_hz.iter().any(|f| !(*f > 0.0 && *f < rate_hz / 2.0)) {
            return Err(Error::InvalidGrid(format!(
                "pseudo-frequencies must lie in (0, {}) Hz",
                rate_hz / 2.0
            )));
        }
        if freqs_hz.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidGrid(
                "pseudo-frequencies must be strictly decreasing".into(),
            ));
        }
        let peak = kind.peak_omega();
        let scales = freqs_hz
            .iter()
            .map(|f| peak * rate_hz / (2.0 * PI * f))
            .collect();
        Ok(Self {
            scales,
            pseudo_freqs_hz: freqs_hz,
        })
    }

    /// `count` log-spaced pseudo-frequencies from `high_hz` down to `low_hz`.
    pub fn log_spaced(
        kind: &WaveletKind,
        rate_hz: f64,
        low_hz: f64,
        high_hz: f64,
        count: usize,
    ) -> Result<Self> {
        if count < 2 || !(low_hz > 0.0 && low_hz < high_hz) {
            return Err(Error::InvalidGrid(format!(
                "need count >= 2 and 0 < low < high, got {count}, {low_hz}, {high_hz}"
            )));
        }
        let ratio = (low_hz / high_hz).ln() / (count - 1) as f64;
        let freqs = (0..count)
            .map(|i| high_hz * (ratio * i as f64).exp())
            .collect();
        Self::for_frequencies(kind, rate_hz, freqs)
    }

    /// 64 log-spaced pseudo-frequencies from 10 to 500 Hz (the top is lowered
    /// to 0.45 of the sample rate when 500 Hz is not representable).
    pub fn pcg_default(kind: &WaveletKind, rate_hz: f64) -> Result<Self> {
        let high = Self::DEFAULT_HIGH_HZ.min(0.45 * rate_hz);
        Self::log_spaced(kind, rate_hz, Self::DEFAULT_LOW_HZ, high, Self::DEFAULT_COUNT)
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn pseudo_freqs_hz(&self) -> &[f64] {
        &self.pseudo_freqs_hz
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }
}

/// CWT coefficients, one row per scale in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct CwtMatrix<T> {
    pub rows: Vec<Vec<Complex<T>>>,
    /// Per-scale range of samples farther than one wavelet support from
    /// either end of the signal. Empty when the support exceeds half the
    /// signal.
    pub valid: Vec<std::ops::Range<usize>>,
}

/// Reusable per-signal FFT state for evaluating many scales.
struct Transform<T: Scalar> {
    spectrum: Vec<Complex<T>>,
    inverse: Arc<dyn Fft<T>>,
    len: usize,
    n: usize,
}

impl<T: Scalar> Transform<T> {
    fn new(x: &[T], max_support: usize) -> Self {
        let n = x.len();
        // Outputs 0..n read inputs up to `max_support` away on either side;
        // n + max_support + 1 points keep the circular wrap outside 0..n.
        let len = (n + max_support + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let mut spectrum: Vec<Complex<T>> = x
            .iter()
            .map(|&v| Complex::new(v, T::zero()))
            .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
            .take(len)
            .collect();
        planner.plan_fft_forward(len).process(&mut spectrum);
        Self {
            spectrum,
            inverse: planner.plan_fft_inverse(len),
            len,
            n,
        }
    }

    /// Coefficients at one scale: IFFT of X(w) * sqrt(s) * conj(Psi(s w)).
    fn row(&self, kind: &WaveletKind, scale: f64) -> Vec<Complex<T>> {
        let root = scale.sqrt();
        let (lo, hi) = kind.passband();
        let step = 2.0 * PI / self.len as f64;
        let first = ((lo / (scale * step)).ceil() as usize).max(1);
        let last = ((hi / (scale * step)).floor() as usize).min(self.len / 2 - 1);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.len];
        for k in first..=last {
            let psi = root * kind.spectrum(scale * step * k as f64);
            buf[k] = self.spectrum[k] * lit::<T>(psi);
        }
        self.inverse.process(&mut buf);
        let norm = T::one() / from_usize(self.len);
        buf.truncate(self.n);
        buf.iter_mut().for_each(|c| *c = *c * norm);
        buf
    }
}

fn check_inputs<T: Scalar>(s: &SampledSignal<T>, kind: &WaveletKind, grid: &ScaleGrid) -> Result<()> {
    s.require_non_empty()?;
    kind.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidGrid("no scales".into()));
    }
    Ok(())
}

fn max_support(kind: &WaveletKind, grid: &ScaleGrid) -> (f64, usize) {
    let per_scale = kind.support_per_scale();
    let max_scale = grid.scales.iter().cloned().fold(0.0, f64::max);
    (per_scale, (per_scale * max_scale).ceil() as usize)
}

/// Continuous wavelet transform with 1/sqrt(s) normalization, evaluated by
/// zero-padded FFT convolution with the conjugated, time-reversed wavelet.
pub fn cwt<T: Scalar>(
    s: &SampledSignal<T>,
    kind: &WaveletKind,
    grid: &ScaleGrid,
) -> Result<CwtMatrix<T>> {
    check_inputs(s, kind, grid)?;
    let (per_scale, support) = max_support(kind, grid);
    let t = Transform::new(s.samples(), support);
    let n = s.len();
    let mut rows = Vec::with_capacity(grid.len());
    let mut valid = Vec::with_capacity(grid.len());
    for &scale in grid.scales() {
        rows.push(t.row(kind, scale));
        let edge = (per_scale * scale).ceil() as usize;
        valid.push(if 2 * edge < n { edge..n - edge } else { 0..0 });
    }
    Ok(CwtMatrix { rows, valid })
}

/// Wavelet energy spectrum: the sum over scales of squared coefficient
/// magnitudes, divided by the number of samples N.
pub fn wes<T: Scalar>(
    s: &SampledSignal<T>,
    kind: &WaveletKind,
    grid: &ScaleGrid,
) -> Result<SampledSignal<T>> {
    check_inputs(s, kind, grid)?;
    let (_, support) = max_support(kind, grid);
    let t = Transform::new(s.samples(), support);
    let n = s.len();
    let mut acc = vec![T::zero(); n];
    for &scale in grid.scales() {
        for (a, c) in acc.iter_mut().zip(t.row(kind, scale)) {
            *a = *a + c.norm_sqr();
        }
    }
    let inv_n = T::one() / from_usize(n);
    acc.iter_mut().for_each(|v| *v = *v * inv_n);
    if let Some(i) = acc.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    Ok(s.with_samples(acc).with_label(Label::Envelope))
}
