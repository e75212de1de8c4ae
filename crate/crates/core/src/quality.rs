//! Recording validation: spectral band, spectrogram, MFCC, energy spectrum,
//! WES-versus-ES NRMSE and per-frame SNR.

use std::collections::BTreeMap;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::envelope::EnvelopeMethod;
use crate::error::{Error, Result};
use crate::fft::forward_real;
use crate::hr::{hr_pipeline, HrFormula, PipelineParams};
use crate::scalar::{lit, to_f64, Scalar};
use crate::segmentation::{CycleSegmentation, PeakLabel};
use crate::signal::{segment_frames, FramePlan, Label, SampledSignal};
use crate::wavelets::{wes, ScaleGrid, WaveletKind};

pub const FFT_BAND_MIN_LEN: usize = 256;
pub const STFT_WINDOW: usize = 256;
pub const STFT_HOP: usize = 128;
pub const MFCC_FLOOR: f64 = 1e-10;
/// Reported SNRs are clamped to +/- this many dB.
pub const SNR_CAP_DB: f64 = 60.0;

fn hann_symmetric(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Lowest and highest frequency whose Hann-windowed magnitude reaches
/// `rel_threshold` of the spectral peak, DC excluded.
pub fn fft_band<T: Scalar>(frame: &SampledSignal<T>, rel_threshold: f64) -> Result<(f64, f64)> {
    let n = frame.len();
    if n < FFT_BAND_MIN_LEN {
        return Err(Error::InvalidInput(format!(
            "frame of {n} samples is shorter than {FFT_BAND_MIN_LEN}"
        )));
    }
    if !(rel_threshold > 0.0 && rel_threshold <= 1.0) {
        return Err(Error::Config(format!(
            "relative threshold must lie in (0, 1], got {rel_threshold}"
        )));
    }
    let w = hann_symmetric(n);
    let x: Vec<f64> = frame
        .samples()
        .iter()
        .zip(&w)
        .map(|(&v, &w)| to_f64(v) * w)
        .collect();
    let len = n.next_power_of_two();
    let spec = forward_real(&x, len);
    let mag: Vec<f64> = spec[1..=len / 2].iter().map(|c| c.norm()).collect();
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::DegenerateSignal("frame has no non-DC content".into()));
    }
    let level = rel_threshold * peak;
    let lo = mag.iter().position(|&m| m >= level).unwrap();
    let hi = mag.iter().rposition(|&m| m >= level).unwrap();
    let df = to_f64(frame.rate_hz()) / len as f64;
    Ok(((lo + 1) as f64 * df, (hi + 1) as f64 * df))
}

/// STFT magnitudes, one column per window position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrogram<T> {
    /// `columns[c][k]`: magnitude of bin `k` in column `c`.
    pub columns: Vec<Vec<T>>,
    /// Window-centre times relative to the frame start.
    pub times_s: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    pub window_len: usize,
    pub hop: usize,
    /// Raw `|X_k|` with no window compensation: the one-sided power
    /// `|X_0|^2 + 2 sum |X_k|^2 + |X_{N/2}|^2` divided by `window_len` equals
    /// the energy of the windowed segment, and further dividing by
    /// `window_power` gives the segment's mean-square amplitude estimate.
    pub scaling: &'static str,
    /// Sum of squared window samples.
    pub window_power: f64,
}

impl<T: Scalar> Spectrogram<T> {
    /// Rows of `time, freq, magnitude`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,freq_hz,magnitude\n");
        for (t, col) in self.times_s.iter().zip(&self.columns) {
            for (f, m) in self.freqs_hz.iter().zip(col) {
                out.push_str(&format!("{t:.6},{f:.6},{}\n", to_f64(*m)));
            }
        }
        out
    }
}

/// Periodic-Hann STFT with 50 % overlap.
pub fn spectrogram_stft<T: Scalar>(
    frame: &SampledSignal<T>,
    window_len: usize,
    hop: usize,
) -> Result<Spectrogram<T>> {
    let n = frame.len();
    if window_len < 2 || hop == 0 {
        return Err(Error::Config("window length must be >= 2 and hop >= 1".into()));
    }
    if n < window_len {
        return Err(Error::InvalidInput(format!(
            "frame of {n} samples is shorter than the {window_len}-sample window"
        )));
    }
    let rate = to_f64(frame.rate_hz());
    let w: Vec<T> = hann_periodic(window_len).into_iter().map(lit).collect();
    let fft = FftPlanner::<T>::new().plan_fft_forward(window_len);
    let count = (n - window_len) / hop + 1;
    let bins = window_len / 2 + 1;
    let x = frame.samples();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); window_len];
    let mut columns = Vec::with_capacity(count);
    for c in 0..count {
        let start = c * hop;
        for (b, (&v, &w)) in buf.iter_mut().zip(x[start..start + window_len].iter().zip(&w)) {
            *b = Complex::new(v * w, T::zero());
        }
        fft.process(&mut buf);
        columns.push(buf[..bins].iter().map(|z| z.norm()).collect());
    }
    Ok(Spectrogram {
        columns,
        times_s: (0..count)
            .map(|c| (c * hop) as f64 / rate + window_len as f64 / (2.0 * rate))
            .collect(),
        freqs_hz: (0..bins).map(|k| k as f64 * rate / window_len as f64).collect(),
        window_len,
        hop,
        scaling: "magnitude",
        window_power: w.iter().map(|&v| to_f64(v * v)).sum(),
    })
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters on the bin frequencies, each scaled to unit area.
fn mel_filterbank(n_filters: usize, freqs_hz: &[f64], nyquist: f64) -> Vec<Vec<f64>> {
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
        .collect();
    (0..n_filters)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (hi - lo);
            freqs_hz
                .iter()
                .map(|&f| {
                    let tri = if f > lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    };
                    tri * norm
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II, first `k` outputs.
fn dct2_ortho(x: &[f64], k: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..k)
        .map(|j| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    v * (std::f64::consts::PI * j as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos()
                })
                .sum();
            let scale = if j == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            s * scale
        })
        .collect()
}

/// Mel-frequency cepstral coefficients of each STFT column: mel filter
/// energies of the power spectrum, natural log with a floor, orthonormal
/// DCT-II.
pub fn mfcc<T: Scalar>(
    frame: &SampledSignal<T>,
    n_filters: usize,
    n_coeffs: usize,
) -> Result<Vec<Vec<T>>> {
    if n_filters == 0 || n_coeffs == 0 || n_coeffs > n_filters {
        return Err(Error::Config(format!(
            "need 0 < n_coeffs <= n_filters, got {n_coeffs} and {n_filters}"
        )));
    }
    let sg = spectrogram_stft(frame, STFT_WINDOW, STFT_HOP)?;
    let bank = mel_filterbank(n_filters, &sg.freqs_hz, to_f64(frame.nyquist_hz()));
    Ok(sg
        .columns
        .iter()
        .map(|col| {
            let power: Vec<f64> = col.iter().map(|&m| to_f64(m * m)).collect();
            let log_e: Vec<f64> = bank
                .iter()
                .map(|f| {
                    let e: f64 = f.iter().zip(&power).map(|(a, b)| a * b).sum();
                    e.max(MFCC_FLOOR).ln()
                })
                .collect();
            dct2_ortho(&log_e, n_coeffs).into_iter().map(lit).collect()
        })
        .collect())
}

/// Pointwise squared amplitude.
pub fn energy_spectrum<T: Scalar>(frame: &SampledSignal<T>) -> SampledSignal<T> {
    frame
        .with_samples(frame.samples().iter().map(|&v| v * v).collect())
        .with_label(Label::Other)
}

/// `sqrt(sum (W - E)^2 / sum E^2)`.
pub fn nrmse_wes_vs_es<T: Scalar>(wes: &SampledSignal<T>, es: &SampledSignal<T>) -> Result<T> {
    if wes.len() != es.len() {
        return Err(Error::LengthMismatch {
            left: wes.len(),
            right: es.len(),
        });
    }
    let den: T = es.samples().iter().map(|&e| e * e).sum();
    if den == T::zero() {
        return Err(Error::UndefinedNormalizer);
    }
    let num: T = wes
        .samples()
        .iter()
        .zip(es.samples())
        .map(|(&w, &e)| (w - e) * (w - e))
        .sum();
    Ok((num / den).sqrt())
}

/// Frame SNR; `saturated` is set when the estimate hit [`SNR_CAP_DB`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrEstimate {
    pub db: f64,
    pub saturated: bool,
}

/// Mean power within `window_ms` of each labeled S1/S2 peak against the mean
/// power of every other sample. Peak times are taken relative to the frame
/// start.
pub fn snr_frame<T: Scalar>(
    frame: &SampledSignal<T>,
    seg: &CycleSegmentation<T>,
    window_ms: f64,
) -> Result<SnrEstimate> {
    let rate = to_f64(frame.rate_hz());
    let half = (window_ms / 1000.0 * rate).round() as i64;
    let n = frame.len() as i64;
    let mut inside = vec![false; frame.len()];
    let mut any = false;
    for p in seg.peaks.iter().filter(|p| p.label != PeakLabel::Unlabeled) {
        any = true;
        let k = (to_f64(p.time_s) * rate).round() as i64;
        for i in (k - half).max(0)..=(k + half).min(n - 1) {
            inside[i as usize] = true;
        }
    }
    if !any {
        return Err(Error::InvalidSegmentation("no labeled peaks".into()));
    }
    let (mut ps, mut cs, mut pn, mut cn) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &m) in frame.samples().iter().zip(&inside) {
        let p = to_f64(v * v);
        if m {
            ps += p;
            cs += 1;
        } else {
            pn += p;
            cn += 1;
        }
    }
    if cn == 0 || cs == 0 {
        return Err(Error::DegenerateCoverage(
            "peak windows leave no background samples".into(),
        ));
    }
    let (ps, pn) = (ps / cs as f64, pn / cn as f64);
    let raw = if pn == 0.0 {
        f64::INFINITY
    } else if ps == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (ps / pn).log10()
    };
    Ok(SnrEstimate {
        db: raw.clamp(-SNR_CAP_DB, SNR_CAP_DB),
        saturated: raw.abs() >= SNR_CAP_DB,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrSummary {
    pub max: f64,
    pub min: f64,
    pub avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameQuality {
    pub frame_index: usize,
    pub start_s: f64,
    pub snr: Option<SnrEstimate>,
    pub nrmse: BTreeMap<String, f64>,
    pub band_hz: Option<(f64, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    /// Medians of the per-frame band edges.
    pub freq_range_hz: (f64, f64),
    /// Mean per-frame NRMSE for each wavelet family.
    pub nrmse: BTreeMap<String, f64>,
    pub snr_db: Option<SnrSummary>,
    pub per_frame_snr: Vec<Option<f64>>,
    pub frames: Vec<FrameQuality>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityParams {
    pub band_rel_threshold: f64,
    pub snr_window_ms: f64,
    pub wavelets: Vec<WaveletKind>,
    pub envelope: EnvelopeMethod,
}

impl Default for QualityParams {
    fn default() -> Self {
        Self {
            band_rel_threshold: 0.05,
            snr_window_ms: 50.0,
            wavelets: vec![
                WaveletKind::morlet(),
                WaveletKind::morse(),
                WaveletKind::bump(),
            ],
            envelope: EnvelopeMethod::Wes,
        }
    }
}

/// Divides a non-negative track by its sum, turning it into the fraction of
/// total energy per sample.
fn unit_area<T: Scalar>(s: SampledSignal<T>) -> SampledSignal<T> {
    let total: T = s.samples().iter().copied().sum();
    if total == T::zero() {
        return s;
    }
    let out = s.samples().iter().map(|&v| v / total).collect();
    s.with_samples(out)
}

/// WES-versus-ES NRMSE of one frame. Both tracks are scaled to unit area
/// first, since the WES gain depends on the wavelet and scale grid.
pub fn frame_nrmse<T: Scalar>(frame: &SampledSignal<T>, kind: &WaveletKind) -> Result<T> {
    let grid = ScaleGrid::pcg_default(kind, to_f64(frame.rate_hz()))?;
    nrmse_of_wes(frame, wes(frame, kind, &grid)?)
}

fn nrmse_of_wes<T: Scalar>(frame: &SampledSignal<T>, wes_track: SampledSignal<T>) -> Result<T> {
    nrmse_wes_vs_es(&unit_area(wes_track), &unit_area(energy_spectrum(frame)))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-frame quality checks over a recording. Each frame goes through the
/// heart-rate pipeline for its segmentation; SNR is measured on the
/// resampled frame before denoising, NRMSE on the denoised, normalized frame.
pub fn quality_report<T: Scalar>(
    pcg: &SampledSignal<T>,
    plan: FramePlan,
    pipeline: &PipelineParams,
    params: &QualityParams,
) -> Result<QualityReport> {
    let frames = segment_frames(pcg, plan)?;
    let mut out = Vec::with_capacity(frames.len());
    for (idx, frame) in frames.iter().enumerate() {
        let mut q = FrameQuality {
            frame_index: idx,
            start_s: to_f64(frame.start_s()),
            snr: None,
            nrmse: BTreeMap::new(),
            band_hz: None,
            error: None,
        };
        let mut errors = Vec::new();
        match hr_pipeline(frame, idx, params.envelope, HrFormula::default(), pipeline) {
            Ok(run) => {
                match fft_band(&run.conditioned, params.band_rel_threshold) {
                    Ok(b) => q.band_hz = Some(b),
                    Err(e) => errors.push(format!("band: {e}")),
                }
                match snr_frame(&run.conditioned, &run.segmentation, params.snr_window_ms) {
                    Ok(s) => q.snr = Some(s),
                    Err(e) => errors.push(format!("snr: {e}")),
                }
                for kind in &params.wavelets {
                    // The WES envelope already holds this wavelet's energy track.
                    let v = if params.envelope == EnvelopeMethod::Wes && *kind == pipeline.wavelet {
                        nrmse_of_wes(&run.normalized, run.raw_envelope.track.clone())
                    } else {
                        frame_nrmse(&run.normalized, kind)
                    };
                    match v {
                        Ok(v) => {
                            q.nrmse.insert(kind.name().to_string(), to_f64(v));
                        }
                        Err(e) => errors.push(format!("nrmse {}: {e}", kind.name())),
                    }
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
        if !errors.is_empty() {
            q.error = Some(errors.join("; "));
        }
        out.push(q);
    }
    let (mut lows, mut highs): (Vec<f64>, Vec<f64>) = out.iter().filter_map(|q| q.band_hz).unzip();
    if lows.is_empty() {
        return Err(Error::NoValidFrames);
    }
    let freq_range_hz = (median(&mut lows), median(&mut highs));
    let mut nrmse = BTreeMap::new();
    for kind in &params.wavelets {
        let vals: Vec<f64> = out
            .iter()
            .filter_map(|q| q.nrmse.get(kind.name()).copied())
            .collect();
        if !vals.is_empty() {
            nrmse.insert(
                kind.name().to_string(),
                vals.iter().sum::<f64>() / vals.len() as f64,
            );
        }
    }
    let per_frame_snr: Vec<Option<f64>> = out.iter().map(|q| q.snr.map(|s| s.db)).collect();
    let snrs: Vec<f64> = per_frame_snr.iter().flatten().copied().collect();
    let snr_db = (!snrs.is_empty()).then(|| SnrSummary {
        max: snrs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        min: snrs.iter().cloned().fold(f64::INFINITY, f64::min),
        avg: snrs.iter().sum::<f64>() / snrs.len() as f64,
    });
    Ok(QualityReport {
        freq_range_hz,
        nrmse,
        snr_db,
        per_frame_snr,
        frames: out,
    })
}
