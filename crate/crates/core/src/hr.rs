//! Heart rate from ECG R peaks and from PCG cycle timing, and the full
//! per-frame PCG pipeline.

use serde::{Deserialize, Serialize};

use crate::envelope::{envelope, renormalize, smooth, Envelope, EnvelopeMethod};
use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, max_abs, to_f64, Scalar};
use crate::segmentation::{segment, CycleSegmentation, SegmentationParams};
use crate::signal::{detrend, normalize_max_abs, resample_rational, segment_frames, FramePlan, SampledSignal};
use crate::wavelets::{dwt_denoise_db4, WaveletKind};

/// Accepted physiologic range in beats per minute.
pub const HR_RANGE_BPM: (f64, f64) = (20.0, 240.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HrSource {
    Ecg,
    PcgHilbert,
    PcgShannon,
    PcgWes,
}

impl From<EnvelopeMethod> for HrSource {
    fn from(m: EnvelopeMethod) -> Self {
        match m {
            EnvelopeMethod::Hilbert => HrSource::PcgHilbert,
            EnvelopeMethod::Shannon => HrSource::PcgShannon,
            EnvelopeMethod::Wes => HrSource::PcgWes,
        }
    }
}

/// How PCG intervals become a rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HrFormula {
    /// `(1/t_sys + 1/t_dias) * 60 / 2`.
    Eq7Verbatim,
    /// `60 / (t_sys + t_dias)`.
    #[default]
    CyclePeriod,
}

impl std::str::FromStr for HrFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eq7" | "eq7_verbatim" => Ok(Self::Eq7Verbatim),
            "cycle" | "cycle_period" => Ok(Self::CyclePeriod),
            other => Err(Error::Config(format!("unknown HR formula {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HrFlag {
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HrEstimate<T> {
    pub bpm: T,
    pub source: HrSource,
    pub frame_index: usize,
    /// `None` for ECG estimates.
    pub formula: Option<HrFormula>,
    pub flags: Vec<HrFlag>,
}

impl<T: Scalar> HrEstimate<T> {
    /// Flags the estimate when it falls outside [`HR_RANGE_BPM`].
    pub fn new(bpm: T, source: HrSource, frame_index: usize, formula: Option<HrFormula>) -> Self {
        let v = to_f64(bpm);
        let flags = if (HR_RANGE_BPM.0..=HR_RANGE_BPM.1).contains(&v) {
            Vec::new()
        } else {
            vec![HrFlag::OutOfRange]
        };
        Self {
            bpm,
            source,
            frame_index,
            formula,
            flags,
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Local maxima (flat tops at their centre) whose topographic prominence is
/// at least `min_prominence`.
pub fn prominent_peaks<T: Scalar>(x: &[T], min_prominence: T) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < x.len() {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < x.len() && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < x.len() && x[j + 1] < x[i] {
                let h = x[i];
                let mut left_min = h;
                for k in (0..i).rev() {
                    if x[k] > h {
                        break;
                    }
                    left_min = left_min.min(x[k]);
                }
                let mut right_min = h;
                for &v in &x[j + 1..] {
                    if v > h {
                        break;
                    }
                    right_min = right_min.min(v);
                }
                if h - left_min.max(right_min) >= min_prominence {
                    out.push((i + j) / 2);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Detrends and scales an ECG frame to `max|x| = 1`.
pub fn prepare_ecg_frame<T: Scalar>(frame: &SampledSignal<T>) -> Result<SampledSignal<T>> {
    Ok(normalize_max_abs(&detrend(frame)?)?.signal)
}

/// HR from R-peak spacing on a detrended, max-normalized ECG frame:
/// `60 * fs / mean(diff(P))`.
pub fn hr_from_ecg_frame<T: Scalar>(
    frame: &SampledSignal<T>,
    prominence: f64,
    frame_index: usize,
) -> Result<HrEstimate<T>> {
    frame.require_non_empty()?;
    if to_f64(max_abs(frame.samples())) > 1.0 + 1e-9 {
        return Err(Error::ContractViolation(
            "ECG frame must be max-abs normalized".into(),
        ));
    }
    let p = prominent_peaks(frame.samples(), lit(prominence));
    if p.len() < 2 {
        return Err(Error::InsufficientPeaks {
            needed: 2,
            found: p.len(),
        });
    }
    let mean_gap = from_usize::<T>(p[p.len() - 1] - p[0]) / from_usize(p.len() - 1);
    let bpm = lit::<T>(60.0) * frame.rate_hz() / mean_gap;
    Ok(HrEstimate::new(bpm, HrSource::Ecg, frame_index, None))
}

/// R-peak times (seconds from the frame start) on a prepared ECG frame.
pub fn ecg_r_times<T: Scalar>(frame: &SampledSignal<T>, prominence: f64) -> Vec<T> {
    prominent_peaks(frame.samples(), lit(prominence))
        .into_iter()
        .map(|i| from_usize::<T>(i) / frame.rate_hz())
        .collect()
}

pub fn hr_from_intervals<T: Scalar>(t_sys: T, t_dias: T, formula: HrFormula) -> Result<T> {
    if !(t_sys > T::zero() && t_dias > T::zero()) {
        return Err(Error::InvalidSegmentation(format!(
            "intervals must be positive: t_sys {t_sys}, t_dias {t_dias}"
        )));
    }
    let sixty = lit::<T>(60.0);
    Ok(match formula {
        HrFormula::Eq7Verbatim => (T::one() / t_sys + T::one() / t_dias) * sixty / lit(2.0),
        HrFormula::CyclePeriod => sixty / (t_sys + t_dias),
    })
}

pub fn hr_from_pcg<T: Scalar>(
    seg: &CycleSegmentation<T>,
    formula: HrFormula,
    source: HrSource,
    frame_index: usize,
) -> Result<HrEstimate<T>> {
    let bpm = hr_from_intervals(seg.t_sys, seg.t_dias, formula)?;
    Ok(HrEstimate::new(bpm, source, frame_index, Some(formula)))
}

/// Settings for [`hr_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    /// Frames sampled faster than this are resampled down to it first.
    pub analysis_rate_hz: f64,
    pub denoise_levels: usize,
    pub denoise_frac: f64,
    pub smoothing_cutoff_hz: f64,
    pub smoothing_order: usize,
    pub wavelet: WaveletKind,
    pub segmentation: SegmentationParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            analysis_rate_hz: 2000.0,
            denoise_levels: 8,
            denoise_frac: 0.15,
            smoothing_cutoff_hz: 20.0,
            smoothing_order: 4,
            wavelet: WaveletKind::morlet(),
            segmentation: SegmentationParams::default(),
        }
    }
}

/// Every intermediate of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOutput<T> {
    pub conditioned: SampledSignal<T>,
    pub denoised: SampledSignal<T>,
    pub normalized: SampledSignal<T>,
    pub raw_envelope: Envelope<T>,
    pub envelope: Envelope<T>,
    pub segmentation: CycleSegmentation<T>,
    pub hr: HrEstimate<T>,
}

/// Stage names used to tag pipeline errors.
pub mod stage {
    pub const RESAMPLE: &str = "resample";
    pub const DENOISE: &str = "denoise";
    pub const NORMALIZE: &str = "normalize";
    pub const ENVELOPE: &str = "envelope";
    pub const SMOOTH: &str = "smooth";
    pub const SEGMENTATION: &str = "segmentation";
    pub const HR: &str = "hr";
}

/// Raw PCG frame to heart rate: resample, db4 denoise, normalize, envelope,
/// smooth, renormalize, segment, and convert the intervals.
pub fn hr_pipeline<T: Scalar>(
    frame: &SampledSignal<T>,
    frame_index: usize,
    method: EnvelopeMethod,
    formula: HrFormula,
    params: &PipelineParams,
) -> Result<PipelineOutput<T>> {
    let conditioned = if to_f64(frame.rate_hz()) > params.analysis_rate_hz {
        resample_rational(frame, params.analysis_rate_hz).map_err(|e| e.at_stage(stage::RESAMPLE))?
    } else {
        frame.clone()
    };
    let denoised = dwt_denoise_db4(&conditioned, params.denoise_levels, params.denoise_frac)
        .map_err(|e| e.at_stage(stage::DENOISE))?;
    // A silent frame stays silent and fails at peak detection.
    let normalized = match normalize_max_abs(&denoised) {
        Ok(n) => n.signal,
        Err(Error::DegenerateSignal(_)) => denoised.clone(),
        Err(e) => return Err(e.at_stage(stage::NORMALIZE)),
    };
    let raw_envelope =
        envelope(&normalized, method, &params.wavelet).map_err(|e| e.at_stage(stage::ENVELOPE))?;
    let smoothed = smooth(&raw_envelope, params.smoothing_cutoff_hz, params.smoothing_order)
        .map_err(|e| e.at_stage(stage::SMOOTH))?;
    let envelope = renormalize(&smoothed);
    let segmentation =
        segment(&envelope, &params.segmentation).map_err(|e| e.at_stage(stage::SEGMENTATION))?;
    let hr = hr_from_pcg(&segmentation, formula, method.into(), frame_index)
        .map_err(|e| e.at_stage(stage::HR))?;
    Ok(PipelineOutput {
        conditioned,
        denoised,
        normalized,
        raw_envelope,
        envelope,
        segmentation,
        hr,
    })
}

/// Outcome of one frame of a recording.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameOutcome<T> {
    pub frame_index: usize,
    pub start_s: T,
    pub segmentation: Option<CycleSegmentation<T>>,
    pub hr: Option<HrEstimate<T>>,
    pub error: Option<String>,
}

/// Per-frame results plus the mean over accepted frames.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordingHr<T> {
    pub frames: Vec<FrameOutcome<T>>,
    /// `None` when no frame produced an accepted estimate.
    pub mean_bpm: Option<T>,
}

/// Runs [`hr_pipeline`] on consecutive frames. Frame failures are recorded
/// rather than propagated.
pub fn hr_recording<T: Scalar>(
    pcg: &SampledSignal<T>,
    plan: &FramePlan,
    method: EnvelopeMethod,
    formula: HrFormula,
    params: &PipelineParams,
) -> Result<RecordingHr<T>> {
    let frames = segment_frames(pcg, *plan)?;
    let outcomes: Vec<FrameOutcome<T>> = frames
        .iter()
        .enumerate()
        .map(|(i, f)| match hr_pipeline(f, i, method, formula, params) {
            Ok(out) => FrameOutcome {
                frame_index: i,
                start_s: f.start_s(),
                segmentation: Some(out.segmentation),
                hr: Some(out.hr),
                error: None,
            },
            Err(e) => FrameOutcome {
                frame_index: i,
                start_s: f.start_s(),
                segmentation: None,
                hr: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let accepted: Vec<T> = outcomes
        .iter()
        .filter_map(|o| o.hr.as_ref())
        .filter(|h| h.is_accepted())
        .map(|h| h.bpm)
        .collect();
    let mean_bpm = (!accepted.is_empty())
        .then(|| accepted.iter().copied().sum::<T>() / from_usize(accepted.len()));
    Ok(RecordingHr {
        frames: outcomes,
        mean_bpm,
    })
}
