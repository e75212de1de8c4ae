//! Seeded synthetic heart-sound and ECG generator with exact ground truth.
//!
//! Heart sounds are modeled as windowed cosine bursts: S1 at the start of each
//! cycle and S2 `t_sys` later. The burst window is a two-sided Gaussian (rise
//! and decay widths may differ), so the 15 %-of-peak rise and decay times are
//! known in closed form.
//!
//! Random draws come from a ChaCha8 stream seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`. Draw order: per cycle, the S1 jitter then
//! the S2 jitter (standard normal, scaled by `jitter_ms`); then one standard
//! normal per output sample for additive noise. Cross-language fixtures should
//! be shared as the emitted WAV files rather than by replaying the stream.
//!
//! Noise level convention: `snr_db` is relative to the mean clean power inside
//! +/- 50 ms of every burst centre, which is what
//! [`crate::quality::snr_frame`] measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bp::{predict_dbp, predict_sbp, BpCoefficients, PcgFeatureVector};
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use crate::signal::{Label, SampledSignal};

/// Half-width of the window around each burst used for the SNR reference.
pub const SNR_WINDOW_S: f64 = 0.050;

/// `sqrt(2 ln(1/0.15))`: distance from a Gaussian peak to its 15 % level,
/// in units of sigma.
pub const GAUSSIAN_15PCT_WIDTH: f64 = 1.947_880_892_090_623_4;

/// Parameters of one synthetic recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub hr_bpm: f64,
    /// Heart rate reached at the end of the recording; the rate changes
    /// linearly in time from `hr_bpm`. `None` keeps it constant.
    pub hr_end_bpm: Option<f64>,
    pub t_sys_s: f64,
    pub s1_freq_hz: f64,
    pub s2_freq_hz: f64,
    /// Rise-side Gaussian width of the S1 window.
    pub s1_sigma_ms: f64,
    pub s2_sigma_ms: f64,
    /// Decay-side width as a multiple of the rise-side width.
    pub s1_decay_ratio: f64,
    pub s2_decay_ratio: f64,
    pub s2_rel_amp: f64,
    pub jitter_ms: f64,
    /// `None` for a noiseless recording.
    pub snr_db: Option<f64>,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub seed: u64,
    pub ecg_rate_hz: f64,
    /// R peak lead over S1.
    pub pr_offset_s: f64,
    pub ecg_wander_amp: f64,
    pub ecg_wander_hz: f64,
    pub ecg_snr_db: Option<f64>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            hr_bpm: 75.0,
            hr_end_bpm: None,
            t_sys_s: 0.30,
            s1_freq_hz: 60.0,
            s2_freq_hz: 90.0,
            s1_sigma_ms: 20.0,
            s2_sigma_ms: 15.0,
            s1_decay_ratio: 1.0,
            s2_decay_ratio: 1.0,
            s2_rel_amp: 0.6,
            jitter_ms: 0.0,
            snr_db: None,
            duration_s: 60.0,
            rate_hz: 2000.0,
            seed: 0,
            ecg_rate_hz: 190.0,
            pr_offset_s: 0.040,
            ecg_wander_amp: 0.1,
            ecg_wander_hz: 0.3,
            ecg_snr_db: None,
        }
    }
}

impl SynthSpec {
    pub fn period_s(&self) -> f64 {
        60.0 / self.hr_bpm
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InconsistentSpec(m.to_string()));
        if !(20.0..=240.0).contains(&self.hr_bpm) {
            return bad("hr_bpm must lie in [20, 240]");
        }
        if let Some(end) = self.hr_end_bpm {
            if !(20.0..=240.0).contains(&end) {
                return bad("hr_end_bpm must lie in [20, 240]");
            }
        }
        let shortest = 60.0 / self.hr_bpm.max(self.hr_end_bpm.unwrap_or(self.hr_bpm));
        if !(self.t_sys_s > 0.0 && self.t_sys_s < shortest) {
            return bad("t_sys_s must be positive and shorter than the cardiac period");
        }
        if !(self.s2_rel_amp > 0.0 && self.s2_rel_amp <= 1.0) {
            return bad("s2_rel_amp must lie in (0, 1]");
        }
        let positive = [
            self.s1_freq_hz,
            self.s2_freq_hz,
            self.s1_sigma_ms,
            self.s2_sigma_ms,
            self.s1_decay_ratio,
            self.s2_decay_ratio,
            self.duration_s,
            self.rate_hz,
            self.ecg_rate_hz,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return bad("frequencies, widths, duration and rates must be positive");
        }
        if self.jitter_ms < 0.0 || self.pr_offset_s < 0.0 || self.ecg_wander_amp < 0.0 {
            return bad("jitter, PR offset and wander amplitude must be non-negative");
        }
        if self.s1_freq_hz.max(self.s2_freq_hz) >= self.rate_hz / 2.0 {
            return bad("burst frequencies must be below the Nyquist frequency");
        }
        Ok(())
    }
}

/// Exact event times and timing quantities of a generated recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub s1_times: Vec<f64>,
    pub s2_times: Vec<f64>,
    /// Mean S1 -> S2 gap.
    pub t_sys: f64,
    /// Mean S2 -> next S1 gap.
    pub t_dias: f64,
    pub hr: f64,
    pub t_rs1: f64,
    pub t_ds1: f64,
    pub t_rd2: f64,
    pub t_dd2: f64,
}

impl GroundTruth {
    /// Timing features of the generator's own burst windows.
    pub fn features<T: Scalar>(&self) -> Result<PcgFeatureVector<T>> {
        PcgFeatureVector::from_timing(
            lit(self.t_sys),
            lit(self.t_dias),
            lit(self.t_rs1),
            lit(self.t_ds1),
            lit(self.t_rd2),
            lit(self.t_dd2),
            lit(self.hr),
        )
    }
}

struct Burst {
    centre: f64,
    freq: f64,
    amp: f64,
    sigma_rise: f64,
    sigma_decay: f64,
}

impl Burst {
    fn render(&self, out: &mut [f64], rate: f64) {
        let reach = 7.0 * self.sigma_rise.max(self.sigma_decay);
        let lo = ((self.centre - reach) * rate).floor().max(0.0) as usize;
        let hi = (((self.centre + reach) * rate).ceil().max(0.0) as usize).min(out.len());
        for (i, v) in out.iter_mut().enumerate().take(hi).skip(lo) {
            let dt = i as f64 / rate - self.centre;
            let sigma = if dt < 0.0 {
                self.sigma_rise
            } else {
                self.sigma_decay
            };
            let window = (-0.5 * (dt / sigma).powi(2)).exp();
            *v += self.amp * window * (2.0 * std::f64::consts::PI * self.freq * dt).cos();
        }
    }
}

fn add_noise(
    clean: &mut [f64],
    centres: &[f64],
    rate: f64,
    snr_db: Option<f64>,
    rng: &mut ChaCha8Rng,
) {
    let Some(snr_db) = snr_db else { return };
    let p_ref = windowed_power(clean, centres, rate);
    let sigma = (p_ref / 10f64.powf(snr_db / 10.0)).sqrt();
    for v in clean.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sigma * z;
    }
}

/// Mean power inside +/- [`SNR_WINDOW_S`] of the given centres.
fn windowed_power(x: &[f64], centres: &[f64], rate: f64) -> f64 {
    let mut inside = vec![false; x.len()];
    let half = (SNR_WINDOW_S * rate).round() as i64;
    for &c in centres {
        let k = (c * rate).round() as i64;
        for i in (k - half).max(0)..=(k + half).min(x.len() as i64 - 1) {
            inside[i as usize] = true;
        }
    }
    let (sum, count) = x
        .iter()
        .zip(&inside)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v * v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Nominal S1 onsets: a fixed grid, or a rate ramp when `hr_end_bpm` is set.
fn nominal_onsets(spec: &SynthSpec) -> Vec<f64> {
    match spec.hr_end_bpm {
        None => {
            let period = spec.period_s();
            let cycles = (spec.duration_s / period).ceil() as usize;
            (0..cycles).map(|k| k as f64 * period).collect()
        }
        Some(end) => {
            let mut out = Vec::new();
            let mut t = 0.0;
            while t < spec.duration_s {
                out.push(t);
                let hr = spec.hr_bpm + (end - spec.hr_bpm) * t / spec.duration_s;
                t += 60.0 / hr;
            }
            out
        }
    }
}

fn event_times(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let jitter = spec.jitter_ms / 1000.0;
    let onsets = nominal_onsets(spec);
    let mut s1 = Vec::with_capacity(onsets.len());
    let mut s2 = Vec::with_capacity(onsets.len());
    for nominal in onsets {
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let t1 = nominal + jitter * e1;
        let t2 = t1 + spec.t_sys_s + jitter * e2;
        if t1 < spec.duration_s {
            s1.push(t1);
            if t2 < spec.duration_s {
                s2.push(t2);
            }
        }
    }
    (s1, s2)
}

/// Mean rate over the recording: cycles per minute between the first and
/// last nominal onsets.
fn mean_hr(spec: &SynthSpec) -> f64 {
    let onsets = nominal_onsets(spec);
    match (spec.hr_end_bpm, onsets.len()) {
        (Some(_), n) if n >= 2 => 60.0 * (n - 1) as f64 / (onsets[n - 1] - onsets[0]),
        _ => spec.hr_bpm,
    }
}

fn mean_gap(from: &[f64], to: &[f64], offset: usize) -> f64 {
    let gaps: Vec<f64> = from
        .iter()
        .zip(to.iter().skip(offset))
        .map(|(a, b)| b - a)
        .collect();
    gaps.iter().sum::<f64>() / gaps.len().max(1) as f64
}

/// Generates a PCG recording and its ground truth.
pub fn generate_pcg<T: Scalar>(spec: &SynthSpec) -> Result<(SampledSignal<T>, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (s1, s2) = event_times(spec, &mut rng);
    let rate = spec.rate_hz;
    let n = (spec.duration_s * rate).round() as usize;
    let mut x = vec![0.0; n];
    let (r1, r2) = (spec.s1_sigma_ms / 1000.0, spec.s2_sigma_ms / 1000.0);
    for &c in &s1 {
        Burst {
            centre: c,
            freq: spec.s1_freq_hz,
            amp: 1.0,
            sigma_rise: r1,
            sigma_decay: r1 * spec.s1_decay_ratio,
        }
        .render(&mut x, rate);
    }
    for &c in &s2 {
        Burst {
            centre: c,
            freq: spec.s2_freq_hz,
            amp: spec.s2_rel_amp,
            sigma_rise: r2,
            sigma_decay: r2 * spec.s2_decay_ratio,
        }
        .render(&mut x, rate);
    }
    let centres: Vec<f64> = s1.iter().chain(&s2).copied().collect();
    add_noise(&mut x, &centres, rate, spec.snr_db, &mut rng);

    let truth = GroundTruth {
        t_sys: mean_gap(&s1, &s2, 0),
        t_dias: mean_gap(&s2, &s1, 1),
        hr: mean_hr(spec),
        t_rs1: GAUSSIAN_15PCT_WIDTH * r1,
        t_ds1: GAUSSIAN_15PCT_WIDTH * r1 * spec.s1_decay_ratio,
        t_rd2: GAUSSIAN_15PCT_WIDTH * r2,
        t_dd2: GAUSSIAN_15PCT_WIDTH * r2 * spec.s2_decay_ratio,
        s1_times: s1,
        s2_times: s2,
    };
    let signal = SampledSignal::new(x.into_iter().map(lit).collect(), lit(rate), Label::Pcg)?;
    Ok((signal, truth))
}

/// Generates an ECG-like spike train whose R peaks lead the S1 times of
/// [`generate_pcg`] (same spec and seed) by `pr_offset_s`. Only R times
/// inside the recording are returned.
pub fn generate_ecg<T: Scalar>(spec: &SynthSpec) -> Result<(SampledSignal<T>, Vec<f64>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (s1, _) = event_times(spec, &mut rng);
    let r_all: Vec<f64> = s1.iter().map(|t| t - spec.pr_offset_s).collect();
    let rate = spec.ecg_rate_hz;
    let n = (spec.duration_s * rate).round() as usize;
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            spec.ecg_wander_amp * (2.0 * std::f64::consts::PI * spec.ecg_wander_hz * t).sin()
        })
        .collect();
    let mut spikes = vec![0.0; n];
    for &r in &r_all {
        let lo = ((r - 0.08) * rate).floor().max(0.0) as usize;
        let hi = (((r + 0.12) * rate).ceil().max(0.0) as usize).min(n);
        for (i, v) in spikes.iter_mut().enumerate().take(hi).skip(lo) {
            let t = i as f64 / rate;
            let r_wave = (-0.5 * ((t - r) / 0.008).powi(2)).exp();
            let s_wave = -0.25 * (-0.5 * ((t - r - 0.025) / 0.010).powi(2)).exp();
            *v += r_wave + s_wave;
        }
    }
    // Noise scales against the spikes alone, not the wander.
    let mut ecg_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5EC6_0000_0000_0001);
    let p_ref = windowed_power(&spikes, &r_all, rate);
    if let Some(snr) = spec.ecg_snr_db {
        let sigma = (p_ref / 10f64.powf(snr / 10.0)).sqrt();
        for v in spikes.iter_mut() {
            let z: f64 = ecg_rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
    x.iter_mut().zip(&spikes).for_each(|(a, b)| *a += b);
    let r_times = r_all
        .into_iter()
        .filter(|&r| r >= 0.0 && r < spec.duration_s)
        .collect();
    let signal = SampledSignal::new(x.into_iter().map(lit).collect(), lit(rate), Label::Ecg)?;
    Ok((signal, r_times))
}

/// Ranges for per-subject sampling in [`generate_cohort`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortRanges {
    pub hr_bpm: (f64, f64),
    pub t_sys_s: (f64, f64),
    pub s1_sigma_ms: (f64, f64),
    pub s2_sigma_ms: (f64, f64),
    pub decay_ratio: (f64, f64),
    pub s2_rel_amp: (f64, f64),
    pub snr_db: Option<(f64, f64)>,
    pub jitter_ms: f64,
}

impl Default for CohortRanges {
    fn default() -> Self {
        Self {
            hr_bpm: (58.0, 95.0),
            t_sys_s: (0.26, 0.34),
            s1_sigma_ms: (12.0, 24.0),
            // Narrow, quiet S2 bursts against a wide S1 put the S2 peak of the
            // energy-based WES envelope under the 15 % detection threshold.
            s2_sigma_ms: (12.0, 20.0),
            decay_ratio: (0.7, 1.4),
            s2_rel_amp: (0.7, 0.9),
            snr_db: None,
            jitter_ms: 0.0,
        }
    }
}

/// One generated subject: its recording spec, exact features and BP targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSubject {
    pub subject_id: String,
    pub spec: SynthSpec,
    pub truth: GroundTruth,
    pub features: PcgFeatureVector<f64>,
    pub sbp: f64,
    pub dbp: f64,
    /// Targets before noise was added.
    pub sbp_clean: f64,
    pub dbp_clean: f64,
}

/// Coefficients that map the default cohort ranges to resting-range BP
/// (roughly 105-140 / 65-90 mmHg).
pub fn reference_cohort_coefficients() -> BpCoefficients<f64> {
    use crate::bp::{DbpCoefficients, SbpCoefficients, UnitConvention};
    BpCoefficients {
        sbp: SbpCoefficients {
            c1: 95.0,
            sigma_sys: -40.0,
            sigma_rs1: 150.0,
            sigma_ds1: 120.0,
            sigma_s1: 30.0,
            sigma_s_hr: 0.5,
            sigma_s_hr2: -0.001,
            sigma_sys2: 20.0,
            sigma_s12: 100.0,
            sigma_rds1: -500.0,
        },
        dbp: DbpCoefficients {
            c2: 55.0,
            alpha_dias: 15.0,
            alpha_rd2: 120.0,
            alpha_dd2: 90.0,
            alpha_s2: 20.0,
            alpha_d_hr: 0.3,
            alpha_d_hr2: -0.0008,
            alpha_dias2: -5.0,
            alpha_s22: 80.0,
            alpha_rdd2: -300.0,
        },
        unit_convention: UnitConvention::Seconds,
    }
}

/// Samples `n_subjects` specs from `ranges` and computes BP targets from the
/// exact features with `truth_coefficients`, plus Gaussian noise with the
/// given standard deviations (mmHg). Subject `k` uses seed `seed + k`.
pub fn generate_cohort(
    n_subjects: usize,
    base: &SynthSpec,
    ranges: &CohortRanges,
    truth_coefficients: &BpCoefficients<f64>,
    noise_sd: (f64, f64),
    seed: u64,
) -> Result<Vec<CohortSubject>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
        lo + (hi - lo) * rng.random::<f64>()
    }
    let mut out = Vec::with_capacity(n_subjects);
    for k in 0..n_subjects {
        let spec = SynthSpec {
            hr_bpm: uniform(&mut rng, ranges.hr_bpm),
            hr_end_bpm: None,
            t_sys_s: uniform(&mut rng, ranges.t_sys_s),
            s1_sigma_ms: uniform(&mut rng, ranges.s1_sigma_ms),
            s2_sigma_ms: uniform(&mut rng, ranges.s2_sigma_ms),
            s1_decay_ratio: uniform(&mut rng, ranges.decay_ratio),
            s2_decay_ratio: uniform(&mut rng, ranges.decay_ratio),
            s2_rel_amp: uniform(&mut rng, ranges.s2_rel_amp),
            snr_db: ranges.snr_db.map(|r| uniform(&mut rng, r)),
            jitter_ms: ranges.jitter_ms,
            seed: seed.wrapping_add(k as u64),
            ..base.clone()
        };
        spec.validate()?;
        let truth = nominal_truth(&spec);
        let features = truth.features::<f64>()?;
        let sbp_clean = predict_sbp(&features, truth_coefficients)?;
        let dbp_clean = predict_dbp(&features, truth_coefficients)?;
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        out.push(CohortSubject {
            subject_id: format!("subject_{:02}", k + 1),
            spec,
            truth,
            features,
            sbp: sbp_clean + noise_sd.0 * e1,
            dbp: dbp_clean + noise_sd.1 * e2,
            sbp_clean,
            dbp_clean,
        });
    }
    Ok(out)
}

/// Ground truth of a spec without generating samples (jitter averaged out).
fn nominal_truth(spec: &SynthSpec) -> GroundTruth {
    let (r1, r2) = (spec.s1_sigma_ms / 1000.0, spec.s2_sigma_ms / 1000.0);
    GroundTruth {
        s1_times: Vec::new(),
        s2_times: Vec::new(),
        t_sys: spec.t_sys_s,
        t_dias: spec.period_s() - spec.t_sys_s,
        hr: spec.hr_bpm,
        t_rs1: GAUSSIAN_15PCT_WIDTH * r1,
        t_ds1: GAUSSIAN_15PCT_WIDTH * r1 * spec.s1_decay_ratio,
        t_rd2: GAUSSIAN_15PCT_WIDTH * r2,
        t_dd2: GAUSSIAN_15PCT_WIDTH * r2 * spec.s2_decay_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hr_ramp() {
        let spec = SynthSpec {
            hr_bpm: 60.0,
            hr_end_bpm: Some(66.0),
            duration_s: 60.0,
            ..Default::default()
        };
        let (_, truth) = generate_pcg::<f64>(&spec).unwrap();
        assert!((truth.hr - 63.0).abs() < 0.3, "{}", truth.hr);
        let gaps: Vec<f64> = truth.s1_times.windows(2).map(|w| w[1] - w[0]).collect();
        assert!((gaps[0] - 1.0).abs() < 1e-12);
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        assert!(SynthSpec {
            hr_end_bpm: Some(500.0),
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn event_grid_without_jitter() {
        let spec = SynthSpec {
            hr_bpm: 60.0,
            t_sys_s: 0.3,
            duration_s: 10.0,
            ..Default::default()
        };
        let (sig, truth) = generate_pcg::<f64>(&spec).unwrap();
        assert_eq!(sig.len(), 20_000);
        let s1: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let s2: Vec<f64> = (0..10).map(|k| k as f64 + 0.3).collect();
        assert_eq!(truth.s1_times, s1);
        for (a, b) in truth.s2_times.iter().zip(&s2) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((truth.t_sys - 0.3).abs() < 1e-12);
        assert!((truth.t_dias - 0.7).abs() < 1e-12);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let spec = SynthSpec {
            jitter_ms: 10.0,
            snr_db: Some(20.0),
            duration_s: 8.0,
            seed: 42,
            ..Default::default()
        };
        let (a, ta) = generate_pcg::<f64>(&spec).unwrap();
        let (b, tb) = generate_pcg::<f64>(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate_pcg::<f64>(&SynthSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_matches_requested_snr() {
        let spec = SynthSpec {
            snr_db: Some(20.0),
            duration_s: 20.0,
            seed: 7,
            ..Default::default()
        };
        let (noisy, truth) = generate_pcg::<f64>(&spec).unwrap();
        let (clean, _) = generate_pcg::<f64>(&SynthSpec {
            snr_db: None,
            ..spec.clone()
        })
        .unwrap();
        let noise: Vec<f64> = noisy
            .samples()
            .iter()
            .zip(clean.samples())
            .map(|(a, b)| a - b)
            .collect();
        let centres: Vec<f64> = truth.s1_times.iter().chain(&truth.s2_times).copied().collect();
        let ps = windowed_power(clean.samples(), &centres, 2000.0);
        let pn = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
        let snr = 10.0 * (ps / pn).log10();
        assert!((snr - 20.0).abs() < 0.5, "snr {snr}");
    }

    #[test]
    fn ecg_leads_pcg() {
        let spec = SynthSpec {
            duration_s: 10.0,
            jitter_ms: 5.0,
            seed: 3,
            ..Default::default()
        };
        let (_, truth) = generate_pcg::<f64>(&spec).unwrap();
        let (ecg, r) = generate_ecg::<f64>(&spec).unwrap();
        assert_eq!(ecg.rate_hz(), 190.0);
        assert_eq!(ecg.label(), Label::Ecg);
        let expected: Vec<f64> = truth
            .s1_times
            .iter()
            .map(|t| t - 0.04)
            .filter(|t| *t >= 0.0)
            .collect();
        assert_eq!(r.len(), expected.len());
        for (a, b) in r.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let (again, _) = generate_ecg::<f64>(&spec).unwrap();
        assert_eq!(ecg, again);
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            SynthSpec {
                hr_bpm: 300.0,
                ..Default::default()
            },
            SynthSpec {
                t_sys_s: 0.9,
                ..Default::default()
            },
            SynthSpec {
                s2_rel_amp: 1.5,
                ..Default::default()
            },
            SynthSpec {
                s1_freq_hz: 1500.0,
                ..Default::default()
            },
        ];
        for spec in bad {
            assert!(matches!(
                generate_pcg::<f64>(&spec),
                Err(Error::InconsistentSpec(_))
            ));
        }
    }

    #[test]
    fn cohort_is_deterministic_and_consistent() {
        let coeffs = reference_cohort_coefficients();
        let a = generate_cohort(15, &SynthSpec::default(), &CohortRanges::default(), &coeffs, (0.0, 0.0), 9)
            .unwrap();
        let b = generate_cohort(15, &SynthSpec::default(), &CohortRanges::default(), &coeffs, (0.0, 0.0), 9)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
        for s in &a {
            assert_eq!(s.sbp, s.sbp_clean);
            assert!(s.sbp > s.dbp && s.dbp > 0.0, "{} {}", s.sbp, s.dbp);
            assert!((90.0..160.0).contains(&s.sbp), "sbp {}", s.sbp);
            assert!((50.0..110.0).contains(&s.dbp), "dbp {}", s.dbp);
        }
    }

    #[test]
    fn cohort_noise_has_requested_scale() {
        let coeffs = reference_cohort_coefficients();
        let c = generate_cohort(400, &SynthSpec::default(), &CohortRanges::default(), &coeffs, (2.1, 3.2), 1)
            .unwrap();
        let sd = |v: Vec<f64>| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        };
        let s = sd(c.iter().map(|s| s.sbp - s.sbp_clean).collect());
        let d = sd(c.iter().map(|s| s.dbp - s.dbp_clean).collect());
        assert!((s - 2.1).abs() < 0.3, "{s}");
        assert!((d - 3.2).abs() < 0.4, "{d}");
    }
}
