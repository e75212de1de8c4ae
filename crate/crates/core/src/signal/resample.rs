use super::SampledSignal;
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

/// Largest denominator accepted for the target/source rate ratio.
pub const MAX_RATIO_DENOMINATOR: u64 = 10_000;

const STOPBAND_DB: f64 = 60.0;
// Band edges as fractions of the smaller Nyquist frequency.
const PASS_EDGE: f64 = 0.7;
const STOP_EDGE: f64 = 0.9;

/// Expresses `target_hz / source_hz` as `up / down` in lowest terms.
pub fn rational_ratio(source_hz: f64, target_hz: f64) -> Result<(u64, u64)> {
    let unsupported = || Error::UnsupportedRatio {
        source_hz,
        target_hz,
        max_denominator: MAX_RATIO_DENOMINATOR,
    };
    if !(source_hz > 0.0 && target_hz > 0.0) || !source_hz.is_finite() || !target_hz.is_finite()
    {
        return Err(unsupported());
    }
    let r = target_hz / source_hz;
    for q in 1..=MAX_RATIO_DENOMINATOR {
        let p = (r * q as f64).round();
        if p >= 1.0 && (p / q as f64 - r).abs() <= 1e-9 * r {
            return Ok((p as u64, q));
        }
    }
    Err(unsupported())
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc low-pass prototype at the upsampled rate, normalized
/// to unit DC gain. Always has odd length.
fn design_antialias(rate_hz: f64, cutoff_hz: f64, transition_hz: f64) -> Vec<f64> {
    let beta = 0.1102 * (STOPBAND_DB - 8.7);
    let dw = 2.0 * std::f64::consts::PI * transition_hz / rate_hz;
    let mut taps = ((STOPBAND_DB - 7.95) / (2.285 * dw)).ceil() as usize + 1;
    if taps % 2 == 0 {
        taps += 1;
    }
    let mid = (taps - 1) as f64 / 2.0;
    let fc = 2.0 * cutoff_hz / rate_hz;
    let i0_beta = bessel_i0(beta);
    let mut h: Vec<f64> = (0..taps)
        .map(|k| {
            let t = k as f64 - mid;
            let x = std::f64::consts::PI * fc * t;
            let sinc = if t == 0.0 { 1.0 } else { x.sin() / x };
            let r = t / mid;
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            fc * sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Changes the sample rate by a rational factor using polyphase
/// upsample-filter-downsample with a linear-phase anti-aliasing filter.
///
/// Content below 0.7 of the smaller Nyquist frequency passes within 0.1 %;
/// content above 0.9 of it is attenuated by at least 60 dB. The filter delay
/// is compensated, so output sample `m` is aligned with time `m / target`.
pub fn resample_rational<T: Scalar>(
    s: &SampledSignal<T>,
    target_rate_hz: f64,
) -> Result<SampledSignal<T>> {
    s.require_non_empty()?;
    let source = to_f64(s.rate_hz());
    let (up, down) = rational_ratio(source, target_rate_hz)?;
    if up == down {
        return Ok(s.clone());
    }
    let (up, down) = (up as usize, down as usize);
    let upsampled_rate = source * up as f64;
    let min_nyquist = source.min(target_rate_hz) / 2.0;
    let cutoff = 0.5 * (PASS_EDGE + STOP_EDGE) * min_nyquist;
    let transition = (STOP_EDGE - PASS_EDGE) * min_nyquist;
    let gain = up as f64;
    let h: Vec<T> = design_antialias(upsampled_rate, cutoff, transition)
        .into_iter()
        .map(|v| lit(v * gain))
        .collect();

    let x = s.samples();
    let n = x.len();
    let taps = h.len();
    let delay = (taps - 1) / 2;
    let out_len = (n * up).div_ceil(down);
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        let t = m * down + delay;
        // Input samples j contribute through tap t - j * up.
        let j_hi = (t / up).min(n - 1);
        let j_lo = if t + 1 > taps { (t + 1 - taps).div_ceil(up) } else { 0 };
        let mut acc = T::zero();
        if j_lo <= j_hi {
            for j in j_lo..=j_hi {
                acc = acc + h[t - j * up] * x[j];
            }
        }
        out.push(acc);
    }
    Ok(SampledSignal::from_parts(
        out,
        lit(target_rate_hz),
        s.label(),
        s.start_s(),
    ))
}
