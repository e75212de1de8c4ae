use num_complex::Complex64;

use super::SampledSignal;
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

/// One second-order (or first-order, with `b2 = a2 = 0`) section,
/// normalized so `a0 = 1`.
#[derive(Debug, Clone, Copy)]
struct Section<T> {
    b: [T; 3],
    a: [T; 2],
}

impl<T: Scalar> Section<T> {
    /// Transposed direct-form II state that yields a constant output for a
    /// constant input `u`.
    fn steady_state(&self, u: T) -> [T; 2] {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (T::one() + self.a[0] + self.a[1]);
        let y = gain * u;
        let s2 = self.b[2] * u - self.a[1] * y;
        let s1 = self.b[1] * u - self.a[0] * y + s2;
        [s1, s2]
    }

    fn dc_gain(&self) -> T {
        (self.b[0] + self.b[1] + self.b[2]) / (T::one() + self.a[0] + self.a[1])
    }

    fn run(&self, x: &mut [T], mut state: [T; 2]) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + state[0];
            state[0] = self.b[1] * input - self.a[0] * y + state[1];
            state[1] = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Digital Butterworth low-pass filter as a cascade of sections, designed by
/// the bilinear transform with frequency prewarping.
#[derive(Debug, Clone)]
pub struct ButterworthLowpass<T> {
    sections: Vec<Section<T>>,
    cutoff_hz: f64,
    rate_hz: f64,
    order: usize,
}

impl<T: Scalar> ButterworthLowpass<T> {
    pub fn design(cutoff_hz: f64, rate_hz: f64, order: usize) -> Result<Self> {
        let nyquist = rate_hz / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
            return Err(Error::InvalidCutoff {
                cutoff_hz,
                nyquist_hz: nyquist,
            });
        }
        if order == 0 {
            return Err(Error::InvalidInput("filter order must be at least 1".into()));
        }
        let fs2 = 2.0 * rate_hz;
        let warped = fs2 * (std::f64::consts::PI * cutoff_hz / rate_hz).tan();
        let bilinear = |s: Complex64| (fs2 + s) / (fs2 - s);

        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for k in 0..order / 2 {
            let theta =
                std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let z = bilinear(Complex64::from_polar(warped, theta));
            let a1 = -2.0 * z.re;
            let a2 = z.norm_sqr();
            let g = (1.0 + a1 + a2) / 4.0;
            sections.push(Section {
                b: [lit(g), lit(2.0 * g), lit(g)],
                a: [lit(a1), lit(a2)],
            });
        }
        if order % 2 == 1 {
            let z = (fs2 - warped) / (fs2 + warped);
            let g = (1.0 - z) / 2.0;
            sections.push(Section {
                b: [lit(g), lit(g), T::zero()],
                a: [lit(-z), T::zero()],
            });
        }
        Ok(Self {
            sections,
            cutoff_hz,
            rate_hz,
            order,
        })
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Single-pass magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / self.rate_hz;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| {
                let num = to_f64(s.b[0]) + to_f64(s.b[1]) * z1 + to_f64(s.b[2]) * z2;
                let den = 1.0 + to_f64(s.a[0]) * z1 + to_f64(s.a[1]) * z2;
                (num / den).norm()
            })
            .product()
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[T]) -> Vec<T> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y, [T::zero(); 2]);
        }
        y
    }

    /// Number of samples until the impulse response has decayed below
    /// 1e-6 of its peak.
    pub fn settle_len(&self) -> usize {
        let max_len = ((40.0 * self.rate_hz / self.cutoff_hz) as usize).max(64);
        let mut h = vec![T::zero(); max_len];
        h[0] = T::one();
        let h = self.filter(&h);
        let peak = h.iter().fold(0.0f64, |m, &v| m.max(to_f64(v).abs()));
        h.iter()
            .rposition(|&v| to_f64(v).abs() > 1e-6 * peak)
            .map_or(1, |i| i + 1)
    }

    fn pass_with_initial_state(&self, x: &mut [T]) {
        let Some(&first) = x.first() else { return };
        let mut level = first;
        for s in &self.sections {
            s.run(x, s.steady_state(level));
            level = level * s.dc_gain();
        }
    }

    /// Forward-backward filtering with mirror padding of three
    /// settle lengths (capped at `len - 1`) and steady-state initial
    /// conditions at each end.
    pub fn filtfilt(&self, x: &[T]) -> Vec<T> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * self.settle_len()).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| x[n - 1 - i]));

        self.pass_with_initial_state(&mut ext);
        ext.reverse();
        self.pass_with_initial_state(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase Butterworth low-pass filtering of a signal.
pub fn butterworth_lowpass_zero_phase<T: Scalar>(
    s: &SampledSignal<T>,
    cutoff_hz: f64,
    order: usize,
) -> Result<SampledSignal<T>> {
    s.require_non_empty()?;
    let filt = ButterworthLowpass::<T>::design(cutoff_hz, to_f64(s.rate_hz()), order)?;
    Ok(s.with_samples(filt.filtfilt(s.samples())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Label;
    use std::f64::consts::PI;

    fn tone(freq: f64, rate: f64, secs: f64) -> SampledSignal<f64> {
        let n = (rate * secs) as usize;
        SampledSignal::new(
            (0..n).map(|i| (2.0 * PI * freq * i as f64 / rate).sin()).collect(),
            rate,
            Label::Other,
        )
        .unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn design_has_butterworth_response() {
        for order in 1..=6 {
            let f = ButterworthLowpass::<f64>::design(20.0, 2000.0, order).unwrap();
            assert!((f.magnitude(0.0) - 1.0).abs() < 1e-12);
            assert!((f.magnitude(20.0) - 0.5f64.sqrt()).abs() < 1e-9, "order {order}");
        }
    }

    #[test]
    fn invalid_cutoffs() {
        assert!(matches!(
            ButterworthLowpass::<f64>::design(1000.0, 2000.0, 4),
            Err(Error::InvalidCutoff { .. })
        ));
        assert!(ButterworthLowpass::<f64>::design(0.0, 2000.0, 4).is_err());
        assert!(ButterworthLowpass::<f64>::design(10.0, 2000.0, 0).is_err());
    }

    #[test]
    fn dc_passes_unchanged() {
        let s = SampledSignal::new(vec![1.0f64; 3000], 2000.0, Label::Other).unwrap();
        let y = butterworth_lowpass_zero_phase(&s, 20.0, 4).unwrap();
        assert_eq!(y.len(), s.len());
        assert!(y.samples().iter().all(|v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn passband_and_stopband_tones() {
        let low = tone(5.0, 2000.0, 4.0);
        let y = butterworth_lowpass_zero_phase(&low, 20.0, 4).unwrap();
        let r = rms(&y.samples()[1000..7000]) / rms(&low.samples()[1000..7000]);
        assert!((r - 1.0).abs() < 0.02, "5 Hz ratio {r}");

        // Mirror padding leaks a short transient at the ends; measure past it.
        let high = tone(100.0, 2000.0, 4.0);
        let y = butterworth_lowpass_zero_phase(&high, 20.0, 4).unwrap();
        let r = rms(&y.samples()[500..7500]) / rms(&high.samples()[500..7500]);
        assert!(r < 0.01, "100 Hz ratio {r}");
    }

    #[test]
    fn zero_phase_preserves_peak_location() {
        let rate = 1000.0;
        let x: Vec<f64> = (0..2000)
            .map(|i| (-((i as f64 - 1000.0) / 40.0).powi(2)).exp())
            .collect();
        let s = SampledSignal::new(x, rate, Label::Other).unwrap();
        let y = butterworth_lowpass_zero_phase(&s, 20.0, 4).unwrap();
        let argmax = y
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 1000);
    }

    #[test]
    fn time_reversal_commutes() {
        let rate = 2000.0;
        let x: Vec<f64> = (0..8000)
            .map(|i| {
                let t = i as f64 / rate;
                (2.0 * PI * 3.0 * t).sin() + 0.5 * (2.0 * PI * 37.0 * t).cos() + 0.1 * t
            })
            .collect();
        let s = SampledSignal::new(x, rate, Label::Other).unwrap();
        let filt = ButterworthLowpass::<f64>::design(20.0, rate, 4).unwrap();
        let edge = 3 * filt.settle_len();
        let a = butterworth_lowpass_zero_phase(&s.reversed(), 20.0, 4).unwrap();
        let b = butterworth_lowpass_zero_phase(&s, 20.0, 4).unwrap().reversed();
        for i in edge..s.len() - edge {
            assert!((a.samples()[i] - b.samples()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn short_and_f32_inputs() {
        let s = SampledSignal::new(vec![0.5f32; 5], 100.0, Label::Other).unwrap();
        let y = butterworth_lowpass_zero_phase(&s, 10.0, 4).unwrap();
        assert!(y.samples().iter().all(|v| (v - 0.5).abs() < 1e-4));
        let one = SampledSignal::new(vec![2.0f64], 100.0, Label::Other).unwrap();
        assert_eq!(butterworth_lowpass_zero_phase(&one, 10.0, 2).unwrap().samples(), &[2.0]);
    }
}
