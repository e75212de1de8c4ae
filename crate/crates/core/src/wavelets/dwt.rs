use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use crate::signal::SampledSignal;

/// Daubechies-4 (eight-tap) scaling filter.
const DB4: [f64; 8] = [
    0.230_377_813_308_855_14,
    0.714_846_570_552_541_6,
    0.630_880_767_929_590_38,
    -0.027_983_769_416_983_849,
    -0.187_034_811_718_881_06,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

/// Coefficient bands of a multi-level decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T> {
    /// Coarsest approximation band.
    pub approx: Vec<T>,
    /// Detail bands, finest first.
    pub details: Vec<Vec<T>>,
    /// Input length at each level, finest first.
    lengths: Vec<usize>,
}

struct FilterBank<T> {
    h: [T; 8],
    g: [T; 8],
}

impl<T: Scalar> FilterBank<T> {
    fn db4() -> Self {
        let h = DB4.map(lit::<T>);
        let mut g = [T::zero(); 8];
        for (j, v) in g.iter_mut().enumerate() {
            let s = if j % 2 == 0 { T::one() } else { -T::one() };
            *v = s * h[7 - j];
        }
        Self { h, g }
    }

    /// One analysis step with half-sample symmetric extension.
    fn analyze(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let n = x.len() as isize;
        let ext = |i: isize| -> T {
            let mut i = i;
            // Reflect repeatedly; only matters for inputs shorter than the filter.
            loop {
                if i < 0 {
                    i = -i - 1;
                } else if i >= n {
                    i = 2 * n - 1 - i;
                } else {
                    return x[i as usize];
                }
            }
        };
        let m = (x.len() + 7) / 2;
        let mut a = Vec::with_capacity(m);
        let mut d = Vec::with_capacity(m);
        for o in 0..m as isize {
            let (mut sa, mut sd) = (T::zero(), T::zero());
            for j in 0..8 {
                let v = ext(2 * o + 1 - j as isize);
                sa = sa + self.h[j] * v;
                sd = sd + self.g[j] * v;
            }
            a.push(sa);
            d.push(sd);
        }
        (a, d)
    }

    fn synthesize(&self, a: &[T], d: &[T], len: usize) -> Vec<T> {
        let mut y = vec![T::zero(); len];
        for (o, (&av, &dv)) in a.iter().zip(d).enumerate() {
            for j in 0..8 {
                // y[n] receives a[o] * h[2o + 1 - n].
                let Some(n) = (2 * o + 1).checked_sub(j) else { break };
                if n < len {
                    y[n] = y[n] + av * self.h[j] + dv * self.g[j];
                }
            }
        }
        y
    }
}

/// Multi-level db4 decomposition.
pub fn dwt_db4<T: Scalar>(x: &[T], levels: usize) -> Result<Decomposition<T>> {
    let needed = 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX);
    if levels == 0 || x.len() < needed {
        return Err(Error::DecompositionDepth {
            len: x.len(),
            levels,
            needed,
        });
    }
    let bank = FilterBank::db4();
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        lengths.push(approx.len());
        let (a, d) = bank.analyze(&approx);
        details.push(d);
        approx = a;
    }
    Ok(Decomposition {
        approx,
        details,
        lengths,
    })
}

/// Inverse of [`dwt_db4`].
pub fn idwt_db4<T: Scalar>(dec: &Decomposition<T>) -> Vec<T> {
    let bank = FilterBank::db4();
    let mut approx = dec.approx.clone();
    for (d, &len) in dec.details.iter().zip(&dec.lengths).rev() {
        approx = bank.synthesize(&approx, d, len);
    }
    approx
}

fn soft_threshold<T: Scalar>(band: &mut [T], frac: T) {
    let tau = frac * band.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    for v in band.iter_mut() {
        let shrunk = (v.abs() - tau).max(T::zero());
        *v = shrunk * v.signum();
    }
}

/// Soft-threshold wavelet denoising with db4.
///
/// Each detail band is shrunk by `threshold_frac` times its own largest
/// coefficient magnitude; the approximation band is left alone. With
/// `threshold_frac = 0` the input is reconstructed exactly (to rounding).
pub fn dwt_denoise_db4<T: Scalar>(
    s: &SampledSignal<T>,
    levels: usize,
    threshold_frac: f64,
) -> Result<SampledSignal<T>> {
    if !(0.0..1.0).contains(&threshold_frac) {
        return Err(Error::InvalidInput(format!(
            "threshold fraction must lie in [0, 1), got {threshold_frac}"
        )));
    }
    let mut dec = dwt_db4(s.samples(), levels)?;
    let frac = lit::<T>(threshold_frac);
    for band in &mut dec.details {
        soft_threshold(band, frac);
    }
    Ok(s.with_samples(idwt_db4(&dec)))
}
