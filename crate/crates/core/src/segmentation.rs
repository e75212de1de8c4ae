//! Envelope peak picking, S1/S2 labeling and cycle timing.

use serde::{Deserialize, Serialize};

use crate::envelope::Envelope;
use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, max_abs, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PeakLabel {
    S1,
    S2,
    Unlabeled,
}

impl PeakLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PeakLabel::S1 => "S1",
            PeakLabel::S2 => "S2",
            PeakLabel::Unlabeled => "UNLABELED",
        }
    }
}

/// An envelope peak; `time_s` is measured from the start of the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakEvent<T> {
    pub index: usize,
    pub time_s: T,
    pub height: T,
    pub label: PeakLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    pub min_height_frac: f64,
    pub min_distance_s: f64,
    /// Rise/decay threshold as a fraction of each peak's height.
    pub baseline_frac: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            min_height_frac: 0.15,
            min_distance_s: 0.125,
            baseline_frac: 0.15,
        }
    }
}

/// Timing of one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleSegmentation<T> {
    pub peaks: Vec<PeakEvent<T>>,
    pub t_sys: T,
    pub t_dias: T,
    pub t_rs1: T,
    pub t_ds1: T,
    pub t_rd2: T,
    pub t_dd2: T,
    pub t_s1: T,
    pub t_s2: T,
    pub n_cycles: usize,
    /// Peaks left out of the rise/decay averages because a threshold
    /// crossing was not found before the neighbouring peak or frame edge.
    pub skipped_rise_decay: usize,
}

/// Local maxima at or above `min_height_frac` of the envelope maximum, thinned
/// so that no two survivors are closer than `min_distance_s`. A maximum must
/// be strictly greater than its neighbours; a flat top counts once, at its
/// centre sample. Thinning visits peaks tallest first (earlier index on ties).
pub fn detect_peaks<T: Scalar>(
    e: &Envelope<T>,
    min_height_frac: f64,
    min_distance_s: f64,
) -> Result<Vec<PeakEvent<T>>> {
    if !(0.0..=1.0).contains(&min_height_frac) || !(min_distance_s >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "invalid peak thresholds: height {min_height_frac}, distance {min_distance_s}"
        )));
    }
    let x = e.samples();
    let rate = e.rate_hz();
    let threshold = lit::<T>(min_height_frac) * max_abs(x);
    let mut candidates = Vec::new();
    let mut i = 1;
    while i + 1 < x.len() {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < x.len() && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < x.len() && x[j + 1] < x[i] {
                let centre = (i + j) / 2;
                if x[centre] >= threshold && x[centre] > T::zero() {
                    candidates.push(centre);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let min_gap = lit::<T>(min_distance_s) * rate;
    let mut order = candidates.clone();
    order.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap().then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in order {
        if kept
            .iter()
            .all(|&k| from_usize::<T>(k.abs_diff(c)) >= min_gap)
        {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    Ok(kept
        .into_iter()
        .map(|index| PeakEvent {
            index,
            time_s: from_usize::<T>(index) / rate,
            height: x[index],
            label: PeakLabel::Unlabeled,
        })
        .collect())
}

/// Alternating S1/S2 labels. The sequence starts with S1 when the first gap
/// is no longer than the second, otherwise with S2.
pub fn label_s1_s2<T: Scalar>(peaks: &[PeakEvent<T>]) -> Result<Vec<PeakEvent<T>>> {
    if peaks.len() < 3 {
        return Err(Error::InsufficientPeaks {
            needed: 3,
            found: peaks.len(),
        });
    }
    let gap1 = peaks[1].time_s - peaks[0].time_s;
    let gap2 = peaks[2].time_s - peaks[1].time_s;
    let first_is_s1 = gap1 <= gap2;
    Ok(peaks
        .iter()
        .enumerate()
        .map(|(i, p)| PeakEvent {
            label: if (i % 2 == 0) == first_is_s1 {
                PeakLabel::S1
            } else {
                PeakLabel::S2
            },
            ..*p
        })
        .collect())
}

/// Mean S1 -> S2 gap, mean S2 -> next S1 gap, and the number of S1 -> S2
/// pairs.
pub fn cycle_intervals<T: Scalar>(labeled: &[PeakEvent<T>]) -> Result<(T, T, usize)> {
    let mut sys = Vec::new();
    let mut dias = Vec::new();
    for w in labeled.windows(2) {
        let gap = w[1].time_s - w[0].time_s;
        match (w[0].label, w[1].label) {
            (PeakLabel::S1, PeakLabel::S2) => sys.push(gap),
            (PeakLabel::S2, PeakLabel::S1) => dias.push(gap),
            _ => {}
        }
    }
    if sys.is_empty() || dias.is_empty() {
        return Err(Error::InsufficientCycles(format!(
            "{} systolic and {} diastolic intervals",
            sys.len(),
            dias.len()
        )));
    }
    let mean = |v: &[T]| v.iter().copied().sum::<T>() / from_usize(v.len());
    Ok((mean(&sys), mean(&dias), sys.len()))
}

/// Averaged rise and decay times per sound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiseDecay<T> {
    pub t_rs1: T,
    pub t_ds1: T,
    pub t_rd2: T,
    pub t_dd2: T,
    pub t_s1: T,
    pub t_s2: T,
    pub skipped: usize,
}

/// Rise time: from the last sample at or below `baseline_frac` of the peak
/// height before the peak, to the peak. Decay time: from the peak to the
/// first such sample after it. The search stops at the neighbouring peak
/// (or the frame edge); a peak without both crossings is skipped.
pub fn rise_decay_times<T: Scalar>(
    e: &Envelope<T>,
    labeled: &[PeakEvent<T>],
    baseline_frac: f64,
) -> Result<RiseDecay<T>> {
    let x = e.samples();
    let rate = e.rate_hz();
    let mut acc: [(T, T, usize); 2] = [(T::zero(), T::zero(), 0); 2];
    let mut skipped = 0;
    for (k, p) in labeled.iter().enumerate() {
        let slot = match p.label {
            PeakLabel::S1 => 0,
            PeakLabel::S2 => 1,
            PeakLabel::Unlabeled => continue,
        };
        let level = lit::<T>(baseline_frac) * p.height + lit::<T>(1e-12) * p.height.abs();
        let lo = if k > 0 { labeled[k - 1].index } else { 0 };
        let hi = labeled.get(k + 1).map_or(x.len() - 1, |q| q.index);
        let before = (lo..p.index).rev().find(|&i| x[i] <= level);
        let after = (p.index + 1..=hi).find(|&i| x[i] <= level);
        match (before, after) {
            (Some(b), Some(a)) => {
                let s = &mut acc[slot];
                s.0 = s.0 + from_usize::<T>(p.index - b) / rate;
                s.1 = s.1 + from_usize::<T>(a - p.index) / rate;
                s.2 += 1;
            }
            _ => skipped += 1,
        }
    }
    for (slot, name) in acc.iter().zip(["S1", "S2"]) {
        if slot.2 == 0 {
            return Err(Error::InsufficientCycles(format!(
                "no {name} peak with complete rise and decay support"
            )));
        }
    }
    let avg = |s: (T, T, usize)| (s.0 / from_usize(s.2), s.1 / from_usize(s.2));
    let (t_rs1, t_ds1) = avg(acc[0]);
    let (t_rd2, t_dd2) = avg(acc[1]);
    Ok(RiseDecay {
        t_rs1,
        t_ds1,
        t_rd2,
        t_dd2,
        t_s1: t_rs1 + t_ds1,
        t_s2: t_rd2 + t_dd2,
        skipped,
    })
}

/// Detection, labeling, intervals and rise/decay on one smoothed,
/// max-normalized envelope.
pub fn segment<T: Scalar>(e: &Envelope<T>, params: &SegmentationParams) -> Result<CycleSegmentation<T>> {
    let peaks = detect_peaks(e, params.min_height_frac, params.min_distance_s)?;
    let labeled = label_s1_s2(&peaks)?;
    let (t_sys, t_dias, n_cycles) = cycle_intervals(&labeled)?;
    let rd = rise_decay_times(e, &labeled, params.baseline_frac)?;
    Ok(CycleSegmentation {
        peaks: labeled,
        t_sys,
        t_dias,
        t_rs1: rd.t_rs1,
        t_ds1: rd.t_ds1,
        t_rd2: rd.t_rd2,
        t_dd2: rd.t_dd2,
        t_s1: rd.t_s1,
        t_s2: rd.t_s2,
        n_cycles,
        skipped_rise_decay: rd.skipped,
    })
}

/// Labeled peaks as CSV with columns `time_s,height,label`.
pub fn peaks_csv<T: Scalar>(peaks: &[PeakEvent<T>]) -> String {
    let mut out = String::from("time_s,height,label\n");
    for p in peaks {
        out.push_str(&format!("{},{},{}\n", p.time_s, p.height, p.label.as_str()));
    }
    out
}
