//! Agreement statistics: Pearson correlation, error metrics with
//! subject-level aggregation, Bland-Altman analysis and box-plot summaries.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, mean, Scalar};

/// Limits of agreement multiplier.
pub const LOA_Z: f64 = 1.96;

fn check_pair<T>(a: &[T], b: &[T], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < min {
        return Err(Error::InsufficientData {
            needed: min,
            got: a.len(),
        });
    }
    Ok(())
}

/// Sample standard deviation (n - 1 denominator).
fn sample_sd<T: Scalar>(x: &[T]) -> T {
    let m = mean(x);
    let ss: T = x.iter().map(|&v| (v - m) * (v - m)).sum();
    (ss / from_usize(x.len() - 1)).sqrt()
}

pub fn pearson_r<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    check_pair(x, y, 2)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy = sxy + da * db;
        sxx = sxx + da * da;
        syy = syy + db * db;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::UndefinedCorrelation);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorMetrics<T> {
    pub mae: T,
    pub rmse: T,
    pub bias_mean: T,
    pub bias_sd: T,
}

/// Metrics of `d = pred - reference`.
pub fn error_metrics<T: Scalar>(pred: &[T], reference: &[T]) -> Result<ErrorMetrics<T>> {
    check_pair(pred, reference, 2)?;
    let d: Vec<T> = pred.iter().zip(reference).map(|(&p, &r)| p - r).collect();
    let mae = mean(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let rmse = mean(&d.iter().map(|&v| v * v).collect::<Vec<_>>()).sqrt();
    Ok(ErrorMetrics {
        mae,
        rmse,
        bias_mean: mean(&d),
        bias_sd: sample_sd(&d),
    })
}

/// Cohort metrics as unweighted means of per-subject metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortMetrics<T> {
    pub per_subject: BTreeMap<String, ErrorMetrics<T>>,
    pub mae: T,
    pub rmse: T,
    pub bias_mean: T,
    pub bias_sd: T,
    pub n_subjects: usize,
}

/// Computes metrics within each subject from its `(pred, reference)` frame
/// pairs, then averages across subjects so every subject counts once.
/// Subjects with a single frame get a zero bias SD.
pub fn subject_aggregate<T: Scalar>(
    per_frame: &BTreeMap<String, Vec<(T, T)>>,
) -> Result<CohortMetrics<T>> {
    if per_frame.is_empty() || per_frame.values().any(|v| v.is_empty()) {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut per_subject = BTreeMap::new();
    for (id, pairs) in per_frame {
        let (p, r): (Vec<T>, Vec<T>) = pairs.iter().copied().unzip();
        let m = if p.len() == 1 {
            let d = p[0] - r[0];
            ErrorMetrics {
                mae: d.abs(),
                rmse: d.abs(),
                bias_mean: d,
                bias_sd: T::zero(),
            }
        } else {
            error_metrics(&p, &r)?
        };
        per_subject.insert(id.clone(), m);
    }
    let n = from_usize::<T>(per_subject.len());
    let avg = |f: fn(&ErrorMetrics<T>) -> T| per_subject.values().map(f).sum::<T>() / n;
    Ok(CohortMetrics {
        mae: avg(|m| m.mae),
        rmse: avg(|m| m.rmse),
        bias_mean: avg(|m| m.bias_mean),
        bias_sd: avg(|m| m.bias_sd),
        n_subjects: per_subject.len(),
        per_subject,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport<T> {
    pub pearson_r: Option<T>,
    pub mae: T,
    pub rmse: T,
    pub bias_mean: T,
    pub bias_sd: T,
    pub loa_low: T,
    pub loa_high: T,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlandAltman<T> {
    pub report: AgreementReport<T>,
    /// Pair means (x axis).
    pub means: Vec<T>,
    /// `pred - reference` (y axis).
    pub diffs: Vec<T>,
    pub within_loa_fraction: T,
}

/// Bland-Altman agreement between `pred` and `reference`. The Pearson
/// coefficient is omitted when either series is constant.
pub fn bland_altman<T: Scalar>(pred: &[T], reference: &[T]) -> Result<BlandAltman<T>> {
    check_pair(pred, reference, 3)?;
    let m = error_metrics(pred, reference)?;
    let half = lit::<T>(LOA_Z) * m.bias_sd;
    let (loa_low, loa_high) = (m.bias_mean - half, m.bias_mean + half);
    let means: Vec<T> = pred
        .iter()
        .zip(reference)
        .map(|(&p, &r)| (p + r) / lit(2.0))
        .collect();
    let diffs: Vec<T> = pred.iter().zip(reference).map(|(&p, &r)| p - r).collect();
    let inside = diffs.iter().filter(|&&d| d >= loa_low && d <= loa_high).count();
    Ok(BlandAltman {
        report: AgreementReport {
            pearson_r: pearson_r(pred, reference).ok(),
            mae: m.mae,
            rmse: m.rmse,
            bias_mean: m.bias_mean,
            bias_sd: m.bias_sd,
            loa_low,
            loa_high,
            n: pred.len(),
        },
        within_loa_fraction: from_usize::<T>(inside) / from_usize(diffs.len()),
        means,
        diffs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats<T> {
    pub median: T,
    pub q1: T,
    pub q3: T,
    pub iqr: T,
    pub lower_fence: T,
    pub upper_fence: T,
    pub outliers: Vec<T>,
}

/// Quantile by linear interpolation between order statistics at position
/// `q * (n - 1)`.
fn quantile<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = lit::<T>(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * w
}

pub fn box_stats<T: Scalar>(values: &[T]) -> Result<BoxStats<T>> {
    if values.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: values.len(),
        });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (q1, median, q3) = (
        quantile(&sorted, 0.25),
        quantile(&sorted, 0.5),
        quantile(&sorted, 0.75),
    );
    let iqr = q3 - q1;
    let k = lit::<T>(1.5) * iqr;
    let (lower_fence, upper_fence) = (q1 - k, q3 + k);
    let outliers = values
        .iter()
        .copied()
        .filter(|&v| v < lower_fence || v > upper_fence)
        .collect();
    Ok(BoxStats {
        median,
        q1,
        q3,
        iqr,
        lower_fence,
        upper_fence,
        outliers,
    })
}
