use serde::Serialize;

use super::regression::{fit_regularized, DesignMatrix, RegressionOptions};
use super::{
    predict_dbp, predict_sbp, BpCoefficients, DbpCoefficients, PcgFeatureVector,
    SbpCoefficients, UnitConvention, TERMS,
};
use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};

/// Sound duration terms (`t_s1`, `t_s2`). Each equals the sum of two other
/// regressors, so it is left out of the fitted design and reported as zero.
const DEPENDENT_TERM: usize = 4;

/// One subject's features and reference pressures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpSample<T> {
    pub subject_id: String,
    pub features: PcgFeatureVector<T>,
    pub sbp_ref: T,
    pub dbp_ref: T,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BpFitOptions {
    pub unit_convention: UnitConvention,
    pub ridge_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideDiagnostics<T> {
    pub residual_rms: T,
    pub condition_estimate: T,
    pub rank: usize,
    /// Coefficients fixed at zero because their terms are linear
    /// combinations of others.
    pub dropped_terms: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpFit<T> {
    pub coefficients: BpCoefficients<T>,
    pub sbp: SideDiagnostics<T>,
    pub dbp: SideDiagnostics<T>,
    pub n_subjects: usize,
    pub ridge_lambda: f64,
}

fn fit_side<T: Scalar>(
    rows: &[[T; TERMS]],
    y: &[T],
    opts: &BpFitOptions,
    dropped: &'static str,
) -> Result<([T; TERMS], SideDiagnostics<T>)> {
    let x = DesignMatrix::from_rows(rows)?.without_columns(&[DEPENDENT_TERM]);
    let fit = fit_regularized(
        &x,
        y,
        &RegressionOptions {
            ridge_lambda: opts.ridge_lambda,
            unpenalized: vec![0],
        },
    )?;
    let mut full = [T::zero(); TERMS];
    let mut it = fit.coefficients.iter();
    for (i, c) in full.iter_mut().enumerate() {
        if i != DEPENDENT_TERM {
            *c = *it.next().expect("reduced coefficient count");
        }
    }
    Ok((
        full,
        SideDiagnostics {
            residual_rms: fit.residual_rms,
            condition_estimate: fit.condition_estimate,
            rank: fit.rank,
            dropped_terms: vec![dropped],
        },
    ))
}

/// Fits both sides by least squares over subjects.
pub fn fit_bp_model<T: Scalar>(samples: &[BpSample<T>], opts: &BpFitOptions) -> Result<BpFit<T>> {
    for s in samples {
        s.features.validate()?;
        if !(s.sbp_ref.is_finite() && s.dbp_ref.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite reference pressure for {}",
                s.subject_id
            )));
        }
    }
    let units = opts.unit_convention;
    let sbp_rows: Vec<_> = samples.iter().map(|s| s.features.sbp_terms(units)).collect();
    let dbp_rows: Vec<_> = samples.iter().map(|s| s.features.dbp_terms(units)).collect();
    let sbp_y: Vec<T> = samples.iter().map(|s| s.sbp_ref).collect();
    let dbp_y: Vec<T> = samples.iter().map(|s| s.dbp_ref).collect();
    let (sbp, sbp_diag) = fit_side(&sbp_rows, &sbp_y, opts, "sigma_s1")?;
    let (dbp, dbp_diag) = fit_side(&dbp_rows, &dbp_y, opts, "alpha_s2")?;
    Ok(BpFit {
        coefficients: BpCoefficients {
            sbp: SbpCoefficients::from_array(sbp),
            dbp: DbpCoefficients::from_array(dbp),
            unit_convention: units,
        },
        sbp: sbp_diag,
        dbp: dbp_diag,
        n_subjects: samples.len(),
        ridge_lambda: opts.ridge_lambda,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoocvPrediction<T> {
    pub subject_id: String,
    pub sbp_ref: T,
    pub sbp_pred: T,
    pub dbp_ref: T,
    pub dbp_pred: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoocvSide<T> {
    pub mae: T,
    pub rmse: T,
    /// RMSE of the all-subject fit on its own training data.
    pub in_sample_rmse: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoocvReport<T> {
    pub n_subjects: usize,
    pub unit_convention: UnitConvention,
    pub ridge_lambda: f64,
    pub sbp: LoocvSide<T>,
    pub dbp: LoocvSide<T>,
    /// Held-out predictions sorted by subject id.
    pub predictions: Vec<LoocvPrediction<T>>,
}

/// Minimum cohort size: ten coefficients per side plus two.
pub const LOOCV_MIN_SUBJECTS: usize = TERMS + 2;

/// Leave-one-subject-out validation: each subject is predicted by a model
/// fitted on all the others. Subjects are processed in id order, so the
/// result does not depend on input order.
pub fn loocv_subjectwise<T: Scalar>(
    dataset: &[BpSample<T>],
    opts: &BpFitOptions,
) -> Result<LoocvReport<T>> {
    if dataset.len() < LOOCV_MIN_SUBJECTS {
        return Err(Error::InsufficientData {
            needed: LOOCV_MIN_SUBJECTS,
            got: dataset.len(),
        });
    }
    let mut sorted: Vec<&BpSample<T>> = dataset.iter().collect();
    sorted.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].subject_id == w[1].subject_id) {
        return Err(Error::InvalidInput(format!(
            "duplicate subject id {}",
            w[0].subject_id
        )));
    }
    let owned: Vec<BpSample<T>> = sorted.iter().map(|s| (*s).clone()).collect();

    let mut predictions = Vec::with_capacity(owned.len());
    for (i, held) in owned.iter().enumerate() {
        let train: Vec<BpSample<T>> = owned
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, s)| s.clone())
            .collect();
        let fit = fit_bp_model(&train, opts)?;
        predictions.push(LoocvPrediction {
            subject_id: held.subject_id.clone(),
            sbp_ref: held.sbp_ref,
            sbp_pred: predict_sbp(&held.features, &fit.coefficients)?,
            dbp_ref: held.dbp_ref,
            dbp_pred: predict_dbp(&held.features, &fit.coefficients)?,
        });
    }
    let full = fit_bp_model(&owned, opts)?;
    let n = from_usize::<T>(predictions.len());
    let side = |pairs: Vec<(T, T)>, in_sample: T| {
        let mae = pairs.iter().map(|(p, r)| (*p - *r).abs()).sum::<T>() / n;
        let mse = pairs.iter().map(|(p, r)| (*p - *r) * (*p - *r)).sum::<T>() / n;
        LoocvSide {
            mae,
            rmse: mse.sqrt(),
            in_sample_rmse: in_sample,
        }
    };
    Ok(LoocvReport {
        n_subjects: owned.len(),
        unit_convention: opts.unit_convention,
        ridge_lambda: opts.ridge_lambda,
        sbp: side(
            predictions.iter().map(|p| (p.sbp_pred, p.sbp_ref)).collect(),
            full.sbp.residual_rms,
        ),
        dbp: side(
            predictions.iter().map(|p| (p.dbp_pred, p.dbp_ref)).collect(),
            full.dbp.residual_rms,
        ),
        predictions,
    })
}
