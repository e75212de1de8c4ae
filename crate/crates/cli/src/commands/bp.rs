//! `pcgkit bp fit|predict|loocv`: subject features from PCG, then the
//! blood-pressure model.

use std::path::{Path, PathBuf};

use pcgkit::bp::{
    extract_subject_features, feature_matrix_csv, fit_bp_model, loocv_subjectwise, predict_bp,
    BpFitOptions, BpPrediction, BpSample, SubjectFeatures,
};
use pcgkit::eval::{error_metrics, ErrorMetrics};
use pcgkit::hr::hr_pipeline;
use pcgkit::io::SubjectRecord;
use pcgkit::signal::segment_frames;
use pcgkit::BpCoefficients;
use serde::Serialize;

use super::{load_dataset, per_subject, Outcome};
use crate::config::RunConfig;
use crate::report::{
    ensure_dir, scatter_svg, write_csv, write_json, write_report, write_text, SubjectError,
};

pub const SCHEMA_FIT: &str = "pcgkit.bp_fit/1";
pub const SCHEMA_PREDICT: &str = "pcgkit.bp_predict/1";
pub const SCHEMA_LOOCV: &str = "pcgkit.bp_loocv/1";

pub enum Coefficients {
    Reference,
    File(PathBuf),
}

pub enum Action {
    Fit,
    Predict(Coefficients),
    Loocv,
}

struct Subject {
    id: String,
    features: SubjectFeatures<f64>,
    bp_ref: Option<(f64, f64)>,
}

fn features(rec: &SubjectRecord<f64>, cfg: &RunConfig) -> Result<Subject, String> {
    let method = cfg.method()?;
    let formula = cfg.hr_formula()?;
    let params = cfg.pipeline()?;
    let frames = segment_frames(&rec.pcg, cfg.frame_plan()).map_err(|e| e.to_string())?;
    let per_frame: Vec<_> = frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            hr_pipeline(f, i, method, formula, &params)
                .ok()
                .map(|o| (o.segmentation, o.hr))
        })
        .collect();
    let features = extract_subject_features(&per_frame).map_err(|e| e.to_string())?;
    Ok(Subject {
        id: rec.subject_id.clone(),
        features,
        bp_ref: rec.sbp_ref.zip(rec.dbp_ref),
    })
}

fn samples(subjects: &[Subject], errors: &mut Vec<SubjectError>) -> Vec<BpSample<f64>> {
    let mut out = Vec::new();
    for s in subjects {
        match s.bp_ref {
            Some((sbp, dbp)) => out.push(BpSample {
                subject_id: s.id.clone(),
                features: s.features.features,
                sbp_ref: sbp,
                dbp_ref: dbp,
            }),
            None => errors.push(SubjectError {
                subject_id: s.id.clone(),
                error: "no reference blood pressure in meta.json".into(),
            }),
        }
    }
    out
}

fn load_coefficients(c: &Coefficients) -> Result<(BpCoefficients, String), String> {
    match c {
        Coefficients::Reference => Ok((BpCoefficients::reference(), "reference".into())),
        Coefficients::File(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            let c = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?;
            Ok((c, p.display().to_string()))
        }
    }
}

#[derive(Serialize)]
struct FitBody<'a> {
    fit: pcgkit::bp::BpFit<f64>,
    subjects: &'a [String],
    errors: &'a [SubjectError],
}

#[derive(Serialize)]
struct PredictionRow {
    subject_id: String,
    #[serde(flatten)]
    prediction: BpPrediction<f64>,
    sbp_ref: Option<f64>,
    dbp_ref: Option<f64>,
    valid_frames: usize,
}

#[derive(Serialize)]
struct PredictionCsv {
    subject_id: String,
    sbp: f64,
    dbp: f64,
    plausible: bool,
    sbp_ref: Option<f64>,
    dbp_ref: Option<f64>,
}

#[derive(Serialize)]
struct PredictBody<'a> {
    coefficients_id: &'a str,
    predictions: Vec<PredictionRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sbp_metrics: Option<ErrorMetrics<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dbp_metrics: Option<ErrorMetrics<f64>>,
    errors: &'a [SubjectError],
}

#[derive(Serialize)]
struct LoocvBody<'a> {
    loocv: pcgkit::bp::LoocvReport<f64>,
    errors: &'a [SubjectError],
}

pub fn run(dataset: &Path, action: &Action, cfg: &RunConfig) -> Result<Outcome, String> {
    let units = cfg.unit_convention()?;
    // Coefficient problems are fatal, so check them before the heavy work.
    let coefficients = match action {
        Action::Predict(c) => Some(load_coefficients(c)?),
        _ => None,
    };
    let loaded = load_dataset(dataset, cfg)?;
    let (subjects, mut errors) = per_subject(loaded, |rec| features(rec, cfg));
    ensure_dir(&cfg.out)?;

    let opts = BpFitOptions {
        unit_convention: units,
        ridge_lambda: cfg.ridge_lambda,
    };
    match action {
        Action::Fit => {
            let data = samples(&subjects, &mut errors);
            write_text(&cfg.out.join("features.csv"), &feature_matrix_csv(&data))?;
            let fit = fit_bp_model(&data, &opts).map_err(|e| e.to_string())?;
            write_json(&cfg.out.join("bp_coefficients.json"), &fit.coefficients)?;
            let ids: Vec<String> = data.iter().map(|s| s.subject_id.clone()).collect();
            write_report(cfg, "bp_fit.json", SCHEMA_FIT, FitBody { fit, subjects: &ids, errors: &errors })?;
        }
        Action::Predict(_) => {
            let (coeffs, id) = coefficients.expect("loaded above");
            let all: Vec<BpSample<f64>> = subjects
                .iter()
                .map(|s| BpSample {
                    subject_id: s.id.clone(),
                    features: s.features.features,
                    sbp_ref: s.bp_ref.map_or(f64::NAN, |b| b.0),
                    dbp_ref: s.bp_ref.map_or(f64::NAN, |b| b.1),
                })
                .collect();
            write_text(&cfg.out.join("features.csv"), &feature_matrix_csv(&all))?;
            let mut predictions = Vec::new();
            for s in &subjects {
                match predict_bp(&s.features.features, &coeffs, &id) {
                    Ok(prediction) => predictions.push(PredictionRow {
                        subject_id: s.id.clone(),
                        prediction,
                        sbp_ref: s.bp_ref.map(|b| b.0),
                        dbp_ref: s.bp_ref.map(|b| b.1),
                        valid_frames: s.features.valid_frames,
                    }),
                    Err(e) => errors.push(SubjectError { subject_id: s.id.clone(), error: e.to_string() }),
                }
            }
            let with_ref: Vec<&PredictionRow> =
                predictions.iter().filter(|p| p.sbp_ref.is_some()).collect();
            let metric = |pred: fn(&PredictionRow) -> (f64, f64)| {
                let (p, r): (Vec<f64>, Vec<f64>) = with_ref.iter().map(|row| pred(row)).unzip();
                error_metrics(&p, &r).ok()
            };
            let sbp_metrics = metric(|r| (r.prediction.sbp, r.sbp_ref.unwrap_or(f64::NAN)));
            let dbp_metrics = metric(|r| (r.prediction.dbp, r.dbp_ref.unwrap_or(f64::NAN)));
            let csv_rows: Vec<PredictionCsv> = predictions
                .iter()
                .map(|p| PredictionCsv {
                    subject_id: p.subject_id.clone(),
                    sbp: p.prediction.sbp,
                    dbp: p.prediction.dbp,
                    plausible: p.prediction.plausible,
                    sbp_ref: p.sbp_ref,
                    dbp_ref: p.dbp_ref,
                })
                .collect();
            write_csv(&cfg.out.join("bp_predictions.csv"), &csv_rows)?;
            write_report(
                cfg,
                "bp_predictions.json",
                SCHEMA_PREDICT,
                PredictBody {
                    coefficients_id: &id,
                    predictions,
                    sbp_metrics,
                    dbp_metrics,
                    errors: &errors,
                },
            )?;
        }
        Action::Loocv => {
            let data = samples(&subjects, &mut errors);
            write_text(&cfg.out.join("features.csv"), &feature_matrix_csv(&data))?;
            let loocv = loocv_subjectwise(&data, &opts).map_err(|e| e.to_string())?;
            write_csv(&cfg.out.join("bp_loocv.csv"), &loocv.predictions)?;
            let dir = cfg.out.join("plots");
            ensure_dir(&dir)?;
            for (side, pts) in [
                ("sbp", loocv.predictions.iter().map(|p| (p.sbp_ref, p.sbp_pred)).collect::<Vec<_>>()),
                ("dbp", loocv.predictions.iter().map(|p| (p.dbp_ref, p.dbp_pred)).collect()),
            ] {
                write_text(
                    &dir.join(format!("bp_loocv_{side}.svg")),
                    &scatter_svg(
                        &format!("LOOCV {}", side.to_uppercase()),
                        "reference (mmHg)",
                        "predicted (mmHg)",
                        &pts,
                        &[],
                        true,
                    ),
                )?;
            }
            write_report(cfg, "bp_loocv.json", SCHEMA_LOOCV, LoocvBody { loocv, errors: &errors })?;
        }
    }
    Ok(Outcome { errors })
}
