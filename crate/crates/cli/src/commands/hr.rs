//! `pcgkit hr`: frame-wise heart rate from PCG with every envelope method,
//! compared against ECG when a subject has one.

use std::collections::BTreeMap;
use std::path::Path;

use pcgkit::envelope::EnvelopeMethod;
use pcgkit::eval::{bland_altman, subject_aggregate, AgreementReport, CohortMetrics};
use pcgkit::hr::{ecg_r_times, hr_from_ecg_frame, hr_recording, prepare_ecg_frame, RecordingHr};
use pcgkit::io::{align_streams, AlignmentResult, SubjectRecord};
use pcgkit::segmentation::PeakLabel;
use pcgkit::signal::segment_frames;
use serde::Serialize;

use super::{load_dataset, per_subject, Outcome};
use crate::config::RunConfig;
use crate::report::{ensure_dir, scatter_svg, write_csv, write_report, write_text, HLine};

pub const SCHEMA: &str = "pcgkit.hr_report/1";

#[derive(Serialize)]
struct FrameRow {
    subject_id: String,
    frame_index: usize,
    start_s: f64,
    method: &'static str,
    pcg_bpm: Option<f64>,
    accepted: bool,
    ecg_bpm: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SubjectHr {
    subject_id: String,
    /// Mean accepted PCG rate per method.
    mean_bpm: BTreeMap<&'static str, Option<f64>>,
    ecg_mean_bpm: Option<f64>,
    valid_frames: BTreeMap<&'static str, usize>,
    n_frames: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    alignment: Option<AlignmentResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alignment_error: Option<String>,
}

#[derive(Serialize)]
struct MethodAgreement {
    /// Per-subject metrics averaged over subjects.
    subject_wise: Option<CohortMetrics<f64>>,
    /// All paired frames pooled.
    pooled: Option<AgreementReport<f64>>,
    within_loa_fraction: Option<f64>,
    n_pairs: usize,
}

#[derive(Serialize)]
struct Body {
    primary_method: &'static str,
    subjects: Vec<SubjectHr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<BTreeMap<&'static str, MethodAgreement>>,
    errors: Vec<crate::report::SubjectError>,
}

struct SubjectRun {
    summary: SubjectHr,
    rows: Vec<FrameRow>,
    /// (pcg, ecg) pairs of accepted frames, per method.
    pairs: BTreeMap<&'static str, Vec<(f64, f64)>>,
}

fn ecg_frames(rec: &SubjectRecord<f64>, cfg: &RunConfig) -> Option<(Vec<Option<f64>>, Vec<f64>)> {
    let ecg = rec.ecg.as_ref()?;
    let frames = segment_frames(ecg, cfg.frame_plan()).ok()?;
    let mut bpm = Vec::with_capacity(frames.len());
    let mut r_times = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        let Ok(p) = prepare_ecg_frame(f) else {
            bpm.push(None);
            continue;
        };
        bpm.push(
            hr_from_ecg_frame(&p, cfg.ecg_prominence, i)
                .ok()
                .filter(|h| h.is_accepted())
                .map(|h| h.bpm),
        );
        r_times.extend(ecg_r_times(&p, cfg.ecg_prominence).into_iter().map(|t| t + f.start_s()));
    }
    Some((bpm, r_times))
}

fn s1_times(run: &RecordingHr<f64>) -> Vec<f64> {
    run.frames
        .iter()
        .filter_map(|o| o.segmentation.as_ref().map(|s| (o.start_s, s)))
        .flat_map(|(t0, s)| {
            s.peaks
                .iter()
                .filter(|p| p.label == PeakLabel::S1)
                .map(move |p| t0 + p.time_s)
        })
        .collect()
}

fn run_subject(rec: &SubjectRecord<f64>, cfg: &RunConfig) -> Result<SubjectRun, String> {
    let primary = cfg.method()?;
    let formula = cfg.hr_formula()?;
    let params = cfg.pipeline()?;
    let plan = cfg.frame_plan();
    let ecg = ecg_frames(rec, cfg);

    let mut rows = Vec::new();
    let mut pairs = BTreeMap::new();
    let mut mean_bpm = BTreeMap::new();
    let mut valid_frames = BTreeMap::new();
    let mut n_frames = 0;
    let mut primary_run = None;
    for method in EnvelopeMethod::ALL {
        let run = hr_recording(&rec.pcg, &plan, method, formula, &params).map_err(|e| e.to_string())?;
        n_frames = run.frames.len();
        let mut p = Vec::new();
        for o in &run.frames {
            let ecg_bpm = ecg.as_ref().and_then(|(b, _)| b.get(o.frame_index).copied().flatten());
            let accepted = o.hr.as_ref().is_some_and(|h| h.is_accepted());
            if let (true, Some(h), Some(e)) = (accepted, &o.hr, ecg_bpm) {
                p.push((h.bpm, e));
            }
            rows.push(FrameRow {
                subject_id: rec.subject_id.clone(),
                frame_index: o.frame_index,
                start_s: o.start_s,
                method: method.name(),
                pcg_bpm: o.hr.as_ref().map(|h| h.bpm),
                accepted,
                ecg_bpm,
                error: o.error.clone(),
            });
        }
        valid_frames.insert(
            method.name(),
            run.frames.iter().filter(|o| o.hr.as_ref().is_some_and(|h| h.is_accepted())).count(),
        );
        mean_bpm.insert(method.name(), run.mean_bpm);
        pairs.insert(method.name(), p);
        if method == primary {
            primary_run = Some(run);
        }
    }
    let primary_run = primary_run.expect("primary method is one of ALL");
    if primary_run.mean_bpm.is_none() {
        return Err(format!("no valid {} frames", primary.name()));
    }

    let (mut alignment, mut alignment_error) = (None, None);
    let mut ecg_mean_bpm = None;
    if let Some((bpm, r_times)) = &ecg {
        let ok: Vec<f64> = bpm.iter().flatten().copied().collect();
        ecg_mean_bpm = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
        match align_streams(r_times, &s1_times(&primary_run), cfg.align_max_lag_s) {
            Ok(a) => alignment = Some(a),
            Err(e) => alignment_error = Some(e.to_string()),
        }
    }
    Ok(SubjectRun {
        summary: SubjectHr {
            subject_id: rec.subject_id.clone(),
            mean_bpm,
            ecg_mean_bpm,
            valid_frames,
            n_frames,
            alignment,
            alignment_error,
        },
        rows,
        pairs,
    })
}

fn agreement(runs: &[SubjectRun], method: &'static str) -> MethodAgreement {
    let per: BTreeMap<String, Vec<(f64, f64)>> = runs
        .iter()
        .filter_map(|r| {
            let p = r.pairs.get(method)?;
            (!p.is_empty()).then(|| (r.summary.subject_id.clone(), p.clone()))
        })
        .collect();
    let pooled: Vec<(f64, f64)> = per.values().flatten().copied().collect();
    let (pred, reference): (Vec<f64>, Vec<f64>) = pooled.iter().copied().unzip();
    let ba = bland_altman(&pred, &reference).ok();
    MethodAgreement {
        subject_wise: subject_aggregate(&per).ok(),
        within_loa_fraction: ba.as_ref().map(|b| b.within_loa_fraction),
        pooled: ba.map(|b| b.report),
        n_pairs: pooled.len(),
    }
}

#[derive(Serialize)]
struct PairRow {
    subject_id: String,
    pcg_bpm: f64,
    ecg_bpm: f64,
    mean: f64,
    diff: f64,
}

fn write_plots(cfg: &RunConfig, runs: &[SubjectRun], method: &'static str, a: &MethodAgreement) -> Result<(), String> {
    let mut rows = Vec::new();
    for r in runs {
        for &(p, e) in r.pairs.get(method).into_iter().flatten() {
            rows.push(PairRow {
                subject_id: r.summary.subject_id.clone(),
                pcg_bpm: p,
                ecg_bpm: e,
                mean: 0.5 * (p + e),
                diff: p - e,
            });
        }
    }
    let dir = cfg.out.join("plots");
    write_csv(&dir.join(format!("hr_pairs_{method}.csv")), &rows)?;
    let corr: Vec<(f64, f64)> = rows.iter().map(|r| (r.ecg_bpm, r.pcg_bpm)).collect();
    write_text(
        &dir.join(format!("hr_correlation_{method}.svg")),
        &scatter_svg(&format!("HR {method} vs ECG"), "ECG HR (bpm)", "PCG HR (bpm)", &corr, &[], true),
    )?;
    let mut lines = Vec::new();
    if let Some(p) = &a.pooled {
        lines.push(HLine { y: p.bias_mean, dashed: false, label: format!("bias {:.2}", p.bias_mean) });
        lines.push(HLine { y: p.loa_low, dashed: true, label: format!("{:.2}", p.loa_low) });
        lines.push(HLine { y: p.loa_high, dashed: true, label: format!("{:.2}", p.loa_high) });
    }
    let ba: Vec<(f64, f64)> = rows.iter().map(|r| (r.mean, r.diff)).collect();
    write_text(
        &dir.join(format!("hr_bland_altman_{method}.svg")),
        &scatter_svg(
            &format!("Bland-Altman {method} vs ECG"),
            "mean HR (bpm)",
            "PCG - ECG (bpm)",
            &ba,
            &lines,
            false,
        ),
    )
}

pub fn run(dataset: &Path, cfg: &RunConfig) -> Result<Outcome, String> {
    let primary = cfg.method()?;
    let loaded = load_dataset(dataset, cfg)?;
    let (runs, errors) = per_subject(loaded, |rec| run_subject(rec, cfg));
    ensure_dir(&cfg.out)?;

    let rows: Vec<&FrameRow> = runs.iter().flat_map(|r| &r.rows).collect();
    write_csv(&cfg.out.join("hr_frames.csv"), &rows)?;

    let any_ecg = runs.iter().any(|r| r.summary.ecg_mean_bpm.is_some());
    let agreement = if any_ecg {
        ensure_dir(&cfg.out.join("plots"))?;
        let mut m = BTreeMap::new();
        for method in EnvelopeMethod::ALL {
            let a = agreement(&runs, method.name());
            write_plots(cfg, &runs, method.name(), &a)?;
            m.insert(method.name(), a);
        }
        Some(m)
    } else {
        None
    };
    let subjects = runs.into_iter().map(|r| r.summary).collect();
    write_report(
        cfg,
        "hr_report.json",
        SCHEMA,
        Body {
            primary_method: primary.name(),
            subjects,
            agreement,
            errors: errors.clone(),
        },
    )?;
    Ok(Outcome { errors })
}
