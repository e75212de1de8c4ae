//! `pcgkit quality`: one row per subject with the dominant frequency band,
//! WES-vs-ES NRMSE for each wavelet and frame SNR statistics.

use std::collections::BTreeMap;
use std::path::Path;

use pcgkit::io::SubjectRecord;
use pcgkit::quality::{mfcc, quality_report, spectrogram_stft, QualityReport, SnrSummary, STFT_HOP, STFT_WINDOW};
use pcgkit::signal::segment_frames;
use serde::Serialize;

use super::{load_dataset, per_subject, Outcome};
use crate::config::RunConfig;
use crate::report::{ensure_dir, write_csv, write_report, write_text, SubjectError};

pub const SCHEMA: &str = "pcgkit.quality_report/1";
pub const MEL_FILTERS: usize = 26;
pub const MFCC_COEFFS: usize = 13;

#[derive(Serialize)]
pub struct QualityRow {
    pub subject_id: String,
    pub freq_range_hz: (f64, f64),
    pub nrmse: BTreeMap<String, f64>,
    pub snr_db: Option<SnrSummary>,
    pub per_frame_snr: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct CsvRow {
    subject_id: String,
    band_low_hz: f64,
    band_high_hz: f64,
    nrmse_morlet: Option<f64>,
    nrmse_morse: Option<f64>,
    nrmse_bump: Option<f64>,
    snr_max_db: Option<f64>,
    snr_min_db: Option<f64>,
    snr_avg_db: Option<f64>,
}

#[derive(Serialize)]
struct FrameCsv {
    subject_id: String,
    frame_index: usize,
    start_s: f64,
    band_low_hz: Option<f64>,
    band_high_hz: Option<f64>,
    snr_db: Option<f64>,
    snr_saturated: Option<bool>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Body<'a> {
    subjects: &'a [QualityRow],
    errors: &'a [SubjectError],
}

fn spectra(rec: &SubjectRecord<f64>, cfg: &RunConfig) -> Result<(), String> {
    let frames = segment_frames(&rec.pcg, cfg.frame_plan()).map_err(|e| e.to_string())?;
    let first = frames.first().ok_or("no complete frame")?;
    let dir = cfg.out.join("spectra");
    let sg = spectrogram_stft(first, STFT_WINDOW, STFT_HOP).map_err(|e| e.to_string())?;
    write_text(&dir.join(format!("{}_spectrogram.csv", rec.subject_id)), &sg.to_csv())?;
    let m = mfcc(first, MEL_FILTERS, MFCC_COEFFS).map_err(|e| e.to_string())?;
    let mut text = String::from("time_s");
    for k in 0..MFCC_COEFFS {
        text.push_str(&format!(",c{k}"));
    }
    text.push('\n');
    for (t, col) in sg.times_s.iter().zip(&m) {
        text.push_str(&format!("{t:.6}"));
        for c in col {
            text.push_str(&format!(",{c}"));
        }
        text.push('\n');
    }
    write_text(&dir.join(format!("{}_mfcc.csv", rec.subject_id)), &text)
}

fn run_subject(rec: &SubjectRecord<f64>, cfg: &RunConfig, with_spectra: bool) -> Result<(String, QualityReport), String> {
    let report = quality_report(&rec.pcg, cfg.frame_plan(), &cfg.pipeline()?, &cfg.quality()?)
        .map_err(|e| e.to_string())?;
    if with_spectra {
        spectra(rec, cfg)?;
    }
    Ok((rec.subject_id.clone(), report))
}

pub fn run(dataset: &Path, cfg: &RunConfig, with_spectra: bool) -> Result<Outcome, String> {
    let loaded = load_dataset(dataset, cfg)?;
    ensure_dir(&cfg.out)?;
    if with_spectra {
        ensure_dir(&cfg.out.join("spectra"))?;
    }
    let (reports, errors) = per_subject(loaded, |rec| run_subject(rec, cfg, with_spectra));

    let mut frames = Vec::new();
    for (id, r) in &reports {
        for f in &r.frames {
            frames.push(FrameCsv {
                subject_id: id.clone(),
                frame_index: f.frame_index,
                start_s: f.start_s,
                band_low_hz: f.band_hz.map(|b| b.0),
                band_high_hz: f.band_hz.map(|b| b.1),
                snr_db: f.snr.map(|s| s.db),
                snr_saturated: f.snr.map(|s| s.saturated),
                error: f.error.clone(),
            });
        }
    }
    write_csv(&cfg.out.join("quality_frames.csv"), &frames)?;

    let rows: Vec<QualityRow> = reports
        .into_iter()
        .map(|(subject_id, r)| QualityRow {
            subject_id,
            freq_range_hz: r.freq_range_hz,
            nrmse: r.nrmse,
            snr_db: r.snr_db,
            per_frame_snr: r.per_frame_snr,
        })
        .collect();
    let table: Vec<CsvRow> = rows
        .iter()
        .map(|r| CsvRow {
            subject_id: r.subject_id.clone(),
            band_low_hz: r.freq_range_hz.0,
            band_high_hz: r.freq_range_hz.1,
            nrmse_morlet: r.nrmse.get("morlet").copied(),
            nrmse_morse: r.nrmse.get("morse").copied(),
            nrmse_bump: r.nrmse.get("bump").copied(),
            snr_max_db: r.snr_db.map(|s| s.max),
            snr_min_db: r.snr_db.map(|s| s.min),
            snr_avg_db: r.snr_db.map(|s| s.avg),
        })
        .collect();
    write_csv(&cfg.out.join("quality_table.csv"), &table)?;
    write_report(cfg, "quality_report.json", SCHEMA, Body { subjects: &rows, errors: &errors })?;
    Ok(Outcome { errors })
}
