//! File formats and dataset layout: 16-bit PCM WAV, ECG text, per-subject
//! `meta.json`, plus ECG/PCG event alignment.
//!
//! A dataset is a directory with one folder per subject:
//!
//! ```text
//! root/
//!   subject_01/
//!     pcg.wav     16-bit PCM, mono (other channels ignored)
//!     ecg.txt     optional; one value per line, or `time,value`
//!     meta.json   optional; reference BP, ECG rate, free-form fields
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};
use crate::signal::{Label, SampledSignal};

pub const PCG_FILE: &str = "pcg.wav";
pub const ECG_FILE: &str = "ecg.txt";
pub const META_FILE: &str = "meta.json";

/// Event-matching tolerance used by [`align_streams`].
pub const ALIGN_TOLERANCE_S: f64 = 0.040;
/// Scores below this are flagged as low confidence.
pub const ALIGN_MIN_SCORE: f64 = 0.5;

/// Reads a 16-bit PCM WAV file, keeping the first channel and scaling by
/// 1/32768.
pub fn read_wav_pcm16<T: Scalar>(path: &Path) -> Result<SampledSignal<T>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedEncoding(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedEncoding(format!(
            "{}: {}-bit {:?}, expected 16-bit PCM",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let channels = spec.channels.max(1) as usize;
    let scale = lit::<T>(1.0 / 32768.0);
    let mut samples = Vec::with_capacity(reader.len() as usize / channels);
    for (i, s) in reader.into_samples::<i16>().enumerate() {
        let s = s.map_err(|e| Error::UnsupportedEncoding(format!("{}: {e}", path.display())))?;
        if i % channels == 0 {
            samples.push(lit::<T>(s as f64) * scale);
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyAudio(path.to_path_buf()));
    }
    SampledSignal::new(samples, lit(spec.sample_rate as f64), Label::Pcg)
}

/// Writes a mono 16-bit PCM WAV. Samples are scaled by 32768, rounded and
/// clipped to the i16 range. The rate is rounded to whole hertz.
pub fn write_wav_pcm16<T: Scalar>(path: &Path, s: &SampledSignal<T>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: to_f64(s.rate_hz()).round() as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedEncoding(other.to_string()),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &v in s.samples() {
        let q = (to_f64(v) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(q).map_err(wrap)?;
    }
    w.finalize().map_err(wrap)
}

/// Reads ECG text: one value per line, or `time,value` pairs (comma, tab or
/// space separated). Blank lines and lines starting with `#` are skipped.
/// With a time column the rate is inferred from its span unless `rate_hz`
/// is given, and the first time becomes the signal's start offset.
pub fn read_ecg_text<T: Scalar>(path: &Path, rate_hz: Option<f64>) -> Result<SampledSignal<T>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    parse_ecg_text(&text, rate_hz).map_err(|e| match e {
        Error::EmptyFile(_) => Error::EmptyFile(path.to_path_buf()),
        other => other,
    })
}

fn parse_ecg_text<T: Scalar>(text: &str, rate_hz: Option<f64>) -> Result<SampledSignal<T>> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut columns = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parse = |f: &str| -> Result<f64> {
            match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    line: line_no,
                    message: format!("not a finite number: {f:?}"),
                }),
            }
        };
        let n = *columns.get_or_insert(fields.len());
        if fields.len() != n || !(1..=2).contains(&n) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} field(s), found {}", n.min(2), fields.len()),
            });
        }
        if n == 2 {
            let t = parse(fields[0])?;
            if times.last().is_some_and(|&prev| t <= prev) {
                return Err(Error::NonMonotoneTime { line: line_no });
            }
            times.push(t);
        }
        values.push(parse(fields[n - 1])?);
    }
    if values.is_empty() {
        return Err(Error::EmptyFile(PathBuf::new()));
    }
    let (rate, start) = match (rate_hz, times.len()) {
        (Some(r), 0) => (r, 0.0),
        (Some(r), _) => (r, times[0]),
        (None, 0) => {
            return Err(Error::Config(
                "single-column ECG text needs an explicit sample rate".into(),
            ))
        }
        (None, 1) => {
            return Err(Error::Config(
                "cannot infer the ECG rate from a single time stamp".into(),
            ))
        }
        (None, n) => ((n - 1) as f64 / (times[n - 1] - times[0]), times[0]),
    };
    let s = SampledSignal::new(values.into_iter().map(lit).collect(), lit(rate), Label::Ecg)?;
    Ok(s.with_start(lit(start)))
}

/// Writes one value per line.
pub fn write_ecg_text<T: Scalar>(path: &Path, s: &SampledSignal<T>) -> Result<()> {
    let mut out = String::with_capacity(s.len() * 12);
    for &v in s.samples() {
        out.push_str(&format!("{}\n", to_f64(v)));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Contents of `meta.json`. Unknown keys are kept in `extra`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubjectMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbp_ref: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dbp_ref: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecg_rate_hz: Option<f64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord<T> {
    pub subject_id: String,
    pub pcg: SampledSignal<T>,
    pub ecg: Option<SampledSignal<T>>,
    pub sbp_ref: Option<f64>,
    pub dbp_ref: Option<f64>,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl<T: Scalar> SubjectRecord<T> {
    pub fn validate(&self) -> Result<()> {
        if let (Some(s), Some(d)) = (self.sbp_ref, self.dbp_ref) {
            if !(s > d && d > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{}: reference BP must satisfy sbp > dbp > 0, got {s}/{d}",
                    self.subject_id
                )));
            }
        }
        Ok(())
    }

    /// Both references, when present.
    pub fn bp_ref(&self) -> Option<(f64, f64)> {
        self.sbp_ref.zip(self.dbp_ref)
    }
}

pub fn read_meta(path: &Path) -> Result<SubjectMeta> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads one subject folder. The folder name is the subject id unless
/// `meta.json` overrides it. The ECG rate comes from `meta.json`, else from
/// the file's time column, else `default_ecg_rate_hz`.
pub fn load_subject<T: Scalar>(dir: &Path, default_ecg_rate_hz: Option<f64>) -> Result<SubjectRecord<T>> {
    let pcg = read_wav_pcm16(&dir.join(PCG_FILE))?;
    let meta_path = dir.join(META_FILE);
    let meta = if meta_path.exists() {
        read_meta(&meta_path)?
    } else {
        SubjectMeta::default()
    };
    let ecg_path = dir.join(ECG_FILE);
    let ecg = if ecg_path.exists() {
        Some(read_ecg_text(&ecg_path, meta.ecg_rate_hz.or(default_ecg_rate_hz))?)
    } else {
        None
    };
    let subject_id = meta.subject_id.clone().unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let record = SubjectRecord {
        subject_id,
        pcg,
        ecg,
        sbp_ref: meta.sbp_ref,
        dbp_ref: meta.dbp_ref,
        meta: meta.extra,
    };
    record.validate()?;
    Ok(record)
}

/// Subject folders under `root` (those holding a `pcg.wav`), sorted by name.
pub fn subject_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(PCG_FILE).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Writes a subject folder in the dataset layout.
pub fn write_subject<T: Scalar>(dir: &Path, record: &SubjectRecord<T>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_wav_pcm16(&dir.join(PCG_FILE), &record.pcg)?;
    if let Some(ecg) = &record.ecg {
        write_ecg_text(&dir.join(ECG_FILE), ecg)?;
    }
    let meta = SubjectMeta {
        subject_id: Some(record.subject_id.clone()),
        sbp_ref: record.sbp_ref,
        dbp_ref: record.dbp_ref,
        ecg_rate_hz: record.ecg.as_ref().map(|e| to_f64(e.rate_hz())),
        extra: record.meta.clone(),
    };
    write_json(&dir.join(META_FILE), &meta)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlignmentResult {
    /// Shift that maps PCG events onto ECG events: `pcg + lag ~ ecg`.
    pub lag_s: f64,
    /// Matched events over the shorter list.
    pub score: f64,
    pub matched: usize,
    pub low_confidence: bool,
}

fn to_micros(t: &[f64]) -> Vec<i64> {
    let mut v: Vec<i64> = t.iter().map(|&x| (x * 1e6).round() as i64).collect();
    v.sort_unstable();
    v
}

/// One-to-one matching of two sorted lists by a merge walk; returns the
/// matched count and the summed squared residuals.
fn match_events(a: &[i64], b: &[i64], shift: i64, tol: i64) -> (usize, i128) {
    let (mut i, mut j) = (0, 0);
    let (mut count, mut ssr) = (0usize, 0i128);
    while i < a.len() && j < b.len() {
        let d = b[j] + shift - a[i];
        if d.abs() <= tol {
            count += 1;
            ssr += (d as i128) * (d as i128);
            i += 1;
            j += 1;
        } else if d < 0 {
            j += 1;
        } else {
            i += 1;
        }
    }
    (count, ssr)
}

/// Finds the lag in 1 ms steps over `+/- max_lag_s` that matches the most
/// events within [`ALIGN_TOLERANCE_S`]. Ties go to the smaller squared
/// residual, then the smaller absolute lag.
pub fn align_streams(ecg_r: &[f64], pcg_s1: &[f64], max_lag_s: f64) -> Result<AlignmentResult> {
    for list in [ecg_r, pcg_s1] {
        if list.len() < 3 {
            return Err(Error::InsufficientEvents {
                needed: 3,
                got: list.len(),
            });
        }
    }
    if !(max_lag_s >= 0.0) || !max_lag_s.is_finite() {
        return Err(Error::Config(format!("invalid max lag {max_lag_s}")));
    }
    let a = to_micros(ecg_r);
    let b = to_micros(pcg_s1);
    let tol = (ALIGN_TOLERANCE_S * 1e6).round() as i64;
    let steps = (max_lag_s * 1000.0).floor() as i64;
    let mut best = (0usize, i128::MAX, i64::MAX);
    for k in -steps..=steps {
        let (count, ssr) = match_events(&a, &b, k * 1000, tol);
        let better = count > best.0
            || (count == best.0 && ssr < best.1)
            || (count == best.0 && ssr == best.1 && k.abs() < best.2.abs());
        if better {
            best = (count, ssr, k);
        }
    }
    let score = best.0 as f64 / a.len().min(b.len()) as f64;
    Ok(AlignmentResult {
        lag_s: best.2 as f64 / 1000.0,
        score,
        matched: best.0,
        low_confidence: score < ALIGN_MIN_SCORE,
    })
}
