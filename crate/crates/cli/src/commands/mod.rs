pub mod bp;
pub mod hr;
pub mod quality;
pub mod synth;

use std::path::Path;

use pcgkit::io::{load_subject, subject_dirs, SubjectRecord};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::report::SubjectError;

/// Outcome of a command: fatal errors abort, subject errors are collected.
pub struct Outcome {
    pub errors: Vec<SubjectError>,
}

pub type Loaded = Result<SubjectRecord<f64>, SubjectError>;

fn dir_id(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Loads every subject folder in parallel, keeping directory order.
pub fn load_dataset(root: &Path, cfg: &RunConfig) -> Result<Vec<Loaded>, String> {
    let dirs = subject_dirs(root).map_err(|e| e.to_string())?;
    if dirs.is_empty() {
        return Err(format!("no subject folders with pcg.wav under {}", root.display()));
    }
    Ok(dirs
        .par_iter()
        .map(|d| {
            load_subject(d, cfg.ecg_rate_hz).map_err(|e| SubjectError {
                subject_id: dir_id(d),
                error: e.to_string(),
            })
        })
        .collect())
}

/// Runs `f` over the loaded subjects in parallel; load failures and `f`
/// failures both become subject errors. Output order follows the input.
pub fn per_subject<R: Send>(
    loaded: Vec<Loaded>,
    f: impl Fn(&SubjectRecord<f64>) -> Result<R, String> + Sync,
) -> (Vec<R>, Vec<SubjectError>) {
    let results: Vec<Result<R, SubjectError>> = loaded
        .into_par_iter()
        .map(|l| {
            let rec = l?;
            f(&rec).map_err(|error| SubjectError {
                subject_id: rec.subject_id.clone(),
                error,
            })
        })
        .collect();
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => errors.push(e),
        }
    }
    (ok, errors)
}
