//! `pcgkit synth`: writes a synthetic cohort in the dataset layout.

use std::collections::BTreeMap;
use std::path::Path;

use pcgkit::io::{write_subject, SubjectRecord};
use pcgkit::signal::normalize_max_abs;
use pcgkit::synth::{
    generate_cohort, generate_ecg, generate_pcg, reference_cohort_coefficients, CohortRanges,
    CohortSubject, SynthSpec,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{ensure_dir, write_json, VERSION};

/// Peak amplitude of the written PCG, leaving headroom below full scale.
pub const PCG_PEAK: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub n_subjects: usize,
    pub seed: u64,
    pub with_ecg: bool,
    pub sbp_noise_sd: f64,
    pub dbp_noise_sd: f64,
    pub base: SynthSpec,
    pub ranges: CohortRanges,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            n_subjects: 15,
            seed: 1,
            with_ecg: true,
            sbp_noise_sd: 0.0,
            dbp_noise_sd: 0.0,
            base: SynthSpec::default(),
            ranges: CohortRanges::default(),
        }
    }
}

impl CohortSpec {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
            }
            None => Ok(Self::default()),
        }
    }
}

#[derive(Serialize)]
struct Truth<'a> {
    schema: &'static str,
    version: &'static str,
    spec: &'a CohortSpec,
    subjects: &'a [CohortSubject],
}

fn write_one(out: &Path, s: &CohortSubject, with_ecg: bool) -> Result<(), String> {
    let (pcg, truth) = generate_pcg::<f64>(&s.spec).map_err(|e| e.to_string())?;
    let norm = normalize_max_abs(&pcg).map_err(|e| e.to_string())?;
    let scale = PCG_PEAK / norm.scale;
    let ecg = if with_ecg {
        Some(generate_ecg::<f64>(&s.spec).map_err(|e| e.to_string())?.0)
    } else {
        None
    };
    let mut meta = BTreeMap::new();
    meta.insert("hr_truth_bpm".to_string(), truth.hr.into());
    meta.insert("pcg_scale".to_string(), scale.into());
    meta.insert("seed".to_string(), s.spec.seed.into());
    let record = SubjectRecord {
        subject_id: s.subject_id.clone(),
        pcg: pcg.scaled(scale),
        ecg,
        sbp_ref: Some(s.sbp),
        dbp_ref: Some(s.dbp),
        meta,
    };
    write_subject(&out.join(&s.subject_id), &record).map_err(|e| e.to_string())
}

pub fn run(spec: &CohortSpec, out: &Path) -> Result<(), String> {
    if spec.n_subjects == 0 {
        return Err("n_subjects must be positive".into());
    }
    let cohort = generate_cohort(
        spec.n_subjects,
        &spec.base,
        &spec.ranges,
        &reference_cohort_coefficients(),
        (spec.sbp_noise_sd, spec.dbp_noise_sd),
        spec.seed,
    )
    .map_err(|e| e.to_string())?;
    ensure_dir(out)?;
    cohort
        .par_iter()
        .map(|s| write_one(out, s, spec.with_ecg))
        .collect::<Result<Vec<()>, String>>()?;
    write_json(
        &out.join("truth.json"),
        &Truth {
            schema: "pcgkit.synth_truth/1",
            version: VERSION,
            spec,
            subjects: &cohort,
        },
    )
}
