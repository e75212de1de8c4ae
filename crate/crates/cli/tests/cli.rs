use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pcgkit::io::{load_subject, subject_dirs};
use serde_json::Value;

const SPEC: &str = r#"
n_subjects = 12
seed = 5

[base]
duration_s = 8.0
"#;

fn pcgkit(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcgkit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PCGKIT_CONFIG")
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "{:?}\n{}", o.status, String::from_utf8_lossy(&o.stderr));
}

fn cohort() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("spec.toml"), SPEC).unwrap();
    ok(&pcgkit(dir.path(), &["synth", "spec.toml", "--out", "data"]));
    let data = dir.path().join("data");
    (dir, data)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_round_trip_and_reproducible() {
    let (dir, data) = cohort();
    let dirs = subject_dirs(&data).unwrap();
    assert_eq!(dirs.len(), 12);
    for d in &dirs {
        let r = load_subject::<f64>(d, None).unwrap();
        assert_eq!(r.pcg.len(), 16000);
        assert!(r.ecg.is_some() && r.bp_ref().is_some());
        assert_eq!(r.subject_id, d.file_name().unwrap().to_string_lossy());
    }
    assert_eq!(json(&data.join("truth.json"))["subjects"].as_array().unwrap().len(), 12);
    ok(&pcgkit(dir.path(), &["synth", "spec.toml", "--out", "again"]));
    for name in ["subject_01/pcg.wav", "subject_07/ecg.txt", "subject_12/meta.json", "truth.json"] {
        assert_eq!(
            fs::read(data.join(name)).unwrap(),
            fs::read(dir.path().join("again").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn hr_report_with_and_without_ecg() {
    let (dir, data) = cohort();
    ok(&pcgkit(dir.path(), &["hr", "data", "--out", "hr"]));
    let r = json(&dir.path().join("hr/hr_report.json"));
    assert_eq!(r["schema"], "pcgkit.hr_report/1");
    assert_eq!(r["config"]["frame_len_s"], 4.0);
    for m in ["hilbert", "shannon", "wes"] {
        let a = &r["agreement"][m]["subject_wise"];
        assert_eq!(a["n_subjects"], 12);
        assert!(a["mae"].as_f64().unwrap() < 2.0, "{m}: {a}");
        assert!(dir.path().join(format!("hr/plots/hr_bland_altman_{m}.svg")).exists());
    }
    for s in r["subjects"].as_array().unwrap() {
        assert!(s["alignment"]["lag_s"].is_number(), "{s}");
    }
    let frames = fs::read_to_string(dir.path().join("hr/hr_frames.csv")).unwrap();
    assert_eq!(frames.lines().count(), 1 + 12 * 2 * 3);

    for d in subject_dirs(&data).unwrap() {
        fs::remove_file(d.join("ecg.txt")).unwrap();
    }
    ok(&pcgkit(dir.path(), &["hr", "data", "--out", "pcg_only"]));
    let r = json(&dir.path().join("pcg_only/hr_report.json"));
    assert!(r.get("agreement").is_none());
    assert_eq!(r["subjects"].as_array().unwrap().len(), 12);
}

#[test]
fn bad_wav_gives_error_manifest() {
    let (dir, data) = cohort();
    fs::write(data.join("subject_03/pcg.wav"), b"not a wav file").unwrap();
    let o = pcgkit(dir.path(), &["hr", "data", "--out", "out"]);
    assert_eq!(o.status.code(), Some(1));
    let errors = json(&dir.path().join("out/errors.json"));
    assert_eq!(errors.as_array().unwrap().len(), 1);
    assert_eq!(errors[0]["subject_id"], "subject_03");
    let r = json(&dir.path().join("out/hr_report.json"));
    assert_eq!(r["subjects"].as_array().unwrap().len(), 11);
}

#[test]
fn fatal_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pcgkit(dir.path(), &["hr", "nowhere"]).status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "frame_len_s = -1.0\n").unwrap();
    let o = pcgkit(dir.path(), &["config", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.path().join("typo.toml"), "frame_length = 4.0\n").unwrap();
    assert_eq!(pcgkit(dir.path(), &["config", "--config", "typo.toml"]).status.code(), Some(2));
}

#[test]
fn config_file_env_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "frame_len_s = 6.0\nenvelope = \"shannon\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pcgkit"))
        .args(["config", "--method", "hilbert"])
        .current_dir(dir.path())
        .env("PCGKIT_CONFIG", "c.toml")
        .output()
        .unwrap();
    ok(&o);
    let cfg: toml::Table = toml::from_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg["frame_len_s"].as_float(), Some(6.0));
    assert_eq!(cfg["envelope"].as_str(), Some("hilbert"));
    assert_eq!(cfg["peak_distance_s"].as_float(), Some(0.125));
}

#[test]
fn bp_fit_predict_loocv() {
    let (dir, _) = cohort();
    ok(&pcgkit(dir.path(), &["bp", "fit", "data", "--out", "fit"]));
    let fit = json(&dir.path().join("fit/bp_fit.json"));
    assert_eq!(fit["fit"]["n_subjects"], 12);
    assert!(dir.path().join("fit/features.csv").exists());

    ok(&pcgkit(
        dir.path(),
        &["bp", "predict", "data", "--coefficients", "fit/bp_coefficients.json", "--out", "pred"],
    ));
    let pred = json(&dir.path().join("pred/bp_predictions.json"));
    // Predicting the training set reproduces the fit's in-sample residuals.
    for side in ["sbp", "dbp"] {
        let rmse = pred[format!("{side}_metrics")]["rmse"].as_f64().unwrap();
        let fitted = fit["fit"][side]["residual_rms"].as_f64().unwrap();
        assert!((rmse - fitted).abs() < 1e-6 * (1.0 + fitted), "{side}: {rmse} vs {fitted}");
    }

    ok(&pcgkit(dir.path(), &["bp", "predict", "data", "--reference", "--out", "ref"]));
    let r = json(&dir.path().join("ref/bp_predictions.json"));
    assert_eq!(r["coefficients_id"], "reference");
    assert_eq!(r["predictions"].as_array().unwrap().len(), 12);

    ok(&pcgkit(dir.path(), &["bp", "loocv", "data", "--out", "loocv"]));
    let l = json(&dir.path().join("loocv/bp_loocv.json"));
    assert_eq!(l["loocv"]["predictions"].as_array().unwrap().len(), 12);
    assert!(l["loocv"]["sbp"]["mae"].as_f64().unwrap().is_finite());
    assert!(dir.path().join("loocv/plots/bp_loocv_sbp.svg").exists());
}

#[test]
fn quality_table_schema() {
    let (dir, _) = cohort();
    ok(&pcgkit(dir.path(), &["quality", "data", "--out", "q", "--spectra"]));
    let r = json(&dir.path().join("q/quality_report.json"));
    assert_eq!(r["schema"], "pcgkit.quality_report/1");
    let rows = r["subjects"].as_array().unwrap();
    assert_eq!(rows.len(), 12);
    let mut morlet = Vec::new();
    let mut bump = Vec::new();
    for row in rows {
        let keys: Vec<&String> = row.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["freq_range_hz", "nrmse", "per_frame_snr", "snr_db", "subject_id"]);
        let n: Vec<&String> = row["nrmse"].as_object().unwrap().keys().collect();
        assert_eq!(n, ["bump", "morlet", "morse"]);
        let s: Vec<&String> = row["snr_db"].as_object().unwrap().keys().collect();
        assert_eq!(s, ["avg", "max", "min"]);
        assert_eq!(row["per_frame_snr"].as_array().unwrap().len(), 2);
        morlet.push(row["nrmse"]["morlet"].as_f64().unwrap());
        bump.push(row["nrmse"]["bump"].as_f64().unwrap());
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        0.5 * (v[5] + v[6])
    };
    assert!(median(&mut morlet) <= median(&mut bump));
    let table = fs::read_to_string(dir.path().join("q/quality_table.csv")).unwrap();
    assert!(table.starts_with("subject_id,band_low_hz,band_high_hz,nrmse_morlet,nrmse_morse,nrmse_bump,"));
    assert!(dir.path().join("q/spectra/subject_01_mfcc.csv").exists());
}

#[test]
fn embedded_config_reproduces_report() {
    let (dir, _) = cohort();
    ok(&pcgkit(dir.path(), &["hr", "data", "--method", "hilbert", "--frames", "8", "--out", "a"]));
    let first = fs::read_to_string(dir.path().join("a/hr_report.json")).unwrap();
    let embedded: Value = serde_json::from_str(&first).unwrap();
    // TOML has no null; unset optional keys are simply left out.
    let mut obj = embedded["config"].as_object().unwrap().clone();
    obj.retain(|_, v| !v.is_null());
    let cfg: toml::Value = serde_json::from_value(Value::Object(obj)).unwrap();
    fs::write(dir.path().join("embedded.toml"), toml::to_string(&cfg).unwrap()).unwrap();
    ok(&pcgkit(dir.path(), &["hr", "data", "--config", "embedded.toml"]));
    let second = fs::read_to_string(dir.path().join("a/hr_report.json")).unwrap();
    assert_eq!(first, second);
    assert_eq!(embedded["primary_method"], "hilbert");
}
