//! Run configuration: a flat TOML file of documented keys, overridable from
//! the command line.

use std::path::{Path, PathBuf};

use pcgkit::bp::UnitConvention;
use pcgkit::envelope::EnvelopeMethod;
use pcgkit::hr::{HrFormula, PipelineParams};
use pcgkit::quality::QualityParams;
use pcgkit::segmentation::SegmentationParams;
use pcgkit::signal::FramePlan;
use pcgkit::wavelets::WaveletKind;
use serde::{Deserialize, Serialize};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "PCGKIT_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub frame_len_s: f64,
    /// hilbert, shannon or wes.
    pub envelope: String,
    /// cycle or eq7.
    pub formula: String,
    /// morlet, morse or bump; used by the WES envelope.
    pub wavelet: String,
    /// s or ms.
    pub units: String,
    pub analysis_rate_hz: f64,
    pub denoise_levels: usize,
    pub denoise_frac: f64,
    pub smoothing_cutoff_hz: f64,
    pub smoothing_order: usize,
    pub peak_height_frac: f64,
    pub peak_distance_s: f64,
    pub baseline_frac: f64,
    pub ecg_prominence: f64,
    /// Used when neither `meta.json` nor a time column gives the ECG rate.
    pub ecg_rate_hz: Option<f64>,
    pub align_max_lag_s: f64,
    pub band_rel_threshold: f64,
    pub snr_window_ms: f64,
    pub ridge_lambda: f64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            frame_len_s: 4.0,
            envelope: "wes".into(),
            formula: "cycle".into(),
            wavelet: "morlet".into(),
            units: "s".into(),
            analysis_rate_hz: 2000.0,
            denoise_levels: 8,
            denoise_frac: 0.15,
            smoothing_cutoff_hz: 20.0,
            smoothing_order: 4,
            peak_height_frac: 0.15,
            peak_distance_s: 0.125,
            baseline_frac: 0.15,
            ecg_prominence: 0.8,
            ecg_rate_hz: None,
            align_max_lag_s: 1.0,
            band_rel_threshold: 0.05,
            snr_window_ms: 50.0,
            ridge_lambda: 0.0,
            out: PathBuf::from("out"),
        }
    }
}

/// Command-line values that replace file values when given.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub frame_len_s: Option<f64>,
    pub envelope: Option<String>,
    pub formula: Option<String>,
    pub wavelet: Option<String>,
    pub units: Option<String>,
    pub out: Option<PathBuf>,
}

fn unit_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<(), String> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(())
    } else {
        Err(format!("{name} = {v} is outside [{lo}, {hi}]"))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Loads `path`, or the file named by [`CONFIG_ENV`], or the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        match path.map(Path::to_path_buf).or(env_path) {
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                Self::from_toml(&text).map_err(|e| format!("{}: {e}", p.display()))
            }
            None => Ok(Self::default()),
        }
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if let Some(v) = o.frame_len_s {
            self.frame_len_s = v;
        }
        if let Some(v) = &o.envelope {
            self.envelope = v.clone();
        }
        if let Some(v) = &o.formula {
            self.formula = v.clone();
        }
        if let Some(v) = &o.wavelet {
            self.wavelet = v.clone();
        }
        if let Some(v) = &o.units {
            self.units = v.clone();
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        self.method()?;
        self.hr_formula()?;
        self.wavelet_kind()?;
        self.unit_convention()?;
        unit_range("frame_len_s", self.frame_len_s, 1.0, 60.0)?;
        unit_range("analysis_rate_hz", self.analysis_rate_hz, 500.0, 192_000.0)?;
        unit_range("denoise_levels", self.denoise_levels as f64, 1.0, 12.0)?;
        unit_range("denoise_frac", self.denoise_frac, 0.0, 0.99)?;
        unit_range(
            "smoothing_cutoff_hz",
            self.smoothing_cutoff_hz,
            1.0,
            0.45 * self.analysis_rate_hz,
        )?;
        unit_range("smoothing_order", self.smoothing_order as f64, 1.0, 8.0)?;
        unit_range("peak_height_frac", self.peak_height_frac, 0.0, 1.0)?;
        unit_range("peak_distance_s", self.peak_distance_s, 0.0, 2.0)?;
        unit_range("baseline_frac", self.baseline_frac, 0.0, 0.99)?;
        unit_range("ecg_prominence", self.ecg_prominence, 0.0, 1.0)?;
        if let Some(r) = self.ecg_rate_hz {
            unit_range("ecg_rate_hz", r, 1.0, 100_000.0)?;
        }
        unit_range("align_max_lag_s", self.align_max_lag_s, 0.0, 10.0)?;
        unit_range("band_rel_threshold", self.band_rel_threshold, 1e-6, 1.0)?;
        unit_range("snr_window_ms", self.snr_window_ms, 1.0, 500.0)?;
        unit_range("ridge_lambda", self.ridge_lambda, 0.0, 1e6)?;
        Ok(())
    }

    pub fn method(&self) -> Result<EnvelopeMethod, String> {
        self.envelope.parse().map_err(|e: pcgkit::Error| e.to_string())
    }

    pub fn hr_formula(&self) -> Result<HrFormula, String> {
        self.formula.parse().map_err(|e: pcgkit::Error| e.to_string())
    }

    pub fn wavelet_kind(&self) -> Result<WaveletKind, String> {
        match self.wavelet.to_ascii_lowercase().as_str() {
            "morlet" => Ok(WaveletKind::morlet()),
            "morse" => Ok(WaveletKind::morse()),
            "bump" => Ok(WaveletKind::bump()),
            other => Err(format!("unknown wavelet {other:?}")),
        }
    }

    pub fn unit_convention(&self) -> Result<UnitConvention, String> {
        match self.units.to_ascii_lowercase().as_str() {
            "s" | "seconds" => Ok(UnitConvention::Seconds),
            "ms" | "milliseconds" => Ok(UnitConvention::Milliseconds),
            other => Err(format!("unknown unit convention {other:?}")),
        }
    }

    pub fn frame_plan(&self) -> FramePlan {
        FramePlan::non_overlapping(self.frame_len_s)
    }

    pub fn pipeline(&self) -> Result<PipelineParams, String> {
        Ok(PipelineParams {
            analysis_rate_hz: self.analysis_rate_hz,
            denoise_levels: self.denoise_levels,
            denoise_frac: self.denoise_frac,
            smoothing_cutoff_hz: self.smoothing_cutoff_hz,
            smoothing_order: self.smoothing_order,
            wavelet: self.wavelet_kind()?,
            segmentation: SegmentationParams {
                min_height_frac: self.peak_height_frac,
                min_distance_s: self.peak_distance_s,
                baseline_frac: self.baseline_frac,
            },
        })
    }

    pub fn quality(&self) -> Result<QualityParams, String> {
        Ok(QualityParams {
            band_rel_threshold: self.band_rel_threshold,
            snr_window_ms: self.snr_window_ms,
            envelope: self.method()?,
            ..QualityParams::default()
        })
    }
}
