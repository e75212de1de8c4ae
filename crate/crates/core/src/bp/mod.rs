//! Semi-empirical blood-pressure model: per-subject PCG timing features,
//! quadratic SBP/DBP prediction, least-squares fitting and leave-one-subject-out
//! validation.
//!
//! Each side has ten terms. SBP uses
//! `1, t_sys, t_rs1, t_ds1, t_s1, HR, HR^2, t_sys^2, t_s1^2, t_rs1*t_ds1`
//! and DBP mirrors it with the diastolic quantities. Times enter in the units
//! named by [`UnitConvention`]; HR is always in beats per minute.

mod fit;
mod regression;

pub use fit::{
    fit_bp_model, loocv_subjectwise, BpFit, BpFitOptions, BpSample, LoocvPrediction,
    LoocvReport, LoocvSide, SideDiagnostics,
};
pub use regression::{
    fit_multiple_regression, fit_regularized, DesignMatrix, RegressionFit, RegressionOptions,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hr::HrEstimate;
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::segmentation::CycleSegmentation;

/// Number of terms per side.
pub const TERMS: usize = 10;

/// Time unit used when evaluating the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum UnitConvention {
    #[default]
    Seconds,
    Milliseconds,
}

impl UnitConvention {
    /// Multiplier from seconds to this unit.
    pub fn per_second(self) -> f64 {
        match self {
            UnitConvention::Seconds => 1.0,
            UnitConvention::Milliseconds => 1000.0,
        }
    }
}

/// Averaged timing features of one subject (times in seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcgFeatureVector<T> {
    pub t_sys: T,
    pub t_dias: T,
    pub t_rs1: T,
    pub t_ds1: T,
    pub t_rd2: T,
    pub t_dd2: T,
    pub t_s1: T,
    pub t_s2: T,
    pub hr_pcg: T,
}

impl<T: Scalar> PcgFeatureVector<T> {
    /// Builds a feature vector, deriving `t_s1` and `t_s2` as sums.
    pub fn from_timing(
        t_sys: T,
        t_dias: T,
        t_rs1: T,
        t_ds1: T,
        t_rd2: T,
        t_dd2: T,
        hr_pcg: T,
    ) -> Result<Self> {
        let f = Self {
            t_sys,
            t_dias,
            t_rs1,
            t_ds1,
            t_rd2,
            t_dd2,
            t_s1: t_rs1 + t_ds1,
            t_s2: t_rd2 + t_dd2,
            hr_pcg,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn as_array(&self) -> [T; 9] {
        [
            self.t_sys, self.t_dias, self.t_rs1, self.t_ds1, self.t_rd2, self.t_dd2, self.t_s1,
            self.t_s2, self.hr_pcg,
        ]
    }

    pub const NAMES: [&'static str; 9] = [
        "t_sys", "t_dias", "t_rs1", "t_ds1", "t_rd2", "t_dd2", "t_s1", "t_s2", "hr_pcg",
    ];

    /// Every value positive and finite, and the sound durations equal the
    /// sums of their rise and decay times.
    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|v| !(*v > T::zero() && v.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "features must be positive and finite: {self:?}"
            )));
        }
        self.check_sums()
    }

    fn check_sums(&self) -> Result<()> {
        if let Some(i) = self.as_array().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature {} is not finite",
                Self::NAMES[i]
            )));
        }
        let tol = lit::<T>(1e-6);
        let close = |a: T, b: T| (a - b).abs() <= tol * (T::one() + a.abs().max(b.abs()));
        if !close(self.t_s1, self.t_rs1 + self.t_ds1) || !close(self.t_s2, self.t_rd2 + self.t_dd2)
        {
            return Err(Error::InvalidInput(
                "t_s1 and t_s2 must equal the sums of their rise and decay times".into(),
            ));
        }
        Ok(())
    }

    /// SBP regressors in `units`.
    pub fn sbp_terms(&self, units: UnitConvention) -> [T; TERMS] {
        let k = lit::<T>(units.per_second());
        let (ts, r, d, s1) = (self.t_sys * k, self.t_rs1 * k, self.t_ds1 * k, self.t_s1 * k);
        let hr = self.hr_pcg;
        [T::one(), ts, r, d, s1, hr, hr * hr, ts * ts, s1 * s1, r * d]
    }

    /// DBP regressors in `units`.
    pub fn dbp_terms(&self, units: UnitConvention) -> [T; TERMS] {
        let k = lit::<T>(units.per_second());
        let (td, r, d, s2) = (self.t_dias * k, self.t_rd2 * k, self.t_dd2 * k, self.t_s2 * k);
        let hr = self.hr_pcg;
        [T::one(), td, r, d, s2, hr, hr * hr, td * td, s2 * s2, r * d]
    }
}

/// SBP-side coefficients, in term order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbpCoefficients<T> {
    pub c1: T,
    pub sigma_sys: T,
    pub sigma_rs1: T,
    pub sigma_ds1: T,
    pub sigma_s1: T,
    pub sigma_s_hr: T,
    pub sigma_s_hr2: T,
    pub sigma_sys2: T,
    pub sigma_s12: T,
    pub sigma_rds1: T,
}

/// DBP-side coefficients, in term order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbpCoefficients<T> {
    pub c2: T,
    pub alpha_dias: T,
    pub alpha_rd2: T,
    pub alpha_dd2: T,
    pub alpha_s2: T,
    pub alpha_d_hr: T,
    pub alpha_d_hr2: T,
    pub alpha_dias2: T,
    pub alpha_s22: T,
    pub alpha_rdd2: T,
}

impl<T: Copy> SbpCoefficients<T> {
    pub const NAMES: [&'static str; TERMS] = [
        "c1",
        "sigma_sys",
        "sigma_rs1",
        "sigma_ds1",
        "sigma_s1",
        "sigma_s_hr",
        "sigma_s_hr2",
        "sigma_sys2",
        "sigma_s12",
        "sigma_rds1",
    ];

    pub fn as_array(&self) -> [T; TERMS] {
        [
            self.c1,
            self.sigma_sys,
            self.sigma_rs1,
            self.sigma_ds1,
            self.sigma_s1,
            self.sigma_s_hr,
            self.sigma_s_hr2,
            self.sigma_sys2,
            self.sigma_s12,
            self.sigma_rds1,
        ]
    }

    pub fn from_array(a: [T; TERMS]) -> Self {
        Self {
            c1: a[0],
            sigma_sys: a[1],
            sigma_rs1: a[2],
            sigma_ds1: a[3],
            sigma_s1: a[4],
            sigma_s_hr: a[5],
            sigma_s_hr2: a[6],
            sigma_sys2: a[7],
            sigma_s12: a[8],
            sigma_rds1: a[9],
        }
    }
}

impl<T: Copy> DbpCoefficients<T> {
    pub const NAMES: [&'static str; TERMS] = [
        "c2",
        "alpha_dias",
        "alpha_rd2",
        "alpha_dd2",
        "alpha_s2",
        "alpha_d_hr",
        "alpha_d_hr2",
        "alpha_dias2",
        "alpha_s22",
        "alpha_rdd2",
    ];

    pub fn as_array(&self) -> [T; TERMS] {
        [
            self.c2,
            self.alpha_dias,
            self.alpha_rd2,
            self.alpha_dd2,
            self.alpha_s2,
            self.alpha_d_hr,
            self.alpha_d_hr2,
            self.alpha_dias2,
            self.alpha_s22,
            self.alpha_rdd2,
        ]
    }

    pub fn from_array(a: [T; TERMS]) -> Self {
        Self {
            c2: a[0],
            alpha_dias: a[1],
            alpha_rd2: a[2],
            alpha_dd2: a[3],
            alpha_s2: a[4],
            alpha_d_hr: a[5],
            alpha_d_hr2: a[6],
            alpha_dias2: a[7],
            alpha_s22: a[8],
            alpha_rdd2: a[9],
        }
    }
}

/// Both coefficient sets plus the time unit they expect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpCoefficients<T> {
    pub sbp: SbpCoefficients<T>,
    pub dbp: DbpCoefficients<T>,
    pub unit_convention: UnitConvention,
}

// Time exponent of each term: 0 for the intercept and HR terms, 1 for linear
// time terms, 2 for quadratic and interaction terms.
const TIME_POWER: [i32; TERMS] = [0, 1, 1, 1, 1, 0, 0, 2, 2, 2];

impl<T: Scalar> BpCoefficients<T> {
    /// Reference coefficient set for times in seconds.
    pub fn reference() -> Self {
        let sbp = [
            0.655, -1.112, 48.90, 48.45, -50.44, -6.940e-3, 0.41e-5, 1.689, 22.98, -59.02,
        ];
        let dbp = [
            1.799, 2.463, 11.96, 7.878, -9.643, -5.291e-2, 3.05e-4, -2.816, 30.49, -10.94,
        ];
        Self {
            sbp: SbpCoefficients::from_array(sbp.map(lit)),
            dbp: DbpCoefficients::from_array(dbp.map(lit)),
            unit_convention: UnitConvention::Seconds,
        }
    }

    /// Same model re-expressed for `units`: predictions are unchanged up to
    /// rounding.
    pub fn converted(&self, units: UnitConvention) -> Self {
        let ratio = units.per_second() / self.unit_convention.per_second();
        let rescale = |a: [T; TERMS]| {
            let mut out = a;
            for (v, p) in out.iter_mut().zip(TIME_POWER) {
                *v = *v / lit::<T>(ratio.powi(p));
            }
            out
        };
        Self {
            sbp: SbpCoefficients::from_array(rescale(self.sbp.as_array())),
            dbp: DbpCoefficients::from_array(rescale(self.dbp.as_array())),
            unit_convention: units,
        }
    }

    fn check_finite(&self) -> Result<()> {
        let all = self.sbp.as_array().into_iter().chain(self.dbp.as_array());
        if all.into_iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("coefficients must be finite".into()))
        }
    }
}

fn dot<T: Scalar>(a: &[T; TERMS], b: &[T; TERMS]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn finite_or_overflow<T: Scalar>(v: T, what: &str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericOverflow(format!("{what} prediction is {v}")))
    }
}

pub fn predict_sbp<T: Scalar>(f: &PcgFeatureVector<T>, c: &BpCoefficients<T>) -> Result<T> {
    f.check_sums()?;
    c.check_finite()?;
    let v = dot(&f.sbp_terms(c.unit_convention), &c.sbp.as_array());
    finite_or_overflow(v, "SBP")
}

pub fn predict_dbp<T: Scalar>(f: &PcgFeatureVector<T>, c: &BpCoefficients<T>) -> Result<T> {
    f.check_sums()?;
    c.check_finite()?;
    let v = dot(&f.dbp_terms(c.unit_convention), &c.dbp.as_array());
    finite_or_overflow(v, "DBP")
}

pub const SBP_PLAUSIBLE: (f64, f64) = (60.0, 220.0);
pub const DBP_PLAUSIBLE: (f64, f64) = (30.0, 140.0);

/// A blood-pressure prediction with its plausibility check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpPrediction<T> {
    pub sbp: T,
    pub dbp: T,
    pub coefficients_id: String,
    pub unit_convention: UnitConvention,
    /// Both values inside the physiologic ranges.
    pub plausible: bool,
}

pub fn predict_bp<T: Scalar>(
    f: &PcgFeatureVector<T>,
    c: &BpCoefficients<T>,
    coefficients_id: &str,
) -> Result<BpPrediction<T>> {
    let sbp = predict_sbp(f, c)?;
    let dbp = predict_dbp(f, c)?;
    let inside = |v: T, (lo, hi): (f64, f64)| (lo..=hi).contains(&to_f64(v));
    Ok(BpPrediction {
        sbp,
        dbp,
        coefficients_id: coefficients_id.to_string(),
        unit_convention: c.unit_convention,
        plausible: inside(sbp, SBP_PLAUSIBLE) && inside(dbp, DBP_PLAUSIBLE),
    })
}

/// Subject-level features with frame bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectFeatures<T> {
    pub features: PcgFeatureVector<T>,
    pub valid_frames: usize,
    pub excluded_frames: usize,
}

/// Averages per-frame measurements into one feature vector. `None` entries
/// (failed frames), flagged heart rates and frames with non-positive
/// durations are excluded and counted.
pub fn extract_subject_features<T: Scalar>(
    per_frame: &[Option<(CycleSegmentation<T>, HrEstimate<T>)>],
) -> Result<SubjectFeatures<T>> {
    let mut sum = [T::zero(); 9];
    let mut valid = 0usize;
    for (seg, hr) in per_frame.iter().flatten() {
        if !hr.is_accepted() {
            continue;
        }
        let Ok(f) = PcgFeatureVector::from_timing(
            seg.t_sys, seg.t_dias, seg.t_rs1, seg.t_ds1, seg.t_rd2, seg.t_dd2, hr.bpm,
        ) else {
            continue;
        };
        for (s, v) in sum.iter_mut().zip(f.as_array()) {
            *s = *s + v;
        }
        valid += 1;
    }
    if valid == 0 {
        return Err(Error::NoValidFrames);
    }
    let m = sum.map(|s| s / from_usize(valid));
    let features = PcgFeatureVector {
        t_sys: m[0],
        t_dias: m[1],
        t_rs1: m[2],
        t_ds1: m[3],
        t_rd2: m[4],
        t_dd2: m[5],
        t_s1: m[6],
        t_s2: m[7],
        hr_pcg: m[8],
    };
    Ok(SubjectFeatures {
        features,
        valid_frames: valid,
        excluded_frames: per_frame.len() - valid,
    })
}

/// Feature matrix as CSV, one row per subject, for external cross-checks.
pub fn feature_matrix_csv<T: Scalar>(samples: &[BpSample<T>]) -> String {
    let mut out = String::from("subject_id");
    for name in PcgFeatureVector::<T>::NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",sbp_ref,dbp_ref\n");
    for s in samples {
        out.push_str(&s.subject_id);
        for v in s.features.as_array() {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{},{}\n", s.sbp_ref, s.dbp_ref));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hr::{HrFormula, HrSource};
    use proptest::prelude::*;

    fn zero() -> PcgFeatureVector<f64> {
        PcgFeatureVector {
            t_sys: 0.0,
            t_dias: 0.0,
            t_rs1: 0.0,
            t_ds1: 0.0,
            t_rd2: 0.0,
            t_dd2: 0.0,
            t_s1: 0.0,
            t_s2: 0.0,
            hr_pcg: 0.0,
        }
    }

    fn example() -> PcgFeatureVector<f64> {
        PcgFeatureVector::from_timing(0.3, 0.5, 0.04, 0.05, 0.03, 0.06, 72.0).unwrap()
    }

    #[test]
    fn intercepts_from_zero_features() {
        let c = BpCoefficients::<f64>::reference();
        assert_eq!(predict_sbp(&zero(), &c).unwrap(), 0.655);
        assert_eq!(predict_dbp(&zero(), &c).unwrap(), 1.799);
    }

    #[test]
    fn matches_term_by_term_oracle() {
        // Independent term-by-term evaluation with math.fsum.
        let c = BpCoefficients::<f64>::reference();
        let sbp = predict_sbp(&example(), &c).unwrap();
        let dbp = predict_dbp(&example(), &c).unwrap();
        assert!((sbp - -0.09801759999999893).abs() < 1e-9, "{sbp}");
        assert!((dbp - 0.288987).abs() < 1e-9, "{dbp}");
    }

    #[test]
    fn table_values_and_names() {
        let c = BpCoefficients::<f64>::reference();
        assert_eq!(c.sbp.sigma_ds1, 48.45);
        assert_eq!(c.sbp.sigma_s_hr2, 0.41e-5);
        assert_eq!(c.dbp.alpha_rdd2, -10.94);
        let json = serde_json::to_value(c).unwrap();
        assert_eq!(json["unit_convention"], "SECONDS");
        assert_eq!(json["sbp"]["sigma_rds1"], -59.02);
        let back: BpCoefficients<f64> = serde_json::from_value(json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn sums_are_enforced() {
        let mut f = example();
        f.t_s1 = 0.2;
        assert!(predict_sbp(&f, &BpCoefficients::reference()).is_err());
        assert!(PcgFeatureVector::from_timing(0.3, -0.5, 0.04, 0.05, 0.03, 0.06, 72.0).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let mut c = BpCoefficients::<f64>::reference();
        c.sbp.sigma_s_hr2 = 1e308;
        let mut f = example();
        f.hr_pcg = 1e10;
        assert!(matches!(predict_sbp(&f, &c), Err(Error::NumericOverflow(_))));
    }

    #[test]
    fn plausibility_flag() {
        let p = predict_bp(&example(), &BpCoefficients::reference(), "reference").unwrap();
        assert!(!p.plausible);
        let p = predict_bp(
            &example(),
            &crate::synth::reference_cohort_coefficients(),
            "reference",
        )
        .unwrap();
        assert!(p.plausible, "{p:?}");
    }

    fn frame(t_sys: f64, bpm: f64) -> Option<(CycleSegmentation<f64>, HrEstimate<f64>)> {
        let seg = CycleSegmentation {
            peaks: Vec::new(),
            t_sys,
            t_dias: 0.5,
            t_rs1: 0.04,
            t_ds1: 0.05,
            t_rd2: 0.03,
            t_dd2: 0.04,
            t_s1: 0.09,
            t_s2: 0.07,
            n_cycles: 4,
            skipped_rise_decay: 0,
        };
        let hr = HrEstimate::new(bpm, HrSource::PcgShannon, 0, Some(HrFormula::CyclePeriod));
        Some((seg, hr))
    }

    #[test]
    fn subject_features_average_valid_frames() {
        let f = extract_subject_features(&[frame(0.30, 70.0), frame(0.32, 72.0)]).unwrap();
        assert!((f.features.t_sys - 0.31).abs() < 1e-12);
        assert!((f.features.hr_pcg - 71.0).abs() < 1e-12);
        assert_eq!(f.valid_frames, 2);

        let f = extract_subject_features(&[frame(0.3, 70.0), None, frame(0.3, 300.0)]).unwrap();
        assert_eq!((f.valid_frames, f.excluded_frames), (1, 2));
        assert_eq!(f.features, extract_subject_features(&[frame(0.3, 70.0)]).unwrap().features);
        assert!(matches!(
            extract_subject_features::<f64>(&[None]),
            Err(Error::NoValidFrames)
        ));
    }

    #[test]
    fn csv_export() {
        let csv = feature_matrix_csv(&[BpSample {
            subject_id: "s1".into(),
            features: example(),
            sbp_ref: 120.0,
            dbp_ref: 80.0,
        }]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "subject_id,t_sys,t_dias,t_rs1,t_ds1,t_rd2,t_dd2,t_s1,t_s2,hr_pcg,sbp_ref,dbp_ref"
        );
        assert!(lines.next().unwrap().starts_with("s1,0.3,0.5,0.04,"));
    }

    fn features() -> impl Strategy<Value = PcgFeatureVector<f64>> {
        (
            0.15f64..0.45,
            0.2f64..1.0,
            0.01f64..0.06,
            0.01f64..0.06,
            0.01f64..0.06,
            0.01f64..0.06,
            40.0f64..160.0,
        )
            .prop_map(|(a, b, c, d, e, f, g)| {
                PcgFeatureVector::from_timing(a, b, c, d, e, f, g).unwrap()
            })
    }

    fn coefficient_array() -> impl Strategy<Value = [f64; TERMS]> {
        prop::array::uniform10(-100.0f64..100.0)
    }

    proptest! {
        #[test]
        fn unit_switch_preserves_predictions(f in features()) {
            let c = BpCoefficients::<f64>::reference();
            let ms = c.converted(UnitConvention::Milliseconds);
            prop_assert_eq!(ms.unit_convention, UnitConvention::Milliseconds);
            let a = predict_sbp(&f, &c).unwrap();
            let b = predict_sbp(&f, &ms).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            let a = predict_dbp(&f, &c).unwrap();
            let b = predict_dbp(&f, &ms).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            let back = ms.converted(UnitConvention::Seconds);
            prop_assert!((predict_sbp(&f, &back).unwrap() - predict_sbp(&f, &c).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn prediction_is_linear_in_coefficients(
            f in features(),
            a in coefficient_array(),
            b in coefficient_array(),
        ) {
            let table = BpCoefficients::<f64>::reference();
            let mk = |s: [f64; TERMS]| BpCoefficients {
                sbp: SbpCoefficients::from_array(s),
                ..table
            };
            let sum: [f64; TERMS] = std::array::from_fn(|i| a[i] + b[i]);
            let lhs = predict_sbp(&f, &mk(sum)).unwrap();
            let rhs = predict_sbp(&f, &mk(a)).unwrap() + predict_sbp(&f, &mk(b)).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
            let terms = f.sbp_terms(UnitConvention::Seconds);
            let dotted: f64 = terms.iter().zip(&a).map(|(t, c)| t * c).sum();
            prop_assert!((predict_sbp(&f, &mk(a)).unwrap() - dotted).abs() < 1e-12 * (1.0 + dotted.abs()));
        }
    }
}
