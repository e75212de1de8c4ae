//! Report envelopes and output writers (JSON, CSV, SVG).

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Every JSON report: schema tag, toolkit version, full config, payload.
#[derive(Serialize)]
pub struct Report<'a, B: Serialize> {
    pub schema: &'static str,
    pub version: &'static str,
    pub config: &'a RunConfig,
    #[serde(flatten)]
    pub body: B,
}

/// A subject that could not be processed.
#[derive(Debug, Clone, Serialize)]
pub struct SubjectError {
    pub subject_id: String,
    pub error: String,
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<(), String> {
    pcgkit::io::write_json(path, value).map_err(|e| e.to_string())
}

pub fn write_report<B: Serialize>(
    cfg: &RunConfig,
    name: &str,
    schema: &'static str,
    body: B,
) -> Result<(), String> {
    let r = Report {
        schema,
        version: VERSION,
        config: cfg,
        body,
    };
    write_json(&cfg.out.join(name), &r)
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    for r in rows {
        w.serialize(r).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    w.flush().map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn ensure_dir(path: &Path) -> Result<(), String> {
    fs::create_dir_all(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Horizontal reference line on a scatter plot.
pub struct HLine {
    pub y: f64,
    pub dashed: bool,
    pub label: String,
}

/// Minimal static scatter plot.
pub fn scatter_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64)],
    hlines: &[HLine],
    identity_line: bool,
) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 50.0;
    let finite: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let ys = finite.iter().map(|p| p.1).chain(hlines.iter().map(|h| h.y));
    let (mut x0, mut x1) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if identity_line {
        x0 = x0.min(y0);
        y0 = x0;
        x1 = x1.max(y1);
        y1 = x1;
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        let span = if hi > lo { hi - lo } else { 1.0 };
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let ((x0, x1), (y0, y1)) = (pad(x0, x1), pad(y0, y1));
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    s += &format!("<rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", W - 2.0 * M, H - 2.0 * M);
    s += &format!("<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n", W / 2.0, escape(title));
    s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", W / 2.0, H - 12.0, escape(x_label));
    s += &format!(
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (v, anchor_x, anchor_y) in [(x0, sx(x0), H - M + 14.0), (x1, sx(x1), H - M + 14.0)] {
        s += &format!("<text x=\"{anchor_x:.1}\" y=\"{anchor_y:.1}\" text-anchor=\"middle\">{v:.1}</text>\n");
    }
    for v in [y0, y1] {
        s += &format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.1}</text>\n", M - 4.0, sy(v) + 4.0);
    }
    if identity_line {
        s += &format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999\"/>\n",
            sx(x0),
            sy(x0),
            sx(x1),
            sy(x1)
        );
    }
    for h in hlines {
        let dash = if h.dashed { " stroke-dasharray=\"5,4\"" } else { "" };
        s += &format!(
            "<line x1=\"{M}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#c33\"{dash}/>\n",
            W - M,
            y = sy(h.y)
        );
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" fill=\"#c33\">{}</text>\n",
            W - M - 2.0,
            sy(h.y) - 3.0,
            escape(&h.label)
        );
    }
    for (x, y) in finite {
        s += &format!("<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"#36c\" fill-opacity=\"0.7\"/>\n", sx(x), sy(y));
    }
    s += "</svg>\n";
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_enough() {
        let s = scatter_svg(
            "a<b",
            "x",
            "y",
            &[(1.0, 2.0), (2.0, 3.0), (f64::NAN, 1.0)],
            &[HLine {
                y: 0.5,
                dashed: true,
                label: "bias".into(),
            }],
            false,
        );
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 2);
        assert!(s.contains("a&lt;b"));
        let empty = scatter_svg("t", "x", "y", &[], &[], true);
        assert!(empty.contains("</svg>"));
    }
}
