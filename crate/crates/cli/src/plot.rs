//! SVG figures for the CSV artifacts of a report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::report::parse_csv;
use crate::CliError;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub color: &'a str,
}

#[derive(Clone, Copy, PartialEq)]
pub enum Scale {
    Linear,
    LogLog,
}

fn fmt_num(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e4) {
        format!("{x:.3e}")
    } else {
        format!("{x:.4}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart with min/max axis labels; log axes drop non-positive points.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>], scale: Scale, notes: &[String]) -> String {
    let tf = |v: f64| if scale == Scale::LogLog { v.log10() } else { v };
    let keep = |x: f64, y: f64| x.is_finite() && y.is_finite() && (scale == Scale::Linear || (x > 0.0 && y > 0.0));
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.x.iter().zip(s.y).filter(|(x, y)| keep(**x, **y)).map(|(x, y)| (tf(*x), tf(*y))).collect())
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let shown = |v: f64| if scale == Scale::LogLog { 10f64.powf(v) } else { v };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    if scale == Scale::Linear && y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(svg, r##"<line x1="{MARGIN}" y1="{:.3}" x2="{}" y2="{:.3}" stroke="#999" stroke-dasharray="4 3"/>"##, py(0.0), W - MARGIN, py(0.0));
    }
    let label = |svg: &mut String, x: f64, y: f64, anchor: &str, text: &str| {
        let _ = writeln!(svg, r#"<text x="{x:.3}" y="{y:.3}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{}</text>"#, escape(text));
    };
    label(&mut svg, MARGIN, H - MARGIN + 16.0, "start", &fmt_num(shown(x0)));
    label(&mut svg, W - MARGIN, H - MARGIN + 16.0, "end", &fmt_num(shown(x1)));
    label(&mut svg, MARGIN - 4.0, H - MARGIN, "end", &fmt_num(shown(y0)));
    label(&mut svg, MARGIN - 4.0, MARGIN + 10.0, "end", &fmt_num(shown(y1)));
    label(&mut svg, W / 2.0, H - 18.0, "middle", xlabel);
    label(&mut svg, 14.0, H / 2.0, "start", ylabel);
    for (s, p) in series.iter().zip(&pts) {
        if p.is_empty() {
            continue;
        }
        let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.3},{:.3}", px(x), py(y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, s.color, coords.join(" "));
    }
    for (k, s) in series.iter().enumerate() {
        let y = MARGIN + 16.0 + 14.0 * k as f64;
        let _ = writeln!(svg, r#"<text x="{:.3}" y="{y:.3}" font-family="sans-serif" font-size="11" fill="{}">{}</text>"#, MARGIN + 8.0, s.color, escape(s.label));
    }
    for (k, note) in notes.iter().enumerate() {
        let y = H - MARGIN - 10.0 - 14.0 * (notes.len() - 1 - k) as f64;
        label(&mut svg, W - MARGIN - 8.0, y, "end", note);
    }
    svg.push_str("</svg>\n");
    svg
}

fn column<'a>(header: &[String], cols: &'a [Vec<f64>], name: &str) -> Option<&'a [f64]> {
    header.iter().position(|h| h == name).map(|i| cols[i].as_slice())
}

/// Figure for one artifact, given the experiment's report entry.
pub fn plot_artifact(name: &str, csv: &str, experiment: &Value) -> Result<Option<String>, CliError> {
    let (header, cols) = parse_csv(csv).ok_or_else(|| CliError::Input(format!("{name}: malformed CSV")))?;
    let missing = |c: &str| CliError::Input(format!("{name}: missing column '{c}'"));
    let case = experiment["spec"]["case"].as_str().unwrap_or("");
    if name.ends_with("-trajectory.csv") {
        let s = column(&header, &cols, "s").ok_or_else(|| missing("s"))?;
        let x0 = column(&header, &cols, "x0").ok_or_else(|| missing("x0"))?;
        let (xs, ys, xl, yl) = match column(&header, &cols, "x1") {
            Some(x1) => (x0, x1, "x0", "x1"),
            None => (s, x0, "s", "x0"),
        };
        let series = [Series { label: case, x: xs, y: ys, color: "#1f77b4" }];
        return Ok(Some(line_plot(&format!("{case}: trajectory"), xl, yl, &series, Scale::Linear, &[])));
    }
    if name.contains("-detj") {
        let s = column(&header, &cols, "s").ok_or_else(|| missing("s"))?;
        let det = column(&header, &cols, "det").ok_or_else(|| missing("det"))?;
        let changes = det.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        let series = [Series { label: "det J(s)", x: s, y: det, color: "#d62728" }];
        let notes = [format!("sign changes: {changes}")];
        return Ok(Some(line_plot(&format!("{case}: det J"), "s", "det J", &series, Scale::Linear, &notes)));
    }
    if let Some(k) = name.strip_suffix(".csv").and_then(|n| n.rsplit_once("-residual-")).and_then(|(_, k)| k.parse::<usize>().ok()) {
        let eps = column(&header, &cols, "epsilon").ok_or_else(|| missing("epsilon"))?;
        let abs = column(&header, &cols, "abs_residual").ok_or_else(|| missing("abs_residual"))?;
        let window = &experiment["result"]["windows"][k];
        let mut notes = Vec::new();
        let fit: Vec<f64>;
        let mut series = vec![Series { label: "|Res(eps)|", x: eps, y: abs, color: "#2ca02c" }];
        match (window["slope"].as_f64(), window["fit"]["log_intercept"].as_f64()) {
            (Some(slope), Some(b)) => {
                fit = eps.iter().map(|e| (b + slope * e.ln()).exp()).collect();
                series.push(Series { label: "fit", x: eps, y: &fit, color: "#7f7f7f" });
                notes.push(format!("slope = {slope:.4}"));
            }
            _ => notes.push("quadratic: residual below noise floor".into()),
        }
        if let Some(s0) = window["s0"].as_f64() {
            notes.push(format!("s0 = {s0}"));
        }
        return Ok(Some(line_plot(&format!("{case}: residual"), "epsilon", "|Res|", &series, Scale::LogLog, &notes)));
    }
    Ok(None)
}

/// Writes an SVG next to every plottable artifact listed in the report.
pub fn emit_plots(report_path: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(report_path).map_err(|e| CliError::Input(format!("{}: {e}", report_path.display())))?;
    let report: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", report_path.display())))?;
    let dir = report_path.parent().unwrap_or(Path::new("."));
    let experiments = report["experiments"].as_array().ok_or_else(|| CliError::Input("report has no experiment list".into()))?;
    let mut written = Vec::new();
    for exp in experiments {
        for name in exp["artifacts"].as_array().into_iter().flatten().filter_map(Value::as_str) {
            let path = dir.join(name);
            let csv = std::fs::read_to_string(&path).map_err(|e| CliError::Input(format!("missing artifact {}: {e}", path.display())))?;
            if let Some(svg) = plot_artifact(name, &csv, exp)? {
                let out = path.with_extension("svg");
                std::fs::write(&out, svg).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
                written.push(out);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn detj_plot_counts_sign_changes() {
        let csv = "s,det\n0,0\n0.25,1\n0.5,0.5\n0.75,-1\n1,-0.5\n";
        let svg = plot_artifact("x-detj.csv", csv, &json!({"spec": {"case": "sphere"}})).unwrap().unwrap();
        assert!(svg.contains("sign changes: 1"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn residual_plot_carries_slope() {
        let csv = "epsilon,residual,abs_residual\n0.1,0.2,0.2\n0.01,0.02,0.02\n";
        let exp = json!({"spec": {"case": "w"}, "result": {"windows": [{"s0": 0.1, "slope": 1.0, "fit": {"log_intercept": 0.693}}]}});
        let svg = plot_artifact("a-residual-0.csv", csv, &exp).unwrap().unwrap();
        assert!(svg.contains("slope = 1.0000"));
    }

    #[test]
    fn plots_are_byte_stable() {
        let csv = "s,x0,v0\n0,0,1\n1,1,1\n";
        let a = plot_artifact("t-trajectory.csv", csv, &json!({})).unwrap();
        let b = plot_artifact("t-trajectory.csv", csv, &json!({})).unwrap();
        assert_eq!(a, b);
    }
}
