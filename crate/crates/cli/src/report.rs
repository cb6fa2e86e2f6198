//! Report assembly and JSON output with 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use src_geolab_core::trajectory::fmt17;

use crate::config::ExperimentSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NumericalFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::NumericalFailure => 3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub index: usize,
    pub spec: ExperimentSpec,
    pub status: Status,
    pub verdicts: BTreeMap<String, bool>,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub exit_code: i32,
    pub experiments: Vec<CaseReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl RunReport {
    pub fn new(config_hash: String, experiments: Vec<CaseReport>) -> Self {
        let exit_code = experiments.iter().map(|c| c.status.exit_code()).max().unwrap_or(0);
        RunReport {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash,
            exit_code,
            experiments,
            seconds: None,
        }
    }

    /// Drops wall-clock fields so that reports depend on inputs only.
    pub fn canonicalize(&mut self) {
        self.seconds = None;
        for c in &mut self.experiments {
            c.seconds = None;
        }
    }

    pub fn to_json(&self) -> String {
        to_json(&serde_json::to_value(self).expect("report serializes"))
    }
}

/// Pretty JSON with sorted keys, floats in 17-digit scientific notation and
/// non-finite floats as `null`.
pub fn to_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if f.is_finite() {
                    out.push_str(&fmt17(f));
                } else {
                    out.push_str("null");
                }
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            if a.iter().all(|x| x.is_number()) {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, depth);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, x, depth + 1);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let mut keys: Vec<_> = m.keys().collect();
            keys.sort();
            for (i, k) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &m[*k], depth + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

/// Headered, comma-separated columns with LF line endings.
pub fn csv_columns(columns: &[(&str, &[f64])]) -> String {
    let mut out = columns.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(",");
    out.push('\n');
    let rows = columns.iter().map(|(_, c)| c.len()).min().unwrap_or(0);
    for i in 0..rows {
        let row: Vec<String> = columns.iter().map(|(_, c)| fmt17(c[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a CSV written by [`csv_columns`] or `Trajectory::write_csv`.
pub fn parse_csv(text: &str) -> Option<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next()?.split(',').map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for line in lines.filter(|l| !l.is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return None;
        }
        for (c, f) in cols.iter_mut().zip(fields) {
            c.push(f.parse().ok()?);
        }
    }
    Some((header, cols))
}
