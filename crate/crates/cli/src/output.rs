//! Number formatting and self-describing output envelopes.

use serde::Serialize;
use serde_json::{json, Value};
use vbspool::{BlockingReport, PoolConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Twelve significant digits; scientific notation below `1e-4`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    if x.abs() < 1e-4 {
        return format!("{x:.11e}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Run metadata placed ahead of every result.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub engines: Vec<String>,
    pub config: PoolConfig,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<&'static str>,
}

impl Header {
    pub fn new(command: &str, config: &PoolConfig) -> Self {
        Self {
            tool: "vbspool",
            version: VERSION,
            command: command.to_string(),
            engines: Vec::new(),
            config: config.clone(),
            seed: None,
            delta: None,
            sweep: None,
            generator: None,
        }
    }

    /// `# key: value` lines for CSV output.
    pub fn csv_lines(&self) -> String {
        let value = serde_json::to_value(self).expect("header serializes");
        let mut out = String::new();
        if let Value::Object(map) = value {
            for (k, v) in map {
                out.push_str(&format!("# {k}: {}\n", compact(&v)));
            }
        }
        out
    }
}

fn compact(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn json_document<T: Serialize>(header: &Header, result: &T) -> String {
    let doc = json!({ "header": header, "result": result });
    let mut text = serde_json::to_string_pretty(&doc).expect("result serializes");
    text.push('\n');
    text
}

pub const CSV_COLUMNS: &str = "N,N_norm,class,p_radio,p_compute,p_overall,method";

/// One row per class; classes are 1-based.
pub fn csv_rows(n: usize, capacity: usize, report: &BlockingReport) -> Vec<(usize, usize, String)> {
    (0..report.num_classes())
        .map(|v| {
            let line = format!(
                "{n},{},{},{},{},{},{}",
                format_number(n as f64 / capacity as f64),
                v + 1,
                format_number(report.per_class_radio[v]),
                format_number(report.computational),
                format_number(report.per_class_overall[v]),
                report.method
            );
            (n, v + 1, line)
        })
        .collect()
}
