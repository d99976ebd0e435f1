use serde::Serialize;

/// Which engine produced a [`BlockingReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Recursive,
    Approximate,
    Simulated,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::Exact => "exact",
            Method::Recursive => "recursive",
            Method::Approximate => "approx",
            Method::Simulated => "simulate",
        };
        f.write_str(name)
    }
}

/// Per-class blocking probabilities. Class `v` is index `v - 1`.
///
/// Radio blocking means the arrival's VBS was full while the pool still had
/// a free compute server; an arrival that finds the pool full is counted as
/// computational blocking whatever the state of its VBS.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockingReport {
    pub per_class_radio: Vec<f64>,
    pub computational: f64,
    pub per_class_overall: Vec<f64>,
    pub method: Method,
}

impl BlockingReport {
    pub(crate) fn from_parts(per_class_radio: Vec<f64>, computational: f64, method: Method) -> Self {
        let per_class_overall = per_class_radio.iter().map(|r| r + computational).collect();
        Self {
            per_class_radio,
            computational,
            per_class_overall,
            method,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.per_class_radio.len()
    }
}
