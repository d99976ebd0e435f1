//! JSON pool configuration files.

use serde::Deserialize;
use vbspool::{ClassSpec, Discipline, PoolConfig};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    count: usize,
    radio_servers: usize,
    #[serde(default)]
    load: Option<f64>,
    #[serde(default)]
    arrival_rate: Option<f64>,
    #[serde(default)]
    service_rate: Option<f64>,
    discipline: Discipline,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    classes: Vec<RawClass>,
    compute_servers: usize,
}

/// Parses and validates a config. A class gives either `load` (optionally
/// with `service_rate`, default 1) or both `arrival_rate` and
/// `service_rate`.
pub fn parse_config(text: &str) -> Result<PoolConfig, String> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))?;
    let classes = raw
        .classes
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let class = i + 1;
            let (lambda, mu) = match (c.load, c.arrival_rate, c.service_rate) {
                (Some(_), Some(_), _) => {
                    return Err(format!("class {class}: give either load or arrival_rate, not both"))
                }
                (Some(a), None, mu) => {
                    let mu = mu.unwrap_or(1.0);
                    (a * mu, mu)
                }
                (None, Some(l), Some(mu)) => (l, mu),
                (None, Some(_), None) => return Err(format!("class {class}: arrival_rate needs service_rate")),
                (None, None, _) => return Err(format!("class {class}: missing load or arrival_rate")),
            };
            Ok(ClassSpec::new(c.count, c.radio_servers, lambda, mu, c.discipline))
        })
        .collect::<Result<Vec<_>, _>>()?;
    PoolConfig::new(classes, raw.compute_servers).map_err(|e| format!("invalid config: {e}"))
}
