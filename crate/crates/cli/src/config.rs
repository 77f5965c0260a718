use std::path::Path;

use latchsim::TestbenchSpec;
use serde::Deserialize;

/// Optional TOML file. Top-level keys mirror the global flags; a `[bench]`
/// table overrides testbench fields.
///
/// ```toml
/// seed = 7
/// dt-max = "5p"
/// integration = "be"
/// format = "json"
///
/// [bench]
/// vdd = 1.8
/// c_load_f = 10e-15
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Config {
    pub seed: Option<u64>,
    pub dt_max: Option<toml::Value>,
    pub integration: Option<String>,
    pub format: Option<String>,
    pub bench: Option<TestbenchSpec>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// `dt-max` as seconds; accepts a number or an engineering string.
    pub fn dt_max(&self) -> Result<Option<f64>, String> {
        match &self.dt_max {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some(*f)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(toml::Value::String(s)) => latchsim::netlist::value::parse_value(s)
                .map(Some)
                .ok_or_else(|| format!("config dt-max: cannot parse {s:?}")),
            Some(v) => Err(format!("config dt-max: unexpected value {v}")),
        }
    }
}
