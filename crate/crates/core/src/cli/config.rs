//! Flat JSON run configuration and `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CliError;
use crate::bridge::Pinning;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub experiment: Option<String>,
    pub model: String,
    pub seed: u64,
    /// Start point; empty means the model's default.
    pub from: Vec<f64>,
    /// End point for bridges and distances.
    pub to: Vec<f64>,
    /// Path count; each subcommand has its own default.
    pub paths: Option<usize>,
    pub dt: f64,
    pub epsilon: f64,
    pub horizon: f64,
    pub mesh: usize,
    pub times: Vec<f64>,
    /// Anchor of `heat-solve`: "source" or "target".
    pub anchor: String,
    pub bandwidth_factor: f64,
    pub pinning: Pinning,
    pub n_segments: usize,
    pub restarts: usize,
    /// Points per axis for `bracket-check`.
    pub grid_points: usize,
    pub max_level: usize,
    pub suite: String,
    pub epsilons: Vec<f64>,
    pub permutations: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            experiment: None,
            model: "torus-elliptic".into(),
            seed: 42,
            from: Vec::new(),
            to: Vec::new(),
            paths: None,
            dt: 1e-3,
            epsilon: 0.025,
            horizon: 1.0,
            mesh: 64,
            times: vec![0.05, 0.1, 0.2, 0.5, 1.0],
            anchor: "source".into(),
            bandwidth_factor: 1.0,
            pinning: Pinning::ChartLinear,
            n_segments: 32,
            restarts: 8,
            grid_points: 10,
            max_level: 4,
            suite: "baseline".into(),
            epsilons: vec![0.1, 0.05, 0.025],
            permutations: 500,
        }
    }
}

/// Value of one `--set`: JSON if it parses, a number list if it is
/// comma-separated numbers, a string otherwise.
fn parse_value(raw: &str) -> Value {
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        return v;
    }
    if raw.contains(',') {
        let nums: Result<Vec<f64>, _> = raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
        if let Ok(nums) = nums {
            return Value::from(nums);
        }
    }
    Value::String(raw.to_string())
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Applies `key=value` pairs in order; unknown keys are usage errors.
    pub fn apply<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, CliError> {
        let mut v = serde_json::to_value(self).map_err(|e| CliError::Usage(e.to_string()))?;
        let map = v.as_object_mut().expect("config serializes to an object");
        for o in overrides {
            let o = o.as_ref();
            let (k, raw) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("override {o:?} is not key=value")))?;
            let k = k.trim().replace('-', "_");
            if !map.contains_key(&k) {
                return Err(CliError::Usage(format!("unknown config key {k:?}")));
            }
            map.insert(k, parse_value(raw.trim()));
        }
        serde_json::from_value(v).map_err(|e| CliError::Usage(format!("bad override: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let c = Config::default()
            .apply(&["model=heisenberg", "from=0.1,0.2,0.3", "paths=17", "dt=0.002"])
            .unwrap();
        let back: Config = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.from, vec![0.1, 0.2, 0.3]);
        assert_eq!(c.paths, Some(17));
    }

    #[test]
    fn overrides_reject_unknown_keys_and_bad_types() {
        assert!(matches!(Config::default().apply(&["nope=1"]), Err(CliError::Usage(_))));
        assert!(matches!(Config::default().apply(&["mesh=abc"]), Err(CliError::Usage(_))));
        assert!(matches!(Config::default().apply(&["mesh"]), Err(CliError::Usage(_))));
    }

    #[test]
    fn string_values_need_no_quotes() {
        let c = Config::default().apply(&["pinning=control_path", "suite=grushin"]).unwrap();
        assert_eq!(c.pinning, Pinning::ControlPath);
        assert_eq!(c.suite, "grushin");
    }
}
