//! Flat `key=value` config files with `#` comments. Unknown keys are
//! rejected so a typo can't silently fall back to a default.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use icbf::acc::{AccParams, PredictorMode};
use icbf::controllers::InfeasibilityPolicy;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key {key:?}: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("key {key:?}: {message}")]
    Invariant { key: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Acc,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControllerChoice {
    Unfiltered,
    InputOnly,
    StateOnly,
    Combined,
    All,
}

impl ControllerChoice {
    pub fn variants(&self) -> Vec<icbf::acc::ControllerVariant> {
        use icbf::acc::ControllerVariant as V;
        match self {
            ControllerChoice::Unfiltered => vec![V::Unfiltered],
            ControllerChoice::InputOnly => vec![V::InputOnly],
            ControllerChoice::StateOnly => vec![V::StateOnly],
            ControllerChoice::Combined => vec![V::Combined],
            ControllerChoice::All => V::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub controller: ControllerChoice,
    pub dt: f64,
    pub t_end: f64,
    pub predictor_mode: PredictorMode,
    pub infeasibility_policy: InfeasibilityPolicy,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub tail_fraction: f64,
    pub params: AccParams,
    /// Initial condition (x1, x2, x3, u).
    pub z0: [f64; 4],
    /// Keys the file set explicitly; everything else ran on defaults.
    pub explicit: BTreeSet<String>,
}

pub const KEYS: &[&str] = &[
    "scenario",
    "controller",
    "dt",
    "t_end",
    "predictor_mode",
    "infeasibility_policy",
    "output_dir",
    "seed",
    "tail_fraction",
    "m",
    "c0",
    "c1",
    "c2",
    "v0",
    "vd",
    "g",
    "c_ad",
    "T",
    "alpha",
    "gamma",
    "alpha_k",
    "x1",
    "x2",
    "x3",
    "u0",
];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Acc,
            controller: ControllerChoice::Combined,
            dt: 1e-3,
            t_end: 40.0,
            predictor_mode: PredictorMode::ExactLinear,
            infeasibility_policy: InfeasibilityPolicy::Halt,
            output_dir: PathBuf::from("out"),
            seed: 0,
            tail_fraction: 0.25,
            params: AccParams::default(),
            z0: [0.0, 20.0, 100.0, 0.0],
            explicit: BTreeSet::new(),
        }
    }
}

impl RunConfig {
    pub fn value_of(&self, key: &str) -> String {
        match key {
            "scenario" => match self.scenario {
                Scenario::Acc => "acc".into(),
                Scenario::Custom => "custom".into(),
            },
            "controller" => match self.controller {
                ControllerChoice::Unfiltered => "unfiltered".into(),
                ControllerChoice::InputOnly => "input_only".into(),
                ControllerChoice::StateOnly => "state_only".into(),
                ControllerChoice::Combined => "combined".into(),
                ControllerChoice::All => "all".into(),
            },
            "dt" => self.dt.to_string(),
            "t_end" => self.t_end.to_string(),
            "predictor_mode" => match self.predictor_mode {
                PredictorMode::Paper => "paper".into(),
                PredictorMode::ExactLinear => "exact_linear".into(),
                PredictorMode::Numeric => "numeric".into(),
            },
            "infeasibility_policy" => match self.infeasibility_policy {
                InfeasibilityPolicy::Halt => "halt".into(),
                InfeasibilityPolicy::Zero => "zero".into(),
            },
            "output_dir" => self.output_dir.display().to_string(),
            "seed" => self.seed.to_string(),
            "tail_fraction" => self.tail_fraction.to_string(),
            "m" => self.params.mass.to_string(),
            "c0" => self.params.c0.to_string(),
            "c1" => self.params.c1.to_string(),
            "c2" => self.params.c2.to_string(),
            "v0" => self.params.v0.to_string(),
            "vd" => self.params.vd.to_string(),
            "g" => self.params.gravity.to_string(),
            "c_ad" => self.params.c_ad.to_string(),
            "T" => self.params.horizon.to_string(),
            "alpha" => self.params.alpha.to_string(),
            "gamma" => self.params.gamma.to_string(),
            "alpha_k" => self.params.nominal_gain.to_string(),
            "x1" => self.z0[0].to_string(),
            "x2" => self.z0[1].to_string(),
            "x3" => self.z0[2].to_string(),
            "u0" => self.z0[3].to_string(),
            _ => unreachable!("value_of called with unknown key {key}"),
        }
    }

    /// `key=value` lines for the keys the file did not set.
    pub fn applied_defaults(&self) -> Vec<String> {
        KEYS.iter()
            .filter(|k| !self.explicit.contains(**k))
            .map(|k| format!("{k}={}", self.value_of(k)))
            .collect()
    }

    /// The full default config in parseable form.
    pub fn render_defaults() -> String {
        let cfg = RunConfig::default();
        let mut out = String::new();
        for key in KEYS {
            writeln!(out, "{key}={}", cfg.value_of(key)).unwrap();
        }
        out
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.to_string(),
        message: format!("not a number ({e})"),
    })
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64, ConfigError> {
    value.parse::<u64>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.to_string(),
        message: format!("not a non-negative integer ({e})"),
    })
}

fn invariant(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invariant { key: key.to_string(), message: message.into() }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line,
            text: content.to_string(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey { line, key: key.to_string() });
        }
        if !cfg.explicit.insert(key.to_string()) {
            return Err(ConfigError::DuplicateKey { line, key: key.to_string() });
        }
        let bad = |message: String| ConfigError::BadValue {
            line,
            key: key.to_string(),
            message,
        };
        match key {
            "scenario" => {
                cfg.scenario = match value {
                    "acc" => Scenario::Acc,
                    "custom" => Scenario::Custom,
                    other => return Err(bad(format!("expected acc|custom, got {other:?}"))),
                }
            }
            "controller" => {
                cfg.controller = match value {
                    "unfiltered" => ControllerChoice::Unfiltered,
                    "input_only" => ControllerChoice::InputOnly,
                    "state_only" => ControllerChoice::StateOnly,
                    "combined" => ControllerChoice::Combined,
                    "all" => ControllerChoice::All,
                    other => {
                        return Err(bad(format!(
                            "expected unfiltered|input_only|state_only|combined|all, got {other:?}"
                        )))
                    }
                }
            }
            "predictor_mode" => {
                cfg.predictor_mode = match value {
                    "paper" => PredictorMode::Paper,
                    "exact_linear" => PredictorMode::ExactLinear,
                    "numeric" => PredictorMode::Numeric,
                    other => {
                        return Err(bad(format!(
                            "expected paper|exact_linear|numeric, got {other:?}"
                        )))
                    }
                }
            }
            "infeasibility_policy" => {
                cfg.infeasibility_policy = match value {
                    "halt" => InfeasibilityPolicy::Halt,
                    "zero" => InfeasibilityPolicy::Zero,
                    other => return Err(bad(format!("expected halt|zero, got {other:?}"))),
                }
            }
            "output_dir" => cfg.output_dir = PathBuf::from(value),
            "seed" => cfg.seed = parse_u64(line, key, value)?,
            "dt" => cfg.dt = parse_f64(line, key, value)?,
            "t_end" => cfg.t_end = parse_f64(line, key, value)?,
            "tail_fraction" => cfg.tail_fraction = parse_f64(line, key, value)?,
            "m" => cfg.params.mass = parse_f64(line, key, value)?,
            "c0" => cfg.params.c0 = parse_f64(line, key, value)?,
            "c1" => cfg.params.c1 = parse_f64(line, key, value)?,
            "c2" => cfg.params.c2 = parse_f64(line, key, value)?,
            "v0" => cfg.params.v0 = parse_f64(line, key, value)?,
            "vd" => cfg.params.vd = parse_f64(line, key, value)?,
            "g" => cfg.params.gravity = parse_f64(line, key, value)?,
            "c_ad" => cfg.params.c_ad = parse_f64(line, key, value)?,
            "T" => cfg.params.horizon = parse_f64(line, key, value)?,
            "alpha" => cfg.params.alpha = parse_f64(line, key, value)?,
            "gamma" => cfg.params.gamma = parse_f64(line, key, value)?,
            "alpha_k" => cfg.params.nominal_gain = parse_f64(line, key, value)?,
            "x1" => cfg.z0[0] = parse_f64(line, key, value)?,
            "x2" => cfg.z0[1] = parse_f64(line, key, value)?,
            "x3" => cfg.z0[2] = parse_f64(line, key, value)?,
            "u0" => cfg.z0[3] = parse_f64(line, key, value)?,
            _ => unreachable!(),
        }
    }

    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(invariant("dt", format!("must be > 0 and finite (got {})", cfg.dt)));
    }
    if !(cfg.t_end > cfg.dt && cfg.t_end.is_finite()) {
        return Err(invariant(
            "t_end",
            format!("must be > dt = {} and finite (got {})", cfg.dt, cfg.t_end),
        ));
    }
    if !(cfg.tail_fraction > 0.0 && cfg.tail_fraction <= 1.0) {
        return Err(invariant(
            "tail_fraction",
            format!("must be in (0, 1] (got {})", cfg.tail_fraction),
        ));
    }
    for (key, v) in [
        ("x1", cfg.z0[0]),
        ("x2", cfg.z0[1]),
        ("x3", cfg.z0[2]),
        ("u0", cfg.z0[3]),
    ] {
        if !v.is_finite() {
            return Err(invariant(key, format!("must be finite (got {v})")));
        }
    }
    cfg.params.validate().map_err(|message| {
        // AccParams errors are "<key> <reason>"; recover the key name
        let key = message.split_whitespace().next().unwrap_or("params").to_string();
        ConfigError::Invariant { key, message }
    })?;
    Ok(cfg)
}

pub fn parse_config(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Invariant {
        key: "config".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(cfg.scenario, Scenario::Acc);
        assert_eq!(cfg.controller, ControllerChoice::Combined);
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.t_end, 40.0);
        assert!(cfg.explicit.is_empty());
        assert_eq!(cfg.applied_defaults().len(), KEYS.len());
    }

    #[test]
    fn alpha_override_echoed() {
        let cfg = parse_config_str("alpha=20").unwrap();
        assert_eq!(cfg.params.alpha, 20.0);
        assert!(cfg.explicit.contains("alpha"));
        assert!(!cfg.applied_defaults().iter().any(|l| l.starts_with("alpha=")));
        assert!(cfg.applied_defaults().iter().any(|l| l == "gamma=1"));
    }

    #[test]
    fn negative_dt_names_key() {
        let err = parse_config_str("dt=-1").unwrap_err();
        assert!(err.to_string().contains("dt"), "{err}");
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = parse_config_str("dt=0.01\nbogus=1").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = parse_config_str("dt=0.01\ndt=0.02").unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { line: 2, .. }), "{err}");
    }

    #[test]
    fn comments_and_whitespace_ignored() {
        let cfg = parse_config_str("# header\n  dt = 0.01  # inline\n\n  \n").unwrap();
        assert_eq!(cfg.dt, 0.01);
    }

    #[test]
    fn type_mismatch_names_key_and_line() {
        let err = parse_config_str("t_end=fast").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t_end") && msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn t_end_must_exceed_dt() {
        assert!(parse_config_str("dt=1\nt_end=0.5").is_err());
    }

    #[test]
    fn render_defaults_round_trips() {
        let rendered = RunConfig::render_defaults();
        let cfg = parse_config_str(&rendered).unwrap();
        assert_eq!(cfg.explicit.len(), KEYS.len());
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.params.mass, 1650.0);
        assert_eq!(cfg.z0, [0.0, 20.0, 100.0, 0.0]);
    }

    #[test]
    fn missing_equals_is_malformed() {
        let err = parse_config_str("dt 0.01").unwrap_err();
        assert!(matches!(err, ConfigError::Malformed { line: 1, .. }), "{err}");
    }
}
