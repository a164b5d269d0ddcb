//! Experiment configuration files.
//!
//! Configs are TOML with two sections:
//!
//! ```toml
//! [experiment]
//! id = "lq-case-study"    # table1 | lq-case-study | lq-model-error | cartpole-headless
//! trials = 200            # default 1
//! seed = 1                # default 0
//!
//! [overrides]
//! etas = [2.5, 5.0, 10.0, 20.0]
//! ```
//!
//! Override keys accepted per experiment, with defaults:
//!
//! | experiment | key | default |
//! |---|---|---|
//! | table1 | `theta_r`, `theta_h`, `alpha` | 0.2, 0.25, 1e6 |
//! | table1 | `horizon`, `grid`, `boltzmann_a` | 2, 301, 0.1 |
//! | lq-case-study | `etas` | [2.5, 5, 10, 20] |
//! | lq-model-error | `assumed_etas` | [5, 10, 20] |
//! | lq-model-error | `true_human` (`fixed` or `predict`), `lookahead` | fixed, 4 |
//! | lq-* | `theta_r`, `theta_h`, `estimate0` | sampled per trial |
//! | lq-* | `steps`, `planner_iters`, `perturbations` | 20, 200, 3 |
//! | cartpole-headless | `t_destab`, `force`, `episode_steps` | 1.0, 10, 500 |
//! | cartpole-headless | `initial_phi_max` | 0.1 |

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Table1,
    LqCaseStudy,
    LqModelError,
    CartpoleHeadless,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            Self::Table1 => "table1",
            Self::LqCaseStudy => "lq-case-study",
            Self::LqModelError => "lq-model-error",
            Self::CartpoleHeadless => "cartpole-headless",
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        const LQ: [&str; 6] = ["theta_r", "theta_h", "estimate0", "steps", "planner_iters", "perturbations"];
        match self {
            Self::Table1 => &["theta_r", "theta_h", "alpha", "horizon", "grid", "boltzmann_a"],
            Self::LqCaseStudy => &["etas", LQ[0], LQ[1], LQ[2], LQ[3], LQ[4], LQ[5]],
            Self::LqModelError => &["assumed_etas", "true_human", "lookahead", LQ[0], LQ[1], LQ[2], LQ[3], LQ[4], LQ[5]],
            Self::CartpoleHeadless => &["t_destab", "force", "episode_steps", "initial_phi_max"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueHuman {
    Fixed,
    Predict,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boltzmann_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub etas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumed_etas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_human: Option<TrueHuman>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lookahead: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planner_iters: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbations: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_destab: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episode_steps: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_phi_max: Option<f64>,
}

impl Overrides {
    /// Names of the keys that are set.
    fn present(&self) -> Vec<&'static str> {
        let flags = [
            ("theta_r", self.theta_r.is_some()),
            ("theta_h", self.theta_h.is_some()),
            ("alpha", self.alpha.is_some()),
            ("horizon", self.horizon.is_some()),
            ("grid", self.grid.is_some()),
            ("boltzmann_a", self.boltzmann_a.is_some()),
            ("etas", self.etas.is_some()),
            ("assumed_etas", self.assumed_etas.is_some()),
            ("true_human", self.true_human.is_some()),
            ("lookahead", self.lookahead.is_some()),
            ("estimate0", self.estimate0.is_some()),
            ("steps", self.steps.is_some()),
            ("planner_iters", self.planner_iters.is_some()),
            ("perturbations", self.perturbations.is_some()),
            ("t_destab", self.t_destab.is_some()),
            ("force", self.force.is_some()),
            ("episode_steps", self.episode_steps.is_some()),
            ("initial_phi_max", self.initial_phi_max.is_some()),
        ];
        flags.into_iter().filter(|(_, set)| *set).map(|(k, _)| k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    id: ExperimentId,
    #[serde(default = "one")]
    trials: i64,
    #[serde(default)]
    seed: u64,
}

fn one() -> i64 {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentSection,
    #[serde(default)]
    overrides: Overrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub trials: usize,
    pub seed: u64,
    pub overrides: Overrides,
}

impl ExperimentConfig {
    pub fn new(id: ExperimentId, trials: usize, seed: u64) -> Self {
        Self { id, trials, seed, overrides: Overrides::default() }
    }

    /// Checks ranges and that every override applies to the experiment.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::field("trials", "must be at least 1"));
        }
        let o = &self.overrides;
        if let Some(key) = o.present().into_iter().find(|k| !self.id.allowed().contains(k)) {
            return Err(ConfigError::field(key, &format!("does not apply to experiment {}", self.id.name())));
        }
        let positive = [("theta_r", o.theta_r), ("theta_h", o.theta_h), ("alpha", o.alpha), ("boltzmann_a", o.boltzmann_a), ("force", o.force)];
        for (key, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ConfigError::field(key, &format!("must be positive and finite, got {v}")));
                }
            }
        }
        let nonneg = [("t_destab", o.t_destab), ("initial_phi_max", o.initial_phi_max)];
        for (key, v) in nonneg {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(ConfigError::field(key, &format!("must be nonnegative and finite, got {v}")));
                }
            }
        }
        if let Some(v) = o.initial_phi_max {
            if v >= std::f64::consts::FRAC_PI_2 {
                return Err(ConfigError::field("initial_phi_max", "must be below pi/2"));
            }
        }
        if let Some(e) = o.estimate0 {
            if !(e > 0.0 && e.is_finite()) {
                return Err(ConfigError::field("estimate0", &format!("must be positive and finite, got {e}")));
            }
        }
        for (key, list) in [("etas", &o.etas), ("assumed_etas", &o.assumed_etas)] {
            if let Some(list) = list {
                if list.is_empty() {
                    return Err(ConfigError::field(key, "must not be empty"));
                }
                if let Some(bad) = list.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
                    return Err(ConfigError::field(key, &format!("learning rates must be nonnegative and finite, got {bad}")));
                }
            }
        }
        let counts = [
            ("horizon", o.horizon, 1),
            ("grid", o.grid, 2),
            ("lookahead", o.lookahead, 1),
            ("steps", o.steps, 1),
            ("planner_iters", o.planner_iters, 1),
            ("perturbations", o.perturbations, 0),
            ("episode_steps", o.episode_steps, 1),
        ];
        for (key, v, min) in counts {
            if let Some(v) = v {
                if v < min {
                    return Err(ConfigError::field(key, &format!("must be at least {min}, got {v}")));
                }
            }
        }
        if o.horizon.is_some_and(|h| h > 8) {
            return Err(ConfigError::field("horizon", "must be at most 8"));
        }
        if o.lookahead.is_some() && o.true_human != Some(TrueHuman::Predict) {
            return Err(ConfigError::field("lookahead", "only applies with true_human = \"predict\""));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("{}field `{field}` {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Field { field: String, line: Option<usize>, message: String },
}

impl ConfigError {
    fn field(field: &str, message: &str) -> Self {
        Self::Field { field: field.into(), line: None, message: message.into() }
    }

    fn located(self, raw: &str) -> Self {
        match self {
            Self::Field { field, line: None, message } => {
                let line = find_key_line(raw, &field);
                Self::Field { field, line, message }
            }
            other => other,
        }
    }
}

/// First 1-based line assigning `key`.
fn find_key_line(raw: &str, key: &str) -> Option<usize> {
    raw.lines().position(|l| l.trim_start().strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))).map(|i| i + 1)
}

/// Parses and validates a config file's text.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, ConfigError> {
    let parsed: RawConfig = toml::from_str(raw).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let trials = parsed.experiment.trials;
    if trials < 1 {
        return Err(ConfigError::field("trials", &format!("must be at least 1, got {trials}")).located(raw));
    }
    let cfg = ExperimentConfig {
        id: parsed.experiment.id,
        trials: trials as usize,
        seed: parsed.experiment.seed,
        overrides: parsed.overrides,
    };
    cfg.validate().map_err(|e| e.located(raw))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_table1() {
        let cfg = validate_config("[experiment]\nid = \"table1\"\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::new(ExperimentId::Table1, 1, 0));
    }

    #[test]
    fn zero_trials_names_the_field() {
        let err = validate_config("[experiment]\nid = \"table1\"\ntrials = 0\n").unwrap_err();
        assert_eq!(err, ConfigError::Field { field: "trials".into(), line: Some(3), message: "must be at least 1, got 0".into() });
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn negative_eta_rejected() {
        let raw = "[experiment]\nid = \"lq-case-study\"\n\n[overrides]\netas = [5.0, -1.0]\n";
        match validate_config(raw).unwrap_err() {
            ConfigError::Field { field, line, .. } => assert_eq!((field.as_str(), line), ("etas", Some(5))),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let err = validate_config("[experiment]\nid = \"table1\"\n[overrides]\nbogus = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 4"), "{msg}");
        let err = validate_config("[experiment]\nid = \"table2\"\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn override_must_apply_to_experiment() {
        let err = validate_config("[experiment]\nid = \"table1\"\n[overrides]\netas = [1.0]\n").unwrap_err();
        assert!(err.to_string().contains("does not apply"), "{err}");
    }

    #[test]
    fn lookahead_needs_predicting_human() {
        let raw = "[experiment]\nid = \"lq-model-error\"\n[overrides]\nlookahead = 3\n";
        assert!(validate_config(raw).is_err());
        let raw = "[experiment]\nid = \"lq-model-error\"\n[overrides]\ntrue_human = \"predict\"\nlookahead = 3\n";
        assert_eq!(validate_config(raw).unwrap().overrides.lookahead, Some(3));
    }
}
