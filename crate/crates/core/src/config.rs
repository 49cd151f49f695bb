//! Criterion and evaluation hyper-parameters.
//!
//! Every knob has a serde default, so a config file only needs the keys it
//! overrides. [`CriteriaConfig::set`] applies dotted-path overrides such as
//! `mlt.alpha=2.0`, which the CLI exposes as repeated `--set` flags.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {key}: cannot parse {value:?} as {ty}")]
    BadValue {
        key: String,
        value: String,
        ty: &'static str,
    },
    #[error("config key {key}: {reason}")]
    Invalid { key: String, reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaConfig {
    /// Additive smoothing applied to class-sum counts before normalizing.
    pub smoothing: f64,
    /// Variance floor shared by Gaussian-based criteria.
    pub eps_var: f64,
    pub aib: AibConfig,
    pub mlt: MltConfig,
    pub uvd: UvdConfig,
    pub gmle: GmleConfig,
    pub mme: MmeConfig,
    pub eval: EvalParams,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self {
            smoothing: 1e-6,
            eps_var: 1e-8,
            aib: AibConfig::default(),
            mlt: MltConfig::default(),
            uvd: UvdConfig::default(),
            gmle: GmleConfig::default(),
            mme: MmeConfig::default(),
            eval: EvalParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AibConfig {
    /// Use per-class mean histograms instead of class sums as the count table.
    pub mean_mode: bool,
}

impl Default for AibConfig {
    fn default() -> Self {
        Self { mean_mode: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MltConfig {
    /// Symmetric Dirichlet concentration per word.
    pub alpha: f64,
    /// Reset the merged word's prior entry to `alpha` instead of summing the
    /// entries of the merged pair.
    pub keep_uniform: bool,
}

impl Default for MltConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            keep_uniform: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct UvdConfig {
    pub ng: NgConfig,
}

impl Default for UvdConfig {
    fn default() -> Self {
        Self {
            ng: NgConfig::default(),
        }
    }
}

/// Normal-Gamma prior hyper-parameters. `mu0` and `b` default to data-driven
/// values: the global bin mean and `max(global bin variance, eps_var)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NgConfig {
    pub mu0: Option<f64>,
    pub kappa0: f64,
    pub a: f64,
    pub b: Option<f64>,
}

impl Default for NgConfig {
    fn default() -> Self {
        Self {
            mu0: None,
            kappa0: 1.0,
            a: 1.0,
            b: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GmleConfig {
    /// Variance floor override; falls back to the shared `eps_var`.
    pub eps_var: Option<f64>,
}

impl Default for GmleConfig {
    fn default() -> Self {
        Self { eps_var: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MmeConfig {
    /// Scale tying the SVM solution to log-probability ratios. Halved up to
    /// ten times when probability recovery reports it as too large.
    pub eta: f64,
    pub slack_penalty: f64,
    /// Duality-gap tolerance of the SVM solver.
    pub tol: f64,
    /// Coordinate-step cap of the SVM solver.
    pub max_iter: u64,
}

impl Default for MmeConfig {
    fn default() -> Self {
        Self {
            eta: 0.01,
            slack_penalty: 1.0,
            tol: 1e-8,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Svm,
    Centroid,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub classifier: ClassifierKind,
    pub slack_penalty: f64,
    /// Duality-gap tolerance of the evaluation classifier's SVM. Looser than
    /// the criterion solver: scores only need evaluation-grade precision.
    pub tol: f64,
    pub max_iter: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            classifier: ClassifierKind::Svm,
            slack_penalty: 1.0,
            tol: 1e-4,
            max_iter: 2_000_000,
        }
    }
}

impl CriteriaConfig {
    /// Applies one dotted-path override. Bare `alpha`, `ng.*`, and `eta` are
    /// accepted as aliases for `mlt.alpha`, `uvd.ng.*`, and `mme.eta`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let canonical = match key {
            "alpha" => "mlt.alpha",
            "alpha.keep_uniform" => "mlt.keep_uniform",
            "eta" => "mme.eta",
            k if k.starts_with("ng.") => return self.set(&format!("uvd.{k}"), value),
            k => k,
        };
        fn f64_of(key: &str, value: &str) -> Result<f64, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                key: key.into(),
                value: value.into(),
                ty: "number",
            })
        }
        fn bool_of(key: &str, value: &str) -> Result<bool, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                key: key.into(),
                value: value.into(),
                ty: "bool",
            })
        }
        match canonical {
            "smoothing" => self.smoothing = f64_of(canonical, value)?,
            "eps_var" => self.eps_var = f64_of(canonical, value)?,
            "aib.mean_mode" => self.aib.mean_mode = bool_of(canonical, value)?,
            "mlt.alpha" => self.mlt.alpha = f64_of(canonical, value)?,
            "mlt.keep_uniform" => self.mlt.keep_uniform = bool_of(canonical, value)?,
            "uvd.ng.mu0" => self.uvd.ng.mu0 = Some(f64_of(canonical, value)?),
            "uvd.ng.kappa0" => self.uvd.ng.kappa0 = f64_of(canonical, value)?,
            "uvd.ng.a" => self.uvd.ng.a = f64_of(canonical, value)?,
            "uvd.ng.b" => self.uvd.ng.b = Some(f64_of(canonical, value)?),
            "gmle.eps_var" => self.gmle.eps_var = Some(f64_of(canonical, value)?),
            "mme.eta" => self.mme.eta = f64_of(canonical, value)?,
            "mme.slack_penalty" => self.mme.slack_penalty = f64_of(canonical, value)?,
            "mme.tol" => self.mme.tol = f64_of(canonical, value)?,
            "mme.max_iter" => {
                self.mme.max_iter = value.parse().map_err(|_| ConfigError::BadValue {
                    key: canonical.into(),
                    value: value.into(),
                    ty: "integer",
                })?
            }
            "eval.classifier" => {
                self.eval.classifier = match value {
                    "svm" => ClassifierKind::Svm,
                    "centroid" => ClassifierKind::Centroid,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: canonical.into(),
                            value: value.into(),
                            ty: "svm|centroid",
                        })
                    }
                }
            }
            "eval.slack_penalty" => self.eval.slack_penalty = f64_of(canonical, value)?,
            "eval.tol" => self.eval.tol = f64_of(canonical, value)?,
            "eval.max_iter" => {
                self.eval.max_iter = value.parse().map_err(|_| ConfigError::BadValue {
                    key: canonical.into(),
                    value: value.into(),
                    ty: "integer",
                })?
            }
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Rejects values outside their valid domain.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let checks: [(&str, f64, bool); 9] = [
            ("smoothing", self.smoothing, self.smoothing >= 0.0),
            ("eps_var", self.eps_var, self.eps_var > 0.0),
            ("mlt.alpha", self.mlt.alpha, self.mlt.alpha > 0.0),
            (
                "uvd.ng.kappa0",
                self.uvd.ng.kappa0,
                self.uvd.ng.kappa0 > 0.0,
            ),
            ("uvd.ng.a", self.uvd.ng.a, self.uvd.ng.a > 0.0),
            ("mme.eta", self.mme.eta, self.mme.eta > 0.0),
            (
                "mme.slack_penalty",
                self.mme.slack_penalty,
                self.mme.slack_penalty > 0.0,
            ),
            ("mme.tol", self.mme.tol, self.mme.tol > 0.0),
            ("eval.tol", self.eval.tol, self.eval.tol > 0.0),
        ];
        for (key, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(ConfigError::Invalid {
                    key: key.into(),
                    reason: format!("value {value} out of range"),
                });
            }
        }
        if let Some(b) = self.uvd.ng.b {
            if !(b > 0.0) || !b.is_finite() {
                return Err(ConfigError::Invalid {
                    key: "uvd.ng.b".into(),
                    reason: format!("value {b} out of range"),
                });
            }
        }
        if let Some(e) = self.gmle.eps_var {
            if !(e > 0.0) || !e.is_finite() {
                return Err(ConfigError::Invalid {
                    key: "gmle.eps_var".into(),
                    reason: format!("value {e} out of range"),
                });
            }
        }
        if self.eval.slack_penalty <= 0.0 {
            return Err(ConfigError::Invalid {
                key: "eval.slack_penalty".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }

    /// Effective variance floor for the Gaussian likelihood criterion.
    pub fn gmle_eps_var(&self) -> f64 {
        self.gmle.eps_var.unwrap_or(self.eps_var)
    }
}
