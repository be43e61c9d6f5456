//! Scenario files: versioned TOML with unknown keys rejected.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::composite::InteractionConfig;
use crate::decoherence::DEFAULT_RATIO_THRESHOLD;
use crate::ensemble::{EnsembleSpec, Stage};
use crate::sectors::{AmplitudeProfile, CompartmentSpec};
use crate::statespace::{MeterBasis, MeterState};

use super::CliError;

pub const SCENARIO_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    pub n_copies: usize,
    pub base_seed: u64,
    pub t_decohere: f64,
    pub mu: f64,
    #[serde(default = "default_ratio_threshold")]
    pub r_threshold: f64,
    /// Enables the non-relativistic velocity warning when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_light: Option<f64>,
    pub meter: MeterSection,
    pub compartments: CompartmentSpec,
    pub profile: AmplitudeProfile,
    #[serde(default)]
    pub interaction: InteractionConfig,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub checks: Vec<Check>,
}

fn default_ratio_threshold() -> f64 {
    DEFAULT_RATIO_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeterSection {
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// `[re, im]` per eigenvalue.
    pub amplitudes: Vec<[f64; 2]>,
    /// Rescale `amplitudes` to unit norm instead of requiring it.
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub report: String,
    pub histogram: String,
    pub sweep: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            report: "report.json".into(),
            histogram: "histogram.csv".into(),
            sweep: "decoherence.csv".into(),
            outcomes: None,
            snapshot: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Defaults to `t_decohere` (or 1 when that is zero).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub steps: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            t_max: None,
            steps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    /// Collapsed frequencies within `tolerance` of `targets`, and the
    /// chi-square test against `targets` passes.
    Born {
        targets: Vec<f64>,
        tolerance: f64,
    },
    NoRefusals,
    /// Every copy passed the decoherence verdict before reading.
    Decohered,
    Stage {
        expected: Stage,
    },
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read scenario {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(CliError::Validation(format!(
                "unsupported schema {}, expected {SCENARIO_SCHEMA}",
                self.schema
            )));
        }
        if self.sweep.steps == 0 {
            return Err(CliError::Validation(
                "sweep.steps must be at least 1".into(),
            ));
        }
        if let Some(t) = self.sweep.t_max {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(CliError::Validation(
                    "sweep.t_max must be finite and ≥ 0".into(),
                ));
            }
        }
        if let Some(c) = self.c_light {
            if !(c > 0.0) {
                return Err(CliError::Validation("c_light must be positive".into()));
            }
        }
        let dim = self.meter.eigenvalues.len();
        for check in &self.checks {
            if let Check::Born { targets, tolerance } = check {
                if targets.len() != dim {
                    return Err(CliError::Validation(format!(
                        "born check has {} targets for a {dim}-level meter",
                        targets.len()
                    )));
                }
                if !(*tolerance >= 0.0) {
                    return Err(CliError::Validation("born tolerance must be ≥ 0".into()));
                }
            }
        }
        self.ensemble_spec()?.validate()?;
        Ok(())
    }

    pub fn meter_state(&self) -> Result<MeterState, CliError> {
        let mut basis = MeterBasis::new(self.meter.eigenvalues.clone())?;
        if let Some(labels) = &self.meter.labels {
            basis = basis.with_labels(labels.clone())?;
        }
        let amps = self
            .meter
            .amplitudes
            .iter()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        let basis = Arc::new(basis);
        let state = if self.meter.normalize {
            MeterState::normalized(basis, amps)?
        } else {
            MeterState::new(basis, amps)?
        };
        Ok(state)
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec, CliError> {
        Ok(EnsembleSpec {
            n_copies: self.n_copies,
            psi0: self.meter_state()?,
            grid_profile: self.profile.clone(),
            compartments: self.compartments,
            interaction: self.interaction,
            t_decohere: self.t_decohere,
            mu: self.mu,
            r_threshold: self.r_threshold,
            base_seed: self.base_seed,
        })
    }

    pub fn sweep_t_max(&self) -> f64 {
        self.sweep.t_max.unwrap_or(if self.t_decohere > 0.0 {
            self.t_decohere
        } else {
            1.0
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const THREE_LEVEL: &str = r#"
schema = 1
name = "three_level"
n_copies = 1000
base_seed = 7
t_decohere = 6.0
mu = 1.0

[meter]
eigenvalues = [0.0, 1.0, 2.0]
amplitudes = [[0.7071067811865476, 0.0], [0.5, 0.0], [0.5, 0.0]]

[compartments]
q_min = -4.0
q_max = 4.0
n_q = 1
kappa = 1.0
n_v = 64
v_center = 0.0

[profile]
kind = "gaussian"
q0 = 0.0
sigma_q = 1.0
v0 = 0.0
sigma_v = 1.0
"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_toml(THREE_LEVEL).unwrap();
        assert_eq!(s.r_threshold, 100.0);
        assert_eq!(s.interaction, InteractionConfig::default());
        assert_eq!(s.output.report, "report.json");
        assert_eq!(s.sweep_t_max(), 6.0);
        assert!(s.checks.is_empty());
        assert_eq!(s.meter_state().unwrap().probabilities().len(), 3);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = THREE_LEVEL.replace("mu = 1.0", "mu = 1.0\nmuu = 2.0");
        assert!(matches!(
            Scenario::from_toml(&text),
            Err(CliError::Validation(_))
        ));
        let text = THREE_LEVEL.replace("sigma_v = 1.0", "sigma_v = 1.0\nsigma_w = 1.0");
        assert!(Scenario::from_toml(&text).is_err());
    }

    #[test]
    fn schema_is_checked() {
        let text = THREE_LEVEL.replace("schema = 1", "schema = 2");
        assert!(Scenario::from_toml(&text).is_err());
    }

    #[test]
    fn unnormalized_meter_needs_flag() {
        let text = THREE_LEVEL.replace("[0.7071067811865476, 0.0]", "[1.0, 0.0]");
        assert!(Scenario::from_toml(&text).is_err());
        let text = text.replace("[meter]", "[meter]\nnormalize = true");
        let s = Scenario::from_toml(&text).unwrap();
        assert!((s.meter_state().unwrap().norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn checks_parse() {
        let text = format!(
            "{THREE_LEVEL}\n[[checks]]\nkind = \"born\"\ntargets = [0.5, 0.25, 0.25]\ntolerance = 0.005\n\n[[checks]]\nkind = \"no_refusals\"\n\n[[checks]]\nkind = \"stage\"\nexpected = \"classical_pure\"\n"
        );
        let s = Scenario::from_toml(&text).unwrap();
        assert_eq!(s.checks.len(), 3);
        assert_eq!(
            s.checks[2],
            Check::Stage {
                expected: Stage::ClassicalPure
            }
        );
        let bad = text.replace("targets = [0.5, 0.25, 0.25]", "targets = [0.5, 0.5]");
        assert!(Scenario::from_toml(&bad).is_err());
    }

    #[test]
    fn table_profile_parses() {
        let text = THREE_LEVEL.replace(
            "kind = \"gaussian\"\nq0 = 0.0\nsigma_q = 1.0\nv0 = 0.0\nsigma_v = 1.0",
            "kind = \"table\"\nrows = [[0, 3, 1.0, 0.0], [0, 10, 0.0, 1.0]]",
        );
        let s = Scenario::from_toml(&text).unwrap();
        assert!(matches!(s.profile, AmplitudeProfile::Table { ref rows } if rows.len() == 2));
    }
}
