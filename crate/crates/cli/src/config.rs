//! TOML configuration: select a preset or define a scenario inline, choose
//! what to emit, and override individual tuning constants. Unknown keys are
//! rejected, and every override is re-validated against the type invariants
//! before a run starts.

use std::path::PathBuf;

use alq_core::adapt::AdaptGains;
use alq_core::drem::PipelineParams;
use alq_core::lq::{CostWeights, PlantModel};
use alq_core::mat::Mat;
use alq_core::sim::{ReferenceSignal, Scenario};
use serde::{Deserialize, Serialize};

use crate::presets::preset_by_name;

#[derive(Debug)]
pub enum ConfigError {
    Parse(toml::de::Error),
    Validation(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(e) => write!(f, "config parse error: {e}"),
            ConfigError::Validation(msg) => write!(f, "config validation error: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// name of a built-in scenario; mutually exclusive with `scenario`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// inline scenario definition
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit: EmitFlags,
    #[serde(default)]
    pub overrides: Overrides,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitFlags {
    pub trace: bool,
    pub summary: bool,
    pub table1: bool,
    pub spectra: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        EmitFlags { trace: true, summary: true, table1: false, spectra: false }
    }
}

/// Optional replacements for individual tuning constants of the selected
/// scenario. Each is re-validated after application.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_inf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decimate: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// plant state matrix, row by row
    pub a_p: Vec<Vec<f64>>,
    pub b_p: Vec<Vec<f64>>,
    pub c_p: Vec<Vec<f64>>,
    pub vartheta: f64,
    pub q: Vec<Vec<f64>>,
    pub r_weight: Vec<Vec<f64>>,
    pub pipeline: PipelineConfig,
    pub gains: GainsConfig,
    /// initial controller parameters, row by row ((n+m) x m)
    pub theta_hat0: Vec<Vec<f64>>,
    /// augmented initial state (plant state followed by the integral error)
    pub x0: Vec<f64>,
    pub reference: ReferenceConfig,
    pub duration: f64,
    pub dt: f64,
    #[serde(default)]
    pub reset_on_reference_change: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub l: f64,
    pub k0: f64,
    pub k1: f64,
    pub sigma: f64,
    pub p: usize,
    pub tau_inf: f64,
    #[serde(default = "default_pair_rescale")]
    pub pair_rescale: f64,
}

fn default_pair_rescale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub gamma0: f64,
    pub gamma1: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ReferenceConfig {
    Constant { value: f64 },
    Exponential { amplitude: f64, rate: f64 },
    Piecewise { segments: Vec<(f64, f64)> },
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let cfg: Config = toml::from_str(text).map_err(ConfigError::Parse)?;
    if cfg.preset.is_some() == cfg.scenario.is_some() {
        return Err(ConfigError::Validation(
            "exactly one of `preset` and `scenario` must be given".into(),
        ));
    }
    Ok(cfg)
}

pub fn emit_config(cfg: &Config) -> String {
    toml::to_string_pretty(cfg).expect("config serialization cannot fail")
}

fn rows_to_mat(name: &str, rows: &[Vec<f64>]) -> Result<Mat, ConfigError> {
    let slices: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    Mat::from_rows(&slices).map_err(|e| ConfigError::Validation(format!("{name}: {e}")))
}

impl ScenarioConfig {
    pub fn to_scenario(&self) -> Result<Scenario, ConfigError> {
        let a_p = rows_to_mat("a_p", &self.a_p)?;
        let n_p = a_p.rows();
        let b_p = rows_to_mat("b_p", &self.b_p)?;
        let c_p = rows_to_mat("c_p", &self.c_p)?;
        let plant = PlantModel::new(a_p, b_p, c_p, vec![0.0; n_p])
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        let weights = CostWeights::new(
            rows_to_mat("q", &self.q)?,
            rows_to_mat("r_weight", &self.r_weight)?,
        )
        .map_err(|e| ConfigError::Validation(e.to_string()))?;
        let scenario = Scenario {
            plant,
            vartheta: self.vartheta,
            weights,
            pipeline: PipelineParams {
                l: self.pipeline.l,
                k0: self.pipeline.k0,
                k1: self.pipeline.k1,
                sigma: self.pipeline.sigma,
                p: self.pipeline.p,
                tau_inf: self.pipeline.tau_inf,
                t_start: 0.0,
                pair_rescale: self.pipeline.pair_rescale,
            },
            gains: AdaptGains {
                gamma0: self.gains.gamma0,
                gamma1: self.gains.gamma1,
                rho: self.gains.rho,
            },
            theta_hat0: rows_to_mat("theta_hat0", &self.theta_hat0)?,
            x0: self.x0.clone(),
            reference: match &self.reference {
                ReferenceConfig::Constant { value } => ReferenceSignal::Constant(*value),
                ReferenceConfig::Exponential { amplitude, rate } => {
                    ReferenceSignal::Exponential { amplitude: *amplitude, rate: *rate }
                }
                ReferenceConfig::Piecewise { segments } => {
                    ReferenceSignal::PiecewiseConstant(segments.clone())
                }
            },
            duration: self.duration,
            dt: self.dt,
            reset_on_reference_change: self.reset_on_reference_change,
        };
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> ScenarioConfig {
        let mat_rows = |m: &Mat| -> Vec<Vec<f64>> {
            (0..m.rows())
                .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
                .collect()
        };
        ScenarioConfig {
            a_p: mat_rows(&s.plant.a_p),
            b_p: mat_rows(&s.plant.b_p),
            c_p: mat_rows(&s.plant.c_p),
            vartheta: s.vartheta,
            q: mat_rows(&s.weights.q),
            r_weight: mat_rows(&s.weights.r),
            pipeline: PipelineConfig {
                l: s.pipeline.l,
                k0: s.pipeline.k0,
                k1: s.pipeline.k1,
                sigma: s.pipeline.sigma,
                p: s.pipeline.p,
                tau_inf: s.pipeline.tau_inf,
                pair_rescale: s.pipeline.pair_rescale,
            },
            gains: GainsConfig {
                gamma0: s.gains.gamma0,
                gamma1: s.gains.gamma1,
                rho: s.gains.rho,
            },
            theta_hat0: mat_rows(&s.theta_hat0),
            x0: s.x0.clone(),
            reference: match &s.reference {
                ReferenceSignal::Constant(v) => ReferenceConfig::Constant { value: *v },
                ReferenceSignal::Exponential { amplitude, rate } => {
                    ReferenceConfig::Exponential { amplitude: *amplitude, rate: *rate }
                }
                ReferenceSignal::PiecewiseConstant(seg) => {
                    ReferenceConfig::Piecewise { segments: seg.clone() }
                }
            },
            duration: s.duration,
            dt: s.dt,
            reset_on_reference_change: s.reset_on_reference_change,
        }
    }
}

impl Config {
    /// Resolve into a ready-to-run scenario plus the output decimation.
    pub fn resolve(&self) -> Result<(Scenario, usize), ConfigError> {
        let mut scenario = match (&self.preset, &self.scenario) {
            (Some(name), None) => preset_by_name(name).ok_or_else(|| {
                ConfigError::Validation(format!("unknown preset `{name}`"))
            })?,
            (None, Some(inline)) => inline.to_scenario()?,
            _ => {
                return Err(ConfigError::Validation(
                    "exactly one of `preset` and `scenario` must be given".into(),
                ))
            }
        };
        let o = &self.overrides;
        if let Some(v) = o.l {
            scenario.pipeline.l = v;
        }
        if let Some(v) = o.k0 {
            scenario.pipeline.k0 = v;
        }
        if let Some(v) = o.k1 {
            scenario.pipeline.k1 = v;
        }
        if let Some(v) = o.sigma {
            scenario.pipeline.sigma = v;
        }
        if let Some(v) = o.p {
            scenario.pipeline.p = v;
        }
        if let Some(v) = o.tau_inf {
            scenario.pipeline.tau_inf = v;
        }
        if let Some(v) = o.gamma0 {
            scenario.gains.gamma0 = v;
        }
        if let Some(v) = o.gamma1 {
            scenario.gains.gamma1 = v;
        }
        if let Some(v) = o.rho {
            scenario.gains.rho = v;
        }
        if let Some(v) = o.dt {
            scenario.dt = v;
        }
        if let Some(v) = o.duration {
            scenario.duration = v;
        }
        scenario
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        let decimate = o.decimate.unwrap_or(100);
        if decimate == 0 {
            return Err(ConfigError::Validation("decimate must be positive".into()));
        }
        Ok((scenario, decimate))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{scenario_sec4_1, scenario_sec4_2};

    #[test]
    fn preset_config_round_trips() {
        for name in ["sec4_1", "sec4_2"] {
            let cfg = Config { preset: Some(name.into()), ..Config::default() };
            let text = emit_config(&cfg);
            let back = parse_config(&text).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn inline_scenario_round_trips() {
        for s in [scenario_sec4_1(), scenario_sec4_2()] {
            let cfg = Config {
                scenario: Some(ScenarioConfig::from_scenario(&s)),
                ..Config::default()
            };
            let text = emit_config(&cfg);
            let back = parse_config(&text).unwrap();
            assert_eq!(cfg, back);
            let (resolved, _) = back.resolve().unwrap();
            resolved.validate().unwrap();
            assert_eq!(resolved.pipeline, s.pipeline);
            assert_eq!(resolved.gains, s.gains);
            assert_eq!(resolved.x0, s.x0);
        }
    }

    #[test]
    fn override_isolation() {
        let base = Config { preset: Some("sec4_2".into()), ..Config::default() };
        let (s_base, _) = base.resolve().unwrap();
        let cfg = Config {
            preset: Some("sec4_2".into()),
            overrides: Overrides { gamma1: Some(10.0), ..Overrides::default() },
            ..Config::default()
        };
        let (s, _) = cfg.resolve().unwrap();
        assert_eq!(s.gains.gamma1, 10.0);
        assert_eq!(s.gains.gamma0, s_base.gains.gamma0);
        assert_eq!(s.pipeline, s_base.pipeline);
    }

    #[test]
    fn invalid_override_is_rejected() {
        let cfg = Config {
            preset: Some("sec4_1".into()),
            overrides: Overrides { rho: Some(-1.0), ..Overrides::default() },
            ..Config::default()
        };
        match cfg.resolve() {
            Err(ConfigError::Validation(msg)) => assert!(msg.contains("rho")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("preset = \"sec4_1\"\nbogus_key = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn preset_and_scenario_are_mutually_exclusive() {
        assert!(parse_config("").is_err());
    }
}
