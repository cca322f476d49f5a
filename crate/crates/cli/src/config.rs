//! TOML configuration: flat keys grouped in sections, every key optional.
//! A preset supplies defaults; explicit keys and `--set section.key=value`
//! overrides win.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use ddmpc::consistency::{MultiplierMode, SamplerKind};
use ddmpc::controller::CONVERGENCE_TOL;
use ddmpc::cstr;
use ddmpc::lti::{LtiSystem, NoiseDistribution, NoiseModel};
use ddmpc::sdp::SolverSettings;
use ddmpc::synthesis::{ConstraintSets, CostWeights, StateConstraintForm, SynthesisOptions};

use crate::error::CliError;

pub type Rows = Vec<Vec<f64>>;

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub plant: RawPlant,
    #[serde(default)]
    pub data: RawData,
    #[serde(default)]
    pub weights: RawWeights,
    #[serde(default)]
    pub constraints: RawConstraints,
    #[serde(default)]
    pub controller: RawController,
    #[serde(default)]
    pub synthesis: RawSynthesis,
    #[serde(default)]
    pub verify: RawVerify,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPlant {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Rows>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawData {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWeights {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<Rows>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConstraints {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_u: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_x: Option<Rows>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawController {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub online_noise_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub online_noise: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub early_stop: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_tol: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSynthesis {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_form: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVerify {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_states: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rpi_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_horizon: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DataConfig {
    pub length: usize,
    pub eps: f64,
    pub input_range: (f64, f64),
    pub x0: DVector<f64>,
    pub noise: NoiseDistribution,
    pub seed: u64,
}

impl DataConfig {
    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel::new(self.eps, self.noise).expect("eps validated on load")
    }
}

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub x0: DVector<f64>,
    pub steps: usize,
    pub online_noise: NoiseModel,
    pub seed: u64,
    pub warm_start: bool,
    pub early_stop: bool,
    pub convergence_tol: f64,
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub samples: usize,
    pub boundary_states: usize,
    pub rpi_depth: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub max_horizon: usize,
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub preset: Option<String>,
    pub system: LtiSystem,
    pub data: DataConfig,
    pub weights: CostWeights,
    pub constraints_enabled: bool,
    pub constraints: ConstraintSets,
    pub controller: ControllerConfig,
    pub synthesis: SynthesisOptions,
    pub verify: VerifyConfig,
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

pub fn to_rows(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(field: &str, rows: &Rows) -> Result<DMatrix<f64>, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(config_err(field, "matrix must be non-empty"));
    }
    if let Some(i) = rows.iter().position(|row| row.len() != c) {
        return Err(config_err(
            field,
            format!("row {} has {} entries, expected {c}", i + 1, rows[i].len()),
        ));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn square(field: &str, rows: &Rows, n: usize) -> Result<DMatrix<f64>, CliError> {
    let m = from_rows(field, rows)?;
    if m.shape() != (n, n) {
        return Err(config_err(
            field,
            format!("expected {n}x{n}, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m)
}

fn vector(field: &str, v: &[f64], n: usize) -> Result<DVector<f64>, CliError> {
    if v.len() != n {
        return Err(config_err(field, format!("expected {n} entries, got {}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

fn parse_enum<T: std::str::FromStr<Err = ddmpc::Error>>(field: &str, s: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: ddmpc::Error| config_err(field, e))
}

fn nonneg(field: &str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(field, format!("must be a nonnegative number, got {v}")))
    }
}

impl RawConfig {
    /// Preset-derived defaults for the fields left unset.
    fn preset_defaults(preset: &str) -> Result<RawConfig, CliError> {
        match preset {
            "cstr" => Ok(RawConfig {
                plant: RawPlant {
                    preset: Some("cstr".into()),
                    a: Some(to_rows(&cstr::a())),
                    b: Some(to_rows(&cstr::b())),
                },
                data: RawData {
                    length: Some(cstr::DATA_LENGTH),
                    eps: Some(cstr::NOISE_BOUND),
                    input_min: Some(cstr::INPUT_RANGE.0),
                    input_max: Some(cstr::INPUT_RANGE.1),
                    ..RawData::default()
                },
                weights: RawWeights {
                    q: Some(to_rows(&cstr::q())),
                    r: Some(vec![vec![cstr::r_values()[1]]]),
                },
                constraints: RawConstraints {
                    enabled: Some(true),
                    s_u: Some(to_rows(&cstr::s_u())),
                    s_x: Some(to_rows(&cstr::s_x())),
                },
                controller: RawController {
                    x0: Some(cstr::initial_state().iter().copied().collect()),
                    steps: Some(cstr::CLOSED_LOOP_STEPS),
                    ..RawController::default()
                },
                ..RawConfig::default()
            }),
            "none" => Ok(RawConfig::default()),
            other => Err(config_err(
                "plant.preset",
                format!("unknown preset '{other}' (expected 'cstr' or 'none')"),
            )),
        }
    }

    /// Fills unset fields from `base`.
    fn or(self, base: RawConfig) -> RawConfig {
        macro_rules! pick {
            ($ty:ident, $sec:ident { $($f:ident),* }) => {
                $ty { $($f: self.$sec.$f.or(base.$sec.$f)),* }
            };
        }
        RawConfig {
            plant: pick!(RawPlant, plant { preset, a, b }),
            data: pick!(
                RawData,
                data {
                    length,
                    eps,
                    input_min,
                    input_max,
                    x0,
                    noise,
                    seed
                }
            ),
            weights: pick!(RawWeights, weights { q, r }),
            constraints: pick!(RawConstraints, constraints { enabled, s_u, s_x }),
            controller: pick!(
                RawController,
                controller {
                    x0,
                    steps,
                    online_noise_eps,
                    online_noise,
                    seed,
                    warm_start,
                    early_stop,
                    convergence_tol
                }
            ),
            synthesis: pick!(
                RawSynthesis,
                synthesis {
                    multipliers,
                    state_form,
                    margin_abs,
                    margin_rel,
                    origin_threshold,
                    tol,
                    max_iter
                }
            ),
            verify: pick!(
                RawVerify,
                verify {
                    samples,
                    boundary_states,
                    rpi_depth,
                    seed,
                    sampler,
                    max_horizon
                }
            ),
        }
    }

    pub fn resolve(self) -> Result<Config, CliError> {
        let preset = match (&self.plant.preset, &self.plant.a, &self.plant.b) {
            (Some(p), _, _) => p.clone(),
            (None, None, None) => "cstr".to_string(),
            _ => "none".to_string(),
        };
        let raw = self.or(Self::preset_defaults(&preset)?);

        let a = from_rows(
            "plant.a",
            raw.plant.a.as_ref().ok_or_else(|| config_err("plant.a", "missing"))?,
        )?;
        let b = from_rows(
            "plant.b",
            raw.plant.b.as_ref().ok_or_else(|| config_err("plant.b", "missing"))?,
        )?;
        let system = LtiSystem::new(a, b).map_err(|e| config_err("plant", e))?;
        let (n, m) = (system.n(), system.m());

        let d = &raw.data;
        let eps = nonneg("data.eps", d.eps.unwrap_or(cstr::NOISE_BOUND))?;
        let input_range = (
            d.input_min.unwrap_or(cstr::INPUT_RANGE.0),
            d.input_max.unwrap_or(cstr::INPUT_RANGE.1),
        );
        if input_range.0.is_nan() || input_range.1.is_nan() || input_range.0 > input_range.1 {
            return Err(config_err("data.input_min", "must not exceed data.input_max"));
        }
        let length = d.length.unwrap_or(cstr::DATA_LENGTH);
        if length == 0 {
            return Err(config_err("data.length", "must be at least 1"));
        }
        let data = DataConfig {
            length,
            eps,
            input_range,
            x0: match &d.x0 {
                Some(v) => vector("data.x0", v, n)?,
                None => DVector::zeros(n),
            },
            noise: parse_enum("data.noise", d.noise.as_deref().unwrap_or("uniform-ball"))?,
            seed: d.seed.unwrap_or(DEFAULT_SEED),
        };

        let q = match &raw.weights.q {
            Some(r) => square("weights.q", r, n)?,
            None => DMatrix::identity(n, n),
        };
        let r = match &raw.weights.r {
            Some(rows) => square("weights.r", rows, m)?,
            None => DMatrix::identity(m, m),
        };
        let weights = CostWeights::new(q, r).map_err(|e| config_err("weights", e))?;

        let s_u = match &raw.constraints.s_u {
            Some(r) => square("constraints.s_u", r, m)?,
            None => DMatrix::identity(m, m),
        };
        let s_x = match &raw.constraints.s_x {
            Some(r) => square("constraints.s_x", r, n)?,
            None => DMatrix::zeros(n, n),
        };
        let constraints = ConstraintSets::new(s_u, s_x).map_err(|e| config_err("constraints", e))?;

        let c = &raw.controller;
        let online_eps = nonneg("controller.online_noise_eps", c.online_noise_eps.unwrap_or(0.0))?;
        let online_dist = parse_enum(
            "controller.online_noise",
            c.online_noise.as_deref().unwrap_or("uniform-ball"),
        )?;
        let controller = ControllerConfig {
            x0: match &c.x0 {
                Some(v) => vector("controller.x0", v, n)?,
                None => return Err(config_err("controller.x0", "missing")),
            },
            steps: c.steps.unwrap_or(cstr::CLOSED_LOOP_STEPS),
            online_noise: NoiseModel::new(online_eps, online_dist)
                .map_err(|e| config_err("controller.online_noise", e))?,
            seed: c.seed.unwrap_or(DEFAULT_SEED.wrapping_add(1)),
            warm_start: c.warm_start.unwrap_or(false),
            early_stop: c.early_stop.unwrap_or(false),
            convergence_tol: nonneg(
                "controller.convergence_tol",
                c.convergence_tol.unwrap_or(CONVERGENCE_TOL),
            )?,
        };

        let s = &raw.synthesis;
        let defaults = SynthesisOptions::default();
        let synthesis = SynthesisOptions {
            multiplier_mode: parse_enum::<MultiplierMode>(
                "synthesis.multipliers",
                s.multipliers.as_deref().unwrap_or("per-sample"),
            )?,
            constraints: raw.constraints.enabled.unwrap_or(true),
            state_form: parse_enum::<StateConstraintForm>(
                "synthesis.state_form",
                s.state_form.as_deref().unwrap_or("containment"),
            )?,
            margin_abs: nonneg("synthesis.margin_abs", s.margin_abs.unwrap_or(defaults.margin_abs))?,
            margin_rel: nonneg("synthesis.margin_rel", s.margin_rel.unwrap_or(defaults.margin_rel))?,
            origin_threshold: nonneg(
                "synthesis.origin_threshold",
                s.origin_threshold.unwrap_or(defaults.origin_threshold),
            )?,
            solver: SolverSettings {
                tol: s.tol.unwrap_or(defaults.solver.tol),
                max_iter: s.max_iter.unwrap_or(defaults.solver.max_iter),
                ..defaults.solver
            },
        };

        let v = &raw.verify;
        let verify = VerifyConfig {
            samples: v.samples.unwrap_or(1000),
            boundary_states: v.boundary_states.unwrap_or(100),
            rpi_depth: v.rpi_depth.unwrap_or(ddmpc::verify::RPI_DEPTH),
            seed: v.seed.unwrap_or(DEFAULT_SEED.wrapping_add(2)),
            sampler: parse_enum("verify.sampler", v.sampler.as_deref().unwrap_or("hit-and-run"))?,
            max_horizon: v.max_horizon.unwrap_or(ddmpc::verify::MAX_COST_HORIZON),
        };

        Ok(Config {
            preset: (preset != "none").then_some(preset),
            system,
            data,
            weights,
            constraints_enabled: synthesis.constraints,
            constraints,
            controller,
            synthesis,
            verify,
        })
    }
}

impl Config {
    /// Fully populated raw form, suitable for metadata and replay.
    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            plant: RawPlant {
                preset: Some(self.preset.clone().unwrap_or_else(|| "none".into())),
                a: Some(to_rows(self.system.a())),
                b: Some(to_rows(self.system.b())),
            },
            data: RawData {
                length: Some(self.data.length),
                eps: Some(self.data.eps),
                input_min: Some(self.data.input_range.0),
                input_max: Some(self.data.input_range.1),
                x0: Some(self.data.x0.iter().copied().collect()),
                noise: Some(self.data.noise.to_string()),
                seed: Some(self.data.seed),
            },
            weights: RawWeights {
                q: Some(to_rows(self.weights.q())),
                r: Some(to_rows(self.weights.r())),
            },
            constraints: RawConstraints {
                enabled: Some(self.constraints_enabled),
                s_u: Some(to_rows(self.constraints.s_u())),
                s_x: Some(to_rows(self.constraints.s_x())),
            },
            controller: RawController {
                x0: Some(self.controller.x0.iter().copied().collect()),
                steps: Some(self.controller.steps),
                online_noise_eps: Some(self.controller.online_noise.eps),
                online_noise: Some(self.controller.online_noise.distribution.to_string()),
                seed: Some(self.controller.seed),
                warm_start: Some(self.controller.warm_start),
                early_stop: Some(self.controller.early_stop),
                convergence_tol: Some(self.controller.convergence_tol),
            },
            synthesis: RawSynthesis {
                multipliers: Some(self.synthesis.multiplier_mode.to_string()),
                state_form: Some(self.synthesis.state_form.to_string()),
                margin_abs: Some(self.synthesis.margin_abs),
                margin_rel: Some(self.synthesis.margin_rel),
                origin_threshold: Some(self.synthesis.origin_threshold),
                tol: Some(self.synthesis.solver.tol),
                max_iter: Some(self.synthesis.solver.max_iter),
            },
            verify: RawVerify {
                samples: Some(self.verify.samples),
                boundary_states: Some(self.verify.boundary_states),
                rpi_depth: Some(self.verify.rpi_depth),
                seed: Some(self.verify.seed),
                sampler: Some(self.verify.sampler.to_string()),
                max_horizon: Some(self.verify.max_horizon),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("config serializes")
    }

    pub fn mpc_config(&self, data: ddmpc::lti::DataSet) -> ddmpc::controller::MpcConfig {
        let mut cfg = ddmpc::controller::MpcConfig::new(
            self.weights.clone(),
            self.constraints.clone(),
            data,
            self.controller.steps,
        );
        cfg.online_noise = self.controller.online_noise;
        cfg.synthesis = self.synthesis.clone();
        cfg.warm_start = self.controller.warm_start;
        cfg.early_stop = self.controller.early_stop;
        cfg.convergence_tol = self.controller.convergence_tol;
        cfg
    }
}

/// Splits `section.key=value` and parses the value as a TOML literal,
/// falling back to a bare string.
fn apply_override(table: &mut toml::Table, arg: &str) -> Result<(), CliError> {
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{arg}': expected section.key=value")))?;
    let (section, field) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| CliError::Config(format!("override '{arg}': key must be section.key")))?;
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let sec = entry
        .as_table_mut()
        .ok_or_else(|| CliError::Config(format!("override '{arg}': '{section}' is not a section")))?;
    sec.insert(field.to_string(), parsed);
    Ok(())
}

/// Top-level keys written by metadata files; ignored on load so a metadata
/// file replays as a config.
pub const METADATA_KEYS: [&str; 3] = ["artifact_version", "command", "seed"];

pub fn parse_raw(text: &str, origin: &str, overrides: &[String]) -> Result<RawConfig, CliError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    let is_metadata = table.contains_key(METADATA_KEYS[0]);
    if is_metadata {
        for k in METADATA_KEYS {
            table.remove(k);
        }
    }
    if overrides.is_empty() && !is_metadata {
        // Parse the text itself so errors carry line numbers.
        return toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")));
    }
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config, CliError> {
    let (text, origin) = match path {
        Some(p) => (
            fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => (String::new(), "<defaults>".to_string()),
    };
    parse_raw(&text, &origin, overrides)?.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_cstr_preset() {
        let cfg = parse_raw("", "t", &[]).unwrap().resolve().unwrap();
        assert_eq!(cfg.preset.as_deref(), Some("cstr"));
        assert_eq!(cfg.system.a(), &cstr::a());
        assert_eq!(cfg.data.length, 200);
        assert_eq!(cfg.weights.r()[(0, 0)], 1e-4);
        assert_eq!(cfg.controller.steps, 300);
    }

    #[test]
    fn explicit_keys_override_preset() {
        let text = "[weights]\nr = [[1.0]]\n[data]\nlength = 1\n";
        let cfg = parse_raw(text, "t", &[]).unwrap().resolve().unwrap();
        assert_eq!(cfg.weights.r()[(0, 0)], 1.0);
        assert_eq!(cfg.data.length, 1);
    }

    #[test]
    fn flag_overrides_apply() {
        let cfg = parse_raw("", "t", &["data.seed=7".into(), "synthesis.state_form=standard".into()])
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(cfg.data.seed, 7);
        assert_eq!(cfg.synthesis.state_form, StateConstraintForm::Standard);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_raw("[data]\nlength = 3\nbogus = 1\n", "cfg.toml", &[])
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3") && err.contains("bogus"), "{err}");
    }

    #[test]
    fn wrong_type_reports_line() {
        let err = parse_raw("[data]\n\nlength = \"long\"\n", "cfg.toml", &[])
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn dimension_errors_name_the_field() {
        let err = parse_raw("[weights]\nq = [[1.0]]\n", "t", &[])
            .unwrap()
            .resolve()
            .unwrap_err()
            .to_string();
        assert!(err.contains("weights.q") && err.contains("2x2"), "{err}");
        let err = parse_raw(
            "[plant]\npreset = \"none\"\na = [[1.0, 0.0], [1.0]]\nb = [[1.0]]\n",
            "t",
            &[],
        )
        .unwrap()
        .resolve()
        .unwrap_err()
        .to_string();
        assert!(err.contains("plant.a") && err.contains("row 2"), "{err}");
    }

    #[test]
    fn round_trip_through_metadata() {
        let cfg = parse_raw("", "t", &[]).unwrap().resolve().unwrap();
        let text = cfg.to_toml();
        let again = parse_raw(&text, "meta", &[]).unwrap().resolve().unwrap();
        assert_eq!(again.to_toml(), text);
    }
}
