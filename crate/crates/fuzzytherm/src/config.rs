//! JSON documents: linguistic variables, vocabularies, rule matrices,
//! controller definitions and whole run configs.
//!
//! Every document deserializes into a plain `*Doc` struct first; `build`
//! methods turn docs into validated core values and report failures with a
//! JSON path such as `controller.inputs[0].terms[2].points`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use fuzzytherm_core::membership::{
    LinguisticTerm, LinguisticVariable, MembershipFunction, Universe,
};
use fuzzytherm_core::ruledsl::{parse_rules, serialize_rulebase, RuleMatrix, Vocabulary};
use fuzzytherm_core::{fltc, FuzzyController, LoopConfig, PlantParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", display_path(.path))]
    Invalid { path: String, message: String },
}

fn display_path(path: &str) -> &str {
    if path.is_empty() || path == "." {
        "<document>"
    } else {
        path
    }
}

impl ConfigError {
    pub fn invalid(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Invalid {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// JSON path of the offending field, when known.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { path, .. } => Some(path),
            ConfigError::Io { .. } => None,
        }
    }
}

/// Parses JSON, naming the path of the first field that fails to deserialize.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::invalid(path, e.into_inner())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_json(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Triangular,
    Trapezoidal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub name: String,
    pub shape: ShapeKind,
    pub points: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDoc {
    pub name: String,
    pub universe: [f64; 2],
    pub terms: Vec<TermDoc>,
}

impl VariableDoc {
    pub fn from_variable(var: &LinguisticVariable) -> Self {
        VariableDoc {
            name: var.name().to_string(),
            universe: [var.universe().lo(), var.universe().hi()],
            terms: var
                .terms()
                .iter()
                .map(|t| TermDoc {
                    name: t.name().to_string(),
                    shape: match t.mf() {
                        MembershipFunction::Triangular { .. } => ShapeKind::Triangular,
                        MembershipFunction::Trapezoidal { .. } => ShapeKind::Trapezoidal,
                    },
                    points: t.mf().points(),
                })
                .collect(),
        }
    }

    pub fn build(&self, path: &str) -> Result<LinguisticVariable, ConfigError> {
        let universe = Universe::new(self.universe[0], self.universe[1])
            .map_err(|e| ConfigError::invalid(format!("{path}.universe"), e))?;
        let mut terms = Vec::with_capacity(self.terms.len());
        for (i, t) in self.terms.iter().enumerate() {
            let here = format!("{path}.terms[{i}]");
            let expected = match t.shape {
                ShapeKind::Triangular => 3,
                ShapeKind::Trapezoidal => 4,
            };
            if t.points.len() != expected {
                return Err(ConfigError::invalid(
                    format!("{here}.points"),
                    format!(
                        "{:?} needs {expected} points, got {}",
                        t.shape,
                        t.points.len()
                    ),
                ));
            }
            let mf = MembershipFunction::from_points(&t.points)
                .map_err(|e| ConfigError::invalid(format!("{here}.points"), e))?;
            terms.push(
                LinguisticTerm::new(&t.name, mf)
                    .map_err(|e| ConfigError::invalid(format!("{here}.name"), e))?,
            );
        }
        LinguisticVariable::new(&self.name, universe, terms)
            .map_err(|e| ConfigError::invalid(path, e))
    }
}

/// Input variables plus the output variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyDoc {
    pub inputs: Vec<VariableDoc>,
    pub output: VariableDoc,
}

impl VocabularyDoc {
    pub fn from_vocabulary(v: &Vocabulary) -> Self {
        VocabularyDoc {
            inputs: v.inputs().iter().map(VariableDoc::from_variable).collect(),
            output: VariableDoc::from_variable(v.output()),
        }
    }

    pub fn build(&self, path: &str) -> Result<Vocabulary, ConfigError> {
        let join = |field: &str| {
            if path.is_empty() {
                field.to_string()
            } else {
                format!("{path}.{field}")
            }
        };
        let inputs = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, v)| v.build(&join(&format!("inputs[{i}]"))))
            .collect::<Result<Vec<_>, _>>()?;
        let output = self.output.build(&join("output"))?;
        Vocabulary::new(inputs, output).map_err(|e| ConfigError::invalid(path, e))
    }
}

/// `cells[r][c]` is the output term for `row_var is rows[r]` and `col_var is cols[c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub row_var: String,
    pub col_var: String,
    pub out: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<Vec<String>>,
}

impl From<MatrixDoc> for RuleMatrix {
    fn from(m: MatrixDoc) -> Self {
        RuleMatrix {
            row_var: m.row_var,
            col_var: m.col_var,
            out_var: m.out,
            row_terms: m.rows,
            col_terms: m.cols,
            cells: m.cells,
        }
    }
}

impl From<&RuleMatrix> for MatrixDoc {
    fn from(m: &RuleMatrix) -> Self {
        MatrixDoc {
            row_var: m.row_var.clone(),
            col_var: m.col_var.clone(),
            out: m.out_var.clone(),
            rows: m.row_terms.clone(),
            cols: m.col_terms.clone(),
            cells: m.cells.clone(),
        }
    }
}

/// Variables, rules (text or matrix) and optional peak overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerDoc {
    pub inputs: Vec<VariableDoc>,
    pub output: VariableDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub peaks: BTreeMap<String, f64>,
}

impl ControllerDoc {
    /// Canonical text form of the rules; peaks listed only where they differ
    /// from the term's own apex.
    pub fn from_controller(ctl: &FuzzyController) -> Self {
        let rb = ctl.rulebase();
        let peaks = rb
            .output()
            .terms()
            .iter()
            .filter_map(|t| {
                let p = ctl.peak(t.name())?;
                (p != t.mf().peak()).then(|| (t.name().to_string(), p))
            })
            .collect();
        ControllerDoc {
            inputs: rb.inputs().iter().map(VariableDoc::from_variable).collect(),
            output: VariableDoc::from_variable(rb.output()),
            rules: Some(serialize_rulebase(rb)),
            matrix: None,
            peaks,
        }
    }

    pub fn fltc() -> Self {
        Self::from_controller(&fltc::controller())
    }

    pub fn build(&self, path: &str) -> Result<FuzzyController, ConfigError> {
        let join = |field: &str| {
            if path.is_empty() {
                field.to_string()
            } else {
                format!("{path}.{field}")
            }
        };
        let vocab = VocabularyDoc {
            inputs: self.inputs.clone(),
            output: self.output.clone(),
        }
        .build(path)?;
        let rulebase = match (&self.rules, &self.matrix) {
            (Some(text), None) => {
                parse_rules(text, &vocab).map_err(|e| ConfigError::invalid(join("rules"), e))?
            }
            (None, Some(m)) => RuleMatrix::from(m.clone())
                .to_rules(&vocab)
                .map_err(|e| ConfigError::invalid(join("matrix"), e))?,
            _ => {
                return Err(ConfigError::invalid(
                    path,
                    "exactly one of `rules` or `matrix` must be given",
                ))
            }
        };
        FuzzyController::new(rulebase)
            .with_peaks(self.peaks.iter().map(|(k, v)| (k.as_str(), *v)))
            .map_err(|e| ConfigError::invalid(join("peaks"), e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantDoc {
    pub capacitance: f64,
    pub heater_power: f64,
    pub loss_coeff: f64,
    pub fan_coeff: f64,
    pub ambient: f64,
    pub sensor_noise_std: f64,
    pub adc_bits: u32,
    pub adc_range: [f64; 2],
    pub seed: u64,
}

impl Default for PlantDoc {
    fn default() -> Self {
        PlantDoc::from(&PlantParams::default())
    }
}

impl From<&PlantParams> for PlantDoc {
    fn from(p: &PlantParams) -> Self {
        PlantDoc {
            capacitance: p.capacitance,
            heater_power: p.heater_power,
            loss_coeff: p.loss_coeff,
            fan_coeff: p.fan_coeff,
            ambient: p.ambient,
            sensor_noise_std: p.sensor_noise_std,
            adc_bits: p.adc_bits,
            adc_range: [p.adc_range.0, p.adc_range.1],
            seed: p.seed,
        }
    }
}

impl PlantDoc {
    pub fn build(&self, path: &str) -> Result<PlantParams, ConfigError> {
        let p = PlantParams {
            capacitance: self.capacitance,
            heater_power: self.heater_power,
            loss_coeff: self.loss_coeff,
            fan_coeff: self.fan_coeff,
            ambient: self.ambient,
            sensor_noise_std: self.sensor_noise_std,
            adc_bits: self.adc_bits,
            adc_range: (self.adc_range[0], self.adc_range[1]),
            seed: self.seed,
        };
        p.validate().map_err(|e| {
            let field = match &e {
                fuzzytherm_core::PlantError::InvalidParam { field, .. } if *field != "*" => {
                    format!("{path}.{field}")
                }
                _ => path.to_string(),
            };
            ConfigError::invalid(field, e)
        })?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopDoc {
    pub setpoint: f64,
    pub sample_period: f64,
    pub duration: f64,
    pub initial_temp: f64,
    pub settling_band: f64,
    pub setpoint_limits: [f64; 2],
}

impl Default for LoopDoc {
    fn default() -> Self {
        LoopDoc::from(&LoopConfig::default())
    }
}

impl From<&LoopConfig> for LoopDoc {
    fn from(c: &LoopConfig) -> Self {
        LoopDoc {
            setpoint: c.setpoint,
            sample_period: c.sample_period,
            duration: c.duration,
            initial_temp: c.initial_temp,
            settling_band: c.settling_band,
            setpoint_limits: [c.setpoint_limits.0, c.setpoint_limits.1],
        }
    }
}

impl LoopDoc {
    pub fn to_config(&self) -> LoopConfig {
        LoopConfig {
            setpoint: self.setpoint,
            sample_period: self.sample_period,
            duration: self.duration,
            initial_temp: self.initial_temp,
            settling_band: self.settling_band,
            setpoint_limits: (self.setpoint_limits[0], self.setpoint_limits[1]),
        }
    }
}

/// One document describing a whole closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigDoc {
    pub controller: ControllerDoc,
    #[serde(default)]
    pub plant: PlantDoc,
    #[serde(default, rename = "loop")]
    pub loop_: LoopDoc,
}

impl Default for RunConfigDoc {
    /// FLTC controller, default plant, 45 °C setpoint, 1 s samples for 600 s.
    fn default() -> Self {
        RunConfigDoc {
            controller: ControllerDoc::fltc(),
            plant: PlantDoc::default(),
            loop_: LoopDoc::default(),
        }
    }
}

/// A run config turned into core values, ready to simulate.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub controller: FuzzyController,
    pub plant: PlantParams,
    pub config: LoopConfig,
}

impl RunConfigDoc {
    pub fn build(&self) -> Result<RunSetup, ConfigError> {
        let controller = self.controller.build("controller")?;
        let plant = self.plant.build("plant")?;
        let config = self.loop_.to_config();
        fuzzytherm_core::ClosedLoop::new(controller.clone(), plant, config).map_err(|e| {
            let path = match &e {
                fuzzytherm_core::ControlError::InvalidConfig { field, .. } if *field != "*" => {
                    format!("loop.{field}")
                }
                fuzzytherm_core::ControlError::SetpointOutOfRange { .. } => "loop.setpoint".into(),
                fuzzytherm_core::ControlError::ControllerShape(_) => "controller.inputs".into(),
                _ => "loop".into(),
            };
            ConfigError::invalid(path, e)
        })?;
        Ok(RunSetup {
            controller,
            plant,
            config,
        })
    }
}

/// Accepts either a bare controller document or a run config holding one.
pub fn controller_from_json(text: &str) -> Result<FuzzyController, ConfigError> {
    let value: serde_json::Value = from_json(text)?;
    if value.get("controller").is_some() {
        from_json::<RunConfigDoc>(text)?
            .controller
            .build("controller")
    } else {
        from_json::<ControllerDoc>(text)?.build("")
    }
}
