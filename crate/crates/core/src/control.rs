//! The sampled control loop: sense, compute error, infer, actuate, advance.
//!
//! The defuzzified level drives the fan (`fan = D/255`) and the heater gets
//! the complement, so the two duties of a frame always sum to one.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::inference::{FuzzyController, InferenceError, InferenceTrace};
use crate::plant::{Plant, PlantError, PlantParams};
use crate::pwm::duty_from_level;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("invalid loop setting `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("setpoint {value} °C is outside the allowed range [{lo}, {hi}] °C")]
    SetpointOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("controller must have exactly one input variable (the error), found {0}")]
    ControllerShape(usize),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

fn invalid(field: &'static str, reason: impl ToString) -> ControlError {
    ControlError::InvalidConfig {
        field,
        reason: reason.to_string(),
    }
}

/// Loop timing and operator limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    /// °C
    pub setpoint: f64,
    /// Seconds between samples.
    pub sample_period: f64,
    /// Simulated seconds to run.
    pub duration: f64,
    /// Plate temperature at t = 0, °C.
    pub initial_temp: f64,
    /// Half-width of the settling band, °C.
    pub settling_band: f64,
    /// Allowed operator setpoints, °C.
    pub setpoint_limits: (f64, f64),
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            setpoint: 45.0,
            sample_period: 1.0,
            duration: 600.0,
            initial_temp: 25.0,
            settling_band: 1.0,
            setpoint_limits: (0.0, 120.0),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self, plant: &PlantParams) -> Result<(), ControlError> {
        let all = [
            self.setpoint,
            self.sample_period,
            self.duration,
            self.initial_temp,
            self.settling_band,
            self.setpoint_limits.0,
            self.setpoint_limits.1,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("*", "all loop settings must be finite"));
        }
        if self.sample_period <= 0.0 {
            return Err(invalid("sample_period", "must be positive"));
        }
        if self.duration < self.sample_period {
            return Err(invalid("duration", "must be at least one sample period"));
        }
        if self.sample_period >= plant.max_stable_step() {
            return Err(invalid(
                "sample_period",
                alloc::format!(
                    "must be below the plant stability bound of {} s",
                    plant.max_stable_step()
                ),
            ));
        }
        if self.settling_band <= 0.0 {
            return Err(invalid("settling_band", "must be positive"));
        }
        if self.setpoint_limits.0 > self.setpoint_limits.1 {
            return Err(invalid("setpoint_limits", "lower limit above upper limit"));
        }
        self.check_setpoint(self.setpoint)?;
        Ok(())
    }

    pub fn check_setpoint(&self, value: f64) -> Result<f64, ControlError> {
        let (lo, hi) = self.setpoint_limits;
        if value.is_finite() && (lo..=hi).contains(&value) {
            Ok(value)
        } else {
            Err(ControlError::SetpointOutOfRange { value, lo, hi })
        }
    }

    /// Number of samples in a full run.
    pub fn frame_count(&self) -> usize {
        libm::floor(self.duration / self.sample_period + 1e-9) as usize
    }
}

/// One closed-loop sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryFrame {
    pub t: f64,
    pub setpoint: f64,
    pub sensed: f64,
    pub error: f64,
    /// Defuzzified PWM level, `None` when inference was degenerate.
    pub defuzz: Option<f64>,
    pub fan_duty: f64,
    pub heater_duty: f64,
    /// Actuation was held from the previous frame because inference was degenerate.
    pub held: bool,
    pub trace: InferenceTrace,
}

/// Senses, infers and advances `plant` by one sample period.
///
/// Degenerate inference holds the previous frame's duties (zero for both on
/// the first frame) and marks the frame as held.
pub fn loop_step(
    controller: &FuzzyController,
    setpoint: f64,
    sample_period: f64,
    plant: &mut Plant,
    prev: Option<&TelemetryFrame>,
) -> Result<TelemetryFrame, ControlError> {
    let input = controller
        .rulebase()
        .inputs()
        .first()
        .ok_or(ControlError::ControllerShape(0))?;
    let t = plant.state().time;
    let sensed = plant.read_sensor();
    let error = setpoint - sensed;
    let (trace, defuzz) = match controller.infer(&[(input.name(), error)]) {
        Ok(trace) => {
            let d = trace.output;
            (trace, d)
        }
        Err(InferenceError::Degenerate(trace)) => (*trace, None),
        Err(e) => return Err(e.into()),
    };
    let (fan_duty, heater_duty, held) = match defuzz {
        Some(level) => {
            let fan = duty_from_level(level);
            (fan, 1.0 - fan, false)
        }
        None => prev.map_or((0.0, 0.0, true), |p| (p.fan_duty, p.heater_duty, true)),
    };
    plant.step(heater_duty, fan_duty, sample_period)?;
    Ok(TelemetryFrame {
        t,
        setpoint,
        sensed,
        error,
        defuzz,
        fan_duty,
        heater_duty,
        held,
        trace,
    })
}

/// Settling and overshoot figures for a finished run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    /// First time after which every sample stays within the band; `None` if
    /// the last sample is still outside it.
    pub settling_time: Option<f64>,
    /// `max(sensed − setpoint)` over all frames.
    pub overshoot: f64,
    pub band: f64,
    /// Error range over the settled tail.
    pub steady_state_error: Option<(f64, f64)>,
    pub held_frames: usize,
}

impl RunSummary {
    pub fn from_frames(frames: &[TelemetryFrame], band: f64) -> Self {
        let outside = |f: &TelemetryFrame| libm::fabs(f.sensed - f.setpoint) > band;
        let settled_from = match frames.iter().rposition(outside) {
            None => Some(0),
            Some(i) if i + 1 < frames.len() => Some(i + 1),
            Some(_) => None,
        };
        let settling_time = settled_from.and_then(|i| frames.get(i)).map(|f| f.t);
        let steady_state_error = settled_from.map(|i| {
            frames[i..]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| {
                    (lo.min(f.error), hi.max(f.error))
                })
        });
        RunSummary {
            settling_time,
            overshoot: frames
                .iter()
                .map(|f| f.sensed - f.setpoint)
                .fold(f64::NEG_INFINITY, f64::max),
            band,
            steady_state_error,
            held_frames: frames.iter().filter(|f| f.held).count(),
        }
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: LoopConfig,
    pub plant: PlantParams,
    pub frames: Vec<TelemetryFrame>,
    pub summary: RunSummary,
}

/// A validated loop that can be stepped sample by sample, with the setpoint
/// adjustable between samples.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    controller: FuzzyController,
    config: LoopConfig,
    plant: Plant,
    setpoint: f64,
    frames: Vec<TelemetryFrame>,
    total: usize,
}

impl ClosedLoop {
    pub fn new(
        controller: FuzzyController,
        plant: PlantParams,
        config: LoopConfig,
    ) -> Result<Self, ControlError> {
        let inputs = controller.rulebase().inputs().len();
        if inputs != 1 {
            return Err(ControlError::ControllerShape(inputs));
        }
        plant.validate()?;
        config.validate(&plant)?;
        Ok(ClosedLoop {
            controller,
            plant: Plant::new(plant, config.initial_temp)?,
            setpoint: config.setpoint,
            total: config.frame_count(),
            frames: Vec::new(),
            config,
        })
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }

    pub fn controller(&self) -> &FuzzyController {
        &self.controller
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn setpoint(&self) -> f64 {
        self.setpoint
    }

    pub fn frames(&self) -> &[TelemetryFrame] {
        &self.frames
    }

    pub fn is_finished(&self) -> bool {
        self.frames.len() >= self.total
    }

    /// Takes effect from the next sample on.
    pub fn set_setpoint(&mut self, value: f64) -> Result<f64, ControlError> {
        self.setpoint = self.config.check_setpoint(value)?;
        Ok(self.setpoint)
    }

    /// Runs one sample. Returns `None` once the configured duration is done.
    pub fn step(&mut self) -> Result<Option<&TelemetryFrame>, ControlError> {
        if self.is_finished() {
            return Ok(None);
        }
        let frame = loop_step(
            &self.controller,
            self.setpoint,
            self.config.sample_period,
            &mut self.plant,
            self.frames.last(),
        )?;
        self.frames.push(frame);
        Ok(self.frames.last())
    }

    /// Stops here and summarises whatever has run so far.
    pub fn finish(self) -> RunRecord {
        let summary = RunSummary::from_frames(&self.frames, self.config.settling_band);
        RunRecord {
            config: self.config,
            plant: *self.plant.params(),
            frames: self.frames,
            summary,
        }
    }

    /// Runs to the configured duration.
    pub fn run(mut self) -> Result<RunRecord, ControlError> {
        while self.step()?.is_some() {}
        Ok(self.finish())
    }
}

/// Validates, then simulates a whole run.
pub fn run(
    controller: FuzzyController,
    plant: PlantParams,
    config: LoopConfig,
) -> Result<RunRecord, ControlError> {
    ClosedLoop::new(controller, plant, config)?.run()
}
