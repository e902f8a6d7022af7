//! Duty-cycle arithmetic and square-wave synthesis.

use alloc::vec::Vec;

/// Full-scale 8-bit PWM level.
pub const FULL_SCALE: f64 = 255.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PwmError {
    #[error("duty {0} is outside [0, 1]")]
    Duty(f64),
    #[error("period {0} s must be positive and finite")]
    Period(f64),
    #[error("resolution must be at least one slot")]
    Resolution,
    #[error("cannot measure the duty of an empty waveform")]
    EmptyWave,
}

/// One PWM period: ON for `duty·period`, OFF for the rest, sampled into
/// `resolution` slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwmCommand {
    duty: f64,
    period: f64,
    resolution: usize,
}

impl PwmCommand {
    pub fn new(duty: f64, period: f64, resolution: usize) -> Result<Self, PwmError> {
        if !(0.0..=1.0).contains(&duty) {
            return Err(PwmError::Duty(duty));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(PwmError::Period(period));
        }
        if resolution == 0 {
            return Err(PwmError::Resolution);
        }
        Ok(PwmCommand {
            duty,
            period,
            resolution,
        })
    }

    pub fn duty(&self) -> f64 {
        self.duty
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// T_ON in seconds.
    pub fn on_time(&self) -> f64 {
        self.duty * self.period
    }

    /// Number of ON slots: `duty·resolution` rounded half-up.
    pub fn on_slots(&self) -> usize {
        let slots = libm::floor(self.duty * self.resolution as f64 + 0.5) as usize;
        slots.min(self.resolution)
    }
}

/// Duty fraction for an 8-bit level, clamping to `[0, 255]` first.
pub fn duty_from_level(level: f64) -> f64 {
    if level.is_nan() {
        return 0.0;
    }
    level.clamp(0.0, FULL_SCALE) / FULL_SCALE
}

/// Leading-edge aligned wave: all ON slots first, then OFF.
pub fn synthesize(cmd: &PwmCommand) -> Vec<bool> {
    let on = cmd.on_slots();
    (0..cmd.resolution).map(|i| i < on).collect()
}

/// ON fraction of a sampled wave.
pub fn measure_duty(wave: &[bool]) -> Result<f64, PwmError> {
    if wave.is_empty() {
        return Err(PwmError::EmptyWave);
    }
    let on = wave.iter().filter(|&&s| s).count();
    Ok(on as f64 / wave.len() as f64)
}
