//! Lumped-capacitance model of the heater coil, iron plate and fan, plus a
//! noisy quantizing temperature sensor.
//!
//! ```text
//! C·dT/dt = P_max·u_h − (k_loss + k_fan·u_f)·(T − T_amb)
//! ```
//!
//! integrated with explicit Euler.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlantError {
    #[error("invalid plant parameter `{field}`: {reason}")]
    InvalidParam {
        field: &'static str,
        reason: &'static str,
    },
    #[error("{which} duty {value} is outside [0, 1]")]
    InvalidDuty { which: &'static str, value: f64 },
    #[error("time step {dt} s is outside (0, {limit}) s required for stable integration")]
    InvalidStep { dt: f64, limit: f64 },
    #[error("total loss coefficient is zero; the plate has no equilibrium")]
    NoEquilibrium,
    #[error("initial temperature {0} is not finite")]
    InvalidTemperature(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Heat capacity, J/°C.
    pub capacitance: f64,
    /// Heater power at full duty, W.
    pub heater_power: f64,
    /// Passive loss to ambient, W/°C.
    pub loss_coeff: f64,
    /// Extra loss with the fan at full duty, W/°C.
    pub fan_coeff: f64,
    /// °C
    pub ambient: f64,
    /// Standard deviation of sensor noise, °C.
    pub sensor_noise_std: f64,
    pub adc_bits: u32,
    /// Temperature span mapped onto the ADC codes, °C.
    pub adc_range: (f64, f64),
    pub seed: u64,
}

impl Default for PlantParams {
    /// 500 J/°C plate, 240 W heater, 2 W/°C passive loss, 8 W/°C fan loss,
    /// 25 °C ambient, noiseless 10-bit sensor over [0, 150] °C. At 50/50
    /// actuation the plate settles at exactly 45 °C.
    fn default() -> Self {
        PlantParams {
            capacitance: 500.0,
            heater_power: 240.0,
            loss_coeff: 2.0,
            fan_coeff: 8.0,
            ambient: 25.0,
            sensor_noise_std: 0.0,
            adc_bits: 10,
            adc_range: (0.0, 150.0),
            seed: 0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let bad = |field, reason| Err(PlantError::InvalidParam { field, reason });
        let finite = [
            self.capacitance,
            self.heater_power,
            self.loss_coeff,
            self.fan_coeff,
            self.ambient,
            self.sensor_noise_std,
            self.adc_range.0,
            self.adc_range.1,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("*", "all parameters must be finite");
        }
        if self.capacitance <= 0.0 {
            return bad("capacitance", "must be positive");
        }
        if self.heater_power <= 0.0 {
            return bad("heater_power", "must be positive");
        }
        if self.loss_coeff < 0.0 {
            return bad("loss_coeff", "must be nonnegative");
        }
        if self.fan_coeff < 0.0 {
            return bad("fan_coeff", "must be nonnegative");
        }
        if self.sensor_noise_std < 0.0 {
            return bad("sensor_noise_std", "must be nonnegative");
        }
        if !(1..=16).contains(&self.adc_bits) {
            return bad("adc_bits", "must be between 1 and 16");
        }
        if self.adc_range.0 >= self.adc_range.1 {
            return bad("adc_range", "lower bound must be below upper bound");
        }
        Ok(())
    }

    /// Largest stable Euler step, `2C / (k_loss + k_fan)`.
    pub fn max_stable_step(&self) -> f64 {
        let k = self.loss_coeff + self.fan_coeff;
        if k > 0.0 {
            2.0 * self.capacitance / k
        } else {
            f64::INFINITY
        }
    }

    /// Temperature change per second at the given state and duties.
    pub fn rate(&self, temp: f64, heater_duty: f64, fan_duty: f64) -> f64 {
        (self.heat_in(heater_duty) - self.heat_out(temp, fan_duty)) / self.capacitance
    }

    /// Heater power, W.
    pub fn heat_in(&self, heater_duty: f64) -> f64 {
        self.heater_power * heater_duty
    }

    /// Loss to ambient, W.
    pub fn heat_out(&self, temp: f64, fan_duty: f64) -> f64 {
        (self.loss_coeff + self.fan_coeff * fan_duty) * (temp - self.ambient)
    }

    /// ADC step, °C per code.
    pub fn adc_quantum(&self) -> f64 {
        (self.adc_range.1 - self.adc_range.0) / ((1u32 << self.adc_bits) - 1) as f64
    }

    /// Rounds to the nearest ADC code and clamps to the ADC range.
    pub fn quantize(&self, temp: f64) -> f64 {
        let q = self.adc_quantum();
        let max_code = ((1u32 << self.adc_bits) - 1) as f64;
        let code = libm::round((temp - self.adc_range.0) / q).clamp(0.0, max_code);
        self.adc_range.0 + code * q
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub plate_temp: f64,
    pub time: f64,
}

fn check_duty(which: &'static str, value: f64) -> Result<(), PlantError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(PlantError::InvalidDuty { which, value })
    }
}

/// One explicit Euler step of length `dt`.
pub fn step(
    params: &PlantParams,
    state: PlantState,
    heater_duty: f64,
    fan_duty: f64,
    dt: f64,
) -> Result<PlantState, PlantError> {
    check_duty("heater", heater_duty)?;
    check_duty("fan", fan_duty)?;
    let limit = params.max_stable_step();
    if !(dt > 0.0 && dt < limit) {
        return Err(PlantError::InvalidStep { dt, limit });
    }
    Ok(PlantState {
        plate_temp: state.plate_temp + dt * params.rate(state.plate_temp, heater_duty, fan_duty),
        time: state.time + dt,
    })
}

/// Fixed point of the plant ODE for constant duties.
pub fn equilibrium_temp(
    params: &PlantParams,
    heater_duty: f64,
    fan_duty: f64,
) -> Result<f64, PlantError> {
    check_duty("heater", heater_duty)?;
    check_duty("fan", fan_duty)?;
    let k = params.loss_coeff + params.fan_coeff * fan_duty;
    if k <= 0.0 {
        return Err(PlantError::NoEquilibrium);
    }
    Ok(params.ambient + params.heater_power * heater_duty / k)
}

/// A simulated rig: parameters, current state and the sensor noise generator.
#[derive(Debug, Clone)]
pub struct Plant {
    params: PlantParams,
    state: PlantState,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl Plant {
    pub fn new(params: PlantParams, initial_temp: f64) -> Result<Self, PlantError> {
        params.validate()?;
        if !initial_temp.is_finite() {
            return Err(PlantError::InvalidTemperature(initial_temp));
        }
        let noise = (params.sensor_noise_std > 0.0)
            .then(|| Normal::new(0.0, params.sensor_noise_std).expect("validated std"));
        Ok(Plant {
            params,
            state: PlantState {
                plate_temp: initial_temp,
                time: 0.0,
            },
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            noise,
        })
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn state(&self) -> PlantState {
        self.state
    }

    pub fn step(
        &mut self,
        heater_duty: f64,
        fan_duty: f64,
        dt: f64,
    ) -> Result<PlantState, PlantError> {
        self.state = step(&self.params, self.state, heater_duty, fan_duty, dt)?;
        Ok(self.state)
    }

    /// Plate temperature plus Gaussian noise, quantized to the ADC grid.
    pub fn read_sensor(&mut self) -> f64 {
        let noise = self.noise.map_or(0.0, |n| n.sample(&mut self.rng));
        self.params.quantize(self.state.plate_temp + noise)
    }
}
