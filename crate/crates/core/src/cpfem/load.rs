use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    Tension,
    Shear,
    Cyclic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputQuantity {
    VonMises,
    SigmaY,
}

fn default_cycles() -> f64 {
    1.5
}

/// Displacement-controlled load history and output sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadCase {
    pub kind: LoadKind,
    /// Peak engineering strain (shear: engineering shear strain).
    pub magnitude: f64,
    pub step_time: f64,
    pub n_output_steps: usize,
    #[serde(default = "default_cycles")]
    pub n_cycles: f64,
    pub output_quantity: OutputQuantity,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl LoadCase {
    fn ramp(kind: LoadKind, magnitude: f64) -> Self {
        LoadCase {
            kind,
            magnitude,
            step_time: 1.0,
            n_output_steps: 50,
            n_cycles: default_cycles(),
            output_quantity: OutputQuantity::VonMises,
            dt_min: 2e-3,
            dt_max: 1e-2,
        }
    }

    pub fn tension(magnitude: f64) -> Self {
        Self::ramp(LoadKind::Tension, magnitude)
    }

    pub fn shear(magnitude: f64) -> Self {
        Self::ramp(LoadKind::Shear, magnitude)
    }

    /// Fully reversed sine over 1.5 cycles in 3 s, σ_y sampled at 240 steps.
    pub fn cyclic(magnitude: f64) -> Self {
        LoadCase {
            step_time: 3.0,
            n_output_steps: 240,
            output_quantity: OutputQuantity::SigmaY,
            ..Self::ramp(LoadKind::Cyclic, magnitude)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude > 0.0 && self.magnitude.is_finite()) {
            return arg("load magnitude must be positive");
        }
        if !(self.step_time > 0.0 && self.step_time.is_finite()) {
            return arg("step time must be positive");
        }
        if self.n_output_steps == 0 {
            return arg("need at least one output step");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return arg("require 0 < dt_min <= dt_max");
        }
        if self.kind == LoadKind::Cyclic {
            if self.output_quantity != OutputQuantity::SigmaY {
                return arg("cyclic loading records sigma_y");
            }
            if !(self.n_cycles > 0.0) {
                return arg("cyclic loading needs a positive cycle count");
            }
        }
        Ok(())
    }

    /// Applied engineering strain at time t.
    pub fn applied_strain(&self, t: f64) -> f64 {
        match self.kind {
            LoadKind::Tension | LoadKind::Shear => self.magnitude * t / self.step_time,
            LoadKind::Cyclic => {
                let period = self.step_time / self.n_cycles;
                self.magnitude * (2.0 * std::f64::consts::PI * t / period).sin()
            }
        }
    }

    /// Uniform output times t_k = k·T/n, k = 1..n.
    pub fn output_times(&self) -> Vec<f64> {
        let n = self.n_output_steps;
        (1..=n).map(|k| k as f64 * self.step_time / n as f64).collect()
    }
}
