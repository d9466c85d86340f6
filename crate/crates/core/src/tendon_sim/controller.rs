use serde::{Deserialize, Serialize};

use super::{body_image, ArmGeometry, MuscleParams, MuscleVec, N_MUSCLES};
use crate::error::{Error, Result};

/// Feedback controller used to record demonstrations.
///
/// Each tick moves the reference angle by `beta` times the remaining task
/// error and the reference tension by `beta` times its distance to the style
/// tension, then converts both to muscle lengths through the body image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoControllerState {
    pub theta_ref: f64,
    pub f_ref: MuscleVec,
    pub theta_task: f64,
    /// Target tension shared by all muscles.
    pub f_style: f64,
    pub beta: f64,
}

impl DemoControllerState {
    pub fn new(theta_task: f64, f_style: f64, beta: f64, f_init: f64) -> Result<Self> {
        let ctrl = DemoControllerState {
            theta_ref: 0.0,
            f_ref: [f_init; N_MUSCLES],
            theta_task,
            f_style,
            beta,
        };
        ctrl.validate()?;
        Ok(ctrl)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::spec(format!(
                "feedback gain {} not in (0, 1]",
                self.beta
            )));
        }
        if !(self.f_style >= 0.0) || self.f_ref.iter().any(|f| !(*f >= 0.0)) {
            return Err(Error::spec("controller tensions must be non-negative"));
        }
        Ok(())
    }

    /// Applies both update laws for measured angle `theta_meas` and returns
    /// the updated controller with its muscle-length command.
    pub fn step(
        &self,
        theta_meas: f64,
        geom: &ArmGeometry,
        mp: &MuscleParams,
    ) -> Result<(Self, MuscleVec)> {
        let mut next = *self;
        next.theta_ref += self.beta * (self.theta_task - theta_meas);
        for f in next.f_ref.iter_mut() {
            *f += self.beta * (self.f_style - *f);
        }
        let l_ref = body_image(next.theta_ref, &next.f_ref, geom, mp)?;
        Ok((next, l_ref))
    }
}
