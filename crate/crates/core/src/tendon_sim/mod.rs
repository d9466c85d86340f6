//! One-joint arm driven by three tendons with exponential elastic muscles,
//! viscous and Coulomb friction, the analytic static inverse from target
//! joint angle and tension to muscle length, and the feedback controller
//! that produces demonstrations.

mod controller;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use controller::DemoControllerState;

pub const N_MUSCLES: usize = 3;
pub type MuscleVec = [f64; N_MUSCLES];

/// Moment-arm signs: two muscles on one side of the joint, one on the other.
const ARM_SIGNS: MuscleVec = [1.0, -1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmGeometry {
    /// Joint radius, i.e. the magnitude of every moment arm (m).
    pub radius: f64,
    /// Muscle path lengths at zero joint angle (m).
    pub rest_lengths: MuscleVec,
    /// Rotational inertia about the joint (kg m^2).
    pub inertia: f64,
    pub mass: f64,
    /// Joint-to-centre-of-mass distance (m).
    pub com_distance: f64,
    /// Joint damping (N m s / rad).
    pub damping: f64,
    pub gravity: f64,
    /// Valid joint-angle interval for path-length queries (rad).
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        ArmGeometry {
            radius: 0.04,
            rest_lengths: [0.30; N_MUSCLES],
            inertia: 0.05,
            mass: 1.0,
            com_distance: 0.3,
            damping: 0.1,
            gravity: 9.81,
            theta_min: -std::f64::consts::FRAC_PI_2 - 0.2,
            theta_max: 0.2,
        }
    }
}

impl ArmGeometry {
    pub fn with_radius(radius: f64) -> Self {
        ArmGeometry {
            radius,
            ..Default::default()
        }
    }

    pub fn moment_arms(&self) -> MuscleVec {
        ARM_SIGNS.map(|s| s * self.radius)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::spec("joint radius must be positive"));
        }
        if !(self.inertia > 0.0) || self.damping < 0.0 || !(self.theta_min < self.theta_max) {
            return Err(Error::spec("invalid rigid-body parameters"));
        }
        for th in [self.theta_min, self.theta_max] {
            if path_lengths_unchecked(th, self).iter().any(|l| *l <= 0.0) {
                return Err(Error::spec(
                    "muscle paths must stay positive over the operating range",
                ));
            }
        }
        Ok(())
    }

    /// Gravity torque term `m g l_c sin(theta)`; zero angle hangs straight down.
    pub fn gravity_torque(&self, theta: f64) -> f64 {
        self.mass * self.gravity * self.com_distance * theta.sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuscleParams {
    /// Elastic scale `c` (N).
    pub elastic_scale: f64,
    /// Elastic rate `k` (1/m).
    pub elastic_rate: f64,
    /// Viscous friction (N s / m).
    pub viscous: f64,
    /// Coulomb friction (N).
    pub coulomb: f64,
}

impl Default for MuscleParams {
    fn default() -> Self {
        MuscleParams {
            elastic_scale: 20.0,
            elastic_rate: 50.0,
            viscous: 50.0,
            coulomb: 1.0,
        }
    }
}

impl MuscleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.elastic_scale > 0.0 && self.elastic_rate > 0.0) {
            return Err(Error::spec("elastic scale and rate must be positive"));
        }
        if self.viscous < 0.0 || self.coulomb < 0.0 {
            return Err(Error::spec("friction coefficients must be non-negative"));
        }
        Ok(())
    }

    /// Static stretch that produces tension `f`.
    pub fn stretch_for(&self, f: f64) -> f64 {
        (f / self.elastic_scale + 1.0).ln() / self.elastic_rate
    }

    /// Elastic energy stored at stretch `delta`.
    pub fn elastic_energy(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        let (c, k) = (self.elastic_scale, self.elastic_rate);
        c * ((k * delta).exp_m1() / k - delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Control period (s).
    pub dt_ctrl: f64,
    pub substeps: usize,
    /// Maximum speed of the commanded muscle length (m/s).
    pub slew_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_ctrl: 0.2,
            substeps: 20,
            slew_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub theta: f64,
    pub theta_dot: f64,
    /// Current (slewed) muscle length command.
    pub l_cmd: MuscleVec,
    pub t: f64,
}

impl ArmState {
    /// Hanging at rest with every muscle at zero stretch.
    pub fn rest(geom: &ArmGeometry) -> Self {
        ArmState {
            theta: 0.0,
            theta_dot: 0.0,
            l_cmd: path_lengths_unchecked(0.0, geom),
            t: 0.0,
        }
    }

    pub fn stretches(&self, geom: &ArmGeometry) -> MuscleVec {
        let path = path_lengths_unchecked(self.theta, geom);
        std::array::from_fn(|i| path[i] - self.l_cmd[i])
    }

    /// Kinetic + gravitational + elastic energy, with the hanging pose as zero.
    pub fn energy(&self, geom: &ArmGeometry, mp: &MuscleParams) -> f64 {
        let kinetic = 0.5 * geom.inertia * self.theta_dot * self.theta_dot;
        let potential = geom.mass * geom.gravity * geom.com_distance * (1.0 - self.theta.cos());
        let elastic: f64 = self
            .stretches(geom)
            .iter()
            .map(|d| mp.elastic_energy(*d))
            .sum();
        kinetic + potential + elastic
    }
}

pub(crate) fn path_lengths_unchecked(theta: f64, geom: &ArmGeometry) -> MuscleVec {
    let a = geom.moment_arms();
    std::array::from_fn(|i| geom.rest_lengths[i] - a[i] * theta)
}

/// Muscle path lengths `l0_i - a_i theta` inside the operating range.
pub fn path_lengths(theta: f64, geom: &ArmGeometry) -> Result<MuscleVec> {
    if !(geom.theta_min..=geom.theta_max).contains(&theta) {
        return Err(Error::Range(format!(
            "joint angle {theta} rad outside [{}, {}]",
            geom.theta_min, geom.theta_max
        )));
    }
    Ok(path_lengths_unchecked(theta, geom))
}

/// Tension of a single muscle. Slack muscles (`stretch <= 0`) carry no load.
pub fn muscle_tension(stretch: f64, stretch_rate: f64, mp: &MuscleParams) -> f64 {
    if stretch <= 0.0 {
        return 0.0;
    }
    let elastic = mp.elastic_scale * (mp.elastic_rate * stretch).exp_m1();
    let sign = if stretch_rate > 0.0 {
        1.0
    } else if stretch_rate < 0.0 {
        -1.0
    } else {
        0.0
    };
    (elastic + mp.viscous * stretch_rate + mp.coulomb * sign).max(0.0)
}

/// Muscle lengths that realise tensions `f_ref` statically at angle `theta_ref`.
pub fn body_image(
    theta_ref: f64,
    f_ref: &MuscleVec,
    geom: &ArmGeometry,
    mp: &MuscleParams,
) -> Result<MuscleVec> {
    if let Some(f) = f_ref.iter().find(|f| !(**f >= 0.0)) {
        return Err(Error::spec(format!("target tension {f} is negative")));
    }
    let path = path_lengths_unchecked(theta_ref, geom);
    Ok(std::array::from_fn(|i| path[i] - mp.stretch_for(f_ref[i])))
}

fn tensions_at(
    theta: f64,
    theta_dot: f64,
    l_cmd: &MuscleVec,
    l_cmd_rate: &MuscleVec,
    geom: &ArmGeometry,
    mp: &MuscleParams,
) -> MuscleVec {
    let a = geom.moment_arms();
    let path = path_lengths_unchecked(theta, geom);
    std::array::from_fn(|i| {
        let stretch = path[i] - l_cmd[i];
        let rate = -a[i] * theta_dot - l_cmd_rate[i];
        muscle_tension(stretch, rate, mp)
    })
}

/// Advances the arm by one control period under command `l_ref`.
///
/// The command slews toward `l_ref` at the configured rate; dynamics use
/// semi-implicit Euler over `substeps` sub-intervals. Returns the new state
/// and the tensions at the end of the period.
pub fn sim_step(
    state: &ArmState,
    l_ref: &MuscleVec,
    cfg: &SimConfig,
    geom: &ArmGeometry,
    mp: &MuscleParams,
) -> Result<(ArmState, MuscleVec)> {
    if cfg.substeps == 0 || !(cfg.dt_ctrl > 0.0) {
        return Err(Error::spec(
            "control period and substep count must be positive",
        ));
    }
    let dt = cfg.dt_ctrl / cfg.substeps as f64;
    let max_move = cfg.slew_rate * dt;
    let a = geom.moment_arms();
    let mut s = *state;
    let mut l_rate = [0.0; N_MUSCLES];
    for _ in 0..cfg.substeps {
        for i in 0..N_MUSCLES {
            let step = (l_ref[i] - s.l_cmd[i]).clamp(-max_move, max_move);
            s.l_cmd[i] += step;
            l_rate[i] = step / dt;
        }
        let f = tensions_at(s.theta, s.theta_dot, &s.l_cmd, &l_rate, geom, mp);
        let muscle_torque: f64 = a.iter().zip(&f).map(|(a, f)| a * f).sum();
        let accel = (muscle_torque - geom.damping * s.theta_dot - geom.gravity_torque(s.theta))
            / geom.inertia;
        s.theta_dot += dt * accel;
        s.theta += dt * s.theta_dot;
    }
    s.t = state.t + cfg.dt_ctrl;
    if !(s.theta.is_finite() && s.theta_dot.is_finite()) {
        return Err(Error::Fault(format!(
            "non-finite arm state at t = {:.3} s",
            s.t
        )));
    }
    let f = tensions_at(s.theta, s.theta_dot, &s.l_cmd, &l_rate, geom, mp);
    Ok((s, f))
}
