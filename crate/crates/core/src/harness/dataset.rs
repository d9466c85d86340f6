use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rnnpb::{DemoMeta, Demonstration, Sample};
use crate::tendon_sim::{
    sim_step, ArmGeometry, ArmState, DemoControllerState, MuscleParams, MuscleVec, SimConfig,
};

/// Cartesian grid of demonstration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Joint radii (m).
    pub r_values: Vec<f64>,
    /// Style tensions (N).
    pub f_style_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub steps_per_demo: usize,
    pub repeats: usize,
}

impl Default for GridConfig {
    /// The 3 x 3 grid that trains in minutes.
    fn default() -> Self {
        GridConfig {
            r_values: vec![0.03, 0.035, 0.04],
            f_style_values: vec![10.0, 100.0, 200.0],
            beta_values: vec![0.1],
            steps_per_demo: 30,
            repeats: 1,
        }
    }
}

impl GridConfig {
    /// The full 3 x 5 grid with 60-step demonstrations.
    pub fn full() -> Self {
        GridConfig {
            f_style_values: vec![10.0, 50.0, 100.0, 150.0, 200.0],
            steps_per_demo: 60,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_values.is_empty() || self.f_style_values.is_empty() || self.beta_values.is_empty()
        {
            return Err(Error::spec("grid value lists must be non-empty"));
        }
        if self.steps_per_demo < 2 {
            return Err(Error::spec("demonstrations need at least two steps"));
        }
        if self.repeats == 0 {
            return Err(Error::spec("grid repeats must be at least one"));
        }
        Ok(())
    }

    /// Grid cells in id order: r outermost, then f_style, beta and repeat.
    pub fn cells(&self) -> Vec<DemoMeta> {
        let mut out = Vec::new();
        for &r in &self.r_values {
            for &f_style in &self.f_style_values {
                for &beta in &self.beta_values {
                    for _ in 0..self.repeats {
                        out.push(DemoMeta { r, f_style, beta });
                    }
                }
            }
        }
        out
    }
}

/// Arm, muscle, integrator and task settings shared by every run.
/// The geometry's radius is replaced by each run's own `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSetup {
    pub geometry: ArmGeometry,
    pub muscle: MuscleParams,
    pub sim: SimConfig,
    /// Task joint angle (rad).
    pub theta_task: f64,
    /// Initial reference tension of the demonstration controller (N).
    pub f_init: f64,
}

impl Default for SimSetup {
    fn default() -> Self {
        SimSetup {
            geometry: ArmGeometry::default(),
            muscle: MuscleParams::default(),
            sim: SimConfig::default(),
            theta_task: -std::f64::consts::FRAC_PI_2,
            f_init: 0.0,
        }
    }
}

impl SimSetup {
    pub fn geometry_for(&self, r: f64) -> Result<ArmGeometry> {
        let geom = ArmGeometry {
            radius: r,
            ..self.geometry
        };
        geom.validate()?;
        self.muscle.validate()?;
        Ok(geom)
    }

    /// The first recorded sample: arm at rest with slack-free muscles.
    pub fn initial_sample(&self, geom: &ArmGeometry) -> Sample {
        let rest = ArmState::rest(geom);
        observe(&rest, &[0.0; 3], &rest.l_cmd)
    }
}

pub(crate) fn observe(state: &ArmState, f: &MuscleVec, u: &MuscleVec) -> Sample {
    let mut s = Vec::with_capacity(1 + f.len());
    s.push(state.theta);
    s.extend_from_slice(f);
    Sample { s, u: u.to_vec() }
}

/// Records one demonstration: `s_1` is the arm at rest, `u_1` its rest
/// command, and each later pair holds the controller's command and the
/// state the simulator reached under it.
pub fn run_demonstration(meta: &DemoMeta, setup: &SimSetup, steps: usize) -> Result<Vec<Sample>> {
    let geom = setup.geometry_for(meta.r)?;
    let mut ctrl =
        DemoControllerState::new(setup.theta_task, meta.f_style, meta.beta, setup.f_init)?;
    let mut state = ArmState::rest(&geom);
    let mut out = Vec::with_capacity(steps);
    out.push(setup.initial_sample(&geom));
    for _ in 1..steps {
        let (next_ctrl, l_ref) = ctrl.step(state.theta, &geom, &setup.muscle)?;
        let (next_state, f) = sim_step(&state, &l_ref, &setup.sim, &geom, &setup.muscle)?;
        out.push(observe(&next_state, &f, &l_ref));
        ctrl = next_ctrl;
        state = next_state;
    }
    Ok(out)
}

/// One demonstration per grid cell and repeat, ids in cell order.
pub fn generate_dataset(grid: &GridConfig, setup: &SimSetup) -> Result<Vec<Demonstration>> {
    grid.validate()?;
    grid.cells()
        .par_iter()
        .enumerate()
        .map(|(id, meta)| {
            let steps = run_demonstration(meta, setup, grid.steps_per_demo).map_err(|e| {
                let cell = format!(
                    "grid cell r = {}, f_style = {}, beta = {}",
                    meta.r, meta.f_style, meta.beta
                );
                match e {
                    Error::Fault(m) => Error::Fault(format!("{cell}: {m}")),
                    Error::Spec(m) => Error::Spec(format!("{cell}: {m}")),
                    Error::Range(m) => Error::Range(format!("{cell}: {m}")),
                    other => other,
                }
            })?;
            Ok(Demonstration {
                id,
                steps,
                meta: *meta,
            })
        })
        .collect()
}
