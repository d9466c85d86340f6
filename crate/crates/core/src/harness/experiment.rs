use serde::{Deserialize, Serialize};

use super::dataset::{observe, SimSetup};
use super::pca::{pca_project, PcaResult};
use crate::error::{Error, Result};
use crate::rnnpb::{
    adapt_pb, AdaptVariant, ConstraintKind, OnlineAdapter, OnlineConfig, RnnpbModel, Sample,
    VariantName,
};
use crate::tendon_sim::{sim_step, ArmState, N_MUSCLES};

/// Per-step task error and tension magnitude of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricTrace {
    pub label: String,
    pub r: f64,
    pub p: Vec<f64>,
    /// `|theta_task - theta_t|` (rad).
    pub theta_error: Vec<f64>,
    /// `||f_t||` (N).
    pub tension_norm: Vec<f64>,
    /// Observed `(s_t, u_t)` pairs.
    pub samples: Vec<Sample>,
}

impl MetricTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_tension(&self) -> f64 {
        self.tension_norm.iter().sum::<f64>() / self.tension_norm.len().max(1) as f64
    }

    pub fn final_theta_error(&self) -> f64 {
        self.theta_error.last().copied().unwrap_or(f64::NAN)
    }

    fn record(&mut self, sample: Sample, theta_task: f64) {
        self.theta_error.push((theta_task - sample.s[0]).abs());
        let f = &sample.s[1..1 + N_MUSCLES];
        self.tension_norm
            .push(f.iter().map(|v| v * v).sum::<f64>().sqrt());
        self.samples.push(sample);
    }
}

/// Closed-loop driver shared by the fixed-`p` and online runs: the model
/// predicts the next command from the latest observation, the simulator
/// executes it and the result becomes the next observation.
struct ClosedLoop<'a> {
    model: &'a RnnpbModel,
    setup: &'a SimSetup,
    geom: crate::tendon_sim::ArmGeometry,
    arm: ArmState,
    net_state: crate::seqcore::RecurrentState,
    obs: Sample,
}

impl<'a> ClosedLoop<'a> {
    fn new(model: &'a RnnpbModel, setup: &'a SimSetup, r: f64) -> Result<Self> {
        if model.layout.s_dim() != 1 + N_MUSCLES || model.layout.u_dim() != N_MUSCLES {
            return Err(Error::spec("closed-loop runs need the tendon-arm layout"));
        }
        let geom = setup.geometry_for(r)?;
        Ok(ClosedLoop {
            model,
            setup,
            arm: ArmState::rest(&geom),
            obs: setup.initial_sample(&geom),
            geom,
            net_state: model.zero_state(),
        })
    }

    fn advance(&mut self, p: &[f64]) -> Result<()> {
        let (_, u_pred, next) = self
            .model
            .step(&self.obs.s, &self.obs.u, p, &self.net_state)?;
        let cmd: [f64; N_MUSCLES] = std::array::from_fn(|i| u_pred[i]);
        let (arm, f) = sim_step(
            &self.arm,
            &cmd,
            &self.setup.sim,
            &self.geom,
            &self.setup.muscle,
        )?;
        self.arm = arm;
        self.net_state = next;
        self.obs = observe(&arm, &f, &cmd);
        Ok(())
    }
}

/// Runs the model in closed loop with the simulator for `steps` observations,
/// holding `p` fixed.
pub fn evaluate_rollout(
    model: &RnnpbModel,
    p: &[f64],
    setup: &SimSetup,
    r: f64,
    steps: usize,
    label: &str,
) -> Result<MetricTrace> {
    let mut lp = ClosedLoop::new(model, setup, r)?;
    let mut trace = MetricTrace {
        label: label.to_string(),
        r,
        p: p.to_vec(),
        theta_error: Vec::with_capacity(steps),
        tension_norm: Vec::with_capacity(steps),
        samples: Vec::with_capacity(steps),
    };
    for t in 0..steps {
        trace.record(lp.obs.clone(), setup.theta_task);
        if t + 1 < steps {
            lp.advance(p)?;
        }
    }
    Ok(trace)
}

/// Settings of an offline adaptation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariantExperimentConfig {
    /// Joint radius of the arm the model is deployed on (m).
    pub r: f64,
    /// Closed-loop length, also the rollout length of constraint-only variants.
    pub steps: usize,
    /// Quantity the style constraint acts on.
    pub constraint: ConstraintKind,
    /// Constraint weight magnitude; the variant decides its sign.
    pub alpha: f64,
    /// Optimizer settings shared by every variant.
    pub base: AdaptVariant,
}

impl Default for VariantExperimentConfig {
    fn default() -> Self {
        VariantExperimentConfig {
            r: 0.04,
            steps: 30,
            constraint: ConstraintKind::Tension,
            alpha: 0.1,
            base: AdaptVariant::default(),
        }
    }
}

impl VariantExperimentConfig {
    pub fn variant(&self, name: VariantName) -> AdaptVariant {
        let base = AdaptVariant {
            horizon: self.steps,
            ..self.base.clone()
        };
        AdaptVariant::named(name, &[(self.constraint, self.alpha)], &base)
    }
}

/// PB vectors projected onto the principal axes of the trained PB table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PbOverlay {
    pub pca: PcaResult,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub variant: String,
    pub p_before: Vec<f64>,
    pub p_after: Vec<f64>,
    pub loss_trace: Vec<f64>,
    /// Matching loss of the collected data at `p_before` and `p_after`.
    pub matching_before: f64,
    pub matching_after: f64,
    pub trace_before: MetricTrace,
    pub trace_after: MetricTrace,
    pub overlay: Option<PbOverlay>,
}

/// Principal axes of the trained PB table, when it has enough spread.
pub fn pb_table_pca(model: &RnnpbModel) -> Option<PcaResult> {
    let pts: Vec<Vec<f64>> = model.pb_table.iter().map(|e| e.p.clone()).collect();
    let out_dim = model.layout.p_dim.min(2);
    pca_project(&pts, out_dim).ok()
}

/// Runs the arm with `p = 0`, adapts `p` on the collected data with the
/// named variant, and runs again with the adapted `p`.
pub fn run_variant_experiment(
    model: &RnnpbModel,
    name: VariantName,
    cfg: &VariantExperimentConfig,
    setup: &SimSetup,
) -> Result<VariantReport> {
    let variant = cfg.variant(name);
    let p0 = model.zero_pb();
    let before = evaluate_rollout(model, &p0, setup, cfg.r, cfg.steps, "before")?;
    let res = adapt_pb(model, &before.samples, &variant, &p0)?;
    let after = evaluate_rollout(model, &res.p, setup, cfg.r, cfg.steps, "after")?;
    let overlay = pb_table_pca(model).map(|pca| PbOverlay {
        before: pca.project(&p0),
        after: pca.project(&res.p),
        pca,
    });
    Ok(VariantReport {
        variant: name.to_string(),
        matching_before: model.matching_loss(&before.samples, &p0)?,
        matching_after: model.matching_loss(&before.samples, &res.p)?,
        p_before: p0,
        p_after: res.p,
        loss_trace: res.loss_trace,
        trace_before: before,
        trace_after: after,
        overlay,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PbUpdate {
    /// Number of observations pushed when the update ran.
    pub step: usize,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnlineReport {
    pub variant: String,
    pub p_trajectory: Vec<PbUpdate>,
    pub trace: MetricTrace,
}

/// Closed-loop run in which every observation is pushed to an online
/// adapter and the command of the next step uses the latest `p`.
pub fn run_online_experiment(
    model: &RnnpbModel,
    label: &str,
    variant: &AdaptVariant,
    online: OnlineConfig,
    setup: &SimSetup,
    r: f64,
    steps: usize,
) -> Result<OnlineReport> {
    let p0 = model.zero_pb();
    let mut adapter = OnlineAdapter::new(model, variant, online, &p0)?;
    let mut lp = ClosedLoop::new(model, setup, r)?;
    let mut trace = MetricTrace {
        label: label.to_string(),
        r,
        p: p0,
        theta_error: Vec::with_capacity(steps),
        tension_norm: Vec::with_capacity(steps),
        samples: Vec::with_capacity(steps),
    };
    let mut p_trajectory = Vec::new();
    for t in 0..steps {
        trace.record(lp.obs.clone(), setup.theta_task);
        if let Some(p) = adapter.push(lp.obs.clone())? {
            p_trajectory.push(PbUpdate { step: t + 1, p });
        }
        if t + 1 < steps {
            lp.advance(adapter.p())?;
        }
    }
    trace.p = adapter.p().to_vec();
    Ok(OnlineReport {
        variant: label.to_string(),
        p_trajectory,
        trace,
    })
}
