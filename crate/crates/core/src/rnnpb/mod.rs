//! Recurrent network with parametric bias: `(s_{t+1}, u_{t+1}) = h(s_t, u_t, p)`.
//!
//! The network sees the concatenation `[s, u, p]` of normalized sensor and
//! command vectors plus the PB vector, and predicts the next `[s, u]`.
//! Everything outside this module works in physical units; normalization
//! happens at the model boundary.

mod adapt;
mod constraint;
mod fit;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::NormStats;
use crate::seqcore::{Network, RecurrentState, StepCache};

pub use adapt::{
    adapt_pb, adaptation_loss, adaptation_loss_and_grad, AdaptResult, AdaptVariant, OnlineAdapter,
    OnlineConfig, VariantName,
};
pub use constraint::{constraint_loss, ConstraintKind, ConstraintSpec};
pub use fit::{fit, FitReport, TrainConfig};

/// A named slice of the sensor or command vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub width: usize,
}

impl Channel {
    pub fn new(name: &str, width: usize) -> Self {
        Channel {
            name: name.to_string(),
            width,
        }
    }
}

/// Which part of `x = [s, u]` a channel lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Sensor,
    Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub s: Vec<Channel>,
    pub u: Vec<Channel>,
    pub p_dim: usize,
}

pub const THETA: &str = "theta";
pub const TENSION: &str = "tension";
pub const MUSCLE_LENGTH_CMD: &str = "muscle_length_cmd";

impl StateLayout {
    pub fn new(s: Vec<Channel>, u: Vec<Channel>, p_dim: usize) -> Result<Self> {
        let layout = StateLayout { s, u, p_dim };
        layout.validate()?;
        Ok(layout)
    }

    /// Joint angle and three tensions as sensors, three muscle-length commands.
    pub fn tendon_arm(p_dim: usize) -> Self {
        StateLayout {
            s: vec![Channel::new(THETA, 1), Channel::new(TENSION, 3)],
            u: vec![Channel::new(MUSCLE_LENGTH_CMD, 3)],
            p_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_dim() + self.u_dim() == 0 {
            return Err(Error::spec("layout has no sensor or command channels"));
        }
        if self.s.iter().chain(&self.u).any(|c| c.width == 0) {
            return Err(Error::spec("channel widths must be positive"));
        }
        let mut names: Vec<&str> = self
            .s
            .iter()
            .chain(&self.u)
            .map(|c| c.name.as_str())
            .collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::spec("channel names must be unique"));
        }
        Ok(())
    }

    pub fn s_dim(&self) -> usize {
        self.s.iter().map(|c| c.width).sum()
    }

    pub fn u_dim(&self) -> usize {
        self.u.iter().map(|c| c.width).sum()
    }

    pub fn x_dim(&self) -> usize {
        self.s_dim() + self.u_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.x_dim() + self.p_dim
    }

    /// Location of a channel inside `x = [s, u]`.
    pub fn channel(&self, name: &str) -> Option<(Part, std::ops::Range<usize>)> {
        let mut start = 0;
        for (part, list) in [(Part::Sensor, &self.s), (Part::Command, &self.u)] {
            for c in list {
                if c.name == name {
                    return Some((part, start..start + c.width));
                }
                start += c.width;
            }
        }
        None
    }

    pub fn check_sample(&self, sample: &Sample) -> Result<()> {
        if sample.s.len() != self.s_dim() || sample.u.len() != self.u_dim() {
            return Err(Error::spec(format!(
                "sample widths ({}, {}) do not match layout ({}, {})",
                sample.s.len(),
                sample.u.len(),
                self.s_dim(),
                self.u_dim()
            )));
        }
        Ok(())
    }
}

/// One time step of sensor state and control command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub s: Vec<f64>,
    pub u: Vec<f64>,
}

impl Sample {
    pub fn concat(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.s.len() + self.u.len());
        x.extend_from_slice(&self.s);
        x.extend_from_slice(&self.u);
        x
    }

    pub fn split(x: &[f64], s_dim: usize) -> Self {
        Sample {
            s: x[..s_dim].to_vec(),
            u: x[s_dim..].to_vec(),
        }
    }
}

/// Ground-truth configuration and style of a demonstration, used for probing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoMeta {
    /// Joint radius (m).
    pub r: f64,
    /// Style tension (N).
    pub f_style: f64,
    /// Feedback gain.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub id: usize,
    pub steps: Vec<Sample>,
    pub meta: DemoMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbEntry {
    pub id: usize,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnpbModel {
    pub layout: StateLayout,
    pub net: Network,
    pub pb_table: Vec<PbEntry>,
    pub norm: NormStats,
}

/// Forward caches of a normalized rollout.
pub(crate) struct Tape {
    pub caches: Vec<StepCache>,
    /// Normalized network outputs, one per step.
    pub outputs: Vec<Vec<f64>>,
}

impl RnnpbModel {
    pub fn new(
        layout: StateLayout,
        net: Network,
        pb_table: Vec<PbEntry>,
        norm: NormStats,
    ) -> Result<Self> {
        layout.validate()?;
        if net.input_width() != layout.input_dim() || net.output_width() != layout.x_dim() {
            return Err(Error::spec(format!(
                "network maps {} -> {}, layout needs {} -> {}",
                net.input_width(),
                net.output_width(),
                layout.input_dim(),
                layout.x_dim()
            )));
        }
        if norm.dim() != layout.x_dim() {
            return Err(Error::spec("normalization width does not match layout"));
        }
        if pb_table.iter().any(|e| e.p.len() != layout.p_dim) {
            return Err(Error::spec("PB entry width does not match layout"));
        }
        Ok(RnnpbModel {
            layout,
            net,
            pb_table,
            norm,
        })
    }

    pub fn pb(&self, id: usize) -> Option<&[f64]> {
        self.pb_table
            .iter()
            .find(|e| e.id == id)
            .map(|e| e.p.as_slice())
    }

    pub fn zero_pb(&self) -> Vec<f64> {
        vec![0.0; self.layout.p_dim]
    }

    pub fn zero_state(&self) -> RecurrentState {
        self.net.zero_state()
    }

    fn check_p(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.layout.p_dim {
            return Err(Error::spec(format!(
                "PB has width {}, layout expects {}",
                p.len(),
                self.layout.p_dim
            )));
        }
        Ok(())
    }

    pub(crate) fn normalize(&self, sample: &Sample) -> Result<Vec<f64>> {
        self.layout.check_sample(sample)?;
        Ok(self.norm.apply(&sample.concat()))
    }

    fn net_input(x_norm: &[f64], p: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(x_norm.len() + p.len());
        v.extend_from_slice(x_norm);
        v.extend_from_slice(p);
        v
    }

    /// One prediction in physical units. `state` is threaded by the caller.
    pub fn step(
        &self,
        s: &[f64],
        u: &[f64],
        p: &[f64],
        state: &RecurrentState,
    ) -> Result<(Vec<f64>, Vec<f64>, RecurrentState)> {
        self.check_p(p)?;
        let x = self.normalize(&Sample {
            s: s.to_vec(),
            u: u.to_vec(),
        })?;
        let (y, next) = self.net.forward_step(&Self::net_input(&x, p), state)?;
        let pred = Sample::split(&self.norm.invert(&y), self.layout.s_dim());
        Ok((pred.s, pred.u, next))
    }

    /// Teacher-forced pass in normalized space: feeds `xs[0..T-1]`.
    pub(crate) fn teacher_forced_tape(&self, xs: &[Vec<f64>], p: &[f64]) -> Result<Tape> {
        let mut state = self.net.zero_state();
        let mut tape = Tape {
            caches: Vec::with_capacity(xs.len()),
            outputs: Vec::with_capacity(xs.len()),
        };
        for x in &xs[..xs.len() - 1] {
            let (y, next, cache) = self
                .net
                .forward_step_cached(&Self::net_input(x, p), &state)?;
            tape.caches.push(cache);
            tape.outputs.push(y);
            state = next;
        }
        Ok(tape)
    }

    /// Autoregressive pass in normalized space seeded with `x1`, `len` outputs.
    pub(crate) fn rollout_tape(&self, x1: &[f64], p: &[f64], len: usize) -> Result<Tape> {
        let mut state = self.net.zero_state();
        let mut tape = Tape {
            caches: Vec::with_capacity(len),
            outputs: Vec::with_capacity(len),
        };
        let mut x = x1.to_vec();
        for _ in 0..len {
            let (y, next, cache) = self
                .net
                .forward_step_cached(&Self::net_input(&x, p), &state)?;
            tape.caches.push(cache);
            x.clone_from(&y);
            tape.outputs.push(y);
            state = next;
        }
        Ok(tape)
    }

    /// Predicted sensor states for steps `2..=T`, feeding the measured
    /// `(s_t, u_t)` at every step.
    pub fn teacher_forced_prediction(&self, steps: &[Sample], p: &[f64]) -> Result<Vec<Vec<f64>>> {
        if steps.len() < 2 {
            return Err(Error::spec("teacher forcing needs at least two steps"));
        }
        self.check_p(p)?;
        let xs = steps
            .iter()
            .map(|s| self.normalize(s))
            .collect::<Result<Vec<_>>>()?;
        let tape = self.teacher_forced_tape(&xs, p)?;
        let s_dim = self.layout.s_dim();
        Ok(tape
            .outputs
            .iter()
            .map(|y| self.norm.invert(y)[..s_dim].to_vec())
            .collect())
    }

    /// Matching error `||s_data(2:T) - s_pred(2:T)||` (Frobenius, normalized space).
    pub fn matching_loss(&self, steps: &[Sample], p: &[f64]) -> Result<f64> {
        let pred = self.teacher_forced_prediction(steps, p)?;
        let s_dim = self.layout.s_dim();
        let mut sq = 0.0;
        for (sample, s_pred) in steps[1..].iter().zip(&pred) {
            let zd = self.norm.apply_prefix(&sample.s);
            let zp = self.norm.apply_prefix(s_pred);
            sq += zd[..s_dim]
                .iter()
                .zip(&zp[..s_dim])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        Ok(sq.sqrt())
    }

    /// One-step prediction MSE on the sensor channels (normalized space).
    pub fn one_step_mse(&self, steps: &[Sample], p: &[f64]) -> Result<f64> {
        let m = self.matching_loss(steps, p)?;
        Ok(m * m / ((steps.len() - 1) * self.layout.s_dim()) as f64)
    }

    /// Autoregressive rollout: only `(s_1, u_1)` is measured and every later
    /// input is the previous prediction. Returns predictions for steps `2..=T`.
    pub fn autoregressive_rollout(
        &self,
        s1: &[f64],
        u1: &[f64],
        p: &[f64],
        horizon: usize,
    ) -> Result<Vec<Sample>> {
        if horizon < 2 {
            return Err(Error::spec("rollout horizon must be at least two steps"));
        }
        self.check_p(p)?;
        let x1 = self.normalize(&Sample {
            s: s1.to_vec(),
            u: u1.to_vec(),
        })?;
        let tape = self.rollout_tape(&x1, p, horizon - 1)?;
        Ok(tape
            .outputs
            .iter()
            .map(|y| Sample::split(&self.norm.invert(y), self.layout.s_dim()))
            .collect())
    }
}
