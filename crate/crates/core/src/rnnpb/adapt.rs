use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::constraint::constraint_value_and_grad;
use super::{ConstraintKind, ConstraintSpec, RnnpbModel, Sample};
use crate::error::{Error, Result};
use crate::seqcore::OptState;

/// How the PB vector is re-estimated with the network weights frozen.
///
/// With `use_matching_term` the loss contains the teacher-forced prediction
/// error on the observed sensor sequence; each constraint adds its weighted
/// value on the autoregressive rollout seeded with the first observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptVariant {
    pub use_matching_term: bool,
    pub constraints: Vec<ConstraintSpec>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub momentum: f64,
    /// Rollout length when only constraints are used.
    pub horizon: usize,
    /// Per-component bound applied to `p` after every update.
    pub p_clamp: f64,
}

impl Default for AdaptVariant {
    fn default() -> Self {
        AdaptVariant {
            use_matching_term: true,
            constraints: Vec::new(),
            learning_rate: 0.01,
            epochs: 30,
            momentum: 0.9,
            horizon: 60,
            p_clamp: 3.0,
        }
    }
}

/// The five named combinations of matching term and min/max constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantName {
    #[serde(rename = "A")]
    A,
    #[serde(rename = "B-min")]
    BMin,
    #[serde(rename = "B-max")]
    BMax,
    #[serde(rename = "AB-min")]
    AbMin,
    #[serde(rename = "AB-max")]
    AbMax,
}

impl VariantName {
    pub const ALL: [VariantName; 5] = [
        VariantName::A,
        VariantName::BMin,
        VariantName::BMax,
        VariantName::AbMin,
        VariantName::AbMax,
    ];

    pub fn uses_matching(self) -> bool {
        matches!(
            self,
            VariantName::A | VariantName::AbMin | VariantName::AbMax
        )
    }

    /// +1 to minimize, -1 to maximize, 0 when no constraint is used.
    pub fn constraint_sign(self) -> f64 {
        match self {
            VariantName::A => 0.0,
            VariantName::BMin | VariantName::AbMin => 1.0,
            VariantName::BMax | VariantName::AbMax => -1.0,
        }
    }
}

impl fmt::Display for VariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantName::A => "A",
            VariantName::BMin => "B-min",
            VariantName::BMax => "B-max",
            VariantName::AbMin => "AB-min",
            VariantName::AbMax => "AB-max",
        })
    }
}

impl FromStr for VariantName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "A" => VariantName::A,
            "B-min" | "B-minimize" => VariantName::BMin,
            "B-max" | "B-maximize" => VariantName::BMax,
            "AB-min" | "AB-minimize" => VariantName::AbMin,
            "AB-max" | "AB-maximize" => VariantName::AbMax,
            other => {
                return Err(Error::spec(format!(
                    "unknown variant `{other}` (expected A, B-min, B-max, AB-min or AB-max)"
                )))
            }
        })
    }
}

impl AdaptVariant {
    /// Builds a named variant; each `(kind, alpha)` pair becomes a constraint
    /// whose weight sign follows the variant (minimize: +alpha).
    pub fn named(name: VariantName, constraints: &[(ConstraintKind, f64)], base: &Self) -> Self {
        let sign = name.constraint_sign();
        AdaptVariant {
            use_matching_term: name.uses_matching(),
            constraints: if sign == 0.0 {
                Vec::new()
            } else {
                constraints
                    .iter()
                    .map(|(k, a)| ConstraintSpec::new(*k, sign * a.abs()))
                    .collect()
            },
            ..base.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.use_matching_term && self.constraints.is_empty() {
            return Err(Error::spec(
                "adaptation variant has neither a matching term nor constraints",
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.p_clamp > 0.0) {
            return Err(Error::spec("learning rate and PB clamp must be positive"));
        }
        if !self.use_matching_term && self.horizon < 2 {
            return Err(Error::spec(
                "constraint rollout horizon must be at least two",
            ));
        }
        Ok(())
    }

    fn needs_rollout(&self) -> bool {
        self.constraints
            .iter()
            .any(|c| c.kind != ConstraintKind::PbNorm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptResult {
    pub p: Vec<f64>,
    /// Loss before each update.
    pub loss_trace: Vec<f64>,
    /// Loss at the returned `p`.
    pub final_loss: f64,
}

fn add_p_grad(grad: &mut [f64], d_inputs: &[Vec<f64>], x_dim: usize) {
    for d in d_inputs {
        grad.iter_mut().zip(&d[x_dim..]).for_each(|(g, v)| *g += v);
    }
}

/// Full adaptation loss and its exact gradient w.r.t. `p`.
///
/// Sensor matching is measured in normalized units. Constraints read the
/// rollout in physical units divided by the per-channel standard deviation,
/// so a tension constraint still pulls toward zero tension rather than
/// toward the dataset mean.
pub fn adaptation_loss_and_grad(
    model: &RnnpbModel,
    data: &[Sample],
    variant: &AdaptVariant,
    p: &[f64],
) -> Result<(f64, Vec<f64>)> {
    variant.validate()?;
    if p.len() != model.layout.p_dim {
        return Err(Error::spec("PB width does not match layout"));
    }
    let min_len = if variant.use_matching_term { 2 } else { 1 };
    if data.len() < min_len {
        return Err(Error::spec(format!(
            "adaptation needs at least {min_len} observed steps"
        )));
    }
    let xs = data
        .iter()
        .map(|s| model.normalize(s))
        .collect::<Result<Vec<_>>>()?;
    let x_dim = model.layout.x_dim();
    let s_dim = model.layout.s_dim();
    let mut loss = 0.0;
    let mut grad = vec![0.0; p.len()];

    if variant.use_matching_term {
        let tape = model.teacher_forced_tape(&xs, p)?;
        let diffs: Vec<Vec<f64>> = tape
            .outputs
            .iter()
            .zip(&xs[1..])
            .map(|(y, x)| (0..s_dim).map(|i| y[i] - x[i]).collect())
            .collect();
        let norm = diffs.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        loss += norm;
        if norm > 0.0 {
            let d_out: Vec<Vec<f64>> = diffs
                .iter()
                .map(|d| {
                    let mut g = vec![0.0; x_dim];
                    g[..s_dim]
                        .iter_mut()
                        .zip(d)
                        .for_each(|(a, b)| *a = b / norm);
                    g
                })
                .collect();
            let d_in = model.net.backward_sequence(&tape.caches, &d_out, 0, None);
            add_p_grad(&mut grad, &d_in, x_dim);
        }
    }

    if variant.needs_rollout() {
        let horizon = if variant.use_matching_term {
            data.len()
        } else {
            variant.horizon
        };
        let tape = model.rollout_tape(&xs[0], p, horizon - 1)?;
        let offset = model.norm.scaled_offset();
        let scaled: Vec<Vec<f64>> = tape
            .outputs
            .iter()
            .map(|y| y.iter().zip(&offset).map(|(a, b)| a + b).collect())
            .collect();
        let mut d_out = vec![vec![0.0; x_dim]; scaled.len()];
        for c in &variant.constraints {
            let (v, d_roll, dp) = constraint_value_and_grad(c, &model.layout, &scaled, p)?;
            loss += c.weight * v;
            for (acc, d) in d_out.iter_mut().zip(&d_roll) {
                acc.iter_mut().zip(d).for_each(|(a, b)| *a += c.weight * b);
            }
            grad.iter_mut()
                .zip(&dp)
                .for_each(|(a, b)| *a += c.weight * b);
        }
        let d_in = model
            .net
            .backward_sequence(&tape.caches, &d_out, x_dim, None);
        add_p_grad(&mut grad, &d_in, x_dim);
    } else {
        for c in &variant.constraints {
            let (v, _, dp) = constraint_value_and_grad(c, &model.layout, &[], p)?;
            loss += c.weight * v;
            grad.iter_mut()
                .zip(&dp)
                .for_each(|(a, b)| *a += c.weight * b);
        }
    }
    Ok((loss, grad))
}

pub fn adaptation_loss(
    model: &RnnpbModel,
    data: &[Sample],
    variant: &AdaptVariant,
    p: &[f64],
) -> Result<f64> {
    adaptation_loss_and_grad(model, data, variant, p).map(|(l, _)| l)
}

/// Re-estimates `p` by momentum SGD on the adaptation loss; weights stay fixed.
pub fn adapt_pb(
    model: &RnnpbModel,
    data: &[Sample],
    variant: &AdaptVariant,
    p_init: &[f64],
) -> Result<AdaptResult> {
    variant.validate()?;
    let mut p = p_init.to_vec();
    let mut opt = OptState::momentum_sgd(p.len(), variant.learning_rate, variant.momentum);
    let mut loss_trace = Vec::with_capacity(variant.epochs);
    for _ in 0..variant.epochs {
        let (loss, grad) = adaptation_loss_and_grad(model, data, variant, &p)?;
        loss_trace.push(loss);
        opt.step(&mut p, &grad)?;
        let bound = variant.p_clamp;
        p.iter_mut().for_each(|v| *v = v.clamp(-bound, bound));
    }
    let final_loss = adaptation_loss(model, data, variant, &p)?;
    Ok(AdaptResult {
        p,
        loss_trace,
        final_loss,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnlineConfig {
    /// Buffer size at which updates start.
    pub threshold: usize,
    /// Oldest samples are dropped beyond this size.
    pub capacity: usize,
    pub epochs_per_push: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            threshold: 10,
            capacity: 20,
            epochs_per_push: 3,
        }
    }
}

/// Online PB updates over a sliding window of the most recent samples.
#[derive(Debug, Clone)]
pub struct OnlineAdapter<'m> {
    model: &'m RnnpbModel,
    variant: AdaptVariant,
    cfg: OnlineConfig,
    buffer: VecDeque<Sample>,
    p: Vec<f64>,
}

impl<'m> OnlineAdapter<'m> {
    pub fn new(
        model: &'m RnnpbModel,
        variant: &AdaptVariant,
        cfg: OnlineConfig,
        p_init: &[f64],
    ) -> Result<Self> {
        let variant = AdaptVariant {
            epochs: cfg.epochs_per_push,
            ..variant.clone()
        };
        variant.validate()?;
        if cfg.threshold == 0 || cfg.capacity < cfg.threshold {
            return Err(Error::spec("online buffer needs 0 < threshold <= capacity"));
        }
        if p_init.len() != model.layout.p_dim {
            return Err(Error::spec("PB width does not match layout"));
        }
        Ok(OnlineAdapter {
            model,
            variant,
            buffer: VecDeque::with_capacity(cfg.capacity + 1),
            cfg,
            p: p_init.to_vec(),
        })
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn buffer(&self) -> impl Iterator<Item = &Sample> {
        self.buffer.iter()
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Adds a sample; returns the new `p` when an update ran.
    pub fn push(&mut self, sample: Sample) -> Result<Option<Vec<f64>>> {
        self.model.layout.check_sample(&sample)?;
        self.buffer.push_back(sample);
        while self.buffer.len() > self.cfg.capacity {
            self.buffer.pop_front();
        }
        if self.buffer.len() < self.cfg.threshold {
            return Ok(None);
        }
        let window: Vec<Sample> = self.buffer.iter().cloned().collect();
        let res = adapt_pb(self.model, &window, &self.variant, &self.p)?;
        self.p = res.p;
        Ok(Some(self.p.clone()))
    }
}
