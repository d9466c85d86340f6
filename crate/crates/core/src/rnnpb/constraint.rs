use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Part, StateLayout, MUSCLE_LENGTH_CMD, TENSION, THETA};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Norm of a predicted sensor channel over the rollout.
    Tension,
    /// Norm of consecutive differences of a predicted command channel.
    MuscleLengthVelocity,
    /// Norm of consecutive differences of a predicted sensor channel.
    JointVelocity,
    /// Norm of the PB vector itself.
    PbNorm,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::Tension => "tension",
            ConstraintKind::MuscleLengthVelocity => "muscle_length_velocity",
            ConstraintKind::JointVelocity => "joint_velocity",
            ConstraintKind::PbNorm => "pb_norm",
        })
    }
}

impl ConstraintKind {
    pub fn default_channel(self) -> &'static str {
        match self {
            ConstraintKind::Tension => TENSION,
            ConstraintKind::MuscleLengthVelocity => MUSCLE_LENGTH_CMD,
            ConstraintKind::JointVelocity => THETA,
            ConstraintKind::PbNorm => "",
        }
    }
}

/// A signed-weight style constraint. Positive weights minimize the quantity,
/// negative weights maximize it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub kind: ConstraintKind,
    pub weight: f64,
    #[serde(default)]
    pub channel: String,
}

impl ConstraintSpec {
    pub fn new(kind: ConstraintKind, weight: f64) -> Self {
        ConstraintSpec {
            kind,
            weight,
            channel: kind.default_channel().to_string(),
        }
    }

    pub fn tension(weight: f64) -> Self {
        Self::new(ConstraintKind::Tension, weight)
    }

    pub fn muscle_length_velocity(weight: f64) -> Self {
        Self::new(ConstraintKind::MuscleLengthVelocity, weight)
    }

    pub fn joint_velocity(weight: f64) -> Self {
        Self::new(ConstraintKind::JointVelocity, weight)
    }

    pub fn pb_norm(weight: f64) -> Self {
        Self::new(ConstraintKind::PbNorm, weight)
    }

    /// Resolves the channel slice this constraint reads from `x = [s, u]`.
    pub fn slice(&self, layout: &StateLayout) -> Result<Option<std::ops::Range<usize>>> {
        if self.kind == ConstraintKind::PbNorm {
            return Ok(None);
        }
        let (part, range) = layout.channel(&self.channel).ok_or_else(|| {
            Error::spec(format!(
                "constraint channel `{}` not in layout",
                self.channel
            ))
        })?;
        let want = match self.kind {
            ConstraintKind::Tension | ConstraintKind::JointVelocity => Part::Sensor,
            ConstraintKind::MuscleLengthVelocity => Part::Command,
            ConstraintKind::PbNorm => unreachable!(),
        };
        if part != want {
            return Err(Error::spec(format!(
                "{} constraint cannot read channel `{}`",
                self.kind, self.channel
            )));
        }
        Ok(Some(range))
    }
}

/// Unweighted constraint value with its gradient w.r.t. every rollout entry
/// and w.r.t. `p`. The gradient of a zero norm is taken as zero.
pub(crate) fn constraint_value_and_grad(
    spec: &ConstraintSpec,
    layout: &StateLayout,
    rollout: &[Vec<f64>],
    p: &[f64],
) -> Result<(f64, Vec<Vec<f64>>, Vec<f64>)> {
    let mut d_roll: Vec<Vec<f64>> = rollout.iter().map(|x| vec![0.0; x.len()]).collect();
    let Some(range) = spec.slice(layout)? else {
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dp = if norm > 0.0 {
            p.iter().map(|v| v / norm).collect()
        } else {
            vec![0.0; p.len()]
        };
        return Ok((norm, d_roll, dp));
    };
    let dp = vec![0.0; p.len()];
    match spec.kind {
        ConstraintKind::Tension => {
            if rollout.is_empty() {
                return Err(Error::spec("tension constraint needs a non-empty rollout"));
            }
            let norm = rollout
                .iter()
                .flat_map(|x| &x[range.clone()])
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                for (d, x) in d_roll.iter_mut().zip(rollout) {
                    for i in range.clone() {
                        d[i] = x[i] / norm;
                    }
                }
            }
            Ok((norm, d_roll, dp))
        }
        ConstraintKind::MuscleLengthVelocity | ConstraintKind::JointVelocity => {
            if rollout.len() < 2 {
                return Err(Error::spec(format!(
                    "{} constraint needs a rollout of at least two predictions",
                    spec.kind
                )));
            }
            let diffs: Vec<Vec<f64>> = rollout
                .windows(2)
                .map(|w| range.clone().map(|i| w[1][i] - w[0][i]).collect())
                .collect();
            let norm = diffs.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (t, diff) in diffs.iter().enumerate() {
                    for (k, i) in range.clone().enumerate() {
                        let g = diff[k] / norm;
                        d_roll[t + 1][i] += g;
                        d_roll[t][i] -= g;
                    }
                }
            }
            Ok((norm, d_roll, dp))
        }
        ConstraintKind::PbNorm => unreachable!(),
    }
}

/// Unweighted constraint value on a predicted sequence `x(2:T)`.
///
/// The rollout is taken as given; callers choose the space it lives in.
pub fn constraint_loss(
    spec: &ConstraintSpec,
    layout: &StateLayout,
    rollout: &[Vec<f64>],
    p: &[f64],
) -> Result<f64> {
    constraint_value_and_grad(spec, layout, rollout, p).map(|(v, _, _)| v)
}
