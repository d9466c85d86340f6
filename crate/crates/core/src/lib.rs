//! Imitation learning with a recurrent network with parametric bias (PB).
//!
//! A small sequence network learns demonstrations from a simulated
//! one-joint, three-muscle tendon arm, jointly with one PB vector per
//! demonstration. After training, the PB vector alone is adapted (weights
//! frozen) to match the current body configuration and to push the motion
//! style toward lower or higher muscle tension or velocity.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod io;
pub mod rnnpb;
pub mod seqcore;
pub mod tendon_sim;

pub use error::{Error, Result};
pub use harness::NormStats;
pub use rnnpb::{
    AdaptVariant, ConstraintKind, ConstraintSpec, DemoMeta, Demonstration, RnnpbModel, Sample,
    StateLayout,
};
pub use seqcore::{LayerSpec, Network, OptState, RecurrentState};
pub use tendon_sim::{ArmGeometry, ArmState, MuscleParams};
