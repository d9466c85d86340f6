//! Dense and LSTM layers with exact reverse-mode gradients through time,
//! Adam and momentum SGD, and finite-difference gradient checking.

mod gradcheck;
mod layer;
mod loss;
mod network;
mod optim;

pub use gradcheck::{
    central_differences, compare_gradients, gradient_check, random_sequence, relative_error,
    GradCheckReport, REL_ERR_FLOOR,
};
pub use layer::{
    desk_hidden, full_hidden, specs_from_widths, validate_specs, with_io, Activation, LayerKind,
    LayerSpec, NetworkPreset, Width,
};
pub(crate) use loss::sse_and_gradients;
pub use loss::{sequence_loss, sequence_loss_and_gradients, SequenceGrad};
pub use network::{LstmState, Network, RecurrentState, StepCache};
pub use optim::{clip_global_norm, OptState, OptimizerKind};
