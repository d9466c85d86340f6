//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stylebias::rnnpb::StateLayout;
use stylebias::seqcore::{specs_from_widths, with_io, Network, NetworkPreset};

/// A freshly initialized network of the given preset for the tendon-arm layout.
pub fn preset_network(preset: NetworkPreset, seed: u64) -> Network {
    let layout = StateLayout::tendon_arm(2);
    let specs = specs_from_widths(&with_io(
        layout.input_dim(),
        &preset.hidden(),
        layout.x_dim(),
    ))
    .expect("preset widths chain");
    Network::build(specs, seed).expect("preset network builds")
}

/// `steps` uniform vectors in `[-1, 1)`.
pub fn uniform_sequence(width: usize, steps: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}
