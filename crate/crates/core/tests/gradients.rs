//! Analytic gradients against central differences on random small networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stylebias::rnnpb::{
    adaptation_loss, adaptation_loss_and_grad, AdaptVariant, Channel, ConstraintSpec, Sample,
    StateLayout,
};
use stylebias::seqcore::{
    central_differences, compare_gradients, gradient_check, random_sequence, Activation, LayerSpec,
    Network,
};
use stylebias::{NormStats, RnnpbModel};

const H: f64 = 1e-6;

/// Dense -> LSTM -> (optional LSTM) -> dense, kept under 200 parameters.
fn random_specs(rng: &mut ChaCha8Rng, input: usize, output: usize) -> Vec<LayerSpec> {
    loop {
        let a = rng.gen_range(2..=5);
        let b = rng.gen_range(2..=4);
        let mut specs = vec![
            LayerSpec::dense(input, a, Activation::Tanh),
            LayerSpec::lstm(a, b),
        ];
        if rng.gen_bool(0.4) {
            specs.push(LayerSpec::lstm(b, 2));
        }
        let last = specs.last().unwrap().output_width;
        specs.push(LayerSpec::dense(last, output, Activation::Identity));
        if specs.iter().map(LayerSpec::param_count).sum::<usize>() <= 200 {
            return specs;
        }
    }
}

#[test]
fn training_loss_gradients_on_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..24u64 {
        let (input, extra, output) = (
            rng.gen_range(1..=3),
            rng.gen_range(0..=2),
            rng.gen_range(1..=3),
        );
        let net = Network::build(random_specs(&mut rng, input + extra, output), case).unwrap();
        assert!(net.param_count() <= 200);
        let xs = random_sequence(input, 5, 100 + case);
        let ys = random_sequence(output, 5, 200 + case);
        let p = random_sequence(extra, 1, 300 + case).remove(0);
        let p = (extra > 0).then_some(p.as_slice());
        let rep = gradient_check(&net, &xs, &ys, p, H, 1e-5).unwrap();
        assert!(rep.passed, "case {case}: {rep:?}");
    }
}

fn random_model(rng: &mut ChaCha8Rng, seed: u64) -> RnnpbModel {
    let layout = StateLayout::new(
        vec![Channel::new("theta", 1), Channel::new("tension", 2)],
        vec![Channel::new("muscle_length_cmd", 2)],
        2,
    )
    .unwrap();
    let net = Network::build(random_specs(rng, layout.input_dim(), layout.x_dim()), seed).unwrap();
    let mean = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let std = (0..5).map(|_| rng.gen_range(0.5..2.0)).collect();
    RnnpbModel::new(layout, net, vec![], NormStats::new(mean, std).unwrap()).unwrap()
}

fn variants() -> Vec<AdaptVariant> {
    let with = |matching: bool, c: Vec<ConstraintSpec>| AdaptVariant {
        use_matching_term: matching,
        constraints: c,
        horizon: 5,
        ..Default::default()
    };
    vec![
        with(true, vec![]),
        with(false, vec![ConstraintSpec::tension(0.1)]),
        with(false, vec![ConstraintSpec::tension(-0.1)]),
        with(true, vec![ConstraintSpec::joint_velocity(0.3)]),
        with(true, vec![ConstraintSpec::muscle_length_velocity(-0.2)]),
        with(
            false,
            vec![ConstraintSpec::pb_norm(0.5), ConstraintSpec::tension(0.05)],
        ),
    ]
}

#[test]
fn adaptation_loss_gradients_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..20u64 {
        let model = random_model(&mut rng, case);
        let data: Vec<Sample> = random_sequence(5, 5, 400 + case)
            .into_iter()
            .map(|x| Sample::split(&x, 3))
            .collect();
        let p: Vec<f64> = random_sequence(2, 1, 500 + case).remove(0);
        for v in variants() {
            let (_, analytic) = adaptation_loss_and_grad(&model, &data, &v, &p).unwrap();
            let numeric =
                central_differences(|q| adaptation_loss(&model, &data, &v, q).unwrap(), &p, H);
            let rep = compare_gradients(&analytic, &numeric, 1e-4);
            assert!(rep.passed, "case {case} {v:?}: {rep:?}");
        }
    }
}
