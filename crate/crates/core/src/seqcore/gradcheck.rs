use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::loss::{sequence_loss, sequence_loss_and_gradients};
use super::network::Network;
use crate::error::{Error, Result};

/// Gradients smaller than this are compared in absolute terms.
pub const REL_ERR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Index with the largest relative error, if anything was checked.
    pub worst_index: Option<usize>,
    /// Every index whose error exceeds the tolerance.
    pub failures: Vec<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / scale
}

/// `steps` vectors of `width` values drawn uniformly from `[-1, 1)`.
pub fn random_sequence(width: usize, steps: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Central differences `(f(x+h e_i) - f(x-h e_i)) / 2h` for every coordinate.
pub fn central_differences<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn compare_gradients(analytic: &[f64], numeric: &[f64], tolerance: f64) -> GradCheckReport {
    let mut max_rel_err = 0.0;
    let mut worst_index = None;
    let mut failures = Vec::new();
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let e = relative_error(*a, *n);
        if worst_index.is_none() || e > max_rel_err {
            max_rel_err = e;
            worst_index = Some(i);
        }
        if !(e < tolerance) {
            failures.push(i);
        }
    }
    GradCheckReport {
        checked: analytic.len().min(numeric.len()),
        max_rel_err,
        worst_index,
        passed: failures.is_empty(),
        failures,
        tolerance,
    }
}

/// Compares [`sequence_loss_and_gradients`] against central differences for
/// every network parameter, followed by every entry of `extra`.
pub fn gradient_check(
    net: &Network,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    extra: Option<&[f64]>,
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::spec("finite-difference step must be positive"));
    }
    let g = sequence_loss_and_gradients(net, inputs, targets, extra)?;
    let mut analytic = g.grad_net;
    analytic.extend(g.grad_extra.unwrap_or_default());

    let n_w = net.param_count();
    let mut numeric: Vec<f64> = (0..n_w)
        .into_par_iter()
        .map_init(
            || net.clone(),
            |probe, i| {
                let orig = probe.weights()[i];
                probe.weights_mut()[i] = orig + h;
                let up = sequence_loss(probe, inputs, targets, extra).unwrap_or(f64::NAN);
                probe.weights_mut()[i] = orig - h;
                let down = sequence_loss(probe, inputs, targets, extra).unwrap_or(f64::NAN);
                probe.weights_mut()[i] = orig;
                (up - down) / (2.0 * h)
            },
        )
        .collect();
    if let Some(e) = extra {
        numeric.extend(central_differences(
            |p| sequence_loss(net, inputs, targets, Some(p)).unwrap_or(f64::NAN),
            e,
            h,
        ));
    }
    Ok(compare_gradients(&analytic, &numeric, tolerance))
}
