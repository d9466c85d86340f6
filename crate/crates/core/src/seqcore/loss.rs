use super::network::{Network, StepCache};
use crate::error::{Error, Result};

/// Loss value together with its exact gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceGrad {
    pub loss: f64,
    pub grad_net: Vec<f64>,
    /// Gradient w.r.t. the trainable vector appended to every input, if any.
    pub grad_extra: Option<Vec<f64>>,
}

fn step_input(x: &[f64], extra: Option<&[f64]>) -> Vec<f64> {
    let mut v = x.to_vec();
    if let Some(e) = extra {
        v.extend_from_slice(e);
    }
    v
}

/// Sum of squared errors over a teacher-forced sequence. Parameter gradients
/// are accumulated into `grad_net`; the gradient w.r.t. `extra` is returned.
pub(crate) fn sse_and_gradients(
    net: &Network,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    extra: Option<&[f64]>,
    grad_net: Option<&mut [f64]>,
) -> Result<(f64, Vec<f64>)> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::spec(format!(
            "need equal non-empty input/target sequences, got {} and {}",
            inputs.len(),
            targets.len()
        )));
    }
    let out_w = net.output_width();
    let mut state = net.zero_state();
    let mut caches: Vec<StepCache> = Vec::with_capacity(inputs.len());
    let mut d_out = Vec::with_capacity(inputs.len());
    let mut sse = 0.0;
    for (x, target) in inputs.iter().zip(targets) {
        if target.len() != out_w {
            return Err(Error::spec(format!(
                "target has width {}, network outputs {}",
                target.len(),
                out_w
            )));
        }
        let (y, next, cache) = net.forward_step_cached(&step_input(x, extra), &state)?;
        let diff: Vec<f64> = y.iter().zip(target).map(|(a, b)| a - b).collect();
        sse += diff.iter().map(|d| d * d).sum::<f64>();
        d_out.push(diff.into_iter().map(|d| 2.0 * d).collect());
        caches.push(cache);
        state = next;
    }
    let d_in = net.backward_sequence(&caches, &d_out, 0, grad_net);
    let extra_len = extra.map_or(0, <[f64]>::len);
    let x_len = net.input_width() - extra_len;
    let mut g_extra = vec![0.0; extra_len];
    for d in &d_in {
        g_extra
            .iter_mut()
            .zip(&d[x_len..])
            .for_each(|(a, b)| *a += b);
    }
    Ok((sse, g_extra))
}

/// Mean squared error over all steps and output dimensions, with
/// reverse-mode gradients through time.
///
/// `extra`, when present, is appended to every step's input and receives a
/// gradient of its own.
pub fn sequence_loss_and_gradients(
    net: &Network,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    extra: Option<&[f64]>,
) -> Result<SequenceGrad> {
    let mut grad_net = vec![0.0; net.param_count()];
    let (sse, g_extra) = sse_and_gradients(net, inputs, targets, extra, Some(&mut grad_net))?;
    let scale = 1.0 / (inputs.len() * net.output_width()) as f64;
    grad_net.iter_mut().for_each(|g| *g *= scale);
    Ok(SequenceGrad {
        loss: sse * scale,
        grad_net,
        grad_extra: extra.map(|_| g_extra.into_iter().map(|g| g * scale).collect()),
    })
}

/// Loss only, without the backward pass.
pub fn sequence_loss(
    net: &Network,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    extra: Option<&[f64]>,
) -> Result<f64> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::spec("need equal non-empty input/target sequences"));
    }
    let mut state = net.zero_state();
    let mut sse = 0.0;
    for (x, target) in inputs.iter().zip(targets) {
        let (y, next) = net.forward_step(&step_input(x, extra), &state)?;
        sse += y
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        state = next;
    }
    Ok(sse / (inputs.len() * net.output_width()) as f64)
}
