use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::{validate_specs, Activation, LayerKind, LayerSpec};
use crate::error::{Error, Result};

const FORGET_BIAS: f64 = 1.0;

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Cell and hidden vectors of one LSTM layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Recurrent state of a network: one entry per LSTM layer, in layer order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentState {
    pub layers: Vec<LstmState>,
}

/// A chain of dense and LSTM layers over a flat parameter vector.
///
/// Dense layers store a row-major `out x in` matrix followed by the bias.
/// LSTM layers store `W_x` (`4out x in`), `W_h` (`4out x out`) and the bias
/// (`4out`), with gate blocks ordered input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    offsets: Vec<usize>,
    weights: Vec<f64>,
    seed: u64,
}

/// Values retained from a forward step for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    layers: Vec<LayerCache>,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Dense {
        input: Vec<f64>,
        output: Vec<f64>,
    },
    Lstm {
        input: Vec<f64>,
        h_prev: Vec<f64>,
        c_prev: Vec<f64>,
        // post-activation gates, blocks i, f, g, o
        gates: Vec<f64>,
        tanh_c: Vec<f64>,
    },
}

fn offsets_for(layers: &[LayerSpec]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(layers.len() + 1);
    let mut acc = 0;
    for l in layers {
        offsets.push(acc);
        acc += l.param_count();
    }
    offsets.push(acc);
    offsets
}

impl Network {
    /// Builds a network with weights drawn uniformly from `±1/sqrt(fan_in)`.
    ///
    /// Each layer draws from its own ChaCha stream keyed by `(seed, layer index)`,
    /// so a layer's weights do not depend on the sizes of the layers before it.
    pub fn build(layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        validate_specs(&layers)?;
        let offsets = offsets_for(&layers);
        let mut weights = vec![0.0; *offsets.last().unwrap()];
        for (idx, spec) in layers.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let block = &mut weights[offsets[idx]..offsets[idx + 1]];
            let fan_in = match spec.kind {
                LayerKind::Dense { .. } => spec.input_width,
                LayerKind::Lstm => spec.input_width + spec.output_width,
            };
            let bound = 1.0 / (fan_in as f64).sqrt();
            for w in block.iter_mut() {
                *w = rng.gen_range(-bound..=bound);
            }
            if spec.is_lstm() {
                let o = spec.output_width;
                let b0 = 4 * (spec.input_width * o + o * o);
                block[b0 + o..b0 + 2 * o].fill(FORGET_BIAS);
            }
        }
        Ok(Network {
            layers,
            offsets,
            weights,
            seed,
        })
    }

    /// Rebuilds a network from stored parts, checking the parameter count.
    pub fn from_parts(layers: Vec<LayerSpec>, weights: Vec<f64>, seed: u64) -> Result<Self> {
        validate_specs(&layers)?;
        let offsets = offsets_for(&layers);
        if weights.len() != *offsets.last().unwrap() {
            return Err(Error::spec(format!(
                "weight vector has {} entries, layers need {}",
                weights.len(),
                offsets.last().unwrap()
            )));
        }
        Ok(Network {
            layers,
            offsets,
            weights,
            seed,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().output_width
    }

    /// Parameter range owned by layer `idx`.
    pub fn layer_range(&self, idx: usize) -> std::ops::Range<usize> {
        self.offsets[idx]..self.offsets[idx + 1]
    }

    pub fn zero_state(&self) -> RecurrentState {
        RecurrentState {
            layers: self
                .layers
                .iter()
                .filter(|l| l.is_lstm())
                .map(|l| LstmState {
                    c: vec![0.0; l.output_width],
                    h: vec![0.0; l.output_width],
                })
                .collect(),
        }
    }

    fn check_state(&self, state: &RecurrentState) -> Result<()> {
        let mut lstm = self.layers.iter().filter(|l| l.is_lstm());
        let ok = state.layers.len() == lstm.clone().count()
            && state.layers.iter().all(|s| {
                let w = lstm.next().unwrap().output_width;
                s.c.len() == w && s.h.len() == w
            });
        if ok {
            Ok(())
        } else {
            Err(Error::spec(
                "recurrent state does not match the network layout",
            ))
        }
    }

    /// One step of the network. The input state is left untouched.
    pub fn forward_step(
        &self,
        input: &[f64],
        state: &RecurrentState,
    ) -> Result<(Vec<f64>, RecurrentState)> {
        let (out, next, _) = self.forward_step_cached(input, state)?;
        Ok((out, next))
    }

    /// Forward step that also returns the cache needed by [`Network::backward_step`].
    pub fn forward_step_cached(
        &self,
        input: &[f64],
        state: &RecurrentState,
    ) -> Result<(Vec<f64>, RecurrentState, StepCache)> {
        if input.len() != self.input_width() {
            return Err(Error::spec(format!(
                "input has width {}, network expects {}",
                input.len(),
                self.input_width()
            )));
        }
        self.check_state(state)?;
        let mut next = state.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        let mut lstm_idx = 0;
        for (idx, spec) in self.layers.iter().enumerate() {
            let w = &self.weights[self.layer_range(idx)];
            let (i_w, o_w) = (spec.input_width, spec.output_width);
            match spec.kind {
                LayerKind::Dense { activation } => {
                    let y = dense_forward(w, &x, i_w, o_w, activation);
                    caches.push(LayerCache::Dense {
                        input: std::mem::take(&mut x),
                        output: y.clone(),
                    });
                    x = y;
                }
                LayerKind::Lstm => {
                    let prev = &state.layers[lstm_idx];
                    let (gates, c, tanh_c, h) = lstm_forward(w, &x, &prev.h, &prev.c, i_w, o_w);
                    caches.push(LayerCache::Lstm {
                        input: std::mem::take(&mut x),
                        h_prev: prev.h.clone(),
                        c_prev: prev.c.clone(),
                        gates,
                        tanh_c,
                    });
                    next.layers[lstm_idx] = LstmState { c, h: h.clone() };
                    lstm_idx += 1;
                    x = h;
                }
            }
        }
        Ok((x, next, StepCache { layers: caches }))
    }

    /// Reverse-mode step. Given the gradient w.r.t. this step's output and
    /// w.r.t. the state it produced, returns the gradients w.r.t. the step's
    /// input and incoming state, accumulating parameter gradients into `grad`.
    pub fn backward_step(
        &self,
        cache: &StepCache,
        d_output: &[f64],
        d_state_next: &RecurrentState,
        mut grad: Option<&mut [f64]>,
    ) -> (Vec<f64>, RecurrentState) {
        let mut d_state_prev = self.zero_state();
        let mut dy = d_output.to_vec();
        let mut lstm_idx = self.layers.iter().filter(|l| l.is_lstm()).count();
        for (idx, spec) in self.layers.iter().enumerate().rev() {
            let range = self.layer_range(idx);
            let w = &self.weights[range.clone()];
            let g = grad.as_deref_mut().map(|g| &mut g[range]);
            let (i_w, o_w) = (spec.input_width, spec.output_width);
            dy = match (&cache.layers[idx], spec.kind) {
                (LayerCache::Dense { input, output }, LayerKind::Dense { activation }) => {
                    dense_backward(w, g, input, output, &dy, i_w, o_w, activation)
                }
                (
                    LayerCache::Lstm {
                        input,
                        h_prev,
                        c_prev,
                        gates,
                        tanh_c,
                    },
                    LayerKind::Lstm,
                ) => {
                    lstm_idx -= 1;
                    let ds = &d_state_next.layers[lstm_idx];
                    let dh: Vec<f64> = dy.iter().zip(&ds.h).map(|(a, b)| a + b).collect();
                    let (dx, dh_prev, dc_prev) = lstm_backward(
                        w, g, input, h_prev, c_prev, gates, tanh_c, &dh, &ds.c, i_w, o_w,
                    );
                    d_state_prev.layers[lstm_idx] = LstmState {
                        c: dc_prev,
                        h: dh_prev,
                    };
                    dx
                }
                _ => unreachable!("cache built by a different network"),
            };
        }
        (dy, d_state_prev)
    }

    /// Runs backward over a whole sequence of cached steps.
    ///
    /// `d_outputs[t]` is the loss gradient w.r.t. the output of step `t`.
    /// `feedback` adds `d_input[t+1][..feedback]` into `d_output[t]`, which is
    /// how autoregressive rollouts chain outputs into the next inputs.
    pub fn backward_sequence(
        &self,
        caches: &[StepCache],
        d_outputs: &[Vec<f64>],
        feedback: usize,
        mut grad: Option<&mut [f64]>,
    ) -> Vec<Vec<f64>> {
        let mut d_state = self.zero_state();
        let mut d_inputs = vec![Vec::new(); caches.len()];
        for t in (0..caches.len()).rev() {
            let mut dy = d_outputs[t].clone();
            if feedback > 0 && t + 1 < caches.len() {
                for (a, b) in dy.iter_mut().zip(&d_inputs[t + 1][..feedback]) {
                    *a += b;
                }
            }
            let (dx, ds) = self.backward_step(&caches[t], &dy, &d_state, grad.as_deref_mut());
            d_inputs[t] = dx;
            d_state = ds;
        }
        d_inputs
    }
}

fn dense_forward(w: &[f64], x: &[f64], i_w: usize, o_w: usize, act: Activation) -> Vec<f64> {
    let bias = &w[i_w * o_w..];
    (0..o_w)
        .map(|r| {
            let row = &w[r * i_w..(r + 1) * i_w];
            let z = row.iter().zip(x).fold(bias[r], |acc, (a, b)| acc + a * b);
            act.apply(z)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn dense_backward(
    w: &[f64],
    grad: Option<&mut [f64]>,
    x: &[f64],
    y: &[f64],
    dy: &[f64],
    i_w: usize,
    o_w: usize,
    act: Activation,
) -> Vec<f64> {
    let dz: Vec<f64> = dy
        .iter()
        .zip(y)
        .map(|(d, y)| d * act.derivative_from_output(*y))
        .collect();
    if let Some(g) = grad {
        for r in 0..o_w {
            let row = &mut g[r * i_w..(r + 1) * i_w];
            row.iter_mut().zip(x).for_each(|(gw, xi)| *gw += dz[r] * xi);
        }
        g[i_w * o_w..]
            .iter_mut()
            .zip(&dz)
            .for_each(|(gb, d)| *gb += d);
    }
    let mut dx = vec![0.0; i_w];
    for (r, d) in dz.iter().enumerate() {
        let row = &w[r * i_w..(r + 1) * i_w];
        dx.iter_mut().zip(row).for_each(|(a, wv)| *a += d * wv);
    }
    dx
}

type LstmForward = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

fn lstm_forward(
    w: &[f64],
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    i_w: usize,
    o_w: usize,
) -> LstmForward {
    let wx = &w[..4 * o_w * i_w];
    let wh = &w[4 * o_w * i_w..4 * o_w * (i_w + o_w)];
    let b = &w[4 * o_w * (i_w + o_w)..];
    let mut gates = vec![0.0; 4 * o_w];
    for (r, gate) in gates.iter_mut().enumerate() {
        let zx = wx[r * i_w..(r + 1) * i_w]
            .iter()
            .zip(x)
            .fold(0.0, |acc, (a, b)| acc + a * b);
        let zh = wh[r * o_w..(r + 1) * o_w]
            .iter()
            .zip(h_prev)
            .fold(0.0, |acc, (a, b)| acc + a * b);
        let z = b[r] + zx + zh;
        *gate = if (2 * o_w..3 * o_w).contains(&r) {
            z.tanh()
        } else {
            sigmoid(z)
        };
    }
    let mut c = vec![0.0; o_w];
    let mut tanh_c = vec![0.0; o_w];
    let mut h = vec![0.0; o_w];
    for j in 0..o_w {
        let (ig, fg, gg, og) = (
            gates[j],
            gates[o_w + j],
            gates[2 * o_w + j],
            gates[3 * o_w + j],
        );
        c[j] = fg * c_prev[j] + ig * gg;
        tanh_c[j] = c[j].tanh();
        h[j] = og * tanh_c[j];
    }
    (gates, c, tanh_c, h)
}

#[allow(clippy::too_many_arguments)]
fn lstm_backward(
    w: &[f64],
    grad: Option<&mut [f64]>,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    gates: &[f64],
    tanh_c: &[f64],
    dh: &[f64],
    dc_next: &[f64],
    i_w: usize,
    o_w: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut dz = vec![0.0; 4 * o_w];
    let mut dc_prev = vec![0.0; o_w];
    for j in 0..o_w {
        let (ig, fg, gg, og) = (
            gates[j],
            gates[o_w + j],
            gates[2 * o_w + j],
            gates[3 * o_w + j],
        );
        let d_o = dh[j] * tanh_c[j];
        let dc = dc_next[j] + dh[j] * og * (1.0 - tanh_c[j] * tanh_c[j]);
        dz[j] = dc * gg * ig * (1.0 - ig);
        dz[o_w + j] = dc * c_prev[j] * fg * (1.0 - fg);
        dz[2 * o_w + j] = dc * ig * (1.0 - gg * gg);
        dz[3 * o_w + j] = d_o * og * (1.0 - og);
        dc_prev[j] = dc * fg;
    }
    let wx_len = 4 * o_w * i_w;
    let wh_len = 4 * o_w * o_w;
    if let Some(g) = grad {
        let (gx, rest) = g.split_at_mut(wx_len);
        let (gh, gb) = rest.split_at_mut(wh_len);
        for (r, d) in dz.iter().enumerate() {
            gx[r * i_w..(r + 1) * i_w]
                .iter_mut()
                .zip(x)
                .for_each(|(a, xi)| *a += d * xi);
            gh[r * o_w..(r + 1) * o_w]
                .iter_mut()
                .zip(h_prev)
                .for_each(|(a, hi)| *a += d * hi);
            gb[r] += d;
        }
    }
    let wx = &w[..wx_len];
    let wh = &w[wx_len..wx_len + wh_len];
    let mut dx = vec![0.0; i_w];
    let mut dh_prev = vec![0.0; o_w];
    for (r, d) in dz.iter().enumerate() {
        dx.iter_mut()
            .zip(&wx[r * i_w..(r + 1) * i_w])
            .for_each(|(a, wv)| *a += d * wv);
        dh_prev
            .iter_mut()
            .zip(&wh[r * o_w..(r + 1) * o_w])
            .for_each(|(a, wv)| *a += d * wv);
    }
    (dx, dh_prev, dc_prev)
}
