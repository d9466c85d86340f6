use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Demonstration, PbEntry, RnnpbModel, StateLayout};
use crate::error::{Error, Result};
use crate::harness::NormStats;
use crate::seqcore::{
    clip_global_norm, specs_from_widths, sse_and_gradients, with_io, Network, NetworkPreset,
    OptState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Set from the run configuration rather than this section.
    #[serde(skip)]
    pub preset: NetworkPreset,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Training stops once the teacher-forced MSE falls below this value.
    pub early_stop_mse: f64,
    pub clip_norm: f64,
    #[serde(skip)]
    pub seed: u64,
    /// Log the loss every this many epochs (0 disables).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            preset: NetworkPreset::Desk,
            learning_rate: 1e-3,
            max_epochs: 5000,
            early_stop_mse: 1e-4,
            clip_norm: 5.0,
            seed: 0,
            log_every: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub epochs_run: usize,
    pub final_mse: f64,
    pub stopped_early: bool,
    /// Teacher-forced MSE before each update.
    pub loss_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

struct Prepared {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

fn batch_gradients(
    net: &Network,
    prepared: &[Prepared],
    pbs: &[Vec<f64>],
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    // per-demo work may run in parallel; the reduction below is index-ordered
    let parts = prepared
        .par_iter()
        .zip(pbs.par_iter())
        .map(|(d, p)| {
            let mut gw = vec![0.0; net.param_count()];
            let (sse, gp) = sse_and_gradients(net, &d.inputs, &d.targets, Some(p), Some(&mut gw))?;
            Ok((sse, gw, gp))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sse_total = 0.0;
    let mut grad_w = vec![0.0; net.param_count()];
    let mut grad_p = Vec::with_capacity(parts.len());
    for (sse, gw, gp) in parts {
        sse_total += sse;
        grad_w.iter_mut().zip(&gw).for_each(|(a, b)| *a += b);
        grad_p.push(gp);
    }
    Ok((sse_total, grad_w, grad_p))
}

/// Trains the network weights and one PB vector per demonstration jointly,
/// teacher-forced, with a single Adam instance over both.
///
/// Every PB vector starts at zero. The loss is the mean squared error over
/// all steps, output dimensions and demonstrations in normalized space.
pub fn fit(
    layout: &StateLayout,
    dataset: &[Demonstration],
    cfg: &TrainConfig,
) -> Result<(RnnpbModel, FitReport)> {
    layout.validate()?;
    if dataset.is_empty() {
        return Err(Error::spec("cannot train on an empty dataset"));
    }
    let mut warnings = Vec::new();
    if layout.p_dim >= dataset.len() {
        let msg = format!(
            "PB dimension {} is not smaller than the number of demonstrations {}",
            layout.p_dim,
            dataset.len()
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    for d in dataset {
        if d.steps.len() < 2 {
            return Err(Error::spec(format!(
                "demonstration {} has fewer than two steps",
                d.id
            )));
        }
        for s in &d.steps {
            layout.check_sample(s)?;
        }
    }
    let norm = NormStats::compute(dataset)?;
    let specs = specs_from_widths(&with_io(
        layout.input_dim(),
        &cfg.preset.hidden(),
        layout.x_dim(),
    ))?;
    let mut net = Network::build(specs, cfg.seed)?;
    let prepared: Vec<Prepared> = dataset
        .iter()
        .map(|d| {
            let xs: Vec<Vec<f64>> = d.steps.iter().map(|s| norm.apply(&s.concat())).collect();
            Prepared {
                inputs: xs[..xs.len() - 1].to_vec(),
                targets: xs[1..].to_vec(),
            }
        })
        .collect();
    let count: usize = prepared.iter().map(|p| p.targets.len()).sum::<usize>() * layout.x_dim();
    let scale = 1.0 / count as f64;
    let n_w = net.param_count();
    let p_dim = layout.p_dim;

    let mut pbs = vec![vec![0.0; p_dim]; dataset.len()];
    let mut params: Vec<f64> = net.weights().to_vec();
    params.extend(pbs.iter().flatten());
    let mut opt = OptState::adam(params.len(), cfg.learning_rate);
    let mut loss_trace = Vec::new();
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        let (sse, grad_w, grad_p) = batch_gradients(&net, &prepared, &pbs)?;
        let mse = sse * scale;
        loss_trace.push(mse);
        if cfg.log_every > 0 && epoch % cfg.log_every == 0 {
            info!("epoch {epoch}: teacher-forced mse {mse:.3e}");
        }
        if !mse.is_finite() {
            return Err(Error::Fault(format!("training diverged at epoch {epoch}")));
        }
        if mse < cfg.early_stop_mse {
            stopped_early = true;
            break;
        }
        let mut grads = grad_w;
        grads.extend(grad_p.iter().flatten());
        grads.iter_mut().for_each(|g| *g *= scale);
        clip_global_norm(&mut grads, cfg.clip_norm);
        opt.step(&mut params, &grads)?;
        net.weights_mut().copy_from_slice(&params[..n_w]);
        for (k, p) in pbs.iter_mut().enumerate() {
            p.copy_from_slice(&params[n_w + k * p_dim..n_w + (k + 1) * p_dim]);
        }
    }

    let final_mse = if stopped_early {
        *loss_trace.last().unwrap()
    } else {
        batch_gradients(&net, &prepared, &pbs)?.0 * scale
    };
    let pb_table = dataset
        .iter()
        .zip(pbs)
        .map(|(d, p)| PbEntry { id: d.id, p })
        .collect();
    let model = RnnpbModel::new(layout.clone(), net, pb_table, norm)?;
    Ok((
        model,
        FitReport {
            epochs_run: loss_trace.len() - usize::from(stopped_early),
            final_mse,
            stopped_early,
            loss_trace,
            warnings,
        },
    ))
}
