//! Feed-forward multilayer perceptron regressor: tanh hidden layers, linear
//! output, full-batch Adam with L2 weight decay. ANN-1 takes climate inputs
//! only; ANN-2 adds the prior month's case count as a fifth input.
//!
//! Inputs and the target are standardized internally from training
//! statistics; predictions come back on the original scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("input width {got} does not match the network ({expected})")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training needs at least 2 rows, got {rows}")]
    TooFewRows { rows: usize },
    #[error("training loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("every tuning run failed")]
    AllRunsFailed,
}

/// Training configuration. Training is always full batch: the panels here
/// are a few dozen rows, so minibatching would only add noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub l2_penalty: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        if self.hidden_layers.iter().any(|w| *w == 0) {
            return Err(MlpError::InvalidConfig("hidden widths must be >= 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(MlpError::InvalidConfig(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(MlpError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.l2_penalty < 0.0 {
            return Err(MlpError::InvalidConfig("l2_penalty must be >= 0".into()));
        }
        Ok(())
    }

    /// The default tuning grid: one or two hidden layers, two learning
    /// rates, three weight-decay levels.
    pub fn default_grid(seed: u64, max_iterations: usize) -> Vec<MlpConfig> {
        let mut grid = Vec::new();
        for hidden in [vec![16], vec![32, 16]] {
            for learning_rate in [1e-2, 1e-3] {
                for l2_penalty in [0.0, 1e-4, 1e-3] {
                    grid.push(MlpConfig {
                        hidden_layers: hidden.clone(),
                        learning_rate,
                        l2_penalty,
                        max_iterations,
                        seed,
                    });
                }
            }
        }
        grid
    }
}

/// One dense layer; `weights[out * inputs + inp]`, row per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// A trained network plus the standardization constants baked in at
/// training time. Serializes to a self-contained JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    pub layers: Vec<LayerParams>,
    pub input_means: Vec<f64>,
    pub input_sds: Vec<f64>,
    pub target_mean: f64,
    pub target_sd: f64,
}

impl MlpNetwork {
    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Forward pass for one input row, returning the prediction on the
/// original target scale.
pub fn forward(net: &MlpNetwork, x: &[f64]) -> Result<f64, MlpError> {
    if x.len() != net.input_width() {
        return Err(MlpError::DimensionMismatch {
            got: x.len(),
            expected: net.input_width(),
        });
    }
    let mut activation: Vec<f64> = x
        .iter()
        .zip(net.input_means.iter().zip(&net.input_sds))
        .map(|(v, (m, s))| (v - m) / s)
        .collect();
    let last = net.layers.len() - 1;
    for (idx, layer) in net.layers.iter().enumerate() {
        let mut next = Vec::with_capacity(layer.outputs);
        for out in 0..layer.outputs {
            let mut z = layer.biases[out];
            for (inp, a) in activation.iter().enumerate() {
                z += layer.weights[out * layer.inputs + inp] * a;
            }
            next.push(if idx == last { z } else { z.tanh() });
        }
        activation = next;
    }
    Ok(activation[0] * net.target_sd + net.target_mean)
}

/// Parameter-shaped gradient bundle, aligned with `MlpNetwork::layers`.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub layers: Vec<LayerParams>,
}

/// Training loss: mean squared error of raw-scale predictions plus an L2
/// penalty on weights (biases excluded).
pub fn loss(net: &MlpNetwork, x: &[Vec<f64>], y: &[f64], l2: f64) -> Result<f64, MlpError> {
    let mut acc = 0.0;
    for (row, target) in x.iter().zip(y) {
        let err = forward(net, row)? - target;
        acc += err * err;
    }
    let mut penalty = 0.0;
    for layer in &net.layers {
        penalty += layer.weights.iter().map(|w| w * w).sum::<f64>();
    }
    Ok(acc / x.len() as f64 + l2 * penalty)
}

/// Exact gradient of [`loss`] by backpropagation.
pub fn gradients(
    net: &MlpNetwork,
    x: &[Vec<f64>],
    y: &[f64],
    l2: f64,
) -> Result<GradientBundle, MlpError> {
    let n_layers = net.layers.len();
    let mut grads: Vec<LayerParams> = net
        .layers
        .iter()
        .map(|l| LayerParams {
            inputs: l.inputs,
            outputs: l.outputs,
            weights: vec![0.0; l.weights.len()],
            biases: vec![0.0; l.biases.len()],
        })
        .collect();
    let n = x.len() as f64;

    for (row, target) in x.iter().zip(y) {
        if row.len() != net.input_width() {
            return Err(MlpError::DimensionMismatch {
                got: row.len(),
                expected: net.input_width(),
            });
        }
        // Forward, keeping every activation.
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        activations.push(
            row.iter()
                .zip(net.input_means.iter().zip(&net.input_sds))
                .map(|(v, (m, s))| (v - m) / s)
                .collect(),
        );
        for (idx, layer) in net.layers.iter().enumerate() {
            let prev = &activations[idx];
            let mut next = Vec::with_capacity(layer.outputs);
            for out in 0..layer.outputs {
                let mut z = layer.biases[out];
                for (inp, a) in prev.iter().enumerate() {
                    z += layer.weights[out * layer.inputs + inp] * a;
                }
                next.push(if idx == n_layers - 1 { z } else { z.tanh() });
            }
            activations.push(next);
        }

        let prediction = activations[n_layers][0] * net.target_sd + net.target_mean;
        // d(mean squared error)/d(output activation)
        let mut delta = vec![2.0 * (prediction - target) * net.target_sd / n];

        for idx in (0..n_layers).rev() {
            let layer = &net.layers[idx];
            let prev = &activations[idx];
            for out in 0..layer.outputs {
                grads[idx].biases[out] += delta[out];
                for (inp, a) in prev.iter().enumerate() {
                    grads[idx].weights[out * layer.inputs + inp] += delta[out] * a;
                }
            }
            if idx > 0 {
                let mut prev_delta = vec![0.0; layer.inputs];
                for (inp, pd) in prev_delta.iter_mut().enumerate() {
                    for out in 0..layer.outputs {
                        *pd += layer.weights[out * layer.inputs + inp] * delta[out];
                    }
                    // tanh'(z) = 1 - a^2 for the hidden activation below.
                    *pd *= 1.0 - prev[inp] * prev[inp];
                }
                delta = prev_delta;
            }
        }
    }

    for (g, l) in grads.iter_mut().zip(&net.layers) {
        for (gw, w) in g.weights.iter_mut().zip(&l.weights) {
            *gw += 2.0 * l2 * w;
        }
    }
    Ok(GradientBundle { layers: grads })
}

/// Trains a fresh network with Adam (beta1 = 0.9, beta2 = 0.999,
/// eps = 1e-8), stopping after `max_iterations` steps or when the loss
/// change falls below 1e-10. Deterministic for a given seed.
pub fn train(config: &MlpConfig, x: &[Vec<f64>], y: &[f64]) -> Result<MlpNetwork, MlpError> {
    config.validate()?;
    if x.len() < 2 {
        return Err(MlpError::TooFewRows { rows: x.len() });
    }
    let n_inputs = x[0].len();
    for row in x {
        if row.len() != n_inputs {
            return Err(MlpError::DimensionMismatch {
                got: row.len(),
                expected: n_inputs,
            });
        }
    }

    let n = x.len() as f64;
    let column_stats = |j: usize| -> (f64, f64) {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
    };
    let (input_means, input_sds): (Vec<f64>, Vec<f64>) = (0..n_inputs).map(column_stats).unzip();
    let target_mean = y.iter().sum::<f64>() / n;
    let target_var = y.iter().map(|v| (v - target_mean).powi(2)).sum::<f64>() / n;
    let target_sd = if target_var > 0.0 {
        target_var.sqrt()
    } else {
        1.0
    };

    // Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut widths = vec![n_inputs];
    widths.extend_from_slice(&config.hidden_layers);
    widths.push(1);
    let layers: Vec<LayerParams> = widths
        .windows(2)
        .map(|pair| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            LayerParams {
                inputs: fan_in,
                outputs: fan_out,
                weights: (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
                biases: vec![0.0; fan_out],
            }
        })
        .collect();

    let mut net = MlpNetwork {
        layers,
        input_means,
        input_sds,
        target_mean,
        target_sd,
    };

    let mut m: Vec<LayerParams> = zero_like(&net);
    let mut v: Vec<LayerParams> = zero_like(&net);
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut previous_loss = f64::INFINITY;

    for iter in 1..=config.max_iterations {
        let grads = gradients(&net, x, y, config.l2_penalty)?;
        let correction1 = 1.0 - beta1.powi(iter as i32);
        let correction2 = 1.0 - beta2.powi(iter as i32);
        for (layer_idx, grad) in grads.layers.iter().enumerate() {
            let update = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *param -= config.learning_rate * m_hat / (v_hat.sqrt() + eps);
            };
            for (k, g) in grad.weights.iter().enumerate() {
                update(
                    &mut net.layers[layer_idx].weights[k],
                    *g,
                    &mut m[layer_idx].weights[k],
                    &mut v[layer_idx].weights[k],
                );
            }
            for (k, g) in grad.biases.iter().enumerate() {
                update(
                    &mut net.layers[layer_idx].biases[k],
                    *g,
                    &mut m[layer_idx].biases[k],
                    &mut v[layer_idx].biases[k],
                );
            }
        }
        let current = loss(&net, x, y, config.l2_penalty)?;
        if !current.is_finite() {
            return Err(MlpError::NonFiniteLoss { iteration: iter });
        }
        if (previous_loss - current).abs() < 1e-10 {
            break;
        }
        previous_loss = current;
    }
    Ok(net)
}

fn zero_like(net: &MlpNetwork) -> Vec<LayerParams> {
    net.layers
        .iter()
        .map(|l| LayerParams {
            inputs: l.inputs,
            outputs: l.outputs,
            weights: vec![0.0; l.weights.len()],
            biases: vec![0.0; l.biases.len()],
        })
        .collect()
}

/// Grid search over configurations; the winner has the lowest validation
/// RMSE, with ties going to fewer parameters and then lower learning rate.
pub fn tune(
    grid: &[MlpConfig],
    x_train: &[Vec<f64>],
    y_train: &[f64],
    x_validation: &[Vec<f64>],
    y_validation: &[f64],
) -> Result<(MlpConfig, MlpNetwork), MlpError> {
    let mut best: Option<(f64, usize, &MlpConfig, MlpNetwork)> = None;
    for config in grid {
        let Ok(net) = train(config, x_train, y_train) else {
            continue;
        };
        let mut sq = 0.0;
        let mut ok = true;
        for (row, target) in x_validation.iter().zip(y_validation) {
            match forward(&net, row) {
                Ok(pred) => sq += (pred - target) * (pred - target),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let rmse = (sq / x_validation.len() as f64).sqrt();
        if !rmse.is_finite() {
            continue;
        }
        let params = net.parameter_count();
        let better = match &best {
            None => true,
            Some((best_rmse, best_params, best_config, _)) => {
                rmse < *best_rmse
                    || (rmse == *best_rmse && params < *best_params)
                    || (rmse == *best_rmse
                        && params == *best_params
                        && config.learning_rate < best_config.learning_rate)
            }
        };
        if better {
            best = Some((rmse, params, config, net));
        }
    }
    best.map(|(_, _, config, net)| (config.clone(), net))
        .ok_or(MlpError::AllRunsFailed)
}
