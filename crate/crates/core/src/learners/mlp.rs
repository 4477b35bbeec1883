//! Fully connected perceptron network with a linear output unit.
//!
//! Trained by mini-batch gradient descent with momentum on mean squared
//! error plus an L2 penalty on the connection weights (biases are not
//! penalized). Inputs and target are standardized with training statistics.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LearnerError, Params, Result};
use crate::dataset::FeatureMatrix;
use crate::hpo::ParamSetting;
use crate::seed;

/// Largest gradient norm applied in a single update.
const MAX_GRAD_NORM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Linear => 1.0,
        }
    }
}

/// Layer widths and hidden activation. Weights live in one flat vector:
/// for each layer, the `out x in` matrix (row-major) followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub n_inputs: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

struct Workspace {
    /// Post-activation values per layer, layer 0 = inputs.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl MlpArchitecture {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden.len() + 2);
        s.push(self.n_inputs);
        s.extend(&self.hidden);
        s.push(1);
        s
    }

    pub fn n_weights(&self) -> usize {
        self.layer_sizes().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn workspace(&self) -> Workspace {
        let sizes = self.layer_sizes();
        Workspace {
            acts: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            deltas: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    fn forward_into(&self, w: &[f64], x: &[f64], ws: &mut Workspace) -> f64 {
        ws.acts[0].copy_from_slice(x);
        let n_layers = ws.acts.len() - 1;
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (ws.acts[l].len(), ws.acts[l + 1].len());
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let output = &mut next[0];
            let weights = &w[off..off + n_in * n_out];
            let biases = &w[off + n_in * n_out..off + n_in * n_out + n_out];
            let last = l + 1 == n_layers;
            for o in 0..n_out {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let z = biases[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                output[o] = if last { z } else { self.activation.apply(z) };
            }
            off += n_in * n_out + n_out;
        }
        ws.acts[n_layers][0]
    }

    /// Network output for one (already standardized) input row.
    pub fn forward(&self, w: &[f64], x: &[f64]) -> f64 {
        self.forward_into(w, x, &mut self.workspace())
    }

    /// Adds `d(scale * (f(x) - y)^2)/dw` to `grad`; returns `(f(x) - y)^2`.
    fn accumulate(&self, w: &[f64], x: &[f64], y: f64, scale: f64, grad: &mut [f64], ws: &mut Workspace) -> f64 {
        let out = self.forward_into(w, x, ws);
        let err = out - y;
        let n_layers = ws.acts.len() - 1;
        ws.deltas[n_layers][0] = 2.0 * scale * err;

        let sizes: Vec<usize> = ws.acts.iter().map(Vec::len).collect();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += sizes[l] * sizes[l + 1] + sizes[l + 1];
        }
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let off = offsets[l];
            let (lower, upper) = ws.deltas.split_at_mut(l + 1);
            let delta_out = &upper[0];
            let input = &ws.acts[l];
            for o in 0..n_out {
                let d = delta_out[o];
                let g_row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (g, a) in g_row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let delta_in = &mut lower[l];
                delta_in.fill(0.0);
                for o in 0..n_out {
                    let d = delta_out[o];
                    let row = &w[off + o * n_in..off + (o + 1) * n_in];
                    for (di, wi) in delta_in.iter_mut().zip(row) {
                        *di += d * wi;
                    }
                }
                for (di, a) in delta_in.iter_mut().zip(input) {
                    *di *= self.activation.derivative_from_output(*a);
                }
            }
        }
        err * err
    }

    /// Adds the L2 term over connection weights; returns its value.
    fn add_penalty(&self, w: &[f64], l2: f64, grad: &mut [f64]) -> f64 {
        let mut penalty = 0.0;
        let mut off = 0;
        for s in self.layer_sizes().windows(2) {
            let n = s[0] * s[1];
            for (g, wi) in grad[off..off + n].iter_mut().zip(&w[off..off + n]) {
                penalty += wi * wi;
                *g += 2.0 * l2 * wi;
            }
            off += n + s[1];
        }
        l2 * penalty
    }

    /// Mean squared error plus `l2 * sum(weights^2)` and its gradient.
    pub fn loss_gradient(&self, w: &[f64], x: &FeatureMatrix, y: &[f64], l2: f64) -> Result<(f64, Vec<f64>)> {
        if w.len() != self.n_weights() {
            return Err(LearnerError::Data(format!(
                "weight vector has {} entries, architecture needs {}",
                w.len(),
                self.n_weights()
            )));
        }
        if x.n_cols() != self.n_inputs || x.n_rows() != y.len() || y.is_empty() {
            return Err(LearnerError::Data("input shape does not match architecture".into()));
        }
        let mut grad = vec![0.0; w.len()];
        let mut ws = self.workspace();
        let scale = 1.0 / y.len() as f64;
        let mut loss = 0.0;
        for (row, &t) in x.rows().zip(y) {
            loss += self.accumulate(w, row, t, scale, &mut grad, &mut ws);
        }
        loss *= scale;
        loss += self.add_penalty(w, l2, &mut grad);
        Ok((loss, grad))
    }
}

/// Free-function form of [`MlpArchitecture::loss_gradient`].
pub fn mlp_loss_gradient(
    arch: &MlpArchitecture,
    weights: &[f64],
    x: &FeatureMatrix,
    y: &[f64],
    l2: f64,
) -> Result<(f64, Vec<f64>)> {
    arch.loss_gradient(weights, x, y, l2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_layers: usize,
    pub units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub activation: Activation,
    pub l2: f64,
    pub batch_size: usize,
    pub momentum: f64,
}

impl MlpParams {
    pub fn from_setting(setting: &ParamSetting) -> Result<Self> {
        let p = Params(setting);
        let activation = match p.text("activation", Some("relu"))?.as_str() {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "linear" => Activation::Linear,
            other => return Err(LearnerError::Config(format!("unknown activation `{other}`"))),
        };
        let learning_rate = p.real("learning_rate", None)?;
        let l2 = p.real("l2", Some(0.0))?;
        let momentum = p.real("momentum", Some(0.9))?;
        if learning_rate <= 0.0 {
            return Err(LearnerError::Config(format!(
                "`learning_rate` = {learning_rate}, must be positive"
            )));
        }
        if l2 < 0.0 || !(0.0..1.0).contains(&momentum) {
            return Err(LearnerError::Config("need l2 >= 0 and momentum in [0, 1)".into()));
        }
        Ok(MlpParams {
            hidden_layers: p.count("hidden_layers", 1, Some(1))?,
            units: p.count("units", 1, None)?,
            learning_rate,
            epochs: p.count("epochs", 1, None)?,
            activation,
            l2,
            batch_size: p.count("batch_size", 1, Some(32))?,
            momentum,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub arch: MlpArchitecture,
    pub weights: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
}

fn mean_scale(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

impl MlpModel {
    pub fn fit(params: &MlpParams, x: &FeatureMatrix, y: &[f64], seed: u64) -> Result<Self> {
        let n = y.len();
        let n_cols = x.n_cols();
        let arch = MlpArchitecture {
            n_inputs: n_cols,
            hidden: vec![params.units; params.hidden_layers],
            activation: params.activation,
        };
        let (x_mean, x_scale): (Vec<f64>, Vec<f64>) = (0..n_cols)
            .map(|c| mean_scale(&x.column(c)))
            .unzip();
        let (y_mean, y_sd) = mean_scale(y);
        let constant = y.iter().all(|&v| v == y[0]);
        let mut model = MlpModel {
            weights: vec![0.0; arch.n_weights()],
            arch,
            x_mean,
            x_scale,
            y_mean,
            y_scale: y_sd,
        };
        if constant {
            model.y_mean = y[0];
            return Ok(model);
        }

        let mut rng = seed::rng(seed);
        let sizes = model.arch.layer_sizes();
        let mut off = 0;
        for s in sizes.windows(2) {
            let limit = (6.0 / (s[0] + s[1]) as f64).sqrt();
            for w in &mut model.weights[off..off + s[0] * s[1]] {
                *w = rng.random_range(-limit..limit);
            }
            off += s[0] * s[1] + s[1];
        }

        let xs: Vec<f64> = x
            .rows()
            .flat_map(|r| {
                r.iter()
                    .zip(&model.x_mean)
                    .zip(&model.x_scale)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect::<Vec<_>>()
            })
            .collect();
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_sd).collect();

        let arch = model.arch.clone();
        let w = &mut model.weights;
        let mut velocity = vec![0.0; w.len()];
        let mut grad = vec![0.0; w.len()];
        let mut ws = arch.workspace();
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                grad.fill(0.0);
                let scale = 1.0 / batch.len() as f64;
                for &r in batch {
                    arch.accumulate(w, &xs[r * n_cols..(r + 1) * n_cols], ys[r], scale, &mut grad, &mut ws);
                }
                arch.add_penalty(w, params.l2, &mut grad);
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                let clip = if norm > MAX_GRAD_NORM { MAX_GRAD_NORM / norm } else { 1.0 };
                for ((wi, vi), gi) in w.iter_mut().zip(&mut velocity).zip(&grad) {
                    *vi = params.momentum * *vi - params.learning_rate * clip * gi;
                    *wi += *vi;
                }
            }
        }
        if model.weights.iter().any(|w| !w.is_finite()) {
            return Err(LearnerError::Diverged("non-finite network weights".into()));
        }
        Ok(model)
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let x: Vec<f64> = row
            .iter()
            .zip(&self.x_mean)
            .zip(&self.x_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        self.y_mean + self.y_scale * self.arch.forward(&self.weights, &x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(activation: Activation) -> MlpArchitecture {
        MlpArchitecture {
            n_inputs: 12,
            hidden: vec![4],
            activation,
        }
    }

    fn random_problem(n: usize, seed_: u64) -> (FeatureMatrix, Vec<f64>, Vec<f64>) {
        let mut rng = seed::rng(seed_);
        let a = arch(Activation::Tanh);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..12).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let x = FeatureMatrix::from_rows((0..12).map(|i| format!("x{i}")).collect(), &rows).unwrap();
        let y = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w = (0..a.n_weights()).map(|_| rng.random_range(-0.8..0.8)).collect();
        (x, y, w)
    }

    #[test]
    fn weight_count() {
        assert_eq!(arch(Activation::Relu).n_weights(), 12 * 4 + 4 + 4 + 1);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let a = arch(Activation::Linear);
        let w = vec![0.0; a.n_weights()];
        assert_eq!(a.forward(&w, &[3.0; 12]), 0.0);
    }

    #[test]
    fn zero_gradient_at_exact_fit() {
        let (x, _, w) = random_problem(15, 4);
        let a = arch(Activation::Tanh);
        let y: Vec<f64> = x.rows().map(|r| a.forward(&w, r)).collect();
        let (loss, grad) = a.loss_gradient(&w, &x, &y, 0.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn penalty_gradient_is_linear_in_l2() {
        let (x, y, w) = random_problem(10, 5);
        let a = arch(Activation::Relu);
        let (_, g0) = a.loss_gradient(&w, &x, &y, 0.0).unwrap();
        let (_, g1) = a.loss_gradient(&w, &x, &y, 0.01).unwrap();
        let (_, g2) = a.loss_gradient(&w, &x, &y, 0.02).unwrap();
        for i in 0..w.len() {
            let p1 = g1[i] - g0[i];
            let p2 = g2[i] - g0[i];
            assert!((p2 - 2.0 * p1).abs() < 1e-12, "coordinate {i}");
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let (x, y, w) = random_problem(5, 1);
        assert!(arch(Activation::Relu).loss_gradient(&w[1..], &x, &y, 0.0).is_err());
    }

    #[test]
    fn constant_target_predicts_constant() {
        let (x, _, _) = random_problem(20, 2);
        let s = ParamSetting::new()
            .with("units", 4i64)
            .with("learning_rate", 0.01)
            .with("epochs", 5i64);
        let m = MlpModel::fit(&MlpParams::from_setting(&s).unwrap(), &x, &[7.0; 20], 0).unwrap();
        assert!(x.rows().all(|r| m.predict_row(r) == 7.0));
    }
}
