use rand::Rng;
use serde::{Deserialize, Serialize};

use super::distance::robust_scale;
use super::{Acceptance, AdjustOptions, Method, ReferenceTable, WeightedPosterior};
use crate::rng::stream;
use crate::summaries::SummaryVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub hidden: usize,
    /// L2 penalty on the connection weights (biases are not penalised).
    pub decay: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Seed for the weight initialisation.
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { hidden: 5, decay: 1e-2, iterations: 10_000, learning_rate: 1e-2, seed: 1 }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Single-hidden-layer perceptron with logistic hidden units and a linear
/// output layer. Parameters are stored flat as `[W1, b1, W2, b2]` with the
/// weight matrices row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn n_params(n_in: usize, n_hidden: usize, n_out: usize) -> usize {
        n_hidden * n_in + n_hidden + n_out * n_hidden + n_out
    }

    pub fn zeros(n_in: usize, n_hidden: usize, n_out: usize) -> Self {
        Mlp { n_in, n_hidden, n_out, params: vec![0.0; Self::n_params(n_in, n_hidden, n_out)] }
    }

    /// Weights uniform on `(-1, 1) / sqrt(fan_in)`, biases zero.
    pub fn init(n_in: usize, n_hidden: usize, n_out: usize, seed: u64) -> Self {
        let mut net = Self::zeros(n_in, n_hidden, n_out);
        let mut rng = stream(seed, 0);
        let (w1, w2) = (n_hidden * n_in, n_out * n_hidden);
        let s1 = 1.0 / (n_in as f64).sqrt();
        let s2 = 1.0 / (n_hidden as f64).sqrt();
        for p in &mut net.params[..w1] {
            *p = s1 * (2.0 * rng.random::<f64>() - 1.0);
        }
        let off = w1 + n_hidden;
        for p in &mut net.params[off..off + w2] {
            *p = s2 * (2.0 * rng.random::<f64>() - 1.0);
        }
        net
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.n_hidden * self.n_in;
        let w2 = b1 + self.n_hidden;
        let b2 = w2 + self.n_out * self.n_hidden;
        (b1, w2, b2)
    }

    /// Indices of penalised (non-bias) parameters.
    fn is_weight(&self, index: usize) -> bool {
        let (b1, w2, b2) = self.offsets();
        index < b1 || (index >= w2 && index < b2)
    }

    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let (_, _, b2) = self.offsets();
        &mut self.params[b2..]
    }

    fn hidden(&self, x: &[f64], act: &mut [f64]) {
        let (b1, _, _) = self.offsets();
        for (j, a) in act.iter_mut().enumerate() {
            let row = &self.params[j * self.n_in..(j + 1) * self.n_in];
            let z = self.params[b1 + j] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
            *a = sigmoid(z);
        }
    }

    fn output(&self, act: &[f64], out: &mut [f64]) {
        let (_, w2, b2) = self.offsets();
        for (o, y) in out.iter_mut().enumerate() {
            let row = &self.params[w2 + o * self.n_hidden..w2 + (o + 1) * self.n_hidden];
            *y = self.params[b2 + o] + row.iter().zip(act).map(|(w, a)| w * a).sum::<f64>();
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.n_hidden];
        let mut out = vec![0.0; self.n_out];
        self.hidden(x, &mut act);
        self.output(&act, &mut out);
        out
    }

    /// Weighted mean squared error plus `decay * ||weights||^2`, and its
    /// gradient. `xs` is row-major `n x n_in`, `ys` row-major `n x n_out`.
    pub fn loss_and_grad(&self, xs: &[f64], ys: &[f64], weights: &[f64], decay: f64) -> (f64, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let total_w: f64 = weights.iter().sum();
        let norm = if total_w > 0.0 { 1.0 / total_w } else { 1.0 };
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let mut act = vec![0.0; self.n_hidden];
        let mut out = vec![0.0; self.n_out];
        let mut g_out = vec![0.0; self.n_out];
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let x = &xs[i * self.n_in..(i + 1) * self.n_in];
            let y = &ys[i * self.n_out..(i + 1) * self.n_out];
            self.hidden(x, &mut act);
            self.output(&act, &mut out);
            for o in 0..self.n_out {
                let r = out[o] - y[o];
                loss += norm * w * r * r;
                g_out[o] = 2.0 * norm * w * r;
                grad[b2 + o] += g_out[o];
                for (j, a) in act.iter().enumerate() {
                    grad[w2 + o * self.n_hidden + j] += g_out[o] * a;
                }
            }
            for (j, a) in act.iter().enumerate() {
                let da: f64 = (0..self.n_out).map(|o| g_out[o] * self.params[w2 + o * self.n_hidden + j]).sum();
                let dz = da * a * (1.0 - a);
                grad[b1 + j] += dz;
                for (k, xk) in x.iter().enumerate() {
                    grad[j * self.n_in + k] += dz * xk;
                }
            }
        }
        for (idx, p) in self.params.iter().enumerate() {
            if self.is_weight(idx) {
                loss += decay * p * p;
                grad[idx] += 2.0 * decay * p;
            }
        }
        (loss, grad)
    }

    /// Full-batch training with Adam steps for a fixed number of iterations.
    pub fn train(&mut self, xs: &[f64], ys: &[f64], weights: &[f64], config: &NetConfig) -> Result<f64> {
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        let mut m = vec![0.0; self.params.len()];
        let mut v = vec![0.0; self.params.len()];
        let mut loss = f64::NAN;
        for it in 1..=config.iterations {
            let (l, g) = self.loss_and_grad(xs, ys, weights, config.decay);
            if !l.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return Err(Error::TrainingDiverged { iteration: it });
            }
            loss = l;
            let c1 = 1.0 - BETA1.powi(it as i32);
            let c2 = 1.0 - BETA2.powi(it as i32);
            for (k, gk) in g.iter().enumerate() {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * gk;
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * gk * gk;
                self.params[k] -= config.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + 1e-8);
            }
        }
        Ok(loss)
    }
}

/// A trained network together with the input and target standardisation.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedNet {
    pub net: Mlp,
    pub x_center: [f64; 4],
    pub x_scale: [f64; 4],
    pub y_center: [f64; 2],
    pub y_scale: [f64; 2],
}

impl FittedNet {
    fn inputs(&self, s: &SummaryVector) -> [f64; 4] {
        let a = s.to_array();
        std::array::from_fn(|k| (a[k] - self.x_center[k]) / self.x_scale[k])
    }

    /// Conditional mean of the (transformed) parameters given `s`.
    pub fn predict(&self, s: &SummaryVector) -> [f64; 2] {
        let out = self.net.forward(&self.inputs(s));
        [out[0] * self.y_scale[0] + self.y_center[0], out[1] * self.y_scale[1] + self.y_center[1]]
    }

    /// `m(s_obs) + (target_i - m(s_i))` per row.
    pub fn correct(&self, summaries: &[SummaryVector], targets: &[[f64; 2]], s_obs: &SummaryVector) -> Vec<[f64; 2]> {
        let at_obs = self.predict(s_obs);
        summaries
            .iter()
            .zip(targets)
            .map(|(s, t)| {
                let m = self.predict(s);
                [at_obs[0] + t[0] - m[0], at_obs[1] + t[1] - m[1]]
            })
            .collect()
    }
}

fn weighted_center_scale(values: impl Iterator<Item = f64> + Clone, weights: &[f64]) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    let mean = values.clone().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    let var = values.zip(weights).map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>() / total;
    let sd = var.sqrt();
    (mean, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
}

/// Fit the regression network of transformed targets on summaries.
pub fn fit_network(
    summaries: &[SummaryVector],
    targets: &[[f64; 2]],
    weights: &[f64],
    s_obs: &SummaryVector,
    config: &NetConfig,
) -> Result<FittedNet> {
    let n = summaries.len();
    let mut column = Vec::with_capacity(n);
    let x_scale: [f64; 4] = std::array::from_fn(|k| {
        column.clear();
        column.extend(summaries.iter().map(|s| s.to_array()[k]));
        robust_scale(&column)
    });
    let mut y_center = [0.0; 2];
    let mut y_scale = [1.0; 2];
    for k in 0..2 {
        (y_center[k], y_scale[k]) = weighted_center_scale(targets.iter().map(|t| t[k]), weights);
    }
    let mut fitted = FittedNet {
        net: Mlp::init(4, config.hidden, 2, config.seed),
        x_center: s_obs.to_array(),
        x_scale,
        y_center,
        y_scale,
    };
    let xs: Vec<f64> = summaries.iter().flat_map(|s| fitted.inputs(s)).collect();
    let ys: Vec<f64> = targets
        .iter()
        .flat_map(|t| [(t[0] - y_center[0]) / y_scale[0], (t[1] - y_center[1]) / y_scale[1]])
        .collect();
    fitted.net.train(&xs, &ys, weights, config)?;
    Ok(fitted)
}

/// Neural-network regression adjustment of the accepted draws.
pub fn neuralnet_adjust(
    table: &ReferenceTable,
    acceptance: &Acceptance,
    s_obs: &SummaryVector,
    config: &NetConfig,
    options: &AdjustOptions,
) -> Result<WeightedPosterior> {
    let n = acceptance.indices.len();
    let needed = 10 * config.hidden.max(1);
    if n < needed {
        return Err(Error::InsufficientRows { needed, available: n });
    }
    let summaries: Vec<SummaryVector> = acceptance.indices.iter().map(|&i| table.summaries[i]).collect();
    let targets: Vec<[f64; 2]> = acceptance
        .indices
        .iter()
        .map(|&i| table.params[i].map(|v| options.transform.forward(v)))
        .collect();
    let kernel = acceptance.kernel_weights();
    let mut fit_weights = kernel.clone();
    super::posterior::normalize(&mut fit_weights);
    let fitted = fit_network(&summaries, &targets, &fit_weights, s_obs, config)?;
    let draws = fitted.correct(&summaries, &targets, s_obs);
    Ok(super::finish_adjusted(table, acceptance, draws, kernel, Method::Neuralnet, options))
}
