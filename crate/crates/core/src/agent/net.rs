//! Split-input actor-critic network.
//!
//! ```text
//! situational (5) -> dense -> relu -> dense -> relu --+
//!                                                     +-> concat -> dense -> relu -+-> policy logits
//! configuration (3) -> dense -> relu -----------------+                            +-> value
//! ```

use serde::{Deserialize, Serialize};

use crate::env::{State, CONFIG_INPUTS, SITUATIONAL_INPUTS};
use crate::error::{QramError, Result};
use crate::problem::ConfigSpace;
use crate::rng::Prng;

pub const HIDDEN: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub situational_inputs: usize,
    pub config_inputs: usize,
    pub hidden: usize,
    pub actions: usize,
}

impl NetShape {
    /// Standard shape for an action per configuration of `space`.
    pub fn for_space(space: &ConfigSpace) -> Self {
        NetShape { situational_inputs: SITUATIONAL_INPUTS, config_inputs: CONFIG_INPUTS, hidden: HIDDEN, actions: space.len() }
    }
}

/// Fully connected layer, weights row-major `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut Prng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.uniform_in(-limit, limit)).collect();
        Dense { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    fn backward(&self, x: &[f64], dout: &[f64], grad: &mut Dense, want_dx: bool) -> Vec<f64> {
        let mut dx = if want_dx { vec![0.0; self.inputs] } else { Vec::new() };
        for (o, &d) in dout.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.bias[o] += d;
            let row = o * self.inputs;
            for i in 0..self.inputs {
                grad.weights[row + i] += d * x[i];
            }
            if want_dx {
                for i in 0..self.inputs {
                    dx[i] += d * self.weights[row + i];
                }
            }
        }
        dx
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn relu_backward(post: &[f64], d: &mut [f64]) {
    for (g, &a) in d.iter_mut().zip(post) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentParams {
    pub shape: NetShape,
    pub situational_1: Dense,
    pub situational_2: Dense,
    pub config_1: Dense,
    pub trunk: Dense,
    pub policy: Dense,
    pub value: Dense,
}

/// Layer names in storage order.
pub const LAYER_NAMES: [&str; 6] = ["situational_1", "situational_2", "config_1", "trunk", "policy", "value"];

/// Per-layer activations of one forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct Activations {
    pub situational_in: Vec<f64>,
    pub config_in: Vec<f64>,
    pub h_situational_1: Vec<f64>,
    pub h_situational_2: Vec<f64>,
    pub h_config: Vec<f64>,
    pub joined: Vec<f64>,
    pub h_trunk: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

impl AgentParams {
    fn build(shape: NetShape, mut make: impl FnMut(usize, usize) -> Dense) -> Self {
        let h = shape.hidden;
        AgentParams {
            shape,
            situational_1: make(shape.situational_inputs, h),
            situational_2: make(h, h),
            config_1: make(shape.config_inputs, h),
            trunk: make(2 * h, h),
            policy: make(h, shape.actions),
            value: make(h, 1),
        }
    }

    pub fn zeros(shape: NetShape) -> Self {
        AgentParams::build(shape, Dense::zeros)
    }

    pub fn init(shape: NetShape, seed: u64) -> Self {
        let mut rng = Prng::new(seed);
        AgentParams::build(shape, |i, o| Dense::glorot(i, o, &mut rng))
    }

    pub fn layers(&self) -> [&Dense; 6] {
        [&self.situational_1, &self.situational_2, &self.config_1, &self.trunk, &self.policy, &self.value]
    }

    pub fn layers_mut(&mut self) -> [&mut Dense; 6] {
        [
            &mut self.situational_1,
            &mut self.situational_2,
            &mut self.config_1,
            &mut self.trunk,
            &mut self.policy,
            &mut self.value,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        let [a, b, c, d, e, f] = self.layers();
        a.params().chain(b.params()).chain(c.params()).chain(d.params()).chain(e.params()).chain(f.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        let [a, b, c, d, e, f] = self.layers_mut();
        a.params_mut()
            .chain(b.params_mut())
            .chain(c.params_mut())
            .chain(d.params_mut())
            .chain(e.params_mut())
            .chain(f.params_mut())
    }

    pub fn forward_cached(&self, situational: &[f64], config: &[f64]) -> Result<Activations> {
        if situational.len() != self.shape.situational_inputs || config.len() != self.shape.config_inputs {
            return Err(QramError::contract(format!(
                "network expects {}+{} inputs, got {}+{}",
                self.shape.situational_inputs,
                self.shape.config_inputs,
                situational.len(),
                config.len()
            )));
        }
        let mut h1 = self.situational_1.forward(situational);
        relu(&mut h1);
        let mut h2 = self.situational_2.forward(&h1);
        relu(&mut h2);
        let mut h3 = self.config_1.forward(config);
        relu(&mut h3);
        let joined: Vec<f64> = h2.iter().chain(&h3).copied().collect();
        let mut h4 = self.trunk.forward(&joined);
        relu(&mut h4);
        let logits = self.policy.forward(&h4);
        let value = self.value.forward(&h4)[0];
        Ok(Activations {
            situational_in: situational.to_vec(),
            config_in: config.to_vec(),
            h_situational_1: h1,
            h_situational_2: h2,
            h_config: h3,
            joined,
            h_trunk: h4,
            logits,
            value,
        })
    }

    /// Policy logits and state value.
    pub fn forward(&self, state: &State) -> Result<(Vec<f64>, f64)> {
        let a = self.forward_cached(&state.situational_input(), &state.config_input())?;
        Ok((a.logits, a.value))
    }

    /// Adds the parameter gradient for output gradients `dlogits`, `dvalue` to `grad`.
    pub fn backward(&self, act: &Activations, dlogits: &[f64], dvalue: f64, grad: &mut AgentParams) {
        let h = self.shape.hidden;
        let mut dh4 = self.policy.backward(&act.h_trunk, dlogits, &mut grad.policy, true);
        let dv = self.value.backward(&act.h_trunk, &[dvalue], &mut grad.value, true);
        for (a, b) in dh4.iter_mut().zip(dv) {
            *a += b;
        }
        relu_backward(&act.h_trunk, &mut dh4);
        let djoined = self.trunk.backward(&act.joined, &dh4, &mut grad.trunk, true);
        let (dh2, dh3) = djoined.split_at(h);
        let mut dh3 = dh3.to_vec();
        relu_backward(&act.h_config, &mut dh3);
        self.config_1.backward(&act.config_in, &dh3, &mut grad.config_1, false);
        let mut dh2 = dh2.to_vec();
        relu_backward(&act.h_situational_2, &mut dh2);
        let mut dh1 = self.situational_2.backward(&act.h_situational_1, &dh2, &mut grad.situational_2, true);
        relu_backward(&act.h_situational_1, &mut dh1);
        self.situational_1.backward(&act.situational_in, &dh1, &mut grad.situational_1, false);
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Draws an action from `softmax(logits)` by inverse CDF.
pub fn sample_action(logits: &[f64], rng: &mut Prng) -> usize {
    let probs = softmax(logits);
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left the total a hair below one; take the last likely action
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Argmax with the lowest index winning ties.
pub fn greedy_action(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best
}
