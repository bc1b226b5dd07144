//! Single-worker advantage actor-critic training.

use serde::Serialize;

use super::net::{log_softmax, sample_action, softmax, AgentParams, NetShape};
use crate::env::{EnvConfig, QramEnv, State};
use crate::error::{QramError, Result};
use crate::rng::Prng;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub discount: f64,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub total_steps: usize,
    pub seed: u64,
    pub hidden: usize,
    /// Episodes per learning-curve row.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            env: EnvConfig::default(),
            discount: 0.005,
            learning_rate: 7e-4,
            rmsprop_decay: 0.99,
            rmsprop_epsilon: 1e-5,
            entropy_coeff: 0.01,
            value_coeff: 0.5,
            total_steps: 30_000,
            seed: 0,
            hidden: super::net::HIDDEN,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(QramError::argument(format!("discount {} outside [0, 1)", self.discount)));
        }
        let rates = [
            ("learning rate", self.learning_rate),
            ("rmsprop epsilon", self.rmsprop_epsilon),
            ("hidden width", self.hidden as f64),
            ("log interval", self.log_every as f64),
            ("episode length", self.env.episode_len as f64),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err(QramError::argument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) {
            return Err(QramError::argument(format!("rmsprop decay {} outside [0, 1)", self.rmsprop_decay)));
        }
        if !(self.entropy_coeff >= 0.0 && self.value_coeff >= 0.0) {
            return Err(QramError::argument("loss coefficients must be non-negative"));
        }
        Ok(())
    }

    pub fn shape(&self) -> NetShape {
        NetShape { hidden: self.hidden, ..NetShape::for_space(&self.env.space) }
    }
}

/// RMSprop running mean squares, one per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub mean_square: AgentParams,
}

impl OptimizerState {
    pub fn new(shape: NetShape) -> Self {
        OptimizerState { mean_square: AgentParams::zeros(shape) }
    }
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub state: State,
    pub action: usize,
    pub reward: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct UpdateMetrics {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        g = r + gamma * g;
        out[i] = g;
    }
    out
}

fn check_trajectory(traj: &[Transition], cfg: &TrainConfig) -> Result<()> {
    if traj.len() != cfg.env.episode_len {
        return Err(QramError::contract(format!(
            "trajectory has {} transitions, episode length is {}",
            traj.len(),
            cfg.env.episode_len
        )));
    }
    Ok(())
}

/// Loss of an episode with the advantages held fixed.
pub fn episode_loss(params: &AgentParams, traj: &[Transition], cfg: &TrainConfig, advantages: &[f64]) -> Result<UpdateMetrics> {
    let returns = discounted_returns(&traj.iter().map(|t| t.reward).collect::<Vec<_>>(), cfg.discount);
    let mut m = UpdateMetrics::default();
    for ((t, g), a) in traj.iter().zip(&returns).zip(advantages) {
        let (logits, v) = params.forward(&t.state)?;
        let logp = log_softmax(&logits);
        let entropy: f64 = -logp.iter().map(|lp| lp.exp() * lp).sum::<f64>();
        m.policy_loss -= a * logp[t.action];
        m.value_loss += (g - v) * (g - v);
        m.entropy += entropy;
    }
    m.loss = m.policy_loss + cfg.value_coeff * m.value_loss - cfg.entropy_coeff * m.entropy;
    Ok(m)
}

/// Analytic loss gradient for one episode, plus the loss terms and the advantages used.
pub fn episode_gradients(params: &AgentParams, traj: &[Transition], cfg: &TrainConfig) -> Result<(AgentParams, UpdateMetrics, Vec<f64>)> {
    check_trajectory(traj, cfg)?;
    let returns = discounted_returns(&traj.iter().map(|t| t.reward).collect::<Vec<_>>(), cfg.discount);
    let mut grad = AgentParams::zeros(params.shape);
    let mut m = UpdateMetrics::default();
    let mut advantages = Vec::with_capacity(traj.len());
    for (t, &g) in traj.iter().zip(&returns) {
        let act = params.forward_cached(&t.state.situational_input(), &t.state.config_input())?;
        if t.action >= act.logits.len() {
            return Err(QramError::contract(format!("action {} out of range", t.action)));
        }
        let probs = softmax(&act.logits);
        let logp = log_softmax(&act.logits);
        let entropy: f64 = -probs.iter().zip(&logp).map(|(p, lp)| p * lp).sum::<f64>();
        let adv = g - act.value;
        advantages.push(adv);
        m.policy_loss -= adv * logp[t.action];
        m.value_loss += adv * adv;
        m.entropy += entropy;

        let dlogits: Vec<f64> = probs
            .iter()
            .zip(&logp)
            .enumerate()
            .map(|(k, (p, lp))| {
                let onehot = if k == t.action { 1.0 } else { 0.0 };
                adv * (p - onehot) + cfg.entropy_coeff * p * (lp + entropy)
            })
            .collect();
        let dvalue = -2.0 * cfg.value_coeff * adv;
        params.backward(&act, &dlogits, dvalue, &mut grad);
    }
    m.loss = m.policy_loss + cfg.value_coeff * m.value_loss - cfg.entropy_coeff * m.entropy;
    Ok((grad, m, advantages))
}

/// One A2C step on a complete episode, updating `params` and `opt` in place.
pub fn a2c_update(params: &mut AgentParams, opt: &mut OptimizerState, traj: &[Transition], cfg: &TrainConfig) -> Result<UpdateMetrics> {
    let (grad, m, _) = episode_gradients(params, traj, cfg)?;
    if !m.loss.is_finite() || grad.params().any(|g| !g.is_finite()) {
        let steps: Vec<String> = traj
            .iter()
            .map(|t| format!("(config {}, action {}, reward {})", t.state.config_index, t.action, t.reward))
            .collect();
        return Err(QramError::Training(format!(
            "non-finite loss {} (policy {}, value {}, entropy {}) on episode [{}]",
            m.loss,
            m.policy_loss,
            m.value_loss,
            m.entropy,
            steps.join(", ")
        )));
    }
    let (lr, decay, eps) = (cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon);
    for ((theta, ms), g) in params.params_mut().zip(opt.mean_square.params_mut()).zip(grad.params()) {
        *ms = decay * *ms + (1.0 - decay) * g * g;
        *theta -= lr * g / (*ms + eps).sqrt();
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub step: usize,
    pub episode: usize,
    pub mean_episode_reward: f64,
    pub mean_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: AgentParams,
    pub optimizer: OptimizerState,
    pub curve: Vec<CurvePoint>,
    /// Total reward of every episode, in order.
    pub episode_rewards: Vec<f64>,
}

const ENV_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const ACTION_STREAM: u64 = 3;

pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let shape = cfg.shape();
    let mut params = AgentParams::init(shape, Prng::derive(cfg.seed, INIT_STREAM).next_u64());
    let mut opt = OptimizerState::new(shape);
    let mut env = QramEnv::new(cfg.env.clone(), Prng::derive(cfg.seed, ENV_STREAM).next_u64());
    let mut actions = Prng::derive(cfg.seed, ACTION_STREAM);

    let episodes = cfg.total_steps / cfg.env.episode_len;
    let mut curve = Vec::new();
    let mut episode_rewards = Vec::with_capacity(episodes);
    let (mut window_reward, mut window_loss, mut window_len) = (0.0, 0.0, 0usize);
    let mut traj = Vec::with_capacity(cfg.env.episode_len);
    for episode in 0..episodes {
        traj.clear();
        let mut state = env.reset();
        while !env.done() {
            let (logits, _) = params.forward(&state)?;
            let action = sample_action(&logits, &mut actions);
            let step = env.step(action)?;
            traj.push(Transition { state, action, reward: step.reward });
            state = step.next_state;
        }
        let m = a2c_update(&mut params, &mut opt, &traj, cfg)?;
        let total: f64 = traj.iter().map(|t| t.reward).sum();
        episode_rewards.push(total);
        window_reward += total;
        window_loss += m.loss;
        window_len += 1;
        if window_len == cfg.log_every || episode + 1 == episodes {
            curve.push(CurvePoint {
                step: (episode + 1) * cfg.env.episode_len,
                episode: episode + 1,
                mean_episode_reward: window_reward / window_len as f64,
                mean_loss: window_loss / window_len as f64,
            });
            (window_reward, window_loss, window_len) = (0.0, 0.0, 0);
        }
    }
    Ok(TrainOutcome { params, optimizer: opt, curve, episode_rewards })
}

/// Parameters `train` starts from for this configuration.
pub fn initial_params(cfg: &TrainConfig) -> AgentParams {
    AgentParams::init(cfg.shape(), Prng::derive(cfg.seed, INIT_STREAM).next_u64())
}
