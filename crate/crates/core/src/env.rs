//! Single-task MDP the agent is trained in.
//!
//! A state is (target type, current configuration, target kinematics). An
//! action is a configuration index. The environment swaps in the chosen
//! configuration and rewards the utility-per-resource difference quotient
//! against the previous one, clipped to `[-cap, cap]` and mapped to `[-1, 1]`.
//! Moves that free resources are penalized. Episodes last three steps and
//! keep their target fixed.

use serde::{Deserialize, Serialize};

use crate::error::{QramError, Result};
use crate::perf::{task_utility, Target, TargetType, MAX_SPEED, RANGE_KM};
use crate::problem::{default_bounds, ConfigSpace, Configuration, ResourceBounds};
use crate::problem::{compound_resource, resource_of};
use crate::rng::Prng;

/// Below this resource difference a quotient is treated as 0/0 or x/0.
pub const EPS_RESOURCE: f64 = 1e-9;
pub const EPS_UTILITY: f64 = 1e-12;
/// Default clip level of the raw quotient.
pub const QCAP: f64 = 50.0;
pub const EPISODE_LEN: usize = 3;

/// Situational inputs: type one-hot (3) then range and speed.
pub const SITUATIONAL_INPUTS: usize = 5;
pub const CONFIG_INPUTS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub space: ConfigSpace,
    pub bounds: ResourceBounds,
    pub episode_len: usize,
    pub reward_cap: f64,
    /// Reward for an action that lowers the compound resource; `None` keeps
    /// the plain clipped quotient.
    pub downgrade_reward: Option<f64>,
    pub reward_scale: RewardScale,
}

/// Map from the clipped quotient `q` in `[-cap, cap]` to a reward in `[-1, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardScale {
    /// `q / cap`
    Linear,
    /// `sign(q) ln(1 + |q|) / ln(1 + cap)`. Order-preserving, so the best
    /// move is unchanged, but first upgrades from the base configuration
    /// (quotients in the hundreds) stay distinguishable below the cap.
    #[default]
    Log,
}

impl RewardScale {
    pub fn apply(self, q: f64, cap: f64) -> f64 {
        let q = q.clamp(-cap, cap);
        match self {
            RewardScale::Linear => q / cap,
            RewardScale::Log => q.signum() * q.abs().ln_1p() / cap.ln_1p(),
        }
    }
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            space: ConfigSpace::table_one(),
            bounds: default_bounds(TRAINING_TARGETS),
            episode_len: EPISODE_LEN,
            reward_cap: QCAP,
            downgrade_reward: Some(-1.0),
            reward_scale: RewardScale::Log,
        }
    }
}

/// Scenario size whose default bounds define the training compound resource.
pub const TRAINING_TARGETS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub task_type: [f64; 3],
    /// Grid index over grid length minus one, per parameter.
    pub config_features: [f64; CONFIG_INPUTS],
    /// Range over 150 km, speed over 1000 m/s.
    pub situational_features: [f64; 2],
    pub config_index: usize,
}

impl State {
    pub fn encode(target: &Target, space: &ConfigSpace, config_index: usize) -> State {
        let mut task_type = [0.0; 3];
        task_type[target.ttype.index()] = 1.0;
        let idx = space.grid_indices(config_index);
        let lens = [space.dwell_grid().len(), space.tx_duration_grid().len(), space.tx_power_grid().len()];
        let mut config_features = [0.0; CONFIG_INPUTS];
        for j in 0..CONFIG_INPUTS {
            if lens[j] > 1 {
                config_features[j] = idx[j] as f64 / (lens[j] - 1) as f64;
            }
        }
        State {
            task_type,
            config_features,
            situational_features: [target.range / RANGE_KM.1, target.speed / MAX_SPEED],
            config_index,
        }
    }

    pub fn situational_input(&self) -> [f64; SITUATIONAL_INPUTS] {
        let [a, b, c] = self.task_type;
        let [r, s] = self.situational_features;
        [a, b, c, r, s]
    }

    pub fn config_input(&self) -> [f64; CONFIG_INPUTS] {
        self.config_features
    }

    pub fn target_type(&self) -> TargetType {
        let i = self.task_type.iter().position(|&v| v == 1.0).unwrap_or(0);
        TargetType::ALL[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: State,
    pub reward: f64,
    pub done: bool,
}

/// Utility gain per compound-resource change from `c_in` to `c`.
///
/// Near-zero resource changes give `0` when utility is also unchanged and
/// `+cap`/`-cap` by the sign of the utility change otherwise.
pub fn raw_quotient(c_in: &Configuration, c: &Configuration, target: &Target, bounds: &ResourceBounds, cap: f64) -> f64 {
    let du = task_utility(c, target) - task_utility(c_in, target);
    let r = |x: &Configuration| compound_resource(&resource_of(x), bounds).expect("two kinds");
    let dr = r(c) - r(c_in);
    quotient(du, dr, cap)
}

pub(crate) fn quotient(du: f64, dr: f64, cap: f64) -> f64 {
    if dr.abs() < EPS_RESOURCE {
        if du.abs() < EPS_UTILITY {
            0.0
        } else {
            cap.copysign(du)
        }
    } else {
        du / dr
    }
}

/// Index of the minimum-compound-resource configuration; ties go to the
/// higher utility, then the lexicographically smaller configuration.
pub fn base_index(space: &ConfigSpace, target: &Target, bounds: &ResourceBounds) -> usize {
    let mut best: Option<(usize, f64, f64, Configuration)> = None;
    for (i, c) in space.iter().enumerate() {
        let r = compound_resource(&resource_of(&c), bounds).expect("two kinds");
        let better = match &best {
            None => true,
            Some((_, br, bu, bc)) => {
                r < *br || (r == *br && {
                    let u = task_utility(&c, target);
                    u > *bu || (u == *bu && c.lex_cmp(bc).is_lt())
                })
            }
        };
        if better {
            best = Some((i, r, task_utility(&c, target), c));
        }
    }
    best.expect("non-empty space").0
}

pub struct QramEnv {
    cfg: EnvConfig,
    rng: Prng,
    target: Target,
    current: usize,
    steps: usize,
}

impl QramEnv {
    pub fn new(cfg: EnvConfig, seed: u64) -> Self {
        let mut rng = Prng::new(seed);
        let target = Target::sample(0, &mut rng);
        let current = base_index(&cfg.space, &target, &cfg.bounds);
        // finished until the first reset
        let steps = cfg.episode_len;
        QramEnv { cfg, rng, target, current, steps }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    /// Starts an episode on a fresh random target at its base configuration.
    pub fn reset(&mut self) -> State {
        self.target = Target::sample(0, &mut self.rng);
        self.current = base_index(&self.cfg.space, &self.target, &self.cfg.bounds);
        self.steps = 0;
        self.state()
    }

    /// Starts an episode on a given target, leaving the random stream untouched.
    pub fn reset_to(&mut self, target: Target) -> State {
        self.target = target;
        self.current = base_index(&self.cfg.space, &self.target, &self.cfg.bounds);
        self.steps = 0;
        self.state()
    }

    pub fn state(&self) -> State {
        State::encode(&self.target, &self.cfg.space, self.current)
    }

    pub fn done(&self) -> bool {
        self.steps >= self.cfg.episode_len
    }

    pub fn reward(&self, from: usize, to: usize) -> f64 {
        let space = &self.cfg.space;
        let (c_in, c) = (space.get(from), space.get(to));
        let cap = self.cfg.reward_cap;
        if let Some(penalty) = self.cfg.downgrade_reward {
            let r = |x: &Configuration| compound_resource(&resource_of(x), &self.cfg.bounds).expect("two kinds");
            if r(&c) - r(&c_in) <= -EPS_RESOURCE {
                return penalty;
            }
        }
        self.cfg.reward_scale.apply(raw_quotient(&c_in, &c, &self.target, &self.cfg.bounds, cap), cap)
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done() {
            return Err(QramError::contract("step called on a finished episode"));
        }
        if action >= self.cfg.space.len() {
            return Err(QramError::contract(format!("action {action} out of range")));
        }
        let reward = self.reward(self.current, action);
        self.current = action;
        self.steps += 1;
        Ok(StepResult { next_state: self.state(), reward, done: self.done() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn literal() -> EnvConfig {
        EnvConfig { downgrade_reward: None, ..EnvConfig::default() }
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = QramEnv::new(EnvConfig::default(), 12);
        let mut b = QramEnv::new(EnvConfig::default(), 12);
        for _ in 0..5 {
            assert_eq!(a.reset(), b.reset());
        }
    }

    #[test]
    fn reset_starts_at_minimum_resource() {
        let cfg = EnvConfig::default();
        let mut env = QramEnv::new(cfg.clone(), 3);
        let s = env.reset();
        // 1100 ms dwell, 2 ms, 1 kW is the cheapest point in both resources
        assert_eq!(s.config_features, [1.0, 0.0, 0.0]);
        assert_eq!(cfg.space.get(s.config_index), Configuration { dwell_length: 1100.0, transmit_duration: 2.0, transmit_power: 1.0 });
    }

    #[test]
    fn features_cover_the_unit_square() {
        let mut env = QramEnv::new(EnvConfig::default(), 77);
        let mut hist = [[0usize; 4]; 4];
        for _ in 0..10_000 {
            let s = env.reset();
            let [r, v] = s.situational_features;
            assert!((0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&v));
            assert!(s.task_type.iter().sum::<f64>() == 1.0);
            let (lo, hi) = s.target_type().speed_interval();
            assert!(v * MAX_SPEED >= lo && v * MAX_SPEED <= hi);
            hist[((r * 4.0) as usize).min(3)][((v * 4.0) as usize).min(3)] += 1;
        }
        // range starts at 5/150 and every speed quartile is reachable by some type
        for row in hist {
            for cell in row {
                assert!(cell > 100, "{hist:?}");
            }
        }
    }

    #[test]
    fn quotient_degenerate_cases() {
        let t = Target { id: 0, ttype: TargetType::Fighter, range: 70.0, speed: 200.0 };
        let b = default_bounds(20);
        let c = ConfigSpace::table_one().get(40);
        assert_eq!(raw_quotient(&c, &c, &t, &b, QCAP), 0.0);
        assert_eq!(quotient(0.1, 0.05, QCAP), 2.0);
        assert_eq!(quotient(0.1, 0.0, QCAP), QCAP);
        assert_eq!(quotient(-0.1, 1e-12, QCAP), -QCAP);
        assert_eq!(quotient(1e-14, 0.0, QCAP), 0.0);
    }

    #[test]
    fn quotient_argmax_matches_exhaustive_scan() {
        let cfg = EnvConfig::default();
        let mut env = QramEnv::new(cfg.clone(), 5);
        let s = env.reset();
        let t = *env.target();
        let from = cfg.space.get(s.config_index);
        let mut best = (0, f64::NEG_INFINITY);
        for (i, c) in cfg.space.iter().enumerate() {
            let du = task_utility(&c, &t) - task_utility(&from, &t);
            let dr = compound_resource(&resource_of(&c), &cfg.bounds).unwrap()
                - compound_resource(&resource_of(&from), &cfg.bounds).unwrap();
            let q = if dr.abs() < EPS_RESOURCE { if du.abs() < EPS_UTILITY { 0.0 } else { QCAP.copysign(du) } } else { du / dr };
            if q > best.1 {
                best = (i, q);
            }
        }
        let argmax = (0..90)
            .max_by(|&a, &b| {
                let qa = raw_quotient(&from, &cfg.space.get(a), &t, &cfg.bounds, QCAP);
                let qb = raw_quotient(&from, &cfg.space.get(b), &t, &cfg.bounds, QCAP);
                qa.total_cmp(&qb).then(b.cmp(&a))
            })
            .unwrap();
        assert_eq!(argmax, best.0);
    }

    #[test]
    fn staying_put_earns_nothing() {
        let mut env = QramEnv::new(EnvConfig::default(), 9);
        let s = env.reset();
        let r = env.step(s.config_index).unwrap();
        assert_eq!(r.reward, 0.0);
        assert_eq!(r.next_state, s);
    }

    #[test]
    fn large_quotient_is_capped() {
        let t = Target { id: 0, ttype: TargetType::Missile, range: 20.0, speed: 900.0 };
        let mut env = QramEnv::new(EnvConfig::default(), 0);
        env.reset_to(t);
        let cfg = env.config().clone();
        let (a, b) = (0..90)
            .flat_map(|a| (0..90).map(move |b| (a, b)))
            .find(|&(a, b)| raw_quotient(&cfg.space.get(a), &cfg.space.get(b), &t, &cfg.bounds, QCAP) > QCAP)
            .expect("some pair beats the cap");
        assert_eq!(env.reward(a, b), 1.0);
        for scale in [RewardScale::Linear, RewardScale::Log] {
            assert_eq!(scale.apply(500.0, QCAP), 1.0);
            assert_eq!(scale.apply(-500.0, QCAP), -1.0);
        }
    }

    #[test]
    fn literal_reward_prefers_downgrades_mid_frontier() {
        use crate::classic::upper_frontier;
        use crate::classic::JobPoint;
        let (mut literal_down, mut checked) = (0, 0);
        let mut rng = Prng::new(77);
        for _ in 0..200 {
            let t = Target::sample(0, &mut rng);
            let mut lit = QramEnv::new(literal(), 0);
            let mut pen = QramEnv::new(EnvConfig::default(), 0);
            lit.reset_to(t);
            pen.reset_to(t);
            let cfg = pen.config().clone();
            let r = |i: usize| compound_resource(&resource_of(&cfg.space.get(i)), &cfg.bounds).unwrap();
            let pts: Vec<JobPoint> = cfg
                .space
                .iter()
                .map(|c| JobPoint { config: c, resource: compound_resource(&resource_of(&c), &cfg.bounds).unwrap(), utility: task_utility(&c, &t) })
                .collect();
            let hull = upper_frontier(0, &pts).unwrap();
            let Some(mid) = hull.points().get(3) else { continue };
            let from = cfg.space.index_of(&mid.config).unwrap();
            let argmax = |env: &QramEnv| (0..90).max_by(|&a, &b| env.reward(from, a).total_cmp(&env.reward(from, b))).unwrap();
            checked += 1;
            if r(argmax(&lit)) < r(from) {
                literal_down += 1;
            }
            assert!(r(argmax(&pen)) >= r(from));
        }
        assert!(checked > 100);
        assert!(literal_down * 2 > checked, "{literal_down} of {checked}");
    }

    #[test]
    fn reward_scales_preserve_order() {
        let qs: Vec<f64> = (-120..=120).map(|i| i as f64 * 0.5).collect();
        for scale in [RewardScale::Linear, RewardScale::Log] {
            assert_eq!(scale.apply(0.0, QCAP), 0.0);
            let r: Vec<f64> = qs.iter().map(|&q| scale.apply(q, QCAP)).collect();
            assert!(r.windows(2).all(|w| w[0] <= w[1]));
            for (q, v) in qs.iter().zip(&r) {
                if q.abs() < QCAP {
                    assert!(v.abs() < 1.0);
                }
                assert_eq!(scale.apply(-q, QCAP), -v);
            }
        }
        assert_eq!(RewardScale::Linear.apply(25.0, 50.0), 0.5);
        assert!((RewardScale::Log.apply(10.0, 50.0) - 11f64.ln() / 51f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn episode_has_three_steps_and_then_refuses() {
        let mut env = QramEnv::new(EnvConfig::default(), 1);
        assert!(env.step(0).is_err(), "stepping before reset");
        let s0 = env.reset();
        let r1 = env.step(10).unwrap();
        let r2 = env.step(50).unwrap();
        let r3 = env.step(89).unwrap();
        assert!(!r1.done && !r2.done && r3.done);
        assert!(matches!(env.step(0), Err(QramError::Contract(_))));
        // only the configuration part of the state moves
        assert_eq!(r3.next_state.situational_features, s0.situational_features);
        assert_eq!(r3.next_state.task_type, s0.task_type);
        assert_eq!(r3.next_state.config_index, 89);
    }

    #[test]
    fn rewards_stay_in_unit_interval() {
        for cfg in [EnvConfig::default(), literal()] {
            let mut env = QramEnv::new(cfg, 4);
            let mut rng = Prng::new(4);
            for _ in 0..2000 {
                env.reset();
                while !env.done() {
                    let r = env.step(rng.below(90) as usize).unwrap();
                    assert!((-1.0..=1.0).contains(&r.reward));
                }
            }
        }
    }

    #[test]
    fn low_discount_return_stays_near_first_reward() {
        let gamma = 0.005;
        let mut env = QramEnv::new(literal(), 6);
        let mut rng = Prng::new(6);
        for _ in 0..1000 {
            env.reset();
            let rewards: Vec<f64> = (0..3).map(|_| env.step(rng.below(90) as usize).unwrap().reward).collect();
            let ret = rewards[0] + gamma * rewards[1] + gamma * gamma * rewards[2];
            assert!((ret - rewards[0]).abs() <= gamma * (1.0 + gamma) + 1e-15);
        }
    }

    #[test]
    fn golden_trajectory() {
        let mut env = QramEnv::new(EnvConfig::default(), 2024);
        let s = env.reset();
        let steps: Vec<(usize, f64)> = [47usize, 12, 88]
            .iter()
            .map(|&a| {
                let r = env.step(a).unwrap();
                (r.next_state.config_index, r.reward)
            })
            .collect();
        let expected_situational = GOLDEN_SITUATIONAL;
        assert_eq!(s.situational_features.map(f64::to_bits), expected_situational);
        assert_eq!(steps.iter().map(|(_, r)| r.to_bits()).collect::<Vec<_>>(), GOLDEN_REWARDS);
    }

    const GOLDEN_SITUATIONAL: [u64; 2] = [4605211601960350668, 4602163796294411336];
    const GOLDEN_REWARDS: [u64; 3] = [4607182418800017408, 4590860195658052847, 13830554455654793216];
}
