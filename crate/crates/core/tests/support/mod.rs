//! Independent oracles and instance generators shared by the integration
//! tests and the acceptance suite.
#![allow(dead_code)]

use qram_core::agent::{episode_gradients, episode_loss, AgentModel, AgentParams, Dense, NetShape, TrainConfig, Transition};
use qram_core::allocator::{allocate_with, next_config};
use qram_core::classic::{embed_task, job_lists, solve, upper_frontier, JobPoint};
use qram_core::env::{base_index, State};
use qram_core::oracle::optimal_allocation;
use qram_core::perf::task_utility;
use qram_core::problem::compound_resource;
use qram_core::rng::Prng;
use qram_core::{
    default_bounds, generate_scenario, resource_of, system_utility, ConfigSpace, Configuration, Constraint,
    ProblemInstance, ResourceBounds, Target, Task,
};

// ---------------------------------------------------------------------------
// frontier

/// Point set with integer coordinates scaled by a power of two, so every
/// coordinate and difference is exact. `configs` make ties distinguishable.
pub struct PointSet {
    pub points: Vec<JobPoint>,
    /// Integer coordinates `(resource, utility)` before scaling.
    pub grid: Vec<(i64, i64)>,
}

fn tag(i: usize) -> Configuration {
    Configuration { dwell_length: i as f64, transmit_duration: 0.0, transmit_power: 0.0 }
}

/// Random point set of the given style. Styles cycle through dense integer
/// clouds, points on a few lines, heavy duplicates and concave-ish curves.
pub fn random_point_set(rng: &mut Prng, style: usize) -> PointSet {
    let n = 1 + rng.below(40) as usize;
    let mut grid: Vec<(i64, i64)> = Vec::with_capacity(n);
    match style % 4 {
        0 => {
            let span = 2 + rng.below(30) as i64;
            for _ in 0..n {
                grid.push((rng.below(span as u64) as i64, rng.below(span as u64) as i64));
            }
        }
        1 => {
            let lines = 1 + rng.below(3);
            let params: Vec<(i64, i64, i64, i64)> = (0..lines)
                .map(|_| {
                    (
                        rng.below(10) as i64,
                        rng.below(10) as i64,
                        1 + rng.below(4) as i64,
                        rng.below(9) as i64 - 3,
                    )
                })
                .collect();
            for _ in 0..n {
                let (r0, u0, dr, du) = params[rng.below(lines) as usize];
                let k = rng.below(12) as i64;
                grid.push((r0 + k * dr, u0 + k * du));
            }
        }
        2 => {
            let distinct = 1 + rng.below(5) as usize;
            let base: Vec<(i64, i64)> =
                (0..distinct).map(|_| (rng.below(8) as i64, rng.below(8) as i64)).collect();
            for _ in 0..n {
                grid.push(base[rng.below(distinct as u64) as usize]);
            }
        }
        _ => {
            for _ in 0..n {
                let r = rng.below(200) as i64;
                // sqrt-shaped cloud with a little noise below it
                let u = (30.0 * (r as f64).sqrt()) as i64 - rng.below(20) as i64;
                grid.push((r, u));
            }
        }
    }
    let scale = [1.0, 0.5, 0.125, 4.0][rng.below(4) as usize];
    let mut order: Vec<usize> = (0..n).collect();
    // shuffle config tags so tie order is not the generation order
    for i in (1..n).rev() {
        order.swap(i, rng.below(i as u64 + 1) as usize);
    }
    let points = grid
        .iter()
        .zip(&order)
        .map(|(&(r, u), &t)| JobPoint { config: tag(t), resource: r as f64 * scale, utility: u as f64 * scale })
        .collect();
    PointSet { points, grid }
}

/// Concave majorant by exhaustive checks in exact integer arithmetic.
///
/// A point survives when it is the best representative of its resource level
/// (highest utility, then smallest configuration), beats every cheaper
/// representative strictly, and lies strictly above every chord between a
/// cheaper and a dearer representative.
pub fn frontier_oracle(set: &PointSet) -> Vec<JobPoint> {
    let idx: Vec<usize> = (0..set.grid.len()).collect();
    let reps: Vec<usize> = idx
        .iter()
        .copied()
        .filter(|&i| {
            let (ri, ui) = set.grid[i];
            idx.iter().all(|&j| {
                let (rj, uj) = set.grid[j];
                j == i
                    || rj != ri
                    || uj < ui
                    || (uj == ui && set.points[i].config.lex_cmp(&set.points[j].config).is_lt())
            })
        })
        .collect();
    let mut out: Vec<usize> = reps
        .iter()
        .copied()
        .filter(|&p| {
            let (rp, up) = set.grid[p];
            let rising = reps.iter().all(|&a| set.grid[a].0 >= rp || set.grid[a].1 < up);
            let above_chords = reps.iter().all(|&a| {
                let (ra, ua) = set.grid[a];
                ra >= rp
                    || reps.iter().all(|&b| {
                        let (rb, ub) = set.grid[b];
                        rb <= rp || (up - ua) * (rb - ra) > (ub - ua) * (rp - ra)
                    })
            });
            rising && above_chords
        })
        .collect();
    out.sort_by_key(|&i| set.grid[i].0);
    out.iter().map(|&i| set.points[i]).collect()
}

/// Whether `upper_frontier` agrees exactly with the oracle.
pub fn frontier_matches(set: &PointSet) -> bool {
    let got = upper_frontier(0, &set.points).expect("non-empty set");
    got.points() == frontier_oracle(set).as_slice()
}

// ---------------------------------------------------------------------------
// gradients

/// Pre-activations of every hidden layer, computed without the library's
/// forward pass. Also returns logits and value.
fn naive_forward(p: &AgentParams, sit: &[f64], cfg: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    fn affine(l: &Dense, x: &[f64]) -> Vec<f64> {
        (0..l.outputs)
            .map(|o| l.bias[o] + (0..l.inputs).map(|i| l.weights[o * l.inputs + i] * x[i]).sum::<f64>())
            .collect()
    }
    let relu = |z: &[f64]| z.iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
    let z1 = affine(&p.situational_1, sit);
    let z2 = affine(&p.situational_2, &relu(&z1));
    let z3 = affine(&p.config_1, cfg);
    let joined: Vec<f64> = relu(&z2).into_iter().chain(relu(&z3)).collect();
    let z4 = affine(&p.trunk, &joined);
    let h4 = relu(&z4);
    let logits = affine(&p.policy, &h4);
    let value = affine(&p.value, &h4)[0];
    (vec![z1, z2, z3, z4], logits, value)
}

pub const TOY_ACTIONS: usize = 5;
pub const FD_STEP: f64 = 1e-5;
/// Pre-activations closer than this to zero could cross a ReLU kink under the
/// finite-difference step; such draws are resampled.
const KINK_MARGIN: f64 = 1e-3;
/// Denominator floor of the relative error, so parameters with vanishing
/// gradient are judged on absolute error.
pub const REL_FLOOR: f64 = 1e-6;

pub struct GradCheck {
    pub max_rel_error: f64,
    pub params: usize,
    pub resamples: usize,
    /// Largest gap between the library forward pass and the naive one.
    pub forward_gap: f64,
}

fn toy_case(rng: &mut Prng) -> (AgentParams, Vec<Transition>, TrainConfig) {
    let hidden = 3 + rng.below(6) as usize;
    let shape = NetShape { situational_inputs: 5, config_inputs: 3, hidden, actions: TOY_ACTIONS };
    let mut params = AgentParams::init(shape, rng.next_u64());
    for b in params.layers_mut().into_iter().flat_map(|l| l.bias.iter_mut()) {
        *b = rng.uniform_in(-0.3, 0.3);
    }
    let cfg = TrainConfig {
        discount: rng.uniform_in(0.0, 0.9),
        entropy_coeff: rng.uniform_in(0.0, 0.5),
        value_coeff: rng.uniform_in(0.1, 1.0),
        ..TrainConfig::default()
    };
    let traj = (0..cfg.env.episode_len)
        .map(|_| {
            let mut task_type = [0.0; 3];
            task_type[rng.below(3) as usize] = 1.0;
            let state = State {
                task_type,
                config_features: [rng.uniform(), rng.uniform(), rng.uniform()],
                situational_features: [rng.uniform(), rng.uniform()],
                config_index: 0,
            };
            Transition { state, action: rng.below(TOY_ACTIONS as u64) as usize, reward: rng.uniform_in(-1.0, 1.0) }
        })
        .collect();
    (params, traj, cfg)
}

/// Central-difference check of the analytic episode gradient on one random
/// toy network.
pub fn gradient_check(seed: u64) -> GradCheck {
    let mut rng = Prng::new(seed);
    let mut resamples = 0;
    let (params, traj, cfg) = loop {
        let case = toy_case(&mut rng);
        let near_kink = case.1.iter().any(|t| {
            let (pre, _, _) = naive_forward(&case.0, &t.state.situational_input(), &t.state.config_input());
            pre.iter().flatten().any(|z| z.abs() < KINK_MARGIN)
        });
        if !near_kink {
            break case;
        }
        resamples += 1;
    };
    let mut forward_gap: f64 = 0.0;
    for t in &traj {
        let (_, logits, value) = naive_forward(&params, &t.state.situational_input(), &t.state.config_input());
        let (l, v) = params.forward(&t.state).expect("toy shapes agree");
        forward_gap = forward_gap.max((v - value).abs());
        for (a, b) in l.iter().zip(&logits) {
            forward_gap = forward_gap.max((a - b).abs());
        }
    }

    let (grad, _, adv) = episode_gradients(&params, &traj, &cfg).expect("valid episode");
    let analytic: Vec<f64> = grad.params().copied().collect();
    let loss_at = |p: &AgentParams| episode_loss(p, &traj, &cfg, &adv).expect("valid episode").loss;
    let mut max_rel_error: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = params.clone();
        *plus.params_mut().nth(i).unwrap() += FD_STEP;
        let mut minus = params.clone();
        *minus.params_mut().nth(i).unwrap() -= FD_STEP;
        let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        max_rel_error = max_rel_error.max(rel);
    }
    GradCheck { max_rel_error, params: analytic.len(), resamples, forward_gap }
}

// ---------------------------------------------------------------------------
// instances

fn pick_grid(rng: &mut Prng, pool: &[f64], count: usize) -> Vec<f64> {
    let mut chosen: Vec<f64> = Vec::new();
    while chosen.len() < count {
        let v = pool[rng.below(pool.len() as u64) as usize];
        if !chosen.contains(&v) {
            chosen.push(v);
        }
    }
    chosen.sort_by(f64::total_cmp);
    chosen
}

/// Random grid with at most 24 configurations drawn from realistic ranges.
fn small_space(rng: &mut Prng) -> ConfigSpace {
    loop {
        let d = 1 + rng.below(4) as usize;
        let t = 1 + rng.below(3) as usize;
        let p = 1 + rng.below(4) as usize;
        if d * t * p > 24 {
            continue;
        }
        let dwell = pick_grid(rng, &[100.0, 200.0, 300.0, 500.0, 700.0, 900.0, 1100.0], d);
        let tx = pick_grid(rng, &[2.0, 4.0, 6.0, 8.0, 10.0], t);
        let power = pick_grid(rng, &[0.5, 1.0, 2.0, 3.0, 4.0, 5.0], p);
        return ConfigSpace::new(dwell, tx, power).expect("transmit shorter than dwell");
    }
}

/// Random instance with at most five tasks and 24 configurations per task.
/// Bounds are scaled so the constraint usually binds.
pub fn small_instance(seed: u64) -> ProblemInstance {
    let mut rng = Prng::new(seed);
    let n = 1 + rng.below(5) as usize;
    let scenario = generate_scenario(n, rng.next_u64()).expect("positive size");
    let d = default_bounds(n);
    let bounds = ResourceBounds::new(
        vec![d.bounds()[0] * rng.uniform_in(0.05, 1.0), d.bounds()[1] * rng.uniform_in(0.01, 0.3)],
        vec![rng.uniform_in(0.5, 2.0), rng.uniform_in(0.5, 2.0)],
    )
    .expect("positive bounds");
    let tasks = scenario
        .targets
        .iter()
        .map(|t| Task { id: t.id, task_type: Default::default(), target_ref: t.id, config_space: small_space(&mut rng) })
        .collect();
    let constraint = if rng.below(2) == 0 { Constraint::Vector } else { Constraint::Compound };
    ProblemInstance::new(tasks, bounds, scenario).expect("valid instance").with_constraint(constraint)
}

/// Power-only instance in which every resource sum is a small dyadic
/// rational: one 1024 ms dwell, one 8 ms transmit, integer powers `1..=k`.
/// Compound resource then grows in equal steps per power level and utility
/// is strictly concave in power, so every configuration is a frontier vertex.
pub fn dyadic_instance(seed: u64) -> ProblemInstance {
    let mut rng = Prng::new(seed);
    let n = 2 + rng.below(4) as usize;
    let k = 3 + rng.below(22) as usize;
    let power: Vec<f64> = (1..=k).map(|p| p as f64).collect();
    let space = ConfigSpace::new(vec![1024.0], vec![8.0], power).expect("valid grid");
    let occupancy = [0.125, 0.0625][rng.below(2) as usize];
    let avg_power = [0.125, 0.0625, 0.03125][rng.below(3) as usize];
    let bounds = ResourceBounds::new(vec![occupancy, avg_power], vec![1.0, 1.0]).expect("positive bounds");
    let scenario = generate_scenario(n, rng.next_u64()).expect("positive size");
    ProblemInstance::from_scenario(scenario, &space, bounds).expect("valid instance").with_constraint(Constraint::Compound)
}

/// Summed compound resource of a solution, in task-id order.
pub fn compound_used(instance: &ProblemInstance, alloc: &qram_core::Allocation) -> f64 {
    instance
        .tasks()
        .iter()
        .filter_map(|t| alloc.get(t.id))
        .map(|c| compound_resource(&resource_of(c), instance.bounds()).expect("two resources"))
        .sum()
}

pub struct Comparison {
    pub greedy: f64,
    pub optimal: f64,
    /// Greedy ended with the compound capacity used exactly.
    pub exhausted: bool,
    /// Every configuration of every task is on its frontier.
    pub all_on_frontier: bool,
}

pub fn compare_with_brute_force(instance: &ProblemInstance) -> Comparison {
    let sol = solve(instance).expect("solvable");
    let greedy = system_utility(&sol.allocation, instance).expect("valid allocation");
    let optimal = optimal_allocation(instance, None).expect("small instance").utility;
    let exhausted = compound_used(instance, &sol.allocation) == instance.bounds().compound_capacity();
    let all_on_frontier = job_lists(instance)
        .expect("non-empty spaces")
        .iter()
        .zip(instance.tasks())
        .all(|(l, t)| l.len() == t.config_space.len());
    Comparison { greedy, optimal, exhausted, all_on_frontier }
}

/// Random instance for the oracle-driven allocator: table grid or a uniform
/// grid, up to 60 tasks, bounds scaled around the defaults.
pub fn equivalence_instance(seed: u64) -> ProblemInstance {
    let mut rng = Prng::new(seed);
    let n = 1 + rng.below(60) as usize;
    let space = if rng.below(2) == 0 {
        ConfigSpace::table_one()
    } else {
        ConfigSpace::uniform(1 + rng.below(6) as usize, 1 + rng.below(5) as usize, 1 + rng.below(5) as usize)
            .expect("positive sizes")
    };
    let d = default_bounds(n);
    let bounds = ResourceBounds::new(
        vec![d.bounds()[0] * rng.uniform_in(0.1, 1.5), d.bounds()[1] * rng.uniform_in(0.1, 1.5)],
        vec![rng.uniform_in(0.5, 2.0), rng.uniform_in(0.5, 2.0)],
    )
    .expect("positive bounds");
    let constraint = if rng.below(2) == 0 { Constraint::Vector } else { Constraint::Compound };
    let scenario = generate_scenario(n, rng.next_u64()).expect("positive size");
    ProblemInstance::from_scenario(scenario, &space, bounds).expect("valid instance").with_constraint(constraint)
}

/// Classic and oracle-driven allocations of one instance agree exactly.
pub fn oracle_matches_classic(instance: &ProblemInstance) -> bool {
    let classic = solve(instance).expect("solvable");
    let oracle = qram_core::allocator::FrontierOracle::new(job_lists(instance).expect("non-empty spaces"));
    let driven = allocate_with(&oracle, instance, None).expect("solvable").solution;
    let uc = system_utility(&classic.allocation, instance).expect("valid allocation");
    let ua = system_utility(&driven.allocation, instance).expect("valid allocation");
    classic.allocation == driven.allocation && uc.to_bits() == ua.to_bits()
}

// ---------------------------------------------------------------------------
// agent quality

/// Share of random targets for which the agent's first move from the base
/// configuration lands within `tolerance` of the frontier utility available
/// at equal or less compound resource (training bounds).
pub fn near_frontier_fraction(model: &AgentModel, targets: usize, seed: u64, tolerance: f64) -> f64 {
    let mut rng = Prng::new(seed);
    let bounds = &model.training_bounds;
    let mut good = 0;
    for i in 0..targets {
        let target = Target::sample(i as u32, &mut rng);
        let task = Task { id: 0, task_type: Default::default(), target_ref: target.id, config_space: model.space.clone() };
        let frontier = upper_frontier(0, &embed_task(&task, &target, bounds)).expect("non-empty space");
        let base = model.space.get(base_index(&model.space, &target, bounds));
        let next = next_config(model, &target, &base).expect("base is in the space");
        let r = compound_resource(&resource_of(&next), bounds).expect("two resources");
        let best = frontier.utility_at(r).expect("at least the base fits");
        if task_utility(&next, &target) >= (1.0 - tolerance) * best {
            good += 1;
        }
    }
    good as f64 / targets as f64
}
