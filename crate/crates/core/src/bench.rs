//! Paired classic-versus-agent benchmarks and the configuration-subset demo.

use std::hint::black_box;
use std::time::Instant;

use serde::Serialize;

use crate::agent::AgentModel;
use crate::allocator::allocate_with_agent;
use crate::classic::{embed_task, solve, upper_frontier};
use crate::env::State;
use crate::error::{QramError, Result};
use crate::oracle::optimal_allocation;
use crate::perf::{generate_scenario, Target};
use crate::problem::{default_bounds, system_utility, ConfigSpace, ProblemInstance, ResourceBounds, Task, TaskType};
use crate::rng::Prng;

/// Scenario seed of run `run` at `n_targets` under a master seed.
pub fn run_seed(master: u64, n_targets: usize, run: usize) -> u64 {
    let mut rng = Prng::derive(master, n_targets as u64);
    let mut seed = rng.next_u64();
    for _ in 0..run {
        seed = rng.next_u64();
    }
    seed
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UtilityRow {
    pub targets: usize,
    pub runs: usize,
    pub classic_mean: f64,
    pub classic_std: f64,
    pub agent_mean: f64,
    pub agent_std: f64,
    /// Mean over runs of agent utility over classic utility.
    pub ratio: f64,
    pub ratio_std: f64,
}

/// Classic and agent system utility at one target count, over seeded runs.
pub fn utility_row(model: &AgentModel, n_targets: usize, runs: usize, master_seed: u64, bounds: &dyn Fn(usize) -> ResourceBounds) -> Result<UtilityRow> {
    if runs == 0 || n_targets == 0 {
        return Err(QramError::argument("need at least one run and one target"));
    }
    let (mut classic, mut agent, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    for run in 0..runs {
        let scenario = generate_scenario(n_targets, run_seed(master_seed, n_targets, run))?;
        let inst = ProblemInstance::from_scenario(scenario, &model.space, bounds(n_targets))?;
        let uc = system_utility(&solve(&inst)?.allocation, &inst)?;
        let ua = system_utility(&allocate_with_agent(model, &inst)?.solution.allocation, &inst)?;
        classic.push(uc);
        agent.push(ua);
        ratios.push(ua / uc);
    }
    let (classic_mean, classic_std) = mean_std(&classic);
    let (agent_mean, agent_std) = mean_std(&agent);
    let (ratio, ratio_std) = mean_std(&ratios);
    Ok(UtilityRow { targets: n_targets, runs, classic_mean, classic_std, agent_mean, agent_std, ratio, ratio_std })
}

pub fn utility_bench(model: &AgentModel, targets: &[usize], runs: usize, master_seed: u64) -> Result<Vec<UtilityRow>> {
    targets.iter().map(|&n| utility_row(model, n, runs, master_seed, &default_bounds)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TargetTimingRow {
    pub targets: usize,
    pub configs: usize,
    pub runs: usize,
    pub classic_median_s: f64,
    pub agent_median_s: f64,
}

/// Wall-clock of full classic and agent solves by number of targets.
pub fn runtime_by_targets(model: &AgentModel, targets: &[usize], runs: usize, master_seed: u64) -> Result<Vec<TargetTimingRow>> {
    let mut rows = Vec::new();
    for &n in targets {
        let (mut tc, mut ta) = (Vec::new(), Vec::new());
        for run in 0..runs {
            let scenario = generate_scenario(n, run_seed(master_seed, n, run))?;
            let inst = ProblemInstance::from_scenario(scenario, &model.space, default_bounds(n))?;
            let start = Instant::now();
            black_box(solve(&inst)?);
            tc.push(start.elapsed().as_secs_f64());
            let start = Instant::now();
            black_box(allocate_with_agent(model, &inst)?);
            ta.push(start.elapsed().as_secs_f64());
        }
        rows.push(TargetTimingRow {
            targets: n,
            configs: model.space.len(),
            runs,
            classic_median_s: median(&tc),
            agent_median_s: median(&ta),
        });
    }
    Ok(rows)
}

/// Grid sizes (dwell, transmit duration, power) used for a configuration count.
pub fn grid_for_configs(c: usize) -> Option<(usize, usize, usize)> {
    match c {
        90 => Some((6, 5, 3)),
        180 => Some((6, 5, 6)),
        450 => Some((6, 5, 15)),
        900 => Some((12, 5, 15)),
        1800 => Some((12, 10, 15)),
        4500 => Some((30, 10, 15)),
        _ => None,
    }
}

pub const CONFIG_SWEEP: [usize; 6] = [90, 180, 450, 900, 1800, 4500];

/// The configuration space for a sweep point; 90 is the standard grid.
pub fn space_for_configs(c: usize) -> Result<ConfigSpace> {
    match grid_for_configs(c) {
        Some((6, 5, 3)) => Ok(ConfigSpace::table_one()),
        Some((d, t, p)) => ConfigSpace::uniform(d, t, p),
        None => Err(QramError::argument(format!("no grid mapping for {c} configurations (use one of {CONFIG_SWEEP:?})"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigTimingRow {
    pub configs: usize,
    pub dwell_points: usize,
    pub tx_points: usize,
    pub power_points: usize,
    pub runs: usize,
    /// Embedding plus frontier for one task.
    pub classic_task_median_s: f64,
    /// One forward pass of the agent network.
    pub agent_pass_median_s: f64,
}

/// Per-task job-list time against one agent forward pass as the configuration
/// count grows. The network keeps its architecture; states from finer grids
/// use the same normalized encoding.
pub fn runtime_by_configs(model: &AgentModel, configs: &[usize], runs: usize, tasks_per_run: usize, master_seed: u64) -> Result<Vec<ConfigTimingRow>> {
    if runs == 0 || tasks_per_run == 0 {
        return Err(QramError::argument("need at least one run and one task"));
    }
    let mut rows = Vec::new();
    for &c in configs {
        let space = space_for_configs(c)?;
        let (d, t, p) = grid_for_configs(c).expect("checked above");
        let bounds = default_bounds(tasks_per_run);
        let (mut tc, mut ta) = (Vec::new(), Vec::new());
        for run in 0..runs {
            let scenario = generate_scenario(tasks_per_run, run_seed(master_seed, c, run))?;
            let tasks: Vec<(Task, Target)> = scenario
                .targets
                .iter()
                .map(|tg| (Task { id: tg.id, task_type: TaskType::Tracking, target_ref: tg.id, config_space: space.clone() }, *tg))
                .collect();
            let start = Instant::now();
            for (task, target) in &tasks {
                black_box(upper_frontier(task.id, &embed_task(task, target, &bounds))?);
            }
            tc.push(start.elapsed().as_secs_f64() / tasks_per_run as f64);

            let states: Vec<State> = tasks.iter().map(|(_, tg)| State::encode(tg, &space, 0)).collect();
            let start = Instant::now();
            for s in &states {
                black_box(model.params.forward(s)?);
            }
            ta.push(start.elapsed().as_secs_f64() / tasks_per_run as f64);
        }
        rows.push(ConfigTimingRow {
            configs: c,
            dwell_points: d,
            tx_points: t,
            power_points: p,
            runs,
            classic_task_median_s: median(&tc),
            agent_pass_median_s: median(&ta),
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelRow {
    pub targets: usize,
    pub configs: usize,
    /// `t c ln c`
    pub classic_ops: f64,
    /// `t c l n^2`
    pub agent_ops: f64,
}

/// Closed-form operation counts of the two approaches.
pub fn complexity_model(targets: &[usize], configs: &[usize], layers: usize, neurons: usize) -> Vec<ModelRow> {
    let mut rows = Vec::new();
    for &t in targets {
        for &c in configs {
            let (tf, cf) = (t as f64, c as f64);
            rows.push(ModelRow {
                targets: t,
                configs: c,
                classic_ops: tf * cf * cf.ln(),
                agent_ops: tf * cf * (layers * neurons * neurons) as f64,
            });
        }
    }
    rows
}

/// Dwell lengths and transmit durations of the subset demo: eight combinations.
const REMARK_DWELL: [f64; 4] = [100.0, 300.0, 700.0, 1100.0];
const REMARK_TX: [f64; 2] = [2.0, 8.0];
/// Power grids of increasing resolution, each containing the previous one.
const REMARK_POWER_LEVELS: [usize; 4] = [2, 3, 5, 9];

/// Frozen instance of the subset demo, found by [`remark1_search`].
pub const REMARK1_SEED: u64 = 0;
pub const REMARK1_OCCUPANCY: f64 = 0.06;
pub const REMARK1_POWER: f64 = 0.05;

/// Power grid with `levels` points evenly spread over 1..=4 kW.
fn remark_power(levels: usize) -> Vec<f64> {
    (0..levels).map(|i| 1.0 + 3.0 * i as f64 / (levels - 1) as f64).collect()
}

pub fn remark1_spaces() -> Vec<ConfigSpace> {
    REMARK_POWER_LEVELS
        .iter()
        .map(|&l| ConfigSpace::new(REMARK_DWELL.to_vec(), REMARK_TX.to_vec(), remark_power(l)).expect("valid grids"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Remark1Row {
    pub configs: usize,
    pub greedy_utility: f64,
    pub optimal_utility: f64,
}

fn remark1_instance(space: &ConfigSpace, seed: u64, occupancy: f64, power: f64) -> Result<ProblemInstance> {
    let bounds = ResourceBounds::new(vec![occupancy, power], vec![1.0, 1.0])?;
    ProblemInstance::from_scenario(generate_scenario(4, seed)?, space, bounds)
}

fn greedy_utility(inst: &ProblemInstance) -> Result<f64> {
    system_utility(&solve(inst)?.allocation, inst)
}

/// Greedy and exhaustive utility of a 4-target instance over the nested spaces.
pub fn remark1_rows(seed: u64, occupancy: f64, power: f64) -> Result<Vec<Remark1Row>> {
    remark1_spaces()
        .iter()
        .map(|space| {
            let inst = remark1_instance(space, seed, occupancy, power)?;
            Ok(Remark1Row {
                configs: space.len(),
                greedy_utility: greedy_utility(&inst)?,
                optimal_utility: optimal_allocation(&inst, None)?.utility,
            })
        })
        .collect()
}

pub fn remark1_demo() -> Result<Vec<Remark1Row>> {
    remark1_rows(REMARK1_SEED, REMARK1_OCCUPANCY, REMARK1_POWER)
}

/// Scans seeds and bounds for an instance whose greedy utility drops when the
/// configuration set grows. Returns the first hit as `(seed, occupancy, power)`.
pub fn remark1_search(seeds: std::ops::Range<u64>) -> Result<Option<(u64, f64, f64)>> {
    let spaces = remark1_spaces();
    let occupancies = [0.02, 0.03, 0.04, 0.06, 0.08, 0.12];
    let powers = [0.05, 0.1, 0.2, 0.3, 0.5];
    for seed in seeds {
        for &occ in &occupancies {
            for &pw in &powers {
                let mut g = Vec::with_capacity(spaces.len());
                for s in &spaces {
                    g.push(greedy_utility(&remark1_instance(s, seed, occ, pw)?)?);
                }
                if g.windows(2).any(|w| w[1] < w[0]) {
                    return Ok(Some((seed, occ, pw)));
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_slope() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((loglog_slope(&xs, &ys) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn sweep_grids_have_the_right_size() {
        for c in CONFIG_SWEEP {
            assert_eq!(space_for_configs(c).unwrap().len(), c);
        }
        assert_eq!(space_for_configs(90).unwrap(), ConfigSpace::table_one());
        assert!(space_for_configs(91).is_err());
    }

    #[test]
    fn remark_spaces_are_nested() {
        let spaces = remark1_spaces();
        assert_eq!(spaces.iter().map(|s| s.len()).collect::<Vec<_>>(), vec![16, 24, 40, 72]);
        for w in spaces.windows(2) {
            assert!(w[0].iter().all(|c| w[1].contains(&c)));
        }
    }

    #[test]
    fn run_seeds_are_stable_and_distinct() {
        assert_eq!(run_seed(7, 20, 3), run_seed(7, 20, 3));
        assert_ne!(run_seed(7, 20, 3), run_seed(7, 20, 4));
        assert_ne!(run_seed(7, 20, 3), run_seed(7, 30, 3));
    }

    #[test]
    fn model_rows_cover_the_grid() {
        let rows = complexity_model(&[10, 20], &[90, 180, 450], 6, 100);
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].agent_ops, 10.0 * 90.0 * 6.0 * 1e4);
        assert!((rows[0].classic_ops - 900.0 * 90f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn stored_instance_loses_utility_with_more_configs() {
        let rows = remark1_demo().unwrap();
        assert_eq!(rows.iter().map(|r| r.configs).collect::<Vec<_>>(), vec![16, 24, 40, 72]);
        assert!(rows.windows(2).all(|w| w[1].optimal_utility >= w[0].optimal_utility));
        assert!(rows.iter().all(|r| r.greedy_utility <= r.optimal_utility));
        assert!(rows[3].greedy_utility < rows[2].greedy_utility);
    }

    #[test]
    fn search_finds_the_stored_instance() {
        assert_eq!(remark1_search(0..1).unwrap(), Some((REMARK1_SEED, REMARK1_OCCUPANCY, REMARK1_POWER)));
    }
}
