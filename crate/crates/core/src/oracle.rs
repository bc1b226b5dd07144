//! Exact reference solvers.
//!
//! [`optimal_allocation`] enumerates every combination (each task may also be
//! dropped) with feasibility pruning only. [`optimal_allocation_dp`] solves the
//! single-resource case as a multiple-choice knapsack over a quantized
//! resource axis, which scales to mid-size instances.

use serde::{Deserialize, Serialize};

use crate::error::{QramError, Result};
use crate::perf::task_utility;
use crate::problem::{compound_resource, resource_of, system_utility, Allocation, Constraint, ProblemInstance};

/// Default limit on enumerated states.
pub const DEFAULT_STATE_CAP: u128 = 100_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub allocation: Allocation,
    pub utility: f64,
}

/// One selectable option of a group: a cost vector and its utility.
#[derive(Clone, Debug, PartialEq)]
pub struct Item {
    pub cost: Vec<f64>,
    pub utility: f64,
}

/// Best choice per group (`None` = nothing chosen) and its summed utility.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupChoice {
    pub picks: Vec<Option<usize>>,
    pub utility: f64,
}

/// Exhaustive search over groups: at most one item per group, summed cost
/// within `capacity` componentwise. Sums run in group order. Among equal
/// optima the lexicographically first pick vector wins, with "nothing" ordered
/// after every item.
pub fn enumerate_groups(groups: &[Vec<Item>], capacity: &[f64], cap: u128) -> Result<GroupChoice> {
    let k = capacity.len();
    if groups.iter().flatten().any(|it| it.cost.len() != k) {
        return Err(QramError::contract("item cost length differs from capacity length"));
    }
    let states = groups.iter().fold(1u128, |acc, g| acc.saturating_mul(g.len() as u128 + 1));
    if states > cap {
        return Err(QramError::Capacity { states, cap });
    }
    let n = groups.len();
    let mut search = Search {
        groups,
        capacity,
        k,
        partial: vec![0.0; (n + 1) * k],
        utility: vec![0.0; n + 1],
        picks: vec![None; n],
        best: GroupChoice { picks: vec![None; n], utility: f64::NEG_INFINITY },
    };
    search.descend(0);
    Ok(search.best)
}

struct Search<'a> {
    groups: &'a [Vec<Item>],
    capacity: &'a [f64],
    k: usize,
    partial: Vec<f64>,
    utility: Vec<f64>,
    picks: Vec<Option<usize>>,
    best: GroupChoice,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize) {
        if depth == self.groups.len() {
            if self.utility[depth] > self.best.utility {
                self.best.utility = self.utility[depth];
                self.best.picks.clone_from(&self.picks);
            }
            return;
        }
        let k = self.k;
        let groups = self.groups;
        'items: for (i, item) in groups[depth].iter().enumerate() {
            for j in 0..k {
                let s = self.partial[depth * k + j] + item.cost[j];
                // costs are non-negative, so an overrun can only grow
                if s > self.capacity[j] {
                    continue 'items;
                }
                self.partial[(depth + 1) * k + j] = s;
            }
            self.utility[depth + 1] = self.utility[depth] + item.utility;
            self.picks[depth] = Some(i);
            self.descend(depth + 1);
        }
        for j in 0..k {
            self.partial[(depth + 1) * k + j] = self.partial[depth * k + j];
        }
        self.utility[depth + 1] = self.utility[depth];
        self.picks[depth] = None;
        self.descend(depth + 1);
    }
}

/// Per-task option lists (config indices into each task's space).
fn task_options(instance: &ProblemInstance, restriction: Option<&[Vec<usize>]>) -> Result<Vec<Vec<usize>>> {
    let tasks = instance.tasks();
    match restriction {
        None => Ok(tasks.iter().map(|t| (0..t.config_space.len()).collect()).collect()),
        Some(r) => {
            if r.len() != tasks.len() {
                return Err(QramError::contract("restriction needs one index list per task"));
            }
            for (t, idx) in tasks.iter().zip(r) {
                if idx.iter().any(|&i| i >= t.config_space.len()) {
                    return Err(QramError::contract(format!("restriction index out of range for task {}", t.id)));
                }
            }
            Ok(r.to_vec())
        }
    }
}

fn item_groups(instance: &ProblemInstance, options: &[Vec<usize>]) -> (Vec<Vec<Item>>, Vec<f64>) {
    let bounds = instance.bounds();
    let groups = options
        .iter()
        .enumerate()
        .map(|(pos, idx)| {
            let task = &instance.tasks()[pos];
            let target = instance.target_at(pos);
            idx.iter()
                .map(|&i| {
                    let config = task.config_space.get(i);
                    let rv = resource_of(&config);
                    let cost = match instance.constraint() {
                        Constraint::Vector => rv.components,
                        Constraint::Compound => vec![compound_resource(&rv, bounds).expect("two kinds")],
                    };
                    Item { cost, utility: task_utility(&config, target) }
                })
                .collect()
        })
        .collect();
    let capacity = match instance.constraint() {
        Constraint::Vector => bounds.bounds().to_vec(),
        Constraint::Compound => vec![bounds.compound_capacity()],
    };
    (groups, capacity)
}

fn to_solution(instance: &ProblemInstance, options: &[Vec<usize>], picks: &[Option<usize>]) -> Result<OracleSolution> {
    let mut allocation = Allocation::new();
    for (pos, pick) in picks.iter().enumerate() {
        if let Some(i) = pick {
            let task = &instance.tasks()[pos];
            allocation.assign(task.id, task.config_space.get(options[pos][*i]));
        }
    }
    let utility = system_utility(&allocation, instance)?;
    Ok(OracleSolution { allocation, utility })
}

/// Utility-maximal feasible allocation by exhaustive enumeration, optionally
/// restricted to a subset of each task's configurations.
pub fn optimal_allocation(instance: &ProblemInstance, restriction: Option<&[Vec<usize>]>) -> Result<OracleSolution> {
    optimal_allocation_capped(instance, restriction, DEFAULT_STATE_CAP)
}

pub fn optimal_allocation_capped(
    instance: &ProblemInstance,
    restriction: Option<&[Vec<usize>]>,
    cap: u128,
) -> Result<OracleSolution> {
    let options = task_options(instance, restriction)?;
    let (groups, capacity) = item_groups(instance, &options);
    let choice = enumerate_groups(&groups, &capacity, cap)?;
    let sol = to_solution(instance, &options, &choice.picks)?;
    debug_assert_eq!(sol.utility, choice.utility);
    Ok(sol)
}

/// Multiple-choice knapsack by dynamic programming over a resource grid of
/// width `step`. Item resources are rounded up to whole steps, so every
/// returned choice is feasible for the unrounded problem.
pub fn mckp_dp(groups: &[Vec<(f64, f64)>], capacity: f64, step: f64) -> Result<GroupChoice> {
    if !(step > 0.0 && step.is_finite()) || !(capacity >= 0.0) {
        return Err(QramError::argument("step must be positive and capacity non-negative"));
    }
    let slots = (capacity / step).floor();
    if slots > 5e7 {
        return Err(QramError::argument(format!("resource grid of {slots} slots is too fine")));
    }
    let slots = slots as usize;
    let mut best = vec![0.0f64; slots + 1];
    // choice[g][c]: 0 = nothing, i + 1 = item i
    let mut choice: Vec<Vec<u32>> = Vec::with_capacity(groups.len());
    let mut weights: Vec<Vec<usize>> = Vec::with_capacity(groups.len());
    for group in groups {
        let w: Vec<usize> = group
            .iter()
            .map(|&(r, _)| {
                let q = (r / step).ceil();
                if q > slots as f64 { usize::MAX } else { q as usize }
            })
            .collect();
        let mut next = best.clone();
        let mut pick = vec![0u32; slots + 1];
        for (i, (&q, &(_, u))) in w.iter().zip(group).enumerate() {
            if q == usize::MAX {
                continue;
            }
            for c in q..=slots {
                let cand = best[c - q] + u;
                if cand > next[c] {
                    next[c] = cand;
                    pick[c] = i as u32 + 1;
                }
            }
        }
        best = next;
        choice.push(pick);
        weights.push(w);
    }
    let mut picks = vec![None; groups.len()];
    let mut c = slots;
    for g in (0..groups.len()).rev() {
        let p = choice[g][c];
        if p > 0 {
            let i = p as usize - 1;
            picks[g] = Some(i);
            c -= weights[g][i];
        }
    }
    Ok(GroupChoice { picks, utility: best[slots] })
}

/// Quantized-resource optimum of a compound-constrained instance.
pub fn optimal_allocation_dp(instance: &ProblemInstance, resource_grid_step: f64) -> Result<OracleSolution> {
    if instance.constraint() != Constraint::Compound {
        return Err(QramError::Unsupported(
            "the knapsack oracle needs a single resource; use the compound constraint".into(),
        ));
    }
    let options = task_options(instance, None)?;
    let (groups, capacity) = item_groups(instance, &options);
    let scalar: Vec<Vec<(f64, f64)>> =
        groups.iter().map(|g| g.iter().map(|it| (it.cost[0], it.utility)).collect()).collect();
    let choice = mckp_dp(&scalar, capacity[0], resource_grid_step)?;
    to_solution(instance, &options, &choice.picks)
}

/// Grid step used when none is given: 1/2000 of the compound capacity.
pub fn default_dp_step(instance: &ProblemInstance) -> f64 {
    instance.bounds().compound_capacity() / 2000.0
}
