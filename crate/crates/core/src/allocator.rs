//! Greedy global allocation driven by per-task configuration proposals.
//!
//! Every task starts at its minimum-resource configuration. A proposer (the
//! trained agent, or a frontier oracle in tests) suggests each task's next
//! configuration; proposals are ranked by utility gained per compound
//! resource spent, and the best one that still fits is applied. Only the
//! upgraded task is asked again.

use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::agent::net::greedy_action;
use crate::agent::AgentModel;
use crate::classic::{seat_base_configs, Candidate, JobList, Solution, UpgradeStep, UpgradeTrace};
use crate::env::{base_index, quotient, State, EPS_RESOURCE, QCAP};
use crate::error::{QramError, Result};
use crate::perf::{task_utility, Target};
use crate::problem::{resource_of, Allocation, ConfigSpace, Configuration, ProblemInstance, ResourceLedger, Task};

pub trait Proposer {
    /// Next configuration for the task at position `pos`, currently on `current`.
    fn propose(&self, pos: usize, task: &Task, target: &Target, current: &Configuration) -> Result<Configuration>;
}

/// The agent's greedy choice for a target currently on `current`.
pub fn next_config(model: &AgentModel, target: &Target, current: &Configuration) -> Result<Configuration> {
    let index = model
        .space
        .index_of(current)
        .ok_or_else(|| QramError::contract("current configuration is outside the agent's space"))?;
    let (logits, _) = model.params.forward(&State::encode(target, &model.space, index))?;
    Ok(model.space.get(greedy_action(&logits)))
}

impl Proposer for AgentModel {
    fn propose(&self, _pos: usize, _task: &Task, target: &Target, current: &Configuration) -> Result<Configuration> {
        next_config(self, target, current)
    }
}

/// Proposes the next point of each task's job list: the step the classical
/// greedy would take.
pub struct FrontierOracle {
    lists: Vec<JobList>,
}

impl FrontierOracle {
    pub fn new(lists: Vec<JobList>) -> Self {
        FrontierOracle { lists }
    }
}

impl Proposer for FrontierOracle {
    fn propose(&self, pos: usize, _task: &Task, _target: &Target, current: &Configuration) -> Result<Configuration> {
        let pts = self.lists[pos].points();
        let at = pts
            .iter()
            .position(|p| p.config == *current)
            .ok_or_else(|| QramError::contract("current configuration is not on the job list"))?;
        Ok(pts.get(at + 1).unwrap_or(&pts[at]).config)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentSolution {
    pub solution: Solution,
    pub proposals: usize,
    /// Time spent inside the proposer.
    pub query_time: Duration,
}

struct Run<'a, P: Proposer> {
    proposer: &'a P,
    instance: &'a ProblemInstance,
    priorities: Vec<f64>,
    current: Vec<Configuration>,
    upgrades: Vec<usize>,
    proposals: Vec<Option<Configuration>>,
    queries: usize,
    query_time: Duration,
}

impl<P: Proposer> Run<'_, P> {
    /// Asks for task `pos`'s next configuration; `None` once the task is exhausted.
    fn query(&mut self, pos: usize) -> Result<Option<Candidate>> {
        let task = &self.instance.tasks()[pos];
        if self.upgrades[pos] >= task.config_space.len() {
            return Ok(None);
        }
        let target = self.instance.target_at(pos);
        let cur = self.current[pos];
        let start = Instant::now();
        let next = self.proposer.propose(pos, task, target, &cur)?;
        self.query_time += start.elapsed();
        self.queries += 1;
        if !task.config_space.contains(&next) {
            return Err(QramError::contract(format!("proposal for task {} is outside its space", task.id)));
        }
        if next == cur {
            return Ok(None);
        }
        let du = task_utility(&next, target) - task_utility(&cur, target);
        let dr = self.instance.compound_of(&next) - self.instance.compound_of(&cur);
        let q = quotient(du, dr, QCAP);
        if q <= 0.0 || dr <= -EPS_RESOURCE {
            return Ok(None);
        }
        self.proposals[pos] = Some(next);
        Ok(Some(Candidate { ratio: q * self.priorities[pos], pos }))
    }
}

/// Runs the proposal-driven greedy loop. `priorities`, when given, holds one
/// positive weight per task (in task order) multiplying its ratios.
pub fn allocate_with<P: Proposer>(proposer: &P, instance: &ProblemInstance, priorities: Option<&[f64]>) -> Result<AgentSolution> {
    let tasks = instance.tasks();
    let n = tasks.len();
    let priorities = match priorities {
        None => vec![1.0; n],
        Some(w) if w.len() == n && w.iter().all(|x| x.is_finite() && *x > 0.0) => w.to_vec(),
        Some(_) => return Err(QramError::argument("priorities need one positive weight per task")),
    };
    let current: Vec<Configuration> = tasks
        .iter()
        .enumerate()
        .map(|(pos, t)| t.config_space.get(base_index(&t.config_space, instance.target_at(pos), instance.bounds())))
        .collect();
    let mut ledger = ResourceLedger::new(n);
    let mut active = vec![true; n];
    let dropped = seat_base_configs(instance, &current, &mut ledger, &mut active);

    let mut run = Run {
        proposer,
        instance,
        priorities,
        current,
        upgrades: vec![0; n],
        proposals: vec![None; n],
        queries: 0,
        query_time: Duration::ZERO,
    };
    let mut heap = BinaryHeap::new();
    for pos in (0..n).filter(|&p| active[p]) {
        heap.extend(run.query(pos)?);
    }
    let mut blocked: Vec<Candidate> = Vec::new();
    let mut steps = Vec::new();
    while let Some(cand) = heap.pop() {
        let pos = cand.pos;
        let next = run.proposals[pos].expect("queued tasks hold a proposal");
        let rv = resource_of(&next);
        if !ledger.fits_with(instance, pos, &rv) {
            blocked.push(cand);
            continue;
        }
        ledger.set(pos, Some(rv));
        steps.push(UpgradeStep {
            task_id: tasks[pos].id,
            from: run.current[pos],
            to: next,
            ratio: cand.ratio,
            skipped: blocked.iter().map(|b| tasks[b.pos].id).collect(),
        });
        run.current[pos] = next;
        run.upgrades[pos] += 1;
        heap.extend(run.query(pos)?);
        heap.extend(blocked.drain(..));
    }

    let mut allocation = Allocation::new();
    for pos in (0..n).filter(|&p| active[p]) {
        allocation.assign(tasks[pos].id, run.current[pos]);
    }
    Ok(AgentSolution {
        solution: Solution { allocation, trace: UpgradeTrace { dropped, steps } },
        proposals: run.queries,
        query_time: run.query_time,
    })
}

/// Agent-driven allocation. Every task must use the agent's configuration space.
pub fn allocate_with_agent(model: &AgentModel, instance: &ProblemInstance) -> Result<AgentSolution> {
    check_spaces(&model.space, instance)?;
    allocate_with(model, instance, None)
}

fn check_spaces(space: &ConfigSpace, instance: &ProblemInstance) -> Result<()> {
    match instance.tasks().iter().find(|t| t.config_space != *space) {
        Some(t) => Err(QramError::contract(format!("task {} uses a configuration space the agent was not trained on", t.id))),
        None => Ok(()),
    }
}
