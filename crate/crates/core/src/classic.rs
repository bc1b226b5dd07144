//! Classical Q-RAM: per-task job lists from the upper convex frontier in
//! resource-utility space, then greedy marginal-utility upgrades.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{QramError, Result};
use crate::perf::{task_utility, Target};
use crate::problem::{resource_of, Allocation, Configuration, ProblemInstance, ResourceBounds, ResourceLedger, Task};
use crate::problem::compound_resource;

/// A configuration embedded into resource-utility space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobPoint {
    pub config: Configuration,
    /// Compound resource.
    pub resource: f64,
    pub utility: f64,
}

/// A task's efficient frontier: resource and utility strictly increasing,
/// marginal ratios strictly decreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobList {
    task_id: u32,
    points: Vec<JobPoint>,
}

impl JobList {
    pub fn new(task_id: u32, points: Vec<JobPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(QramError::argument("a job list needs at least one point"));
        }
        for w in points.windows(2) {
            if !(w[1].resource > w[0].resource && w[1].utility > w[0].utility) {
                return Err(QramError::contract("job list is not strictly increasing"));
            }
        }
        let ratios: Vec<f64> = points.windows(2).map(|w| marginal_ratio(&w[0], &w[1])).collect();
        if ratios.windows(2).any(|r| r[1] >= r[0]) {
            return Err(QramError::contract("job list marginal ratios are not strictly decreasing"));
        }
        Ok(JobList { task_id, points })
    }

    pub fn task_id(&self) -> u32 {
        self.task_id
    }

    pub fn points(&self) -> &[JobPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest utility among frontier points using at most `resource`.
    pub fn utility_at(&self, resource: f64) -> Option<f64> {
        self.points.iter().take_while(|p| p.resource <= resource).last().map(|p| p.utility)
    }
}

pub fn marginal_ratio(from: &JobPoint, to: &JobPoint) -> f64 {
    (to.utility - from.utility) / (to.resource - from.resource)
}

/// Evaluates every configuration of the task against its target.
pub fn embed_task(task: &Task, target: &Target, bounds: &ResourceBounds) -> Vec<JobPoint> {
    task.config_space
        .iter()
        .map(|config| JobPoint {
            config,
            resource: compound_resource(&resource_of(&config), bounds).expect("two resource kinds"),
            utility: task_utility(&config, target),
        })
        .collect()
}

/// Order used before the hull pass: resource ascending, then utility
/// descending, then configuration.
fn frontier_order(a: &JobPoint, b: &JobPoint) -> Ordering {
    a.resource
        .total_cmp(&b.resource)
        .then(b.utility.total_cmp(&a.utility))
        .then(a.config.lex_cmp(&b.config))
}

/// Concave majorant of a point cloud: the upper hull from the minimum-resource
/// point up to the maximum-utility vertex. Collinear interior points are dropped.
pub fn upper_frontier(task_id: u32, points: &[JobPoint]) -> Result<JobList> {
    if points.is_empty() {
        return Err(QramError::argument("cannot take the frontier of no points"));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(frontier_order);
    // one representative per resource level: the best one, first after sorting
    sorted.dedup_by(|later, earlier| later.resource == earlier.resource);

    let mut hull: Vec<JobPoint> = Vec::with_capacity(sorted.len());
    for p in sorted {
        while hull.len() >= 2 {
            let n = hull.len();
            if marginal_ratio(&hull[n - 2], &hull[n - 1]) <= marginal_ratio(&hull[n - 1], &p) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    // past the utility peak the hull only descends
    let keep = 1 + hull.windows(2).take_while(|w| w[1].utility > w[0].utility).count();
    hull.truncate(keep);
    JobList::new(task_id, hull)
}

/// Embeds and takes the frontier for every task of the instance, in task order.
pub fn job_lists(instance: &ProblemInstance) -> Result<Vec<JobList>> {
    instance
        .tasks()
        .iter()
        .enumerate()
        .map(|(pos, task)| upper_frontier(task.id, &embed_task(task, instance.target_at(pos), instance.bounds())))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpgradeStep {
    pub task_id: u32,
    pub from: Configuration,
    pub to: Configuration,
    /// Priority the upgrade was chosen by.
    pub ratio: f64,
    /// Tasks with a better ratio whose upgrade did not fit, in the order tried.
    pub skipped: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpgradeTrace {
    /// Tasks removed because even the base configurations did not fit.
    pub dropped: Vec<u32>,
    pub steps: Vec<UpgradeStep>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub allocation: Allocation,
    pub trace: UpgradeTrace,
}

/// Heap entry: highest ratio first, then lowest task position.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Candidate {
    pub ratio: f64,
    pub pos: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ratio.total_cmp(&other.ratio).then(other.pos.cmp(&self.pos))
    }
}

/// Puts every task on its base configuration, dropping tasks from the highest
/// id down while the bases alone are infeasible. Returns the dropped ids.
pub(crate) fn seat_base_configs(
    instance: &ProblemInstance,
    base: &[Configuration],
    ledger: &mut ResourceLedger,
    active: &mut [bool],
) -> Vec<u32> {
    for (pos, c) in base.iter().enumerate() {
        ledger.set(pos, Some(resource_of(c)));
    }
    let mut dropped = Vec::new();
    let mut pos = base.len();
    while !ledger.fits(instance) && pos > 0 {
        pos -= 1;
        ledger.set(pos, None);
        active[pos] = false;
        dropped.push(instance.tasks()[pos].id);
    }
    dropped
}

/// Greedy upgrade loop over precomputed job lists.
///
/// Every task starts at its first frontier point. Each round the task with
/// the best marginal ratio to its next frontier point is upgraded if the
/// whole resource vector still fits; tasks that do not fit are skipped for
/// that round and retried after the next accepted upgrade. Stops when no
/// upgrade fits.
pub fn greedy_allocate(job_lists: &[JobList], instance: &ProblemInstance) -> Result<Solution> {
    let tasks = instance.tasks();
    if job_lists.len() != tasks.len() || job_lists.iter().zip(tasks).any(|(j, t)| j.task_id != t.id) {
        return Err(QramError::contract("expected one job list per task, in task order"));
    }
    let n = tasks.len();
    let mut level = vec![0usize; n];
    let mut active = vec![true; n];
    let mut ledger = ResourceLedger::new(n);
    let base: Vec<Configuration> = job_lists.iter().map(|j| j.points[0].config).collect();
    let dropped = seat_base_configs(instance, &base, &mut ledger, &mut active);

    let ratio_of = |pos: usize, level: usize| {
        let pts = &job_lists[pos].points;
        marginal_ratio(&pts[level], &pts[level + 1])
    };
    let mut heap: BinaryHeap<Candidate> = (0..n)
        .filter(|&pos| active[pos] && job_lists[pos].len() > 1)
        .map(|pos| Candidate { ratio: ratio_of(pos, 0), pos })
        .collect();
    let mut blocked: Vec<Candidate> = Vec::new();
    let mut steps = Vec::new();

    while let Some(cand) = heap.pop() {
        let pos = cand.pos;
        let next = job_lists[pos].points[level[pos] + 1].config;
        let next_rv = resource_of(&next);
        if !ledger.fits_with(instance, pos, &next_rv) {
            blocked.push(cand);
            continue;
        }
        ledger.set(pos, Some(next_rv));
        steps.push(UpgradeStep {
            task_id: tasks[pos].id,
            from: job_lists[pos].points[level[pos]].config,
            to: next,
            ratio: cand.ratio,
            skipped: blocked.iter().map(|b| tasks[b.pos].id).collect(),
        });
        level[pos] += 1;
        if level[pos] + 1 < job_lists[pos].len() {
            heap.push(Candidate { ratio: ratio_of(pos, level[pos]), pos });
        }
        heap.extend(blocked.drain(..));
    }

    let mut allocation = Allocation::new();
    for pos in (0..n).filter(|&p| active[p]) {
        allocation.assign(tasks[pos].id, job_lists[pos].points[level[pos]].config);
    }
    Ok(Solution { allocation, trace: UpgradeTrace { dropped, steps } })
}

/// Full classical pipeline: embed, frontier, greedy.
pub fn solve(instance: &ProblemInstance) -> Result<Solution> {
    greedy_allocate(&job_lists(instance)?, instance)
}
