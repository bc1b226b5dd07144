//! The Q-RAM problem: tasks with discrete configuration spaces, resource
//! vectors against global bounds, and the additive system utility.
//!
//! Two resources are modelled: radar time occupancy (the duty fraction
//! `tx_duration / dwell_length`) and average radiated power in kilowatts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{QramError, Result};
use crate::perf::{task_utility, Scenario, Target};

/// Number of resource kinds produced by [`resource_of`].
pub const RESOURCE_KINDS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    /// Milliseconds.
    pub dwell_length: f64,
    /// Milliseconds.
    pub transmit_duration: f64,
    /// Kilowatts.
    pub transmit_power: f64,
}

impl Configuration {
    /// Total order used for deterministic tie-breaking.
    pub fn lex_cmp(&self, other: &Configuration) -> std::cmp::Ordering {
        self.dwell_length
            .total_cmp(&other.dwell_length)
            .then(self.transmit_duration.total_cmp(&other.transmit_duration))
            .then(self.transmit_power.total_cmp(&other.transmit_power))
    }
}

/// Cartesian product of three strictly increasing parameter grids. Indices
/// are row-major over dwell x transmit duration x transmit power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigSpaceDoc", into = "ConfigSpaceDoc")]
pub struct ConfigSpace {
    dwell_grid: Vec<f64>,
    tx_duration_grid: Vec<f64>,
    tx_power_grid: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ConfigSpaceDoc {
    dwell_grid: Vec<f64>,
    tx_duration_grid: Vec<f64>,
    tx_power_grid: Vec<f64>,
}

impl TryFrom<ConfigSpaceDoc> for ConfigSpace {
    type Error = QramError;

    fn try_from(d: ConfigSpaceDoc) -> Result<Self> {
        ConfigSpace::new(d.dwell_grid, d.tx_duration_grid, d.tx_power_grid)
    }
}

impl From<ConfigSpace> for ConfigSpaceDoc {
    fn from(s: ConfigSpace) -> Self {
        ConfigSpaceDoc {
            dwell_grid: s.dwell_grid,
            tx_duration_grid: s.tx_duration_grid,
            tx_power_grid: s.tx_power_grid,
        }
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(QramError::argument(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(QramError::argument(format!("{name} grid has a non-positive value")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(QramError::argument(format!("{name} grid is not strictly increasing")));
    }
    Ok(())
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl ConfigSpace {
    pub fn new(dwell_grid: Vec<f64>, tx_duration_grid: Vec<f64>, tx_power_grid: Vec<f64>) -> Result<Self> {
        check_grid("dwell", &dwell_grid)?;
        check_grid("transmit duration", &tx_duration_grid)?;
        check_grid("transmit power", &tx_power_grid)?;
        // every transmission has to fit inside every dwell of the product
        if tx_duration_grid[tx_duration_grid.len() - 1] >= dwell_grid[0] {
            return Err(QramError::argument("longest transmit duration must be shorter than the shortest dwell"));
        }
        Ok(ConfigSpace { dwell_grid, tx_duration_grid, tx_power_grid })
    }

    /// The 6 x 5 x 3 = 90 point grid of the reference tracking scenario.
    pub fn table_one() -> Self {
        ConfigSpace::new(
            vec![100.0, 300.0, 500.0, 700.0, 900.0, 1100.0],
            vec![2.0, 4.0, 6.0, 8.0, 10.0],
            vec![1.0, 2.0, 4.0],
        )
        .expect("reference grid is valid")
    }

    /// Uniform grids spanning the reference ranges (100-1100 ms dwell,
    /// 2-10 ms transmit, 1-4 kW) with the given number of points each.
    pub fn uniform(dwell_points: usize, tx_points: usize, power_points: usize) -> Result<Self> {
        if dwell_points == 0 || tx_points == 0 || power_points == 0 {
            return Err(QramError::argument("grid sizes must be positive"));
        }
        ConfigSpace::new(
            linspace(100.0, 1100.0, dwell_points),
            linspace(2.0, 10.0, tx_points),
            linspace(1.0, 4.0, power_points),
        )
    }

    pub fn dwell_grid(&self) -> &[f64] {
        &self.dwell_grid
    }

    pub fn tx_duration_grid(&self) -> &[f64] {
        &self.tx_duration_grid
    }

    pub fn tx_power_grid(&self) -> &[f64] {
        &self.tx_power_grid
    }

    pub fn len(&self) -> usize {
        self.dwell_grid.len() * self.tx_duration_grid.len() * self.tx_power_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-grid indices `[dwell, tx, power]` of a flat index.
    pub fn grid_indices(&self, index: usize) -> [usize; 3] {
        let np = self.tx_power_grid.len();
        let nt = self.tx_duration_grid.len();
        [index / (nt * np), (index / np) % nt, index % np]
    }

    pub fn flat_index(&self, [d, t, p]: [usize; 3]) -> usize {
        (d * self.tx_duration_grid.len() + t) * self.tx_power_grid.len() + p
    }

    /// Configuration at a flat index.
    ///
    /// Panics if `index >= self.len()`.
    pub fn get(&self, index: usize) -> Configuration {
        assert!(index < self.len(), "configuration index {index} out of range");
        let [d, t, p] = self.grid_indices(index);
        Configuration {
            dwell_length: self.dwell_grid[d],
            transmit_duration: self.tx_duration_grid[t],
            transmit_power: self.tx_power_grid[p],
        }
    }

    pub fn index_of(&self, config: &Configuration) -> Option<usize> {
        let d = self.dwell_grid.iter().position(|&v| v == config.dwell_length)?;
        let t = self.tx_duration_grid.iter().position(|&v| v == config.transmit_duration)?;
        let p = self.tx_power_grid.iter().position(|&v| v == config.transmit_power)?;
        Some(self.flat_index([d, t, p]))
    }

    pub fn contains(&self, config: &Configuration) -> bool {
        self.index_of(config).is_some()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = Configuration> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceVector {
    pub components: Vec<f64>,
}

impl ResourceVector {
    pub fn zeros(k: usize) -> Self {
        ResourceVector { components: vec![0.0; k] }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    fn add_assign(&mut self, other: &ResourceVector) {
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            *a += b;
        }
    }
}

/// Resource requirements of a configuration: `[time occupancy, average power]`.
pub fn resource_of(config: &Configuration) -> ResourceVector {
    let duty = config.transmit_duration / config.dwell_length;
    ResourceVector { components: vec![duty, config.transmit_power * duty] }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoundsDoc", into = "BoundsDoc")]
pub struct ResourceBounds {
    bounds: Vec<f64>,
    compound_weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BoundsDoc {
    bounds: Vec<f64>,
    compound_weights: Vec<f64>,
}

impl TryFrom<BoundsDoc> for ResourceBounds {
    type Error = QramError;

    fn try_from(d: BoundsDoc) -> Result<Self> {
        ResourceBounds::new(d.bounds, d.compound_weights)
    }
}

impl From<ResourceBounds> for BoundsDoc {
    fn from(b: ResourceBounds) -> Self {
        BoundsDoc { bounds: b.bounds, compound_weights: b.compound_weights }
    }
}

impl ResourceBounds {
    pub fn new(bounds: Vec<f64>, compound_weights: Vec<f64>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != compound_weights.len() {
            return Err(QramError::argument("bounds and compound weights must have the same non-zero length"));
        }
        if bounds.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(QramError::argument("resource bounds must be positive"));
        }
        if compound_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(QramError::argument("compound weights must be non-negative"));
        }
        if compound_weights.iter().all(|&w| w == 0.0) {
            return Err(QramError::argument("compound weights are all zero"));
        }
        Ok(ResourceBounds { bounds, compound_weights })
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn compound_weights(&self) -> &[f64] {
        &self.compound_weights
    }

    pub fn k(&self) -> usize {
        self.bounds.len()
    }

    /// Scalar budget when only the compound resource is constrained: the
    /// compound measure of the bound vector itself.
    pub fn compound_capacity(&self) -> f64 {
        let rv = ResourceVector { components: self.bounds.clone() };
        compound_resource(&rv, self).expect("same length")
    }
}

/// Bound-normalized weighted sum `sum_j w_j * rv_j / R_j`.
pub fn compound_resource(rv: &ResourceVector, bounds: &ResourceBounds) -> Result<f64> {
    if rv.len() != bounds.k() {
        return Err(QramError::contract(format!(
            "resource vector has {} components, bounds have {}",
            rv.len(),
            bounds.k()
        )));
    }
    Ok(rv
        .components
        .iter()
        .zip(&bounds.bounds)
        .zip(&bounds.compound_weights)
        .map(|((r, b), w)| w * r / b)
        .sum())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    #[default]
    Tracking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: u32,
    pub task_type: TaskType,
    pub target_ref: u32,
    pub config_space: ConfigSpace,
}

/// Which resource limits an allocation must respect.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Every component of the summed resource vector within its bound.
    #[default]
    Vector,
    /// Only the summed compound resource, against [`ResourceBounds::compound_capacity`].
    Compound,
}

pub const INSTANCE_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc", into = "InstanceDoc")]
pub struct ProblemInstance {
    tasks: Vec<Task>,
    bounds: ResourceBounds,
    scenario: Scenario,
    constraint: Constraint,
    // scenario position of each task's target
    target_pos: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    format: u32,
    tasks: Vec<Task>,
    bounds: ResourceBounds,
    scenario: Scenario,
    #[serde(default)]
    constraint: Constraint,
}

impl TryFrom<InstanceDoc> for ProblemInstance {
    type Error = QramError;

    fn try_from(d: InstanceDoc) -> Result<Self> {
        if d.format != INSTANCE_FORMAT {
            return Err(QramError::argument(format!("unsupported instance format {}", d.format)));
        }
        ProblemInstance::new(d.tasks, d.bounds, d.scenario)
            .map(|inst| inst.with_constraint(d.constraint))
    }
}

impl From<ProblemInstance> for InstanceDoc {
    fn from(p: ProblemInstance) -> Self {
        InstanceDoc {
            format: INSTANCE_FORMAT,
            tasks: p.tasks,
            bounds: p.bounds,
            scenario: p.scenario,
            constraint: p.constraint,
        }
    }
}

impl ProblemInstance {
    /// Validates ids and target references. Tasks are kept sorted by id.
    pub fn new(mut tasks: Vec<Task>, bounds: ResourceBounds, scenario: Scenario) -> Result<Self> {
        if bounds.k() != RESOURCE_KINDS {
            return Err(QramError::argument(format!(
                "expected {RESOURCE_KINDS} resource bounds, got {}",
                bounds.k()
            )));
        }
        tasks.sort_by_key(|t| t.id);
        if tasks.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(QramError::argument("duplicate task id"));
        }
        let target_pos = tasks
            .iter()
            .map(|t| {
                scenario
                    .targets
                    .iter()
                    .position(|g| g.id == t.target_ref)
                    .ok_or_else(|| QramError::argument(format!("task {} references unknown target {}", t.id, t.target_ref)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProblemInstance { tasks, bounds, scenario, constraint: Constraint::Vector, target_pos })
    }

    /// One tracking task per target (task id = target id), all sharing `space`.
    pub fn from_scenario(scenario: Scenario, space: &ConfigSpace, bounds: ResourceBounds) -> Result<Self> {
        let tasks = scenario
            .targets
            .iter()
            .map(|t| Task {
                id: t.id,
                task_type: TaskType::Tracking,
                target_ref: t.id,
                config_space: space.clone(),
            })
            .collect();
        ProblemInstance::new(tasks, bounds, scenario)
    }

    pub fn with_constraint(mut self, constraint: Constraint) -> Self {
        self.constraint = constraint;
        self
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn bounds(&self) -> &ResourceBounds {
        &self.bounds
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    /// Target of the task at position `pos` in [`Self::tasks`].
    pub fn target_at(&self, pos: usize) -> &Target {
        &self.scenario.targets[self.target_pos[pos]]
    }

    pub fn position_of(&self, task_id: u32) -> Option<usize> {
        self.tasks.binary_search_by_key(&task_id, |t| t.id).ok()
    }

    /// Compound resource of one configuration under this instance's bounds.
    pub fn compound_of(&self, config: &Configuration) -> f64 {
        compound_resource(&resource_of(config), &self.bounds).expect("resource_of yields RESOURCE_KINDS components")
    }
}

/// Chosen configuration per task id; absent ids are dropped tasks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub assignment: BTreeMap<u32, Configuration>,
}

impl Allocation {
    pub fn new() -> Self {
        Allocation::default()
    }

    pub fn assign(&mut self, task_id: u32, config: Configuration) {
        self.assignment.insert(task_id, config);
    }

    pub fn get(&self, task_id: u32) -> Option<&Configuration> {
        self.assignment.get(&task_id)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Checks every entry names a known task and lies in its configuration space.
    pub fn validate(&self, instance: &ProblemInstance) -> Result<()> {
        for (id, config) in &self.assignment {
            let pos = instance
                .position_of(*id)
                .ok_or_else(|| QramError::contract(format!("allocation names unknown task {id}")))?;
            if !instance.tasks[pos].config_space.contains(config) {
                return Err(QramError::contract(format!("configuration for task {id} is outside its space")));
            }
        }
        Ok(())
    }
}

/// Sum of per-task utilities over assigned tasks, in task-id order.
pub fn system_utility(alloc: &Allocation, instance: &ProblemInstance) -> Result<f64> {
    let mut total = 0.0;
    for (id, config) in &alloc.assignment {
        let pos = instance
            .position_of(*id)
            .ok_or_else(|| QramError::contract(format!("allocation names unknown task {id}")))?;
        total += task_utility(config, instance.target_at(pos));
    }
    Ok(total)
}

/// Summed resource vector of the assigned configurations.
pub fn resource_usage(alloc: &Allocation) -> ResourceVector {
    let mut usage = ResourceVector::zeros(RESOURCE_KINDS);
    for config in alloc.assignment.values() {
        usage.add_assign(&resource_of(config));
    }
    usage
}

/// Whether the allocation satisfies the instance's resource limits (inclusive).
pub fn is_feasible(alloc: &Allocation, instance: &ProblemInstance) -> bool {
    let vectors: Vec<ResourceVector> = alloc.assignment.values().map(resource_of).collect();
    fits(instance, vectors.iter())
}

/// The single feasibility rule shared by every solver. Summation runs in
/// iteration order, so callers pass vectors in task-id order to get the same
/// floating-point result as [`is_feasible`].
pub(crate) fn fits<'a>(instance: &ProblemInstance, vectors: impl Iterator<Item = &'a ResourceVector>) -> bool {
    match instance.constraint {
        Constraint::Vector => {
            let mut usage = ResourceVector::zeros(RESOURCE_KINDS);
            for v in vectors {
                usage.add_assign(v);
            }
            usage.components.iter().zip(instance.bounds.bounds()).all(|(u, b)| u <= b)
        }
        Constraint::Compound => {
            let mut total = 0.0;
            for v in vectors {
                total += compound_resource(v, &instance.bounds).expect("matching length");
            }
            total <= instance.bounds.compound_capacity()
        }
    }
}

/// Per-task resource vectors of a partial allocation, used by the iterative
/// optimizers to test a single-task change with the canonical arithmetic.
#[derive(Clone, Debug)]
pub(crate) struct ResourceLedger {
    slots: Vec<Option<ResourceVector>>,
}

impl ResourceLedger {
    pub(crate) fn new(n_tasks: usize) -> Self {
        ResourceLedger { slots: vec![None; n_tasks] }
    }

    pub(crate) fn set(&mut self, pos: usize, v: Option<ResourceVector>) {
        self.slots[pos] = v;
    }

    pub(crate) fn fits(&self, instance: &ProblemInstance) -> bool {
        fits(instance, self.slots.iter().flatten())
    }

    /// Feasibility if slot `pos` held `candidate` instead.
    pub(crate) fn fits_with(&self, instance: &ProblemInstance, pos: usize, candidate: &ResourceVector) -> bool {
        let vectors = self
            .slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| if i == pos { Some(candidate) } else { s.as_ref() });
        fits(instance, vectors)
    }
}

/// Default bounds for an `n`-target scenario: occupancy `min(0.03 n, 1)`,
/// average power 5 kW, unit compound weights.
pub fn default_bounds(n_targets: usize) -> ResourceBounds {
    let occupancy = (0.03 * n_targets as f64).min(1.0);
    ResourceBounds::new(vec![occupancy, 5.0], vec![1.0, 1.0]).expect("positive defaults")
}
