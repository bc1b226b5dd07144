use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::Context;
use qram_core::allocator::allocate_with_agent;
use qram_core::classic::{embed_task, greedy_allocate, upper_frontier, UpgradeTrace};
use qram_core::oracle::{default_dp_step, optimal_allocation, optimal_allocation_dp};
use qram_core::problem::resource_usage;
use qram_core::{
    default_bounds, is_feasible, system_utility, Allocation, ConfigSpace, Configuration, Constraint, ProblemInstance,
    ResourceBounds, Scenario,
};
use serde::Serialize;

use crate::{load_model, usage, write_json, Method, SolveArgs};

pub const RESULT_FORMAT: u32 = 1;

#[derive(Serialize)]
struct TaskResult {
    task_id: u32,
    /// `None` for a task dropped because even its cheapest configuration did not fit.
    config: Option<Configuration>,
    utility: f64,
}

#[derive(Serialize)]
struct SolveResult {
    format: u32,
    method: Method,
    scenario_seed: u64,
    constraint: Constraint,
    bounds: ResourceBounds,
    tasks: Vec<TaskResult>,
    system_utility: f64,
    resource_usage: Vec<f64>,
    feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<UpgradeTrace>,
    /// Wall-clock seconds per phase; the only non-reproducible field.
    timing: BTreeMap<&'static str, f64>,
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            Method::Classic => "classic",
            Method::Agent => "agent",
            Method::Brute => "brute",
            Method::Dp => "dp",
        })
    }
}

fn bounds_for(args: &SolveArgs, n: usize) -> anyhow::Result<ResourceBounds> {
    let d = default_bounds(n);
    let occupancy = args.bounds.occupancy.unwrap_or(d.bounds()[0]);
    let power = args.bounds.power.unwrap_or(d.bounds()[1]);
    Ok(ResourceBounds::new(vec![occupancy, power], d.compound_weights().to_vec())?)
}

pub fn run(args: &SolveArgs) -> anyhow::Result<()> {
    if args.method == Method::Agent && args.weights.is_none() {
        return Err(usage("--method agent needs --weights"));
    }
    let text = std::fs::read_to_string(&args.scenario).with_context(|| format!("reading {}", args.scenario.display()))?;
    let scenario: Scenario = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.scenario.display()))?;
    let bounds = bounds_for(args, scenario.targets.len())?;
    let model = args.weights.as_deref().filter(|_| args.method == Method::Agent).map(load_model).transpose()?;
    let space = model.as_ref().map_or_else(ConfigSpace::table_one, |m| m.space.clone());
    let instance = ProblemInstance::from_scenario(scenario, &space, bounds)?.with_constraint(args.constraint.into());

    let mut timing = BTreeMap::new();
    let total = Instant::now();
    let (allocation, trace): (Allocation, Option<UpgradeTrace>) = match args.method {
        Method::Classic => {
            let t = Instant::now();
            let embedded: Vec<_> = instance
                .tasks()
                .iter()
                .enumerate()
                .map(|(pos, task)| embed_task(task, instance.target_at(pos), instance.bounds()))
                .collect();
            timing.insert("embed_s", t.elapsed().as_secs_f64());
            let t = Instant::now();
            let lists = instance
                .tasks()
                .iter()
                .zip(&embedded)
                .map(|(task, pts)| upper_frontier(task.id, pts))
                .collect::<qram_core::Result<Vec<_>>>()?;
            timing.insert("hull_s", t.elapsed().as_secs_f64());
            let t = Instant::now();
            let sol = greedy_allocate(&lists, &instance)?;
            timing.insert("optimize_s", t.elapsed().as_secs_f64());
            (sol.allocation, Some(sol.trace))
        }
        Method::Agent => {
            let out = allocate_with_agent(model.as_ref().expect("loaded above"), &instance)?;
            let query = out.query_time.as_secs_f64();
            timing.insert("agent_query_s", query);
            timing.insert("optimize_s", (total.elapsed().as_secs_f64() - query).max(0.0));
            (out.solution.allocation, Some(out.solution.trace))
        }
        Method::Brute => {
            let sol = optimal_allocation(&instance, None)?;
            timing.insert("optimize_s", total.elapsed().as_secs_f64());
            (sol.allocation, None)
        }
        Method::Dp => {
            let step = args.dp_step.unwrap_or_else(|| default_dp_step(&instance));
            let sol = optimal_allocation_dp(&instance, step)?;
            timing.insert("optimize_s", total.elapsed().as_secs_f64());
            (sol.allocation, None)
        }
    };
    timing.insert("total_s", total.elapsed().as_secs_f64());

    let tasks = instance
        .tasks()
        .iter()
        .enumerate()
        .map(|(pos, task)| {
            let config = allocation.get(task.id).copied();
            let utility = config.map_or(0.0, |c| qram_core::perf::task_utility(&c, instance.target_at(pos)));
            TaskResult { task_id: task.id, config, utility }
        })
        .collect();
    let result = SolveResult {
        format: RESULT_FORMAT,
        method: args.method,
        scenario_seed: instance.scenario().seed,
        constraint: instance.constraint(),
        bounds: instance.bounds().clone(),
        tasks,
        system_utility: system_utility(&allocation, &instance)?,
        resource_usage: resource_usage(&allocation).components,
        feasible: is_feasible(&allocation, &instance),
        trace,
        timing,
    };
    write_json(&args.out, &result)
}
