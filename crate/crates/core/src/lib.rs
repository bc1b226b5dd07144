//! Quality-of-service based radar resource allocation (Q-RAM).
//!
//! Radar tracking tasks each pick one configuration (dwell length, transmit
//! duration, transmit power) so that summed utility is maximal while the
//! summed resource vector stays within global bounds. Two solvers are
//! provided:
//!
//! * [`classic`]: embed every configuration into resource-utility space,
//!   keep each task's concave frontier, then upgrade greedily by marginal
//!   utility per compound resource.
//! * [`allocator`]: the same upgrade loop, but the next configuration of a
//!   task is proposed by a trained actor-critic network ([`agent`]) instead of
//!   a precomputed frontier.
//!
//! [`oracle`] holds exact solvers used to check both.

pub mod agent;
pub mod allocator;
pub mod bench;
pub mod classic;
pub mod env;
pub mod error;
pub mod oracle;
pub mod perf;
pub mod problem;
pub mod rng;

pub use error::{QramError, Result};
pub use perf::{generate_scenario, Scenario, Target, TargetType};
pub use problem::{
    default_bounds, is_feasible, resource_of, system_utility, Allocation, ConfigSpace, Configuration, Constraint,
    ProblemInstance, ResourceBounds, ResourceVector, Task,
};
