//! Actor-critic agent: network, training and weight files.

pub mod net;
pub mod persist;
pub mod train;

pub use net::{greedy_action, sample_action, softmax, AgentParams, Dense, NetShape};
pub use persist::{load, save, AgentModel};
pub use train::{a2c_update, episode_gradients, episode_loss, train, OptimizerState, TrainConfig, TrainOutcome, Transition};
