//! PPO with a non-negative actor: clipped surrogate, GAE, a TD-residual
//! critic, and the episode-by-episode training loop.

mod checkpoint;
mod config;
mod objective;
mod train;

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use config::{Method, PpoConfig, RunConfig};
pub use objective::{
    actor_objective, clip, compute_gae, critic_loss, policy_ratio, td_residual, GradientGate,
};
pub use train::{
    collect_episode, evaluate_greedy, initial_networks, sample_action, train, train_with_observer,
    RolloutBuffer, RolloutStep, TrainObserver, TrainOutcome, UpdateInfo,
};
