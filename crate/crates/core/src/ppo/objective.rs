//! Scalar pieces of the PPO update: probability ratio, clipped surrogate,
//! TD residuals, GAE and the critic loss.

use crate::error::{Error, Result};

pub fn policy_ratio(new_prob: f64, old_prob: f64) -> Result<f64> {
    if old_prob.is_nan() || old_prob <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "old action probability must be positive, got {old_prob}"
        )));
    }
    Ok(new_prob / old_prob)
}

/// `max(min(x, hi), lo)`
pub fn clip(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if lo > hi {
        return Err(Error::InvalidArgument(format!(
            "clip bounds reversed: {lo} > {hi}"
        )));
    }
    Ok(x.min(hi).max(lo))
}

/// Whether the surrogate passes gradient back to the ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientGate {
    Open,
    /// The clipped branch is the active minimum and is flat in the ratio.
    Closed,
}

/// Clipped surrogate `min(r·A, clip(r, 1−ε, 1+ε)·A)` for one sample.
pub fn actor_objective(ratio: f64, advantage: f64, epsilon: f64) -> (f64, GradientGate) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    if clipped < unclipped {
        (clipped, GradientGate::Closed)
    } else {
        (unclipped, GradientGate::Open)
    }
}

/// `δ = R + γ·V(s') − V(s)`, with the bootstrap dropped on terminal steps.
pub fn td_residual(reward: f64, value: f64, next_value: f64, gamma: f64, terminal: bool) -> f64 {
    let bootstrap = if terminal { 0.0 } else { gamma * next_value };
    reward + bootstrap - value
}

/// Advantages of one complete episode via `A_t = δ_t + γλ·A_{t+1}`.
pub fn compute_gae(deltas: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot compute advantages of an empty episode".into(),
        ));
    }
    let decay = gamma * lambda;
    let mut out = vec![0.0; deltas.len()];
    let mut running = 0.0;
    for (a, &d) in out.iter_mut().zip(deltas).rev() {
        running = d + decay * running;
        *a = running;
    }
    Ok(out)
}

/// Mean squared TD residual; 0 for an empty batch.
pub fn critic_loss(deltas: &[f64]) -> f64 {
    if deltas.is_empty() {
        return 0.0;
    }
    deltas.iter().map(|d| d * d).sum::<f64>() / deltas.len() as f64
}
