//! Episode rollouts and the actor/critic update loop.

use crate::env::{Action, Cartpole, CartpoleParams, Observation};
use crate::error::{Error, Result};
use crate::init::{InitSpec, Rng};
use crate::logio::{RunMeta, TrainingLog};
use crate::nncore::Mlp;
use crate::optim::step_sgd;

use super::config::{PpoConfig, RunConfig};
use super::objective::{actor_objective, compute_gae, policy_ratio, td_residual, GradientGate};

// Independent RNG streams per consumer, all derived from the run seed.
const STREAM_ACTOR_INIT: u64 = 1;
const STREAM_CRITIC_INIT: u64 = 2;
const STREAM_ENV: u64 = 3;
const STREAM_ACTIONS: u64 = 4;
const STREAM_SHUFFLE: u64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub observation: Observation,
    pub action: Action,
    /// π_old(a|s) at collection time.
    pub old_prob: f64,
    pub reward: f64,
    pub next_observation: Observation,
    pub terminal: bool,
    pub value: f64,
    pub next_value: f64,
    pub delta: f64,
    pub advantage: f64,
    pub return_to_go: f64,
}

/// One complete episode. Advantages are filled in before any update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBuffer {
    pub steps: Vec<RolloutStep>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn mean_action_prob(&self) -> f64 {
        self.steps.iter().map(|s| s.old_prob).sum::<f64>() / self.steps.len() as f64
    }
}

/// Snapshot handed to a [`TrainObserver`] after each minibatch update.
#[derive(Debug)]
pub struct UpdateInfo<'a> {
    /// 1-based episode index.
    pub episode: usize,
    pub epoch: usize,
    pub batch: usize,
    /// Probability ratios of the minibatch, computed before the update.
    pub ratios: &'a [f64],
    pub actor: &'a Mlp,
    pub critic: &'a Mlp,
}

pub trait TrainObserver {
    fn on_rollout(&mut self, _episode: usize, _buffer: &RolloutBuffer) {}
    fn on_update(&mut self, _info: &UpdateInfo<'_>) {}
}

impl TrainObserver for () {}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub actor: Mlp,
    pub critic: Mlp,
    pub log: TrainingLog,
}

/// Samples index 0 when `u < p0`.
pub fn sample_action(probs: &[f64], u: f64) -> Action {
    if u < probs[0] {
        Action::Forward
    } else {
        Action::Backward
    }
}

pub fn initial_networks(config: &PpoConfig) -> Result<(Mlp, Mlp)> {
    let actor = InitSpec {
        kind: config.actor_init,
        seed: Rng::with_stream(config.seed, STREAM_ACTOR_INIT)
            .open01()
            .to_bits(),
    }
    .apply(&Mlp::actor())?;
    let critic = InitSpec {
        kind: config.critic_init,
        seed: Rng::with_stream(config.seed, STREAM_CRITIC_INIT)
            .open01()
            .to_bits(),
    }
    .apply(&Mlp::critic())?;
    Ok((actor, critic))
}

/// Plays one episode with the stochastic policy and fills in values,
/// residuals and advantages from the current critic.
pub fn collect_episode(
    actor: &Mlp,
    critic: &Mlp,
    env: &mut Cartpole,
    action_rng: &mut Rng,
    config: &PpoConfig,
) -> Result<RolloutBuffer> {
    let mut steps = Vec::new();
    let mut obs = env.reset();
    loop {
        let probs = actor.predict(obs.as_slice())?;
        let action = sample_action(&probs, action_rng.unit());
        let result = env.step(action)?;
        steps.push(RolloutStep {
            observation: obs,
            action,
            old_prob: probs[action.index()],
            reward: result.reward,
            next_observation: result.observation,
            terminal: result.done,
            value: 0.0,
            next_value: 0.0,
            delta: 0.0,
            advantage: 0.0,
            return_to_go: 0.0,
        });
        obs = result.observation;
        if result.done {
            break;
        }
    }
    for s in &mut steps {
        s.value = critic.predict(s.observation.as_slice())?[0];
        s.next_value = if s.terminal {
            0.0
        } else {
            critic.predict(s.next_observation.as_slice())?[0]
        };
        s.delta = td_residual(s.reward, s.value, s.next_value, config.gamma, s.terminal);
    }
    let deltas: Vec<f64> = steps.iter().map(|s| s.delta).collect();
    let advantages = compute_gae(&deltas, config.gamma, config.gae_lambda)?;
    for (s, a) in steps.iter_mut().zip(advantages) {
        s.advantage = a;
        s.return_to_go = a + s.value;
    }
    Ok(RolloutBuffer { steps })
}

/// Batch-mean gradient of the clipped surrogate w.r.t. the actor parameters.
/// Also returns the per-sample ratios.
fn actor_gradient(
    actor: &Mlp,
    batch: &[&RolloutStep],
    epsilon: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut acc = vec![0.0; actor.param_count()];
    let mut ratios = Vec::with_capacity(batch.len());
    for s in batch {
        let (probs, trace) = actor.forward(s.observation.as_slice())?;
        let a = s.action.index();
        let ratio = policy_ratio(probs[a], s.old_prob)?;
        ratios.push(ratio);
        let (_, gate) = actor_objective(ratio, s.advantage, epsilon);
        if gate == GradientGate::Closed || s.advantage == 0.0 {
            continue;
        }
        let mut out_grad = vec![0.0; probs.len()];
        out_grad[a] = s.advantage / s.old_prob;
        let g = actor.backward(&trace, &out_grad)?.flatten();
        acc.iter_mut().zip(g).for_each(|(x, y)| *x += y);
    }
    let n = batch.len() as f64;
    acc.iter_mut().for_each(|x| *x /= n);
    Ok((acc, ratios))
}

/// Batch-mean gradient of `δ²` with `δ = R + γV(s') − V(s)` evaluated by the
/// current critic; both value terms carry gradient.
fn critic_gradient(critic: &Mlp, batch: &[&RolloutStep], gamma: f64) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; critic.param_count()];
    for s in batch {
        let (v, trace) = critic.forward(s.observation.as_slice())?;
        let next = if s.terminal {
            None
        } else {
            Some(critic.forward(s.next_observation.as_slice())?)
        };
        let next_v = next.as_ref().map_or(0.0, |(nv, _)| nv[0]);
        let delta = td_residual(s.reward, v[0], next_v, gamma, s.terminal);
        let g = critic.backward(&trace, &[-2.0 * delta])?.flatten();
        acc.iter_mut().zip(g).for_each(|(x, y)| *x += y);
        if let Some((_, next_trace)) = next {
            let g = critic
                .backward(&next_trace, &[2.0 * gamma * delta])?
                .flatten();
            acc.iter_mut().zip(g).for_each(|(x, y)| *x += y);
        }
    }
    let n = batch.len() as f64;
    acc.iter_mut().for_each(|x| *x /= n);
    Ok(acc)
}

fn default_meta(run: &RunConfig) -> RunMeta {
    RunMeta {
        method: format!("{}-{}", run.ppo.actor_optimizer, run.ppo.actor_init.name()),
        init: run.ppo.actor_init.to_string(),
        seed: run.ppo.seed,
        config_hash: run.hash(),
        max_reward: run.env.max_steps as f64,
    }
}

pub fn train(config: &PpoConfig, env_params: &CartpoleParams) -> Result<TrainOutcome> {
    train_with_observer(config, env_params, &mut ())
}

pub fn train_with_observer(
    config: &PpoConfig,
    env_params: &CartpoleParams,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    let run = RunConfig {
        ppo: *config,
        env: *env_params,
    };
    run.validate()?;
    let optimizer = config.actor_optimizer_spec()?;
    let (mut actor, mut critic) = initial_networks(config)?;
    let mut env = Cartpole::new(*env_params, Rng::with_stream(config.seed, STREAM_ENV));
    let mut action_rng = Rng::with_stream(config.seed, STREAM_ACTIONS);
    let mut shuffle_rng = Rng::with_stream(config.seed, STREAM_SHUFFLE);
    let mut log = TrainingLog::new(default_meta(&run));

    for episode in 1..=config.episodes {
        let buffer = collect_episode(&actor, &critic, &mut env, &mut action_rng, config)?;
        log.push(buffer.total_reward(), buffer.mean_action_prob());
        observer.on_rollout(episode, &buffer);

        let mut order: Vec<usize> = (0..buffer.len()).collect();
        for epoch in 0..config.epochs {
            shuffle_rng.shuffle(&mut order);
            for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
                let batch: Vec<&RolloutStep> = chunk.iter().map(|&i| &buffer.steps[i]).collect();
                let nonfinite = |what| Error::NonFinite {
                    what,
                    episode,
                    epoch,
                    batch: batch_idx,
                };

                let (actor_grad, ratios) = actor_gradient(&actor, &batch, config.clip_epsilon)?;
                let critic_grad = critic_gradient(&critic, &batch, config.gamma)?;
                if actor_grad.iter().any(|g| !g.is_finite()) {
                    return Err(nonfinite("actor gradient"));
                }
                if critic_grad.iter().any(|g| !g.is_finite()) {
                    return Err(nonfinite("critic gradient"));
                }

                let next = optimizer.step(&actor.flatten(), &actor_grad)?;
                actor.unflatten(&next)?;
                let next = step_sgd(&critic.flatten(), &critic_grad, config.critic_lr)?;
                critic.unflatten(&next)?;

                if !actor.all_finite() {
                    return Err(nonfinite("actor parameters"));
                }
                if !critic.all_finite() {
                    return Err(nonfinite("critic parameters"));
                }
                debug_assert!(
                    !optimizer.kind.is_non_negative() || actor.min_param() >= 0.0,
                    "negative actor parameter under {}",
                    optimizer.kind
                );

                observer.on_update(&UpdateInfo {
                    episode,
                    epoch,
                    batch: batch_idx,
                    ratios: &ratios,
                    actor: &actor,
                    critic: &critic,
                });
            }
        }
    }
    Ok(TrainOutcome { actor, critic, log })
}

/// Greedy rollouts: the most probable action is taken; exact ties are broken
/// uniformly at random. Returns one total reward per episode.
pub fn evaluate_greedy(
    actor: &Mlp,
    env_params: &CartpoleParams,
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut env = Cartpole::new(*env_params, Rng::with_stream(seed, STREAM_ENV));
    let mut tie_rng = Rng::with_stream(seed, STREAM_ACTIONS);
    let mut rewards = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset();
        let mut total = 0.0;
        loop {
            let p = actor.predict(obs.as_slice())?;
            let action = if p[0] > p[1] {
                Action::Forward
            } else if p[1] > p[0] {
                Action::Backward
            } else {
                sample_action(&[0.5, 0.5], tie_rng.unit())
            };
            let r = env.step(action)?;
            total += r.reward;
            obs = r.observation;
            if r.done {
                break;
            }
        }
        rewards.push(total);
    }
    Ok(rewards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::OptimizerKind;

    fn small_config(seed: u64) -> PpoConfig {
        PpoConfig {
            episodes: 3,
            epochs: 2,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn rollout_fills_advantages() {
        let cfg = small_config(1);
        let (actor, critic) = initial_networks(&cfg).unwrap();
        let mut env = Cartpole::new(CartpoleParams::default(), Rng::new(1));
        let buf = collect_episode(&actor, &critic, &mut env, &mut Rng::new(2), &cfg).unwrap();
        assert!(!buf.is_empty());
        assert!(buf.steps.last().unwrap().terminal);
        assert!(buf.steps[..buf.len() - 1].iter().all(|s| !s.terminal));
        assert!(buf
            .steps
            .iter()
            .all(|s| s.old_prob > 0.0 && s.old_prob < 1.0));
        assert_eq!(buf.total_reward(), buf.len() as f64);
    }

    #[test]
    fn training_is_reproducible() {
        let cfg = small_config(5);
        let a = train(&cfg, &CartpoleParams::default()).unwrap();
        let b = train(&cfg, &CartpoleParams::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.log.records.len(), 3);
    }

    #[test]
    fn non_negative_actor_stays_non_negative() {
        for kind in [OptimizerKind::Asga, OptimizerKind::Csga] {
            let mut cfg = small_config(8);
            cfg.actor_optimizer = kind;
            cfg.actor_init = crate::init::InitKind::Kaiming;
            struct MinTracker(f64);
            impl TrainObserver for MinTracker {
                fn on_update(&mut self, info: &UpdateInfo<'_>) {
                    self.0 = self.0.min(info.actor.min_param());
                }
            }
            let mut tracker = MinTracker(f64::INFINITY);
            train_with_observer(&cfg, &CartpoleParams::default(), &mut tracker).unwrap();
            assert!(tracker.0 >= 0.0, "{kind}: {}", tracker.0);
        }
    }

    #[test]
    fn rejects_invalid_config() {
        let cfg = PpoConfig {
            batch_size: 0,
            ..small_config(0)
        };
        assert!(matches!(
            train(&cfg, &CartpoleParams::default()),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn zero_actor_evaluates_like_coin_flips() {
        let actor = Mlp::actor();
        let r = evaluate_greedy(&actor, &CartpoleParams::default(), 20, 3).unwrap();
        assert_eq!(r.len(), 20);
        assert_eq!(
            r,
            evaluate_greedy(&actor, &CartpoleParams::default(), 20, 3).unwrap()
        );
        assert!(r.iter().all(|&v| (1.0..=195.0).contains(&v)));
    }
}
