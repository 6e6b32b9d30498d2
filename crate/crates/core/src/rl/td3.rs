//! Twin Delayed DDPG: twin critics regressed on the minimum of two target
//! critics with clipped target-policy noise, a deterministic actor updated
//! every `policy_delay` critic steps, and Polyak-averaged target networks.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::mlp::{Adam, Mlp, OutputActivation};
use super::replay::{ReplayBuffer, Transition};
use super::{Environment, EpisodeLog};
use crate::error::{param, Error, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Discount factor of the TD target.
    pub discount: f64,
    /// Polyak coefficient.
    pub tau: f64,
    pub policy_delay: usize,
    pub exploration_noise: f64,
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Uniform-random actions taken before the actor is used.
    pub warmup_steps: usize,
    /// Moving-statistics window of the episode log.
    pub window: usize,
    /// Factor applied to rewards before they enter the replay buffer. Logged
    /// rewards are unscaled.
    pub reward_scale: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            actor_lr: 3e-6,
            critic_lr: 3e-4,
            discount: 0.0,
            tau: 0.005,
            policy_delay: 2,
            exploration_noise: 0.1,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            batch_size: 128,
            buffer_capacity: 100_000,
            hidden: vec![64, 64],
            episodes: 400,
            steps_per_episode: 30,
            warmup_steps: 1500,
            window: 50,
            reward_scale: 0.1,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return param(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if self.policy_delay == 0 {
            return param("policy_delay must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return param(format!("discount must lie in [0, 1], got {}", self.discount));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return param("learning rates must be positive");
        }
        if self.exploration_noise < 0.0 || self.target_noise < 0.0 || self.target_noise_clip < 0.0 {
            return param("noise scales must be non-negative");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return param("batch size must be positive and fit in the buffer");
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return param(format!("reward scale must be positive, got {}", self.reward_scale));
        }
        if self.hidden.contains(&0) {
            return param("hidden layers must be non-empty");
        }
        if self.episodes == 0 || self.steps_per_episode == 0 || self.window == 0 {
            return param("episodes, steps per episode and window must be positive");
        }
        Ok(())
    }
}

/// Outcome of one gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_updated: bool,
}

#[derive(Debug, Clone)]
pub struct Td3Agent {
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critics: [Mlp; 2],
    pub critic_targets: [Mlp; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    config: Td3Config,
    action_dim: usize,
    critic_updates: usize,
    actor_updates: usize,
}

fn stack(rows: impl ExactSizeIterator<Item = impl AsRef<[f64]>>, width: usize) -> Array2<f64> {
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * width);
    for r in rows {
        flat.extend_from_slice(r.as_ref());
    }
    Array2::from_shape_vec((n, width), flat).expect("rows share the declared width")
}

impl Td3Agent {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, config: &Td3Config, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut actor_sizes = vec![state_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(action_dim);
        let mut critic_sizes = vec![state_dim + action_dim];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);

        let actor = Mlp::new(&actor_sizes, OutputActivation::Tanh, rng)?;
        let critics = [
            Mlp::new(&critic_sizes, OutputActivation::Linear, rng)?,
            Mlp::new(&critic_sizes, OutputActivation::Linear, rng)?,
        ];
        Ok(Td3Agent {
            actor_opt: Adam::new(&actor, config.actor_lr),
            critic_opts: [Adam::new(&critics[0], config.critic_lr), Adam::new(&critics[1], config.critic_lr)],
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
            config: config.clone(),
            action_dim,
            critic_updates: 0,
            actor_updates: 0,
        })
    }

    pub fn critic_updates(&self) -> usize {
        self.critic_updates
    }

    pub fn actor_updates(&self) -> usize {
        self.actor_updates
    }

    /// Deterministic policy output in `[-1, 1]^d`.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.actor.forward(state)
    }

    /// Policy output plus clipped Gaussian exploration noise.
    pub fn explore<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let mut a = self.act(state)?;
        if self.config.exploration_noise > 0.0 {
            let noise = Normal::new(0.0, self.config.exploration_noise).expect("validated noise scale");
            for v in &mut a {
                *v = (*v + noise.sample(rng)).clamp(-1.0, 1.0);
            }
        }
        Ok(a)
    }

    /// One critic step on `batch`, followed by an actor step and target
    /// update every `policy_delay` calls.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &[&Transition], rng: &mut R) -> Result<UpdateStats> {
        if batch.is_empty() {
            return param("empty training batch");
        }
        let b = batch.len();
        let sd = batch[0].state.len();
        let ad = self.action_dim;
        let states = stack(batch.iter().map(|t| &t.state), sd);
        let actions = stack(batch.iter().map(|t| &t.action), ad);
        let next_states = stack(batch.iter().map(|t| &t.next_state), sd);
        let rewards = Array1::from_iter(batch.iter().map(|t| t.reward));
        let not_done = Array1::from_iter(batch.iter().map(|t| if t.done { 0.0 } else { 1.0 }));

        // Target policy smoothing.
        let mut next_actions = self.actor_target.forward_batch(next_states.view())?.output().clone();
        if self.config.target_noise > 0.0 {
            let noise = Normal::new(0.0, self.config.target_noise).expect("validated noise scale");
            let clip = self.config.target_noise_clip;
            next_actions.mapv_inplace(|a| (a + noise.sample(rng).clamp(-clip, clip)).clamp(-1.0, 1.0));
        }
        let next_input = concatenate![Axis(1), next_states, next_actions];
        let q1 = self.critic_targets[0].forward_batch(next_input.view())?.output().column(0).to_owned();
        let q2 = self.critic_targets[1].forward_batch(next_input.view())?.output().column(0).to_owned();
        let min_q = ndarray::Zip::from(&q1).and(&q2).map_collect(|a, b| a.min(*b));
        let target = &rewards + &(self.config.discount * &not_done * &min_q);

        let input = concatenate![Axis(1), states, actions];
        let mut critic_loss = 0.0;
        for (critic, opt) in self.critics.iter_mut().zip(&mut self.critic_opts) {
            let cache = critic.forward_batch(input.view())?;
            let diff = &cache.output().column(0) - &target;
            critic_loss += diff.mapv(|d| d * d).sum() / b as f64;
            let upstream = diff.mapv(|d| 2.0 * d / b as f64).insert_axis(Axis(1));
            let (grads, _) = critic.backward_batch(&cache, upstream.view())?;
            opt.step(critic, &grads);
        }
        if !critic_loss.is_finite() {
            return Err(Error::NonFinite("critic loss diverged".into()));
        }
        self.critic_updates += 1;

        let mut actor_updated = false;
        if self.critic_updates.is_multiple_of(self.config.policy_delay) {
            // Deterministic policy gradient through the first critic:
            // maximise mean Q1(s, π(s)).
            let actor_cache = self.actor.forward_batch(states.view())?;
            let policy_input = concatenate![Axis(1), states, actor_cache.output().view()];
            let critic_cache = self.critics[0].forward_batch(policy_input.view())?;
            let upstream = Array2::from_elem((b, 1), -1.0 / b as f64);
            let (_, input_grad) = self.critics[0].backward_batch(&critic_cache, upstream.view())?;
            let action_grad = input_grad.slice(s![.., sd..]).to_owned();
            let (grads, _) = self.actor.backward_batch(&actor_cache, action_grad.view())?;
            self.actor_opt.step(&mut self.actor, &grads);
            self.soft_update_targets();
            self.actor_updates += 1;
            actor_updated = true;
        }
        Ok(UpdateStats { critic_loss: critic_loss / 2.0, actor_updated })
    }

    pub fn soft_update_targets(&mut self) {
        let tau = self.config.tau;
        self.actor_target.soft_update_from(&self.actor, tau);
        for (t, o) in self.critic_targets.iter_mut().zip(&self.critics) {
            t.soft_update_from(o, tau);
        }
    }
}

/// Training result: per-episode logs plus the trained agent.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub logs: Vec<EpisodeLog>,
    pub agent: Td3Agent,
    /// Last state observed, useful for a final greedy evaluation.
    pub final_state: Vec<f64>,
}

/// Runs TD3 on `env`. The episode's raw value is the mean step reward; the
/// environment's auxiliary metrics are averaged the same way.
pub fn td3_train<E: Environment>(env: &mut E, config: &Td3Config, rng: RngStream) -> Result<TrainOutcome> {
    config.validate()?;
    let mut gen = rng.generator();
    let mut agent = Td3Agent::new(env.state_dim(), env.action_dim(), config, &mut gen)?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut total_steps = 0usize;
    let mut raw = Vec::with_capacity(config.episodes);
    let mut aux_means = Vec::with_capacity(config.episodes);
    let mut state = Vec::new();

    for episode in 0..config.episodes {
        state = env.reset(&mut gen)?;
        let mut reward_sum = 0.0;
        let mut aux_sum: Vec<f64> = Vec::new();
        let mut steps = 0usize;
        for _ in 0..config.steps_per_episode {
            let action: Vec<f64> = if total_steps < config.warmup_steps {
                (0..env.action_dim()).map(|_| gen.random_range(-1.0..=1.0)).collect()
            } else {
                agent.explore(&state, &mut gen)?
            };
            let out = env.step(&action)?;
            if !out.reward.is_finite() {
                return Err(Error::NonFinite(format!("reward at episode {episode}, step {steps} is {}", out.reward)));
            }
            reward_sum += out.reward;
            if aux_sum.is_empty() {
                aux_sum = vec![0.0; out.aux.len()];
            }
            aux_sum.iter_mut().zip(&out.aux).for_each(|(s, v)| *s += v);
            buffer.push(Transition {
                state: std::mem::take(&mut state),
                action,
                reward: out.reward * config.reward_scale,
                next_state: out.next_state.clone(),
                done: out.done,
            });
            state = out.next_state;
            steps += 1;
            total_steps += 1;
            if buffer.len() >= config.batch_size {
                let batch = buffer.sample(&mut gen, config.batch_size);
                agent.update(&batch, &mut gen)?;
            }
            if out.done {
                break;
            }
        }
        raw.push(reward_sum / steps as f64);
        aux_means.push(aux_sum.iter().map(|s| s / steps as f64).collect::<Vec<_>>());
    }
    if !agent.actor.is_finite() {
        return Err(Error::NonFinite("actor parameters diverged".into()));
    }
    let logs = super::episode_logs(&raw, &aux_means, config.window);
    Ok(TrainOutcome { logs, agent, final_state: state })
}
