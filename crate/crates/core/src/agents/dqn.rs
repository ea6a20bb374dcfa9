use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, epsilon_greedy, LinearSchedule, Policy, TrainLog};
use crate::environment::{ActionVector, CellularEnv, DiscreteEnv};
use crate::error::{Error, Result};
use crate::neural::{huber, Adam, AdamConfig, Mlp, ReplayBuffer, Trace, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub adam: AdamConfig,
    /// Discount factor.
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    /// Environment steps per gradient update.
    pub train_every: usize,
    /// Updates between hard copies of the online net into the target net.
    pub target_sync: usize,
    pub exploration: LinearSchedule,
    /// Multiplier applied to rewards before learning. `None` picks the
    /// inverse root-mean-square reward of the warm-up transitions.
    pub reward_scale: Option<f64>,
    /// Whether the horizon cuts the bootstrap (true) or is treated as a time
    /// limit of a continuing task (false).
    pub terminal_at_horizon: bool,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            hidden: vec![128, 128],
            adam: AdamConfig {
                lr: 5e-4,
                ..AdamConfig::default()
            },
            gamma: 0.9,
            batch_size: 32,
            replay_capacity: 20_000,
            warmup: 500,
            train_every: 1,
            target_sync: 250,
            exploration: LinearSchedule::default(),
            reward_scale: None,
            terminal_at_horizon: false,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig("gamma must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.train_every == 0 || self.target_sync == 0 {
            return Err(Error::InvalidConfig(
                "batch_size, train_every and target_sync must be positive".into(),
            ));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::InvalidConfig("replay_capacity must hold a minibatch".into()));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if matches!(self.reward_scale, Some(s) if !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("reward_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn widths(&self, obs_len: usize, num_actions: usize) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(obs_len);
        w.extend(&self.hidden);
        w.push(num_actions);
        w
    }
}

/// Deep Q-network: one output per joint action.
#[derive(Debug)]
pub struct DqnAgent {
    pub config: DqnConfig,
    online: Mlp,
    target: Mlp,
    adam: Adam,
    replay: ReplayBuffer,
    reward_scale: Option<f64>,
    updates: usize,
    grads: Vec<f64>,
    trace: Trace,
    evaluations: AtomicU64,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(
        config: DqnConfig,
        obs_len: usize,
        num_actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let online = Mlp::new(&config.widths(obs_len, num_actions), rng);
        Ok(Self::from_network(config, online))
    }

    /// Wraps an existing network, e.g. one read from a checkpoint.
    pub fn from_network(config: DqnConfig, online: Mlp) -> Self {
        let n = online.num_params();
        DqnAgent {
            adam: Adam::new(config.adam, n),
            replay: ReplayBuffer::new(config.replay_capacity),
            reward_scale: config.reward_scale,
            target: online.clone(),
            online,
            updates: 0,
            grads: vec![0.0; n],
            trace: Trace::default(),
            evaluations: AtomicU64::new(0),
            config,
        }
    }

    pub fn obs_len(&self) -> usize {
        self.online.input_dim()
    }

    pub fn num_actions(&self) -> usize {
        self.online.output_dim()
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut Mlp {
        &mut self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn reward_scale(&self) -> Option<f64> {
        self.reward_scale
    }

    /// Action values computed for decisions so far (one per output).
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    /// All action values for `state`, counted as `num_actions` evaluations.
    pub fn q_values(&self, state: &[f64]) -> Vec<f64> {
        let q = self.online.forward(state).expect("observation width");
        self.evaluations.fetch_add(q.len() as u64, Ordering::Relaxed);
        q
    }

    pub fn greedy(&self, state: &[f64]) -> usize {
        argmax(&self.q_values(state))
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], epsilon: f64, rng: &mut R) -> usize {
        epsilon_greedy(self.num_actions(), epsilon, rng, || self.greedy(state))
    }

    pub fn observe(&mut self, t: Transition) {
        self.replay.push(t);
    }

    fn ready(&self) -> bool {
        self.replay.len() >= self.config.warmup.max(self.config.batch_size)
    }

    /// Samples a minibatch and takes one gradient step if the buffer is warm.
    pub fn train<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<f64> {
        if !self.ready() {
            return None;
        }
        if self.reward_scale.is_none() {
            self.reward_scale = Some(super::auto_reward_scale(&self.replay));
        }
        let batch: Vec<Transition> = self
            .replay
            .sample(self.config.batch_size, rng)
            .into_iter()
            .cloned()
            .collect();
        Some(self.train_step(&batch))
    }

    /// One Huber TD step on `batch`; returns the mean loss.
    pub fn train_step(&mut self, batch: &[Transition]) -> f64 {
        assert!(!batch.is_empty(), "empty minibatch");
        let scale = self.reward_scale.unwrap_or(1.0);
        let inv = 1.0 / batch.len() as f64;
        self.grads.fill(0.0);
        let mut d_out = vec![0.0; self.num_actions()];
        let mut loss = 0.0;
        for t in batch {
            let bootstrap = if t.done {
                0.0
            } else {
                let next = self.target.forward(&t.next_state).expect("observation width");
                next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let y = scale * t.reward + self.config.gamma * bootstrap;
            self.online
                .forward_trace(&t.state, &mut self.trace)
                .expect("observation width");
            let (l, dl) = huber(self.trace.output()[t.action] - y);
            loss += l * inv;
            d_out.fill(0.0);
            d_out[t.action] = dl * inv;
            self.online.backward(&self.trace, &d_out, &mut self.grads);
        }
        self.adam.step(self.online.params_mut(), &self.grads);
        self.updates += 1;
        if self.updates % self.config.target_sync == 0 {
            self.target.copy_from(&self.online);
        }
        loss
    }
}

impl Policy for DqnAgent {
    fn decide(&mut self, env: &CellularEnv) -> ActionVector {
        ActionVector::from_index(self.greedy(&env.features()), env.num_cells())
    }
}

/// Epsilon-greedy DQN training, one episode per seed.
pub fn train_dqn<R: Rng + ?Sized>(
    agent: &mut DqnAgent,
    env: &mut dyn DiscreteEnv,
    episode_seeds: &[u64],
    rng: &mut R,
) -> Result<TrainLog> {
    if env.observation_len() != agent.obs_len() || env.num_actions() != agent.num_actions() {
        return Err(Error::ShapeMismatch {
            expected: agent.obs_len() * agent.num_actions(),
            got: env.observation_len() * env.num_actions(),
        });
    }
    let total = episode_seeds.len() * env.horizon();
    let exploration = agent.config.exploration;
    let mut log = TrainLog::default();
    for &seed in episode_seeds {
        let mut state = env.reset(seed);
        let (mut reward_sum, mut loss_sum, mut losses) = (0.0, 0.0, 0usize);
        loop {
            let eps = exploration.value(log.env_steps, total);
            let action = agent.act(&state, eps, rng);
            let (next_state, reward, done) = env.step_index(action)?;
            agent.observe(Transition {
                state: std::mem::take(&mut state),
                action,
                reward,
                next_state: next_state.clone(),
                done: done && agent.config.terminal_at_horizon,
            });
            log.env_steps += 1;
            reward_sum += reward;
            if log.env_steps % agent.config.train_every == 0 {
                if let Some(l) = agent.train(rng) {
                    loss_sum += l;
                    losses += 1;
                    log.updates += 1;
                }
            }
            state = next_state;
            if done {
                break;
            }
        }
        log.episode_reward.push(reward_sum);
        log.episode_loss.push(if losses > 0 { loss_sum / losses as f64 } else { 0.0 });
    }
    Ok(log)
}
