use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{knn_actions, LinearSchedule, Policy, TrainLog};
use crate::environment::{ActionVector, CellularEnv, DiscreteEnv};
use crate::error::{Error, Result};
use crate::neural::{huber, Adam, AdamConfig, Mlp, ReplayBuffer, Trace, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WolpertingerConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_adam: AdamConfig,
    pub critic_adam: AdamConfig,
    pub gamma: f64,
    /// Candidate actions scored by the critic per decision.
    pub k: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub warmup: usize,
    pub train_every: usize,
    /// Polyak rate of the target networks.
    pub tau: f64,
    /// Standard deviation of the Gaussian noise added to the proto-action.
    pub noise: LinearSchedule,
    pub reward_scale: Option<f64>,
    pub terminal_at_horizon: bool,
}

impl Default for WolpertingerConfig {
    fn default() -> Self {
        WolpertingerConfig {
            actor_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            actor_adam: AdamConfig {
                lr: 1e-4,
                ..AdamConfig::default()
            },
            critic_adam: AdamConfig {
                lr: 5e-4,
                ..AdamConfig::default()
            },
            gamma: 0.9,
            k: 16,
            batch_size: 32,
            replay_capacity: 20_000,
            warmup: 500,
            train_every: 1,
            tau: 0.005,
            noise: LinearSchedule {
                start: 0.3,
                end: 0.01,
                fraction: 0.8,
            },
            reward_scale: None,
            terminal_at_horizon: false,
        }
    }
}

impl WolpertingerConfig {
    pub fn validate(&self, num_actions: u128) -> Result<()> {
        if self.k == 0 || self.k as u128 > num_actions {
            return Err(Error::InvalidConfig(format!(
                "k = {} must lie in [1, {num_actions}]",
                self.k
            )));
        }
        if self.actor_hidden.iter().chain(&self.critic_hidden).any(|&w| w == 0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) || !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidConfig("need gamma in [0, 1) and tau in (0, 1]".into()));
        }
        if self.batch_size == 0 || self.train_every == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::InvalidConfig("invalid minibatch or replay settings".into()));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Actor-critic over the joint action hypercube.
///
/// The actor emits a proto-action in `[0, 1]^(2L)` (sigmoid outputs); the
/// critic scores `state ++ action bits`.
#[derive(Debug)]
pub struct WolpertingerAgent {
    pub config: WolpertingerConfig,
    num_cells: usize,
    actor: Mlp,
    critic: Mlp,
    actor_target: Mlp,
    critic_target: Mlp,
    actor_adam: Adam,
    critic_adam: Adam,
    replay: ReplayBuffer,
    reward_scale: Option<f64>,
    updates: usize,
    critic_calls: AtomicU64,
    decisions: AtomicU64,
}

impl WolpertingerAgent {
    pub fn new<R: Rng + ?Sized>(
        config: WolpertingerConfig,
        obs_len: usize,
        num_cells: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate(crate::environment::action_space_size(num_cells))?;
        let bits = 2 * num_cells;
        let mut aw = vec![obs_len];
        aw.extend(&config.actor_hidden);
        aw.push(bits);
        let mut cw = vec![obs_len + bits];
        cw.extend(&config.critic_hidden);
        cw.push(1);
        let mut actor = Mlp::new(&aw, rng);
        actor.scale_output_layer(0.1);
        let critic = Mlp::new(&cw, rng);
        Ok(Self::from_networks(config, num_cells, actor, critic))
    }

    pub fn from_networks(config: WolpertingerConfig, num_cells: usize, actor: Mlp, critic: Mlp) -> Self {
        WolpertingerAgent {
            actor_adam: Adam::new(config.actor_adam, actor.num_params()),
            critic_adam: Adam::new(config.critic_adam, critic.num_params()),
            replay: ReplayBuffer::new(config.replay_capacity),
            reward_scale: config.reward_scale,
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            num_cells,
            updates: 0,
            critic_calls: AtomicU64::new(0),
            decisions: AtomicU64::new(0),
            config,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn obs_len(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut Mlp {
        &mut self.critic
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    /// Critic calls made while choosing actions (training targets excluded).
    pub fn critic_calls(&self) -> u64 {
        self.critic_calls.load(Ordering::Relaxed)
    }

    pub fn decisions(&self) -> u64 {
        self.decisions.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.critic_calls.store(0, Ordering::Relaxed);
        self.decisions.store(0, Ordering::Relaxed);
    }

    pub fn proto_action(&self, state: &[f64]) -> Vec<f64> {
        proto(&self.actor, state)
    }

    pub fn critic_value(&self, state: &[f64], action: &[f64]) -> f64 {
        critic_value(&self.critic, state, action)
    }

    /// Picks among the `k` corners nearest to `proto` by critic value.
    pub fn select(&self, state: &[f64], proto: &[f64]) -> ActionVector {
        let (a, calls) = choose(&self.critic, state, proto, self.config.k);
        self.critic_calls.fetch_add(calls, Ordering::Relaxed);
        self.decisions.fetch_add(1, Ordering::Relaxed);
        a
    }

    pub fn greedy(&self, state: &[f64]) -> ActionVector {
        self.select(state, &self.proto_action(state))
    }

    /// Greedy choice after perturbing the proto-action with `N(0, sigma^2)`.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], sigma: f64, rng: &mut R) -> ActionVector {
        let mut p = self.proto_action(state);
        if sigma > 0.0 {
            for v in &mut p {
                let z: f64 = StandardNormal.sample(rng);
                *v = (*v + sigma * z).clamp(0.0, 1.0);
            }
        }
        self.select(state, &p)
    }

    /// Critic argmax over every joint action; ties go to the lowest index.
    pub fn exhaustive_argmax(&self, state: &[f64]) -> ActionVector {
        let n = 1usize << (2 * self.num_cells);
        let scores: Vec<f64> = (0..n)
            .map(|i| critic_value(&self.critic, state, &ActionVector::from_index(i, self.num_cells).as_unit_cube()))
            .collect();
        ActionVector::from_index(super::argmax(&scores), self.num_cells)
    }

    /// Gradient of the critic output with respect to its action input.
    pub fn critic_action_gradient(&self, state: &[f64], action: &[f64]) -> (f64, Vec<f64>) {
        critic_action_gradient(&self.critic, state, action)
    }

    /// Mean of `objective(s, actor(s))` over `states` and its gradient with
    /// respect to the actor parameters. `objective` returns the value and its
    /// gradient with respect to the proto-action.
    pub fn actor_objective_gradient<F>(&self, states: &[Vec<f64>], objective: F) -> (f64, Vec<f64>)
    where
        F: Fn(&[f64], &[f64]) -> (f64, Vec<f64>),
    {
        let mut grads = vec![0.0; self.actor.num_params()];
        let mut trace = Trace::default();
        let inv = 1.0 / states.len() as f64;
        let mut total = 0.0;
        for s in states {
            self.actor.forward_trace(s, &mut trace).expect("observation width");
            let a: Vec<f64> = trace.output().iter().map(|&z| sigmoid(z)).collect();
            let (q, dq_da) = objective(s, &a);
            total += q * inv;
            let d_logits: Vec<f64> = a
                .iter()
                .zip(&dq_da)
                .map(|(&ai, &g)| g * ai * (1.0 - ai) * inv)
                .collect();
            self.actor.backward(&trace, &d_logits, &mut grads);
        }
        (total, grads)
    }

    /// One gradient-ascent step of the actor on `objective`; returns the
    /// objective before the step.
    pub fn actor_step<F>(&mut self, states: &[Vec<f64>], objective: F) -> f64
    where
        F: Fn(&[f64], &[f64]) -> (f64, Vec<f64>),
    {
        let (value, mut grads) = self.actor_objective_gradient(states, objective);
        for g in &mut grads {
            *g = -*g;
        }
        self.actor_adam.step(self.actor.params_mut(), &grads);
        value
    }

    pub fn observe(&mut self, t: Transition) {
        self.replay.push(t);
    }

    pub fn train<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<(f64, f64)> {
        if self.replay.len() < self.config.warmup.max(self.config.batch_size) {
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

    /// Critic TD step, actor ascent step and soft target updates.
    /// Returns `(critic loss, actor objective)`.
    pub fn train_step(&mut self, batch: &[Transition]) -> (f64, f64) {
        let scale = self.reward_scale.unwrap_or(1.0);
        let inv = 1.0 / batch.len() as f64;
        let mut grads = vec![0.0; self.critic.num_params()];
        let mut trace = Trace::default();
        let mut loss = 0.0;
        for t in batch {
            let bootstrap = if t.done {
                0.0
            } else {
                let p = proto(&self.actor_target, &t.next_state);
                let (a_next, _) = choose(&self.critic_target, &t.next_state, &p, self.config.k);
                critic_value(&self.critic_target, &t.next_state, &a_next.as_unit_cube())
            };
            let y = scale * t.reward + self.config.gamma * bootstrap;
            let bits = ActionVector::from_index(t.action, self.num_cells).as_unit_cube();
            self.critic
                .forward_trace(&joined(&t.state, &bits), &mut trace)
                .expect("critic input width");
            let (l, dl) = huber(trace.output()[0] - y);
            loss += l * inv;
            self.critic.backward(&trace, &[dl * inv], &mut grads);
        }
        self.critic_adam.step(self.critic.params_mut(), &grads);

        let states: Vec<Vec<f64>> = batch.iter().map(|t| t.state.clone()).collect();
        let critic = self.critic.clone();
        let objective = self.actor_step(&states, |s, a| critic_action_gradient(&critic, s, a));

        self.actor_target.soft_update(&self.actor, self.config.tau);
        self.critic_target.soft_update(&self.critic, self.config.tau);
        self.updates += 1;
        (loss, objective)
    }
}

impl Policy for WolpertingerAgent {
    fn decide(&mut self, env: &CellularEnv) -> ActionVector {
        self.greedy(&env.features())
    }
}

fn proto(actor: &Mlp, state: &[f64]) -> Vec<f64> {
    actor
        .forward(state)
        .expect("observation width")
        .into_iter()
        .map(sigmoid)
        .collect()
}

fn joined(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.len() + action.len());
    x.extend_from_slice(state);
    x.extend_from_slice(action);
    x
}

fn critic_value(critic: &Mlp, state: &[f64], action: &[f64]) -> f64 {
    critic.forward(&joined(state, action)).expect("critic input width")[0]
}

fn critic_action_gradient(critic: &Mlp, state: &[f64], action: &[f64]) -> (f64, Vec<f64>) {
    let mut trace = Trace::default();
    critic
        .forward_trace(&joined(state, action), &mut trace)
        .expect("critic input width");
    let q = trace.output()[0];
    let mut scratch = vec![0.0; critic.num_params()];
    let dx = critic.backward(&trace, &[1.0], &mut scratch);
    (q, dx[state.len()..].to_vec())
}

/// Best of the `k` nearest corners and the number of critic calls spent.
fn choose(critic: &Mlp, state: &[f64], proto: &[f64], k: usize) -> (ActionVector, u64) {
    let mut candidates = knn_actions(proto, k);
    if k == 1 {
        return (candidates.pop().expect("one candidate"), 0);
    }
    let mut best: Option<(f64, usize, ActionVector)> = None;
    for a in candidates {
        let q = critic_value(critic, state, &a.as_unit_cube());
        let idx = a.to_index();
        let better = match &best {
            None => true,
            Some((bq, bi, _)) => q > *bq || (q == *bq && idx < *bi),
        };
        if better {
            best = Some((q, idx, a));
        }
    }
    (best.expect("k >= 1").2, k as u64)
}

/// Wolpertinger training with decaying proto-action noise, one episode per seed.
pub fn train_wolpertinger<R: Rng + ?Sized>(
    agent: &mut WolpertingerAgent,
    env: &mut dyn DiscreteEnv,
    episode_seeds: &[u64],
    rng: &mut R,
) -> Result<TrainLog> {
    if env.observation_len() != agent.obs_len() || env.num_actions() != 1 << (2 * agent.num_cells) {
        return Err(Error::ShapeMismatch {
            expected: agent.obs_len(),
            got: env.observation_len(),
        });
    }
    let total = episode_seeds.len() * env.horizon();
    let noise = agent.config.noise;
    let mut log = TrainLog::default();
    for &seed in episode_seeds {
        let mut state = env.reset(seed);
        let (mut reward_sum, mut loss_sum, mut losses) = (0.0, 0.0, 0usize);
        loop {
            let sigma = noise.value(log.env_steps, total);
            let action = agent.act(&state, sigma, rng).to_index();
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
                if let Some((l, _)) = agent.train(rng) {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn agent(num_cells: usize, k: usize, seed: u64) -> WolpertingerAgent {
        let config = WolpertingerConfig {
            actor_hidden: vec![32, 32],
            critic_hidden: vec![32, 32],
            k,
            ..WolpertingerConfig::default()
        };
        WolpertingerAgent::new(config, 5 * num_cells, num_cells, &mut seeded_rng(seed)).unwrap()
    }

    fn random_state(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn full_k_matches_exhaustive_argmax() {
        let a = agent(2, 16, 1);
        let mut rng = seeded_rng(2);
        for _ in 0..200 {
            let s = random_state(&mut rng, 10);
            assert_eq!(a.greedy(&s), a.exhaustive_argmax(&s));
        }
    }

    #[test]
    fn k_one_rounds_the_proto_action() {
        let a = agent(2, 1, 3);
        let mut rng = seeded_rng(4);
        for _ in 0..50 {
            let s = random_state(&mut rng, 10);
            let rounded: Vec<bool> = a.proto_action(&s).iter().map(|&p| p >= 0.5).collect();
            assert_eq!(a.greedy(&s).0, rounded);
        }
        assert_eq!(a.critic_calls(), 0);
    }

    #[test]
    fn critic_calls_never_exceed_k() {
        for k in [1, 2, 5, 16] {
            let a = agent(2, k, 5);
            let mut rng = seeded_rng(6);
            for _ in 0..100 {
                let before = a.critic_calls();
                a.act(&random_state(&mut rng, 10), 0.2, &mut rng);
                assert!(a.critic_calls() - before <= k as u64);
            }
        }
    }

    #[test]
    fn k_outside_action_space_is_rejected() {
        let config = WolpertingerConfig {
            k: 17,
            ..WolpertingerConfig::default()
        };
        assert!(WolpertingerAgent::new(config, 10, 2, &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn actor_tracks_a_fixed_quadratic_critic() {
        let config = WolpertingerConfig {
            actor_hidden: vec![16, 16],
            actor_adam: AdamConfig {
                lr: 1e-2,
                ..AdamConfig::default()
            },
            k: 1,
            ..WolpertingerConfig::default()
        };
        let mut a = WolpertingerAgent::new(config, 3, 1, &mut seeded_rng(7)).unwrap();
        let target = [0.2, 0.7];
        let objective = |_: &[f64], x: &[f64]| {
            let q = -x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            (q, x.iter().zip(&target).map(|(a, b)| -2.0 * (a - b)).collect())
        };
        let mut rng = seeded_rng(8);
        for _ in 0..2000 {
            let states: Vec<Vec<f64>> = (0..16).map(|_| random_state(&mut rng, 3)).collect();
            a.actor_step(&states, objective);
        }
        for _ in 0..20 {
            let p = a.proto_action(&random_state(&mut rng, 3));
            assert!((p[0] - 0.2).abs() < 0.05 && (p[1] - 0.7).abs() < 0.05, "{p:?}");
        }
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let a = agent(1, 4, 9);
        let mut rng = seeded_rng(10);
        let states: Vec<Vec<f64>> = (0..8).map(|_| random_state(&mut rng, 5)).collect();
        let critic = a.critic().clone();
        let objective = |s: &[f64], x: &[f64]| critic_action_gradient(&critic, s, x);
        let (_, analytic) = a.actor_objective_gradient(&states, objective);
        let value = |actor: &Mlp| {
            states
                .iter()
                .map(|s| critic_value(&critic, s, &proto(actor, s)))
                .sum::<f64>()
                / states.len() as f64
        };
        let h = 1e-6;
        let mut probe = a.actor().clone();
        let mut worst = 0.0f64;
        for i in 0..probe.num_params() {
            let p = probe.params()[i];
            probe.params_mut()[i] = p + h;
            let up = value(&probe);
            probe.params_mut()[i] = p - h;
            let down = value(&probe);
            probe.params_mut()[i] = p;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-4);
            worst = worst.max(err);
        }
        assert!(worst <= 1e-3, "worst relative error {worst}");
    }
}
