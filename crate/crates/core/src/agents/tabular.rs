use std::collections::HashMap;

use rand::Rng;

use super::{argmax, epsilon_greedy, LinearSchedule, TrainLog};
use crate::environment::DiscreteEnv;
use crate::error::Result;

/// Quantised observation used as a table key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(pub Vec<u32>);

/// Buckets each feature in `[0, 1]` onto `levels` evenly spaced points.
///
/// Index features `i / (n - 1)` map back to `i` exactly when `levels == n`.
pub fn state_key(features: &[f64], levels: u32) -> StateKey {
    let top = f64::from(levels.max(1) - 1);
    StateKey(
        features
            .iter()
            .map(|&f| (f.clamp(0.0, 1.0) * top).round() as u32)
            .collect(),
    )
}

/// Sparse action-value table: rows exist only for states that were updated.
#[derive(Debug, Clone)]
pub struct QTable {
    pub alpha: f64,
    pub gamma: f64,
    pub levels: u32,
    num_actions: usize,
    rows: HashMap<StateKey, Vec<f64>>,
}

impl QTable {
    pub fn new(num_actions: usize, alpha: f64, gamma: f64, levels: u32) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "learning rate must lie in (0, 1]");
        assert!((0.0..1.0).contains(&gamma), "discount must lie in [0, 1)");
        QTable {
            alpha,
            gamma,
            levels,
            num_actions,
            rows: HashMap::new(),
        }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn key(&self, features: &[f64]) -> StateKey {
        state_key(features, self.levels)
    }

    pub fn q(&self, s: &StateKey, a: usize) -> f64 {
        self.rows.get(s).map_or(0.0, |row| row[a])
    }

    pub fn row(&self, s: &StateKey) -> Vec<f64> {
        self.rows
            .get(s)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.num_actions])
    }

    pub fn max_q(&self, s: &StateKey) -> f64 {
        self.rows
            .get(s)
            .map_or(0.0, |row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn greedy(&self, s: &StateKey) -> usize {
        self.rows.get(s).map_or(0, |row| argmax(row))
    }

    pub fn act<R: Rng + ?Sized>(&self, s: &StateKey, epsilon: f64, rng: &mut R) -> usize {
        epsilon_greedy(self.num_actions, epsilon, rng, || self.greedy(s))
    }

    /// Largest absolute stored value.
    pub fn sup_norm(&self) -> f64 {
        self.rows
            .values()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&StateKey, &[f64])> {
        self.rows.iter().map(|(k, v)| (k, v.as_slice()))
    }
}

/// One Q-learning backup:
/// `Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + gamma max_a' Q(s',a') (1 - done))`.
pub fn q_update(table: &mut QTable, s: &StateKey, a: usize, r: f64, s_next: &StateKey, done: bool) {
    let bootstrap = if done { 0.0 } else { table.max_q(s_next) };
    let target = r + table.gamma * bootstrap;
    let (alpha, n) = (table.alpha, table.num_actions);
    let row = table.rows.entry(s.clone()).or_insert_with(|| vec![0.0; n]);
    row[a] = (1.0 - alpha) * row[a] + alpha * target;
}

/// Epsilon-greedy Q-learning, one episode per seed.
///
/// `terminal_at_horizon` decides whether the last step of an episode cuts the
/// bootstrap; with the horizon being a time limit the default is not to.
pub fn train_tabular<R: Rng + ?Sized>(
    table: &mut QTable,
    env: &mut dyn DiscreteEnv,
    episode_seeds: &[u64],
    exploration: LinearSchedule,
    terminal_at_horizon: bool,
    rng: &mut R,
) -> Result<TrainLog> {
    let total = episode_seeds.len() * env.horizon();
    let mut log = TrainLog::default();
    for &seed in episode_seeds {
        let mut s = table.key(&env.reset(seed));
        let mut episode_reward = 0.0;
        loop {
            let eps = exploration.value(log.env_steps, total);
            let a = table.act(&s, eps, rng);
            let (obs, r, done) = env.step_index(a)?;
            let s_next = table.key(&obs);
            q_update(table, &s, a, r, &s_next, done && terminal_at_horizon);
            log.env_steps += 1;
            log.updates += 1;
            episode_reward += r;
            s = s_next;
            if done {
                break;
            }
        }
        log.episode_reward.push(episode_reward);
        log.episode_loss.push(0.0);
    }
    Ok(log)
}
