//! Learners for the power/beam MDP.
//!
//! * [`QTable`]: tabular Q-learning over a quantised state key.
//! * [`DqnAgent`]: deep Q-network over the full `2^(2L)` joint action set.
//! * [`WolpertingerAgent`]: actor-critic whose continuous proto-action is
//!   mapped to its `k` nearest joint actions, so each decision costs at most
//!   `k` critic calls.
//! * [`SequentialPolicy`]: one 4-action agent per cell, trained one cell at a
//!   time with the earlier cells frozen.

mod checkpoint;
mod dqn;
mod knn;
mod sequential;
mod tabular;
mod wolpertinger;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{ActionVector, CellularEnv};
use crate::error::Result;
use crate::radio::TxConfig;

pub use checkpoint::{read_agent, write_agent, AgentKind, SavedAgent, AGENT_MAGIC};
pub use dqn::{train_dqn, DqnAgent, DqnConfig};
pub use knn::{knn_actions, EXACT_KNN_MAX_CELLS};
pub use sequential::{
    cell_order, sequential_train, OrderMetric, SequentialConfig, SequentialPolicy, SequentialTrainLog,
};
pub use tabular::{q_update, state_key, train_tabular, QTable, StateKey};
pub use wolpertinger::{train_wolpertinger, WolpertingerAgent, WolpertingerConfig};

/// Linear decay from `start` to `end` over the first `fraction` of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSchedule {
    pub start: f64,
    pub end: f64,
    pub fraction: f64,
}

impl Default for LinearSchedule {
    fn default() -> Self {
        LinearSchedule {
            start: 1.0,
            end: 0.05,
            fraction: 0.8,
        }
    }
}

impl LinearSchedule {
    pub fn value(&self, step: usize, total: usize) -> f64 {
        let span = self.fraction * total as f64;
        if span <= 0.0 {
            return self.end;
        }
        let t = (step as f64 / span).min(1.0);
        self.start + t * (self.end - self.start)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice over `num_actions`, greedy values computed lazily.
pub(crate) fn epsilon_greedy<R: Rng + ?Sized>(
    num_actions: usize,
    epsilon: f64,
    rng: &mut R,
    greedy: impl FnOnce() -> usize,
) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..num_actions)
    } else {
        greedy()
    }
}

/// Inverse root-mean-square reward in `replay`, or 1 when all rewards are 0.
pub(crate) fn auto_reward_scale(replay: &crate::neural::ReplayBuffer) -> f64 {
    let n = replay.len().max(1) as f64;
    let ms = replay.iter().map(|t| t.reward * t.reward).sum::<f64>() / n;
    if ms > 0.0 {
        1.0 / ms.sqrt()
    } else {
        1.0
    }
}

/// Anything that can drive a [`CellularEnv`] one joint action at a time.
pub trait Policy {
    fn decide(&mut self, env: &CellularEnv) -> ActionVector;
}

/// What a policy achieved over one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Configuration after the last step.
    pub final_tx: TxConfig,
    /// Ground-truth sum-rate of the final configuration.
    pub final_sum_rate: f64,
    /// Per-cell SINR of the final configuration.
    pub final_sinr: Vec<f64>,
    /// Ground-truth sum-rate averaged over the visited configurations.
    pub mean_sum_rate: f64,
    pub total_reward: f64,
    pub steps: usize,
}

/// Runs `policy` from the current state of `env` until the episode ends.
pub fn rollout(env: &mut CellularEnv, policy: &mut dyn Policy) -> Result<Rollout> {
    let (mut total_reward, mut rate_sum, mut steps) = (0.0, 0.0, 0usize);
    let mut last = None;
    while !env.is_done() {
        let a = policy.decide(env);
        let out = env.step(&a)?;
        total_reward += out.reward;
        rate_sum += out.info.sum_rate;
        steps += 1;
        last = Some(out.info);
    }
    let info = match last {
        Some(info) => info,
        None => {
            let b = env.budgets();
            crate::environment::StepInfo {
                sum_rate: crate::radio::sum_rate(&b),
                sinr: b.iter().map(|x| x.sinr).collect(),
                violated_threshold: false,
            }
        }
    };
    Ok(Rollout {
        final_tx: env.tx().clone(),
        final_sum_rate: info.sum_rate,
        final_sinr: info.sinr,
        mean_sum_rate: if steps > 0 { rate_sum / steps as f64 } else { info.sum_rate },
        total_reward,
        steps,
    })
}

/// Summary of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub env_steps: usize,
    pub updates: usize,
    /// Mean TD loss per episode (episodes before the first update report 0).
    pub episode_loss: Vec<f64>,
    pub episode_reward: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.0, 1.0, 0.5, 1.0]), 1);
        let mut q = vec![0.0; 8];
        q[3] = 2.0;
        q[7] = 2.0;
        assert_eq!(argmax(&q), 3);
    }

    #[test]
    fn schedule_decays_then_holds() {
        let s = LinearSchedule::default();
        assert_eq!(s.value(0, 1000), 1.0);
        assert!((s.value(400, 1000) - 0.525).abs() < 1e-12);
        assert!((s.value(800, 1000) - 0.05).abs() < 1e-12);
        assert!((s.value(999, 1000) - 0.05).abs() < 1e-12);
    }
}
