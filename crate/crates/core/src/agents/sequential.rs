use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{train_dqn, DqnAgent, DqnConfig, Policy, TrainLog};
use crate::environment::{
    apply_cell_action_in_place, compute_reward, ActionVector, CellularEnv, DiscreteEnv, EnvConfig,
};
use crate::error::{Error, Result};

/// Per-cell actions: `2 * power_bit + beam_bit`.
pub const CELL_ACTIONS: usize = 4;
/// Per-cell observation: own user x, y, z, own power index, own beam index.
pub const CELL_FEATURES: usize = 5;

/// How cells are ranked by interference severity before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderMetric {
    /// Ascending RSRQ of the cell's user at the initial configuration.
    Rsrq,
    /// Ascending distance from the cell's user to its nearest other BS.
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequentialConfig {
    pub dqn: DqnConfig,
    /// Weight of the interference a cell inflicts on already-trained cells,
    /// in units of the noise power.
    pub lambda: f64,
    pub order: OrderMetric,
}

impl Default for SequentialConfig {
    fn default() -> Self {
        SequentialConfig {
            // Per-cell agents learn a short-sighted beam/power map; a low
            // discount and a smaller net train faster than the joint defaults.
            dqn: DqnConfig {
                hidden: vec![64, 64],
                adam: crate::neural::AdamConfig {
                    lr: 1e-3,
                    ..Default::default()
                },
                gamma: 0.5,
                ..DqnConfig::default()
            },
            lambda: 1.0,
            order: OrderMetric::Rsrq,
        }
    }
}

impl SequentialConfig {
    pub fn validate(&self) -> Result<()> {
        self.dqn.validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be non-negative".into()));
        }
        Ok(())
    }
}

/// Cells sorted most-interfered first, severity averaged over the initial
/// configuration of every episode in `episode_seeds`. Ties keep cell order.
pub fn cell_order(config: &EnvConfig, episode_seeds: &[u64], metric: OrderMetric) -> Result<Vec<usize>> {
    let n = config.num_cells();
    let mut env = CellularEnv::new(config.clone())?;
    let mut severity = vec![0.0; n];
    for &seed in episode_seeds {
        env.reset(seed);
        match metric {
            OrderMetric::Rsrq => {
                for (s, m) in severity.iter_mut().zip(env.measurements_for(env.tx())) {
                    *s += m.rsrq;
                }
            }
            OrderMetric::Distance => {
                let sc = env.scenario();
                for (l, s) in severity.iter_mut().enumerate() {
                    let u = sc.user_positions[l];
                    *s += (0..n)
                        .filter(|&j| j != l)
                        .map(|j| crate::scenario::link_distance(sc.bs_positions[j], u))
                        .fold(f64::INFINITY, f64::min)
                        .min(f64::MAX);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| severity[a].total_cmp(&severity[b]).then(a.cmp(&b)));
    Ok(order)
}

/// The environment seen by the agent of one cell while it trains: trained
/// cells follow their frozen greedy policies, untrained cells hold their
/// initial configuration.
struct PhaseEnv<'a> {
    env: CellularEnv,
    cell: usize,
    trained: &'a [(usize, DqnAgent)],
    lambda: f64,
    last_step_evaluations: u64,
}

impl PhaseEnv<'_> {
    /// Own thresholded term minus the interference this cell puts on the
    /// users of trained cells, relative to noise.
    fn reward(&self, next: &crate::radio::TxConfig) -> Result<f64> {
        let spec = &self.env.config().reward;
        let c = self.cell;
        let budgets = self.env.budgets_for(next);
        let own = if spec.needs_measurements() {
            let m = self.env.measurements_for(next);
            compute_reward(&budgets[c..=c], Some(&m[c..=c]), spec)?
        } else {
            compute_reward(&budgets[c..=c], None, spec)?
        };
        if self.trained.is_empty() {
            return Ok(own);
        }
        let p = self.env.powers().watts(next.power_idx[c]);
        let gains = self.env.gains();
        let inflicted: f64 = self
            .trained
            .iter()
            .map(|&(k, _)| p * gains.gain(c, k, next.beam_idx[c]))
            .sum();
        Ok(own - self.lambda * inflicted / self.env.noise_watts())
    }
}

impl DiscreteEnv for PhaseEnv<'_> {
    fn observation_len(&self) -> usize {
        CELL_FEATURES
    }

    fn num_actions(&self) -> usize {
        CELL_ACTIONS
    }

    fn horizon(&self) -> usize {
        self.env.config().horizon
    }

    fn reset(&mut self, episode_seed: u64) -> Vec<f64> {
        self.env.reset(episode_seed);
        self.env.cell_features(self.cell)
    }

    fn step_index(&mut self, action: usize) -> Result<(Vec<f64>, f64, bool)> {
        let (np, nb) = (self.env.powers().len(), self.env.codebook().len());
        let mut next = self.env.tx().clone();
        let mut evaluations = CELL_ACTIONS as u64;
        for (cell, agent) in self.trained {
            let before = agent.evaluations();
            let a = agent.greedy(&self.env.cell_features(*cell));
            evaluations += agent.evaluations() - before;
            apply_cell_action_in_place(&mut next, *cell, a, np, nb);
        }
        apply_cell_action_in_place(&mut next, self.cell, action, np, nb);
        self.last_step_evaluations = evaluations;
        let reward = self.reward(&next)?;
        let out = self.env.advance_to(next)?;
        Ok((self.env.cell_features(self.cell), reward, out.done))
    }
}

/// Trained per-cell agents in training order.
#[derive(Debug)]
pub struct SequentialPolicy {
    pub agents: Vec<(usize, DqnAgent)>,
    last_decision_evaluations: u64,
}

impl SequentialPolicy {
    pub fn new(agents: Vec<(usize, DqnAgent)>) -> Self {
        SequentialPolicy {
            agents,
            last_decision_evaluations: 0,
        }
    }

    pub fn order(&self) -> Vec<usize> {
        self.agents.iter().map(|&(c, _)| c).collect()
    }

    /// Action values evaluated for the most recent joint decision.
    pub fn last_decision_evaluations(&self) -> u64 {
        self.last_decision_evaluations
    }
}

impl Policy for SequentialPolicy {
    fn decide(&mut self, env: &CellularEnv) -> ActionVector {
        let n = env.num_cells();
        let mut bits = vec![false; 2 * n];
        let mut evaluations = 0;
        for (cell, agent) in &self.agents {
            let before = agent.evaluations();
            let a = agent.greedy(&env.cell_features(*cell));
            evaluations += agent.evaluations() - before;
            bits[*cell] = a & 2 != 0;
            bits[n + cell] = a & 1 != 0;
        }
        self.last_decision_evaluations = evaluations;
        ActionVector(bits)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequentialTrainLog {
    pub order: Vec<usize>,
    pub phases: Vec<TrainLog>,
    /// Action values evaluated per environment step in each phase.
    pub evaluations_per_step: Vec<u64>,
}

/// Trains one agent per cell, most interfered cell first; each later agent
/// trains against the frozen greedy policies of the earlier ones.
pub fn sequential_train<R: Rng + ?Sized>(
    env_config: &EnvConfig,
    config: &SequentialConfig,
    episode_seeds: &[u64],
    rng: &mut R,
) -> Result<(SequentialPolicy, SequentialTrainLog)> {
    config.validate()?;
    env_config.validate()?;
    let order = cell_order(env_config, episode_seeds, config.order)?;
    let mut trained: Vec<(usize, DqnAgent)> = Vec::with_capacity(order.len());
    let mut log = SequentialTrainLog {
        order: order.clone(),
        ..Default::default()
    };
    for &cell in &order {
        let mut agent = DqnAgent::new(config.dqn.clone(), CELL_FEATURES, CELL_ACTIONS, rng)?;
        let mut phase = PhaseEnv {
            env: CellularEnv::new(env_config.clone())?,
            cell,
            trained: &trained,
            lambda: config.lambda,
            last_step_evaluations: 0,
        };
        log.phases.push(train_dqn(&mut agent, &mut phase, episode_seeds, rng)?);
        log.evaluations_per_step.push(phase.last_step_evaluations);
        agent.reset_evaluations();
        trained.push((cell, agent));
    }
    Ok((SequentialPolicy::new(trained), log))
}
