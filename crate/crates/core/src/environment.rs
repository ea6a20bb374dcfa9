//! The power/beam control MDP: observations, the 2L-bit action, reward
//! families for the different CSI regimes, and episode bookkeeping.

use serde::{Deserialize, Serialize};

use crate::channel::{realize_network_channels, ChannelSet, PathLossParams};
use crate::error::{Error, Result};
use crate::radio::{
    db_to_linear, probe_measurements, sum_rate, Codebook, GainTable, LinkBudget,
    MeasurementReport, PowerSet, RadioConfig, TxConfig,
};
use crate::rng::StreamKey;
use crate::scenario::{build_layout, place_users, ScenarioConfig, ScenarioRealization};

/// Joint action: bit `l` steps the power of BS `l` down (0) or up (1) by one
/// dB, bit `L + l` steps its beam index down (0) or up (1).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionVector(pub Vec<bool>);

impl ActionVector {
    /// Bits of `index` read most significant first, so index 5 with four bits
    /// is `[0, 1, 0, 1]`.
    pub fn from_index(index: usize, num_cells: usize) -> Self {
        let n = 2 * num_cells;
        ActionVector((0..n).map(|k| (index >> (n - 1 - k)) & 1 == 1).collect())
    }

    pub fn to_index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_unit_cube(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Per-cell view `(power bit, beam bit)`, encoded as `2 * power + beam`.
    pub fn cell_action(&self, cell: usize) -> usize {
        let num_cells = self.0.len() / 2;
        2 * usize::from(self.0[cell]) + usize::from(self.0[num_cells + cell])
    }
}

/// `2^(2L)`, exact for every L this crate can represent.
pub fn action_space_size(num_cells: usize) -> u128 {
    1u128 << (2 * num_cells)
}

/// Every joint action in index order. Only sensible for small networks.
pub fn enumerate_actions(num_cells: usize) -> impl Iterator<Item = ActionVector> {
    let n = usize::try_from(action_space_size(num_cells)).expect("action space too large to enumerate");
    (0..n).map(move |i| ActionVector::from_index(i, num_cells))
}

/// Applies a joint action: powers clamp at the ends of the grid, beams wrap.
pub fn apply_action(
    tx: &TxConfig,
    action: &ActionVector,
    num_powers: usize,
    num_beams: usize,
) -> Result<TxConfig> {
    let n = tx.num_cells();
    if action.len() != 2 * n {
        return Err(Error::ActionLength {
            expected: 2 * n,
            got: action.len(),
        });
    }
    let mut next = tx.clone();
    for cell in 0..n {
        apply_cell_action_in_place(&mut next, cell, action.cell_action(cell), num_powers, num_beams);
    }
    Ok(next)
}

/// Applies a per-cell action `2 * power_bit + beam_bit` to one cell only.
pub fn apply_cell_action_in_place(
    tx: &mut TxConfig,
    cell: usize,
    cell_action: usize,
    num_powers: usize,
    num_beams: usize,
) {
    let power_up = cell_action & 2 != 0;
    let beam_up = cell_action & 1 != 0;
    let p = &mut tx.power_idx[cell];
    *p = if power_up {
        (*p + 1).min(num_powers - 1)
    } else {
        p.saturating_sub(1)
    };
    let b = &mut tx.beam_idx[cell];
    *b = if beam_up {
        (*b + 1) % num_beams
    } else {
        (*b + num_beams - 1) % num_beams
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    /// Thresholded sum of true SINRs; needs every cross link.
    GlobalCsiSinr,
    /// Thresholded sum of SNRs; needs only the serving links.
    ServingCsiSnr,
    /// Thresholded sum of SINRs recovered from the mute/transmit probe.
    MeasuredSinr,
    /// Sum of RSRQ readings.
    Rsrq,
    /// Convex combination of the kinds above.
    Compound,
}

impl RewardKind {
    pub fn name(self) -> &'static str {
        match self {
            RewardKind::GlobalCsiSinr => "global-csi-sinr",
            RewardKind::ServingCsiSnr => "serving-csi-snr",
            RewardKind::MeasuredSinr => "measured-sinr",
            RewardKind::Rsrq => "rsrq",
            RewardKind::Compound => "compound",
        }
    }

    pub fn needs_measurements(self) -> bool {
        matches!(self, RewardKind::MeasuredSinr | RewardKind::Rsrq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeight {
    pub kind: RewardKind,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub gamma_min_db: f64,
    pub penalty: f64,
    /// Divide summed rewards by the number of cells.
    pub normalize_by_cells: bool,
    /// Components of a compound reward; ignored for the other kinds.
    pub weights: Vec<RewardWeight>,
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec {
            kind: RewardKind::GlobalCsiSinr,
            gamma_min_db: -3.0,
            penalty: -1.0,
            normalize_by_cells: true,
            weights: Vec::new(),
        }
    }
}

impl RewardSpec {
    pub fn of_kind(kind: RewardKind) -> Self {
        RewardSpec {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma_min_db.is_finite() || !self.penalty.is_finite() {
            return Err(Error::InvalidConfig("gamma_min_db and penalty must be finite".into()));
        }
        if self.kind != RewardKind::Compound {
            return Ok(());
        }
        if self.weights.is_empty() {
            return Err(Error::InvalidConfig("compound reward needs weights".into()));
        }
        if self.weights.iter().any(|w| w.kind == RewardKind::Compound) {
            return Err(Error::InvalidConfig("compound rewards cannot nest".into()));
        }
        if self.weights.iter().any(|w| !(w.weight >= 0.0)) {
            return Err(Error::InvalidConfig("compound weights must be non-negative".into()));
        }
        let total: f64 = self.weights.iter().map(|w| w.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("compound weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn needs_measurements(&self) -> bool {
        match self.kind {
            RewardKind::Compound => self.weights.iter().any(|w| w.kind.needs_measurements()),
            k => k.needs_measurements(),
        }
    }

    pub fn gamma_min_linear(&self) -> f64 {
        db_to_linear(self.gamma_min_db)
    }
}

/// `scale * sum(values)` if every value clears the threshold, else the penalty.
fn thresholded_sum(values: impl Iterator<Item = f64>, spec: &RewardSpec, scale: f64) -> f64 {
    let threshold = spec.gamma_min_linear();
    let mut total = 0.0;
    for v in values {
        if v <= threshold {
            return spec.penalty;
        }
        total += v;
    }
    scale * total
}

fn single_reward(
    kind: RewardKind,
    budgets: &[LinkBudget],
    measurements: Option<&[MeasurementReport]>,
    spec: &RewardSpec,
) -> Result<f64> {
    let scale = if spec.normalize_by_cells {
        1.0 / budgets.len().max(1) as f64
    } else {
        1.0
    };
    let reports = || measurements.ok_or(Error::MissingMeasurements(kind.name()));
    Ok(match kind {
        RewardKind::GlobalCsiSinr => thresholded_sum(budgets.iter().map(|b| b.sinr), spec, scale),
        RewardKind::ServingCsiSnr => thresholded_sum(budgets.iter().map(|b| b.snr), spec, scale),
        RewardKind::MeasuredSinr => {
            thresholded_sum(reports()?.iter().map(|m| m.measured_sinr), spec, scale)
        }
        RewardKind::Rsrq => scale * reports()?.iter().map(|m| m.rsrq).sum::<f64>(),
        RewardKind::Compound => unreachable!("compound rewards do not nest"),
    })
}

/// Training reward under `spec`.
pub fn compute_reward(
    budgets: &[LinkBudget],
    measurements: Option<&[MeasurementReport]>,
    spec: &RewardSpec,
) -> Result<f64> {
    if spec.kind != RewardKind::Compound {
        return single_reward(spec.kind, budgets, measurements, spec);
    }
    spec.weights.iter().try_fold(0.0, |acc, w| {
        Ok(acc + w.weight * single_reward(w.kind, budgets, measurements, spec)?)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub scenario: ScenarioConfig,
    pub path_loss: PathLossParams,
    pub radio: RadioConfig,
    pub reward: RewardSpec,
    pub horizon: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            scenario: ScenarioConfig::default(),
            path_loss: PathLossParams::default(),
            radio: RadioConfig::default(),
            reward: RewardSpec::default(),
            horizon: 50,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.path_loss.validate()?;
        self.radio.validate()?;
        self.reward.validate()?;
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.scenario.num_cells
    }

    pub fn with_cells(&self, num_cells: usize) -> Self {
        let mut c = self.clone();
        c.scenario.num_cells = num_cells;
        c
    }

    pub fn with_reward(&self, kind: RewardKind) -> Self {
        let mut c = self.clone();
        c.reward.kind = kind;
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Ground-truth sum-rate, whatever the training reward is.
    pub sum_rate: f64,
    pub sinr: Vec<f64>,
    pub violated_threshold: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub features: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// A small discrete-action environment as seen by the learners.
pub trait DiscreteEnv {
    fn observation_len(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Steps per episode.
    fn horizon(&self) -> usize;
    fn reset(&mut self, episode_seed: u64) -> Vec<f64>;
    /// Returns `(next observation, reward, done)`.
    fn step_index(&mut self, action: usize) -> Result<(Vec<f64>, f64, bool)>;
}

/// One multi-cell network under power/beam control.
///
/// Geometry and channels are drawn on [`CellularEnv::reset`] and stay fixed
/// for the whole episode.
#[derive(Debug, Clone)]
pub struct CellularEnv {
    config: EnvConfig,
    codebook: Codebook,
    powers: PowerSet,
    noise_watts: f64,
    bounds: FeatureBounds,
    scenario: ScenarioRealization,
    channels: ChannelSet,
    gains: GainTable,
    tx: TxConfig,
    step_count: usize,
}

#[derive(Debug, Clone, Copy)]
struct FeatureBounds {
    x: (f64, f64),
    y: (f64, f64),
    z: (f64, f64),
}

fn unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn index_unit(i: usize, n: usize) -> f64 {
    if n > 1 {
        i as f64 / (n - 1) as f64
    } else {
        0.0
    }
}

impl CellularEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let layout = build_layout(&config.scenario);
        let r = config.scenario.cell_radius;
        let span = |f: fn(&crate::scenario::Vec3) -> f64| {
            let lo = layout.iter().map(f).fold(f64::INFINITY, f64::min) - r;
            let hi = layout.iter().map(f).fold(f64::NEG_INFINITY, f64::max) + r;
            (lo, hi)
        };
        let [z_min, z_max] = config.scenario.user_altitude_range;
        let bounds = FeatureBounds {
            x: span(|v| v.x),
            y: span(|v| v.y),
            z: (z_min, z_max),
        };
        let codebook = config.radio.codebook();
        let powers = config.radio.power_set();
        let noise_watts = config.radio.noise_watts();
        let (scenario, channels) = draw_network(&config, 0);
        let gains = GainTable::new(&channels, &codebook);
        let mut env = CellularEnv {
            codebook,
            powers,
            noise_watts,
            bounds,
            tx: TxConfig { power_idx: vec![], beam_idx: vec![] },
            scenario,
            channels,
            gains,
            step_count: 0,
            config,
        };
        env.tx = env.initial_tx();
        Ok(env)
    }

    /// Draws a new network for `episode_seed` and returns the first observation.
    ///
    /// Powers start at the middle of the grid and every BS starts on the beam
    /// that maximises its own serving-link gain.
    pub fn reset(&mut self, episode_seed: u64) -> Vec<f64> {
        let (scenario, channels) = draw_network(&self.config, episode_seed);
        self.install(scenario, channels);
        self.features()
    }

    /// Installs an externally built network and resets the episode.
    pub fn install(&mut self, scenario: ScenarioRealization, channels: ChannelSet) {
        self.gains = GainTable::new(&channels, &self.codebook);
        self.scenario = scenario;
        self.channels = channels;
        self.tx = self.initial_tx();
        self.step_count = 0;
    }

    fn initial_tx(&self) -> TxConfig {
        let n = self.scenario.num_cells();
        TxConfig {
            power_idx: vec![(self.powers.len() - 1) / 2; n],
            beam_idx: (0..n)
                .map(|l| self.codebook.best_beam(self.channels.link(l, l)))
                .collect(),
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn num_cells(&self) -> usize {
        self.config.num_cells()
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn powers(&self) -> &PowerSet {
        &self.powers
    }

    pub fn noise_watts(&self) -> f64 {
        self.noise_watts
    }

    pub fn scenario(&self) -> &ScenarioRealization {
        &self.scenario
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn gains(&self) -> &GainTable {
        &self.gains
    }

    pub fn tx(&self) -> &TxConfig {
        &self.tx
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn is_done(&self) -> bool {
        self.step_count >= self.config.horizon
    }

    /// `[x, y, z per user; power per cell; beam per cell]`, all in `[0, 1]`.
    pub fn features(&self) -> Vec<f64> {
        features_for(&self.scenario, &self.tx, self.bounds, self.powers.len(), self.codebook.len())
    }

    /// Features of one cell only: its user's offset from the serving BS
    /// (in cell radii, mapped to `[0, 1]`), altitude, power and beam.
    pub fn cell_features(&self, cell: usize) -> Vec<f64> {
        let u = self.scenario.user_positions[cell];
        let bs = self.scenario.bs_positions[cell];
        let r = self.config.scenario.cell_radius;
        vec![
            unit(u.x - bs.x, (-r, r)),
            unit(u.y - bs.y, (-r, r)),
            unit(u.z, self.bounds.z),
            index_unit(self.tx.power_idx[cell], self.powers.len()),
            index_unit(self.tx.beam_idx[cell], self.codebook.len()),
        ]
    }

    pub fn budgets(&self) -> Vec<LinkBudget> {
        self.budgets_for(&self.tx)
    }

    pub fn budgets_for(&self, tx: &TxConfig) -> Vec<LinkBudget> {
        self.gains.budgets(tx, &self.powers, self.noise_watts)
    }

    pub fn measurements_for(&self, tx: &TxConfig) -> Vec<MeasurementReport> {
        probe_measurements(&self.channels, tx, &self.codebook, &self.powers, self.noise_watts)
    }

    pub fn sum_rate(&self) -> f64 {
        sum_rate(&self.budgets())
    }

    /// Training reward of `tx` under the configured spec.
    pub fn reward_for(&self, tx: &TxConfig) -> Result<f64> {
        self.reward_with(tx, &self.config.reward)
    }

    pub fn reward_with(&self, tx: &TxConfig, spec: &RewardSpec) -> Result<f64> {
        let budgets = self.budgets_for(tx);
        if spec.needs_measurements() {
            let m = self.measurements_for(tx);
            compute_reward(&budgets, Some(&m), spec)
        } else {
            compute_reward(&budgets, None, spec)
        }
    }

    /// Overwrites the transmit configuration without consuming a step.
    pub fn set_tx(&mut self, tx: TxConfig) {
        assert!(tx.num_cells() == self.num_cells() && tx.is_valid(&self.powers, &self.codebook));
        self.tx = tx;
    }

    pub fn step(&mut self, action: &ActionVector) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeTerminated(self.step_count));
        }
        let next = apply_action(&self.tx, action, self.powers.len(), self.codebook.len())?;
        self.advance_to(next)
    }

    /// Moves to `next` as one environment step and scores it.
    pub fn advance_to(&mut self, next: TxConfig) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeTerminated(self.step_count));
        }
        let reward = self.reward_for(&next)?;
        self.tx = next;
        self.step_count += 1;
        let budgets = self.budgets();
        let threshold = self.config.reward.gamma_min_linear();
        Ok(StepOutcome {
            features: self.features(),
            reward,
            done: self.is_done(),
            info: StepInfo {
                sum_rate: sum_rate(&budgets),
                violated_threshold: budgets.iter().any(|b| b.sinr <= threshold),
                sinr: budgets.iter().map(|b| b.sinr).collect(),
            },
        })
    }
}

/// Geometry and channels of one episode, from its own random stream.
pub fn draw_network(config: &EnvConfig, episode_seed: u64) -> (ScenarioRealization, ChannelSet) {
    let mut rng = StreamKey::new(config.scenario.rng_seed)
        .label("episode")
        .number(episode_seed)
        .rng();
    let layout = build_layout(&config.scenario);
    let scenario = place_users(&config.scenario, &layout, &mut rng);
    let channels = realize_network_channels(
        &scenario,
        config.radio.num_antennas,
        &config.path_loss,
        &mut rng,
    );
    (scenario, channels)
}

fn features_for(
    scenario: &ScenarioRealization,
    tx: &TxConfig,
    bounds: FeatureBounds,
    num_powers: usize,
    num_beams: usize,
) -> Vec<f64> {
    let n = scenario.num_cells();
    let mut f = Vec::with_capacity(5 * n);
    for u in &scenario.user_positions {
        f.extend([unit(u.x, bounds.x), unit(u.y, bounds.y), unit(u.z, bounds.z)]);
    }
    f.extend(tx.power_idx.iter().map(|&p| index_unit(p, num_powers)));
    f.extend(tx.beam_idx.iter().map(|&b| index_unit(b, num_beams)));
    f
}

impl DiscreteEnv for CellularEnv {
    fn observation_len(&self) -> usize {
        5 * self.num_cells()
    }

    fn num_actions(&self) -> usize {
        usize::try_from(action_space_size(self.num_cells())).expect("action space too large")
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, episode_seed: u64) -> Vec<f64> {
        CellularEnv::reset(self, episode_seed)
    }

    fn step_index(&mut self, action: usize) -> Result<(Vec<f64>, f64, bool)> {
        let a = ActionVector::from_index(action, self.num_cells());
        let out = self.step(&a)?;
        Ok((out.features, out.reward, out.done))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::LinkBudget;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn env(num_cells: usize) -> CellularEnv {
        CellularEnv::new(EnvConfig::default().with_cells(num_cells)).unwrap()
    }

    fn budgets(sinrs: &[f64]) -> Vec<LinkBudget> {
        sinrs.iter().map(|&s| LinkBudget::new(s, 0.0, 1.0)).collect()
    }

    #[test]
    fn action_index_encoding() {
        assert_eq!(ActionVector::from_index(5, 2).0, vec![false, true, false, true]);
        for i in 0..64 {
            assert_eq!(ActionVector::from_index(i, 3).to_index(), i);
        }
        assert_eq!(enumerate_actions(2).count(), 16);
        assert_eq!(action_space_size(18), 1u128 << 36);
    }

    #[test]
    fn apply_action_examples() {
        let tx = TxConfig { power_idx: vec![5], beam_idx: vec![2] };
        let next = apply_action(&tx, &ActionVector(vec![false, false]), 10, 8).unwrap();
        assert_eq!(next, TxConfig { power_idx: vec![4], beam_idx: vec![1] });

        let top = TxConfig { power_idx: vec![9], beam_idx: vec![7] };
        let next = apply_action(&top, &ActionVector(vec![true, true]), 10, 8).unwrap();
        assert_eq!(next, TxConfig { power_idx: vec![9], beam_idx: vec![0] });

        let bottom = TxConfig { power_idx: vec![0], beam_idx: vec![0] };
        let next = apply_action(&bottom, &ActionVector(vec![false, false]), 10, 8).unwrap();
        assert_eq!(next, TxConfig { power_idx: vec![0], beam_idx: vec![7] });

        assert!(matches!(
            apply_action(&tx, &ActionVector(vec![true; 3]), 10, 8),
            Err(Error::ActionLength { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn complementary_actions_cancel_in_interior() {
        let tx = TxConfig { power_idx: vec![3, 6], beam_idx: vec![2, 5] };
        for i in 0..16 {
            let a = ActionVector::from_index(i, 2);
            let inv = ActionVector(a.0.iter().map(|b| !b).collect());
            let there = apply_action(&tx, &a, 10, 8).unwrap();
            assert_eq!(apply_action(&there, &inv, 10, 8).unwrap(), tx);
        }
    }

    #[test]
    fn reward_examples() {
        let mut spec = RewardSpec { normalize_by_cells: false, ..Default::default() };
        assert!((compute_reward(&budgets(&[2.0, 4.0]), None, &spec).unwrap() - 6.0).abs() < 1e-12);
        spec.normalize_by_cells = true;
        assert!((compute_reward(&budgets(&[2.0, 4.0]), None, &spec).unwrap() - 3.0).abs() < 1e-12);

        // -3 dB is about 0.501 linear
        assert_eq!(compute_reward(&budgets(&[0.5, 40.0]), None, &spec).unwrap(), -1.0);
        assert!(compute_reward(&budgets(&[0.502, 40.0]), None, &spec).unwrap() > 0.0);
        let at = db_to_linear(-3.0);
        assert_eq!(compute_reward(&budgets(&[at, 40.0]), None, &spec).unwrap(), -1.0);
    }

    #[test]
    fn single_cell_global_equals_serving() {
        let mut e = env(1);
        for seed in 0..20 {
            e.reset(seed);
            let tx = e.tx().clone();
            let g = e.reward_with(&tx, &RewardSpec::of_kind(RewardKind::GlobalCsiSinr)).unwrap();
            let s = e.reward_with(&tx, &RewardSpec::of_kind(RewardKind::ServingCsiSnr)).unwrap();
            assert_eq!(g, s);
        }
    }

    #[test]
    fn measurement_rewards_need_reports() {
        let b = budgets(&[1.0]);
        for kind in [RewardKind::MeasuredSinr, RewardKind::Rsrq] {
            assert!(matches!(
                compute_reward(&b, None, &RewardSpec::of_kind(kind)),
                Err(Error::MissingMeasurements(_))
            ));
        }
        let compound = RewardSpec {
            kind: RewardKind::Compound,
            weights: vec![
                RewardWeight { kind: RewardKind::GlobalCsiSinr, weight: 0.5 },
                RewardWeight { kind: RewardKind::Rsrq, weight: 0.5 },
            ],
            ..Default::default()
        };
        assert!(compound.needs_measurements());
        assert!(compute_reward(&b, None, &compound).is_err());
    }

    #[test]
    fn compound_is_weighted_sum() {
        let mut e = env(3);
        e.reset(4);
        let tx = e.tx().clone();
        let parts = [
            (RewardKind::GlobalCsiSinr, 0.2),
            (RewardKind::ServingCsiSnr, 0.3),
            (RewardKind::MeasuredSinr, 0.1),
            (RewardKind::Rsrq, 0.4),
        ];
        let spec = RewardSpec {
            kind: RewardKind::Compound,
            weights: parts.iter().map(|&(kind, weight)| RewardWeight { kind, weight }).collect(),
            ..Default::default()
        };
        spec.validate().unwrap();
        let expected: f64 = parts
            .iter()
            .map(|&(k, w)| w * e.reward_with(&tx, &RewardSpec::of_kind(k)).unwrap())
            .sum();
        assert!((e.reward_with(&tx, &spec).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn compound_validation() {
        let bad_sum = RewardSpec {
            kind: RewardKind::Compound,
            weights: vec![RewardWeight { kind: RewardKind::Rsrq, weight: 0.4 }],
            ..Default::default()
        };
        assert!(bad_sum.validate().is_err());
        let nested = RewardSpec {
            kind: RewardKind::Compound,
            weights: vec![RewardWeight { kind: RewardKind::Compound, weight: 1.0 }],
            ..Default::default()
        };
        assert!(nested.validate().is_err());
    }

    #[test]
    fn reset_is_deterministic_and_sized() {
        let mut a = env(3);
        let mut b = env(3);
        assert_eq!(a.reset(42), b.reset(42));
        assert_eq!(a.reset(42).len(), 15);
        assert_ne!(a.reset(42), a.reset(43));
    }

    #[test]
    fn features_stay_in_unit_cube() {
        let mut e = env(4);
        let mut rng = seeded_rng(0);
        for seed in 0..1000 {
            let f = e.reset(seed);
            assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
            let a = ActionVector::from_index(rng.random_range(0..256), 4);
            let out = e.step(&a).unwrap();
            assert!(out.features.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn initial_tx_is_mid_power_best_beam() {
        let mut e = env(3);
        e.reset(9);
        for l in 0..3 {
            assert_eq!(e.tx().power_idx[l], 4);
            assert_eq!(e.tx().beam_idx[l], e.codebook().best_beam(e.channels().link(l, l)));
        }
    }

    #[test]
    fn episode_runs_exactly_horizon_steps() {
        let mut e = env(2);
        e.reset(1);
        let a = ActionVector::from_index(7, 2);
        for t in 1..=50 {
            let out = e.step(&a).unwrap();
            assert_eq!(out.done, t == 50);
        }
        assert!(matches!(e.step(&a), Err(Error::EpisodeTerminated(50))));
    }

    #[test]
    fn sum_rate_ignores_reward_kind() {
        let kinds = [
            RewardKind::GlobalCsiSinr,
            RewardKind::ServingCsiSnr,
            RewardKind::MeasuredSinr,
            RewardKind::Rsrq,
        ];
        let a = ActionVector::from_index(9, 3);
        let infos: Vec<StepInfo> = kinds
            .iter()
            .map(|&k| {
                let mut e = CellularEnv::new(EnvConfig::default().with_cells(3).with_reward(k)).unwrap();
                e.reset(77);
                e.step(&a).unwrap().info
            })
            .collect();
        for info in &infos[1..] {
            assert_eq!(info, &infos[0]);
        }
    }

    #[test]
    fn measured_reward_equals_global_reward() {
        let mut e = env(3);
        let mut rng = seeded_rng(12);
        let global = RewardSpec::of_kind(RewardKind::GlobalCsiSinr);
        let measured = RewardSpec::of_kind(RewardKind::MeasuredSinr);
        for seed in 0..200 {
            e.reset(seed);
            let tx = TxConfig {
                power_idx: (0..3).map(|_| rng.random_range(0..10)).collect(),
                beam_idx: (0..3).map(|_| rng.random_range(0..8)).collect(),
            };
            let g = e.reward_with(&tx, &global).unwrap();
            let m = e.reward_with(&tx, &measured).unwrap();
            assert!((g - m).abs() <= 1e-9 * g.abs().max(1.0), "{g} vs {m}");
        }
    }

    #[test]
    fn penalty_iff_threshold_violated() {
        let mut e = env(4);
        let mut rng = seeded_rng(5);
        let threshold = e.config().reward.gamma_min_linear();
        for seed in 0..300 {
            e.reset(seed);
            let a = ActionVector::from_index(rng.random_range(0..256), 4);
            let out = e.step(&a).unwrap();
            assert_eq!(out.info.violated_threshold, out.reward == -1.0);
            assert_eq!(out.info.violated_threshold, out.info.sinr.iter().any(|&g| g <= threshold));
        }
    }
}
