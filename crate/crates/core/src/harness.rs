//! Experiment sweeps over (method, network size, seed).
//!
//! Every cell of the sweep trains its method (if it learns), then evaluates the
//! greedy policy on `eval_episodes` channel draws shared by all methods at that
//! size and seed. The score of an episode is the ground-truth sum-rate of the
//! configuration the policy ends on; the SINR of every cell in that
//! configuration feeds the coverage CCDF.
//!
//! Random streams are keyed by `(master_seed, method, L, seed)`, with all
//! learners sharing one label when `shared_learner_streams` is set, so the
//! sweep gives identical files whether cells run serially or in parallel.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{
    rollout, sequential_train, train_dqn, train_wolpertinger, DqnAgent, DqnConfig, Policy, SequentialConfig,
    WolpertingerAgent, WolpertingerConfig,
};
use crate::baselines::{brute_force_for, joint_config_count, mrt_tdma_for, MrtVariant, RandomPolicy, DEFAULT_SEARCH_CAP};
use crate::environment::{action_space_size, CellularEnv, EnvConfig, RewardKind};
use crate::error::{Error, Result};
use crate::radio::{linear_to_db, TxConfig};
use crate::rng::{SimRng, StreamKey};

/// Largest network the joint-action learners accept (`4^8` Q outputs).
pub const MAX_JOINT_ACTION_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BruteForce,
    Mrt,
    Random,
    /// DQN trained on the thresholded true-SINR reward.
    DqnGlobal,
    /// DQN trained on the thresholded serving-link SNR reward.
    DqnServing,
    /// DQN trained on SINR recovered from the mute/transmit probe.
    DqnMeasured,
    Wolpertinger,
    Sequential,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::BruteForce,
        Method::Mrt,
        Method::Random,
        Method::DqnGlobal,
        Method::DqnServing,
        Method::DqnMeasured,
        Method::Wolpertinger,
        Method::Sequential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::BruteForce => "brute_force",
            Method::Mrt => "mrt",
            Method::Random => "random",
            Method::DqnGlobal => "dqn_global",
            Method::DqnServing => "dqn_serving",
            Method::DqnMeasured => "dqn_measured",
            Method::Wolpertinger => "wolpertinger",
            Method::Sequential => "sequential",
        }
    }

    pub fn is_learning(self) -> bool {
        !matches!(self, Method::BruteForce | Method::Mrt | Method::Random)
    }

    fn uses_joint_actions(self) -> bool {
        matches!(
            self,
            Method::DqnGlobal | Method::DqnServing | Method::DqnMeasured | Method::Wolpertinger
        )
    }

    /// Training reward, overriding the configured one for the DQN variants.
    fn reward_kind(self, configured: RewardKind) -> RewardKind {
        match self {
            Method::DqnGlobal => RewardKind::GlobalCsiSinr,
            Method::DqnServing => RewardKind::ServingCsiSnr,
            Method::DqnMeasured => RewardKind::MeasuredSinr,
            _ => configured,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// Where learners get their training episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingRegime {
    /// Train once on fresh draws, then evaluate on unseen draws.
    #[default]
    FreshDraws,
    /// Train a new agent on each evaluation draw, repeating that draw for
    /// every training episode (frozen channels).
    PerInstance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Brute force is skipped when the joint grid exceeds this many configurations.
    pub search_cap: u64,
    pub mrt_variant: MrtVariant,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            search_cap: DEFAULT_SEARCH_CAP as u64,
            mrt_variant: MrtVariant::Codebook,
        }
    }
}

/// Evenly spaced SINR points, in dB, at which CCDFs are tabulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcdfGrid {
    pub min_db: f64,
    pub max_db: f64,
    pub step_db: f64,
}

impl Default for CcdfGrid {
    fn default() -> Self {
        CcdfGrid {
            min_db: -30.0,
            max_db: 50.0,
            step_db: 0.5,
        }
    }
}

impl CcdfGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_db.is_finite()
            && self.max_db >= self.min_db
            && self.step_db > 0.0
            && (self.max_db - self.min_db) / self.step_db <= 1e6;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("ccdf_grid needs min_db <= max_db and a positive step".into()))
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max_db - self.min_db) / self.step_db + 1e-9).floor() as usize;
        (0..=n).map(|i| self.min_db + i as f64 * self.step_db).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    /// Scenario, channel, radio and reward settings; `scenario.num_cells` is
    /// overridden by each entry of `cells_sweep`.
    pub env: EnvConfig,
    pub dqn: DqnConfig,
    pub wolpertinger: WolpertingerConfig,
    pub sequential: SequentialConfig,
    pub baseline: BaselineConfig,
    pub methods: Vec<Method>,
    pub cells_sweep: Vec<usize>,
    /// Training episodes per agent.
    pub episodes: usize,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub regime: TrainingRegime,
    /// Give every learning method the same random stream and training draws
    /// for a given (L, seed), so paired comparisons between learners share
    /// initial weights and exploration noise.
    pub shared_learner_streams: bool,
    pub ccdf_grid: CcdfGrid,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 0,
            env: EnvConfig::default(),
            dqn: DqnConfig::default(),
            wolpertinger: WolpertingerConfig::default(),
            sequential: SequentialConfig::default(),
            baseline: BaselineConfig::default(),
            methods: vec![Method::BruteForce, Method::Mrt, Method::Random, Method::DqnGlobal],
            cells_sweep: vec![2, 3, 4, 5],
            episodes: 300,
            eval_episodes: 20,
            seeds: vec![0],
            regime: TrainingRegime::FreshDraws,
            shared_learner_streams: false,
            ccdf_grid: CcdfGrid::default(),
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Checks everything a sweep needs before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if self.baseline.search_cap == 0 {
            return Err(Error::InvalidConfig("search_cap must be positive".into()));
        }
        self.ccdf_grid.validate()?;
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("methods must not be empty".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::InvalidConfig("methods must not repeat".into()));
        }
        if self.cells_sweep.is_empty() || self.cells_sweep.contains(&0) {
            return Err(Error::InvalidConfig("cells_sweep needs at least one positive size".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must not be empty".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::InvalidConfig("eval_episodes must be at least 1".into()));
        }
        let learning = self.methods.iter().any(|m| m.is_learning());
        if learning && self.episodes == 0 {
            return Err(Error::InvalidConfig("learning methods need episodes >= 1".into()));
        }
        let max_cells = self.cells_sweep.iter().copied().max().unwrap_or(0);
        let min_cells = self.cells_sweep.iter().copied().min().unwrap_or(0);
        if self.methods.iter().any(|m| m.uses_joint_actions()) && max_cells > MAX_JOINT_ACTION_CELLS {
            return Err(Error::InvalidConfig(format!(
                "joint-action learners support at most {MAX_JOINT_ACTION_CELLS} cells"
            )));
        }
        if self.methods.iter().any(|m| matches!(m, Method::DqnGlobal | Method::DqnServing | Method::DqnMeasured)) {
            self.dqn.validate()?;
        }
        if self.methods.contains(&Method::Wolpertinger) {
            self.wolpertinger.validate(action_space_size(min_cells))?;
        }
        if self.methods.contains(&Method::Sequential) {
            self.sequential.validate()?;
        }
        for &m in &self.methods {
            self.env_for(m, min_cells).validate()?;
        }
        Ok(())
    }

    fn env_for(&self, method: Method, cells: usize) -> EnvConfig {
        let mut env = self.env.with_cells(cells);
        env.reward.kind = method.reward_kind(self.env.reward.kind);
        env
    }

    /// Seed of evaluation episode `episode`, shared by every method.
    pub fn eval_episode_seed(&self, cells: usize, seed: u64, episode: usize) -> u64 {
        StreamKey::new(self.master_seed)
            .label("eval")
            .number(cells as u64)
            .number(seed)
            .number(episode as u64)
            .seed()
    }

    fn stream_label(&self, method: Method) -> &'static str {
        if self.shared_learner_streams && method.is_learning() {
            "learner"
        } else {
            method.name()
        }
    }

    fn train_episode_seed(&self, method: Method, cells: usize, seed: u64, episode: usize) -> u64 {
        StreamKey::new(self.master_seed)
            .label("train")
            .label(self.stream_label(method))
            .number(cells as u64)
            .number(seed)
            .number(episode as u64)
            .seed()
    }

    fn cell_rng(&self, method: Method, cells: usize, seed: u64) -> SimRng {
        StreamKey::new(self.master_seed)
            .label(self.stream_label(method))
            .number(cells as u64)
            .number(seed)
            .rng()
    }
}

/// Evaluation summary of one (method, L, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub cells: usize,
    pub seed: u64,
    pub mean_sum_rate: f64,
    /// Sample standard deviation over evaluation episodes (0 for one episode).
    pub std_sum_rate: f64,
    /// Per-step training reward averaged over evaluation episodes.
    pub mean_reward: f64,
    pub episode_sum_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCell {
    pub method: Method,
    pub cells: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcdfCurve {
    pub method: Method,
    pub cells: usize,
    pub grid_db: Vec<f64>,
    /// `P[SINR >= x]` at each grid point.
    pub ccdf: Vec<f64>,
    /// Pooled per-cell SINR samples in dB, sorted ascending.
    pub samples_db: Vec<f64>,
}

impl CcdfCurve {
    /// Fraction of samples at or above `threshold_db`.
    pub fn coverage(&self, threshold_db: f64) -> f64 {
        let below = self.samples_db.partition_point(|&s| s < threshold_db);
        (self.samples_db.len() - below) as f64 / self.samples_db.len() as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<SummaryRow>,
    pub ccdf: Vec<CcdfCurve>,
    pub skipped: Vec<SkippedCell>,
}

impl MetricsTable {
    pub fn rows_for(&self, method: Method, cells: usize) -> impl Iterator<Item = &SummaryRow> {
        self.rows
            .iter()
            .filter(move |r| r.method == method && r.cells == cells)
    }

    /// Mean over seeds of the per-seed mean sum-rate.
    pub fn mean_sum_rate(&self, method: Method, cells: usize) -> Option<f64> {
        let v: Vec<f64> = self.rows_for(method, cells).map(|r| r.mean_sum_rate).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn curve(&self, method: Method, cells: usize) -> Option<&CcdfCurve> {
        self.ccdf.iter().find(|c| c.method == method && c.cells == cells)
    }
}

/// Empirical `P[X >= x]` for each `x` in an ascending `grid`.
pub fn ccdf(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidConfig("ccdf grid must be ascending".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|&x| {
            let below = sorted.partition_point(|&s| s < x);
            (sorted.len() - below) as f64 / n
        })
        .collect())
}

struct EpisodeScore {
    sum_rate: f64,
    mean_reward: f64,
    sinr: Vec<f64>,
}

enum CellOutcome {
    Done(SummaryRow, Vec<f64>),
    Skipped(SkippedCell),
}

fn score_rollout(env: &mut CellularEnv, policy: &mut dyn Policy) -> Result<EpisodeScore> {
    let r = rollout(env, policy)?;
    Ok(EpisodeScore {
        sum_rate: r.final_sum_rate,
        mean_reward: r.total_reward / r.steps.max(1) as f64,
        sinr: r.final_sinr,
    })
}

fn train_policy(
    config: &ExperimentConfig,
    method: Method,
    env_config: &EnvConfig,
    train_seeds: &[u64],
    rng: &mut SimRng,
) -> Result<Box<dyn Policy>> {
    let cells = env_config.num_cells();
    let mut env = CellularEnv::new(env_config.clone())?;
    let obs_len = env.features().len();
    Ok(match method {
        Method::DqnGlobal | Method::DqnServing | Method::DqnMeasured => {
            let mut agent = DqnAgent::new(config.dqn.clone(), obs_len, 1 << (2 * cells), rng)?;
            train_dqn(&mut agent, &mut env, train_seeds, rng)?;
            Box::new(agent)
        }
        Method::Wolpertinger => {
            let mut agent = WolpertingerAgent::new(config.wolpertinger.clone(), obs_len, cells, rng)?;
            train_wolpertinger(&mut agent, &mut env, train_seeds, rng)?;
            Box::new(agent)
        }
        Method::Sequential => Box::new(sequential_train(env_config, &config.sequential, train_seeds, rng)?.0),
        Method::BruteForce | Method::Mrt | Method::Random => unreachable!("baselines do not train"),
    })
}

fn run_cell(config: &ExperimentConfig, method: Method, cells: usize, seed: u64) -> Result<CellOutcome> {
    let env_config = config.env_for(method, cells);
    let mut env = CellularEnv::new(env_config.clone())?;
    let mut rng = config.cell_rng(method, cells, seed);
    let eval_seeds: Vec<u64> = (0..config.eval_episodes)
        .map(|e| config.eval_episode_seed(cells, seed, e))
        .collect();

    if method == Method::BruteForce {
        let count = joint_config_count(cells, env.powers().len(), env.codebook().len());
        if count > u128::from(config.baseline.search_cap) {
            return Ok(CellOutcome::Skipped(SkippedCell {
                method,
                cells,
                seed,
                reason: format!(
                    "{count} joint configurations exceed the search cap of {}",
                    config.baseline.search_cap
                ),
            }));
        }
    }

    let mut trained = match (method.is_learning(), config.regime) {
        (true, TrainingRegime::FreshDraws) => {
            let seeds: Vec<u64> = (0..config.episodes)
                .map(|e| config.train_episode_seed(method, cells, seed, e))
                .collect();
            Some(train_policy(config, method, &env_config, &seeds, &mut rng)?)
        }
        _ => None,
    };

    let mut scores = Vec::with_capacity(eval_seeds.len());
    for &es in &eval_seeds {
        env.reset(es);
        let score = match method {
            Method::BruteForce => {
                let bf = brute_force_for(&env, u128::from(config.baseline.search_cap))?;
                EpisodeScore {
                    sum_rate: bf.best_sum_rate,
                    mean_reward: env.reward_for(&bf.best)?,
                    sinr: env.budgets_for(&bf.best).iter().map(|b| b.sinr).collect(),
                }
            }
            Method::Mrt => {
                let m = mrt_tdma_for(&env, config.baseline.mrt_variant);
                let tx = TxConfig {
                    power_idx: vec![env.powers().max_index(); cells],
                    beam_idx: m.beams.clone(),
                };
                EpisodeScore {
                    sum_rate: m.sum_rate,
                    mean_reward: env.reward_for(&tx)?,
                    sinr: m.snr,
                }
            }
            Method::Random => score_rollout(&mut env, &mut RandomPolicy::new(&mut rng))?,
            _ => match trained.as_mut() {
                Some(policy) => score_rollout(&mut env, policy.as_mut())?,
                None => {
                    let seeds = vec![es; config.episodes];
                    let mut policy = train_policy(config, method, &env_config, &seeds, &mut rng)?;
                    env.reset(es);
                    score_rollout(&mut env, policy.as_mut())?
                }
            },
        };
        scores.push(score);
    }

    let rates: Vec<f64> = scores.iter().map(|s| s.sum_rate).collect();
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let std = if rates.len() > 1 {
        (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let sinr_db = scores
        .iter()
        .flat_map(|s| s.sinr.iter().map(|&x| linear_to_db(x)))
        .collect();
    Ok(CellOutcome::Done(
        SummaryRow {
            method,
            cells,
            seed,
            mean_sum_rate: mean,
            std_sum_rate: std,
            mean_reward: scores.iter().map(|s| s.mean_reward).sum::<f64>() / n,
            episode_sum_rates: rates,
        },
        sinr_db,
    ))
}

/// Trains and evaluates every (method, L, seed) cell of a validated config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsTable> {
    config.validate()?;
    let mut cells = Vec::new();
    for &method in &config.methods {
        for &l in &config.cells_sweep {
            for &seed in &config.seeds {
                cells.push((method, l, seed));
            }
        }
    }
    let outcomes: Vec<Result<CellOutcome>> = cells
        .par_iter()
        .map(|&(m, l, s)| run_cell(config, m, l, s))
        .collect();

    let grid = config.ccdf_grid.points();
    let mut table = MetricsTable::default();
    let mut pooled: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (&(m, l, _), outcome) in cells.iter().zip(outcomes) {
        match outcome? {
            CellOutcome::Done(row, sinr) => {
                let mi = config.methods.iter().position(|&x| x == m).expect("method listed");
                pooled.entry((mi, l)).or_default().extend(sinr);
                table.rows.push(row);
            }
            CellOutcome::Skipped(s) => table.skipped.push(s),
        }
    }
    for ((mi, l), mut samples) in pooled {
        samples.sort_by(f64::total_cmp);
        table.ccdf.push(CcdfCurve {
            method: config.methods[mi],
            cells: l,
            ccdf: ccdf(&samples, &grid)?,
            grid_db: grid.clone(),
            samples_db: samples,
        });
    }
    Ok(table)
}

/// Fails unless a file can be created and removed inside `dir`.
pub fn probe_output_dir(dir: &Path) -> Result<()> {
    let wrap = |source| Error::OutputDir {
        path: dir.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(wrap)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(wrap)?;
    fs::remove_file(&probe).map_err(wrap)
}

/// Writes `summary.csv`, one `ccdf_<method>_L<L>.csv` per curve,
/// `skipped.csv` and `config_echo.json`.
pub fn write_outputs(table: &MetricsTable, config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };

    let mut summary = String::from("method,L,seed,mean_sum_rate,std_sum_rate,mean_reward\n");
    for r in &table.rows {
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{}",
            r.method, r.cells, r.seed, r.mean_sum_rate, r.std_sum_rate, r.mean_reward
        );
    }
    put("summary.csv".into(), summary)?;

    for c in &table.ccdf {
        let mut body = String::from("sinr_db,ccdf\n");
        for (x, p) in c.grid_db.iter().zip(&c.ccdf) {
            let _ = writeln!(body, "{x},{p}");
        }
        put(format!("ccdf_{}_L{}.csv", c.method, c.cells), body)?;
    }

    let mut skipped = String::from("method,L,seed,reason\n");
    for s in &table.skipped {
        let _ = writeln!(skipped, "{},{},{},\"{}\"", s.method, s.cells, s.seed, s.reason);
    }
    put("skipped.csv".into(), skipped)?;

    put("config_echo.json".into(), config.to_json())?;
    Ok(written)
}

/// Validates, checks the output directory, runs the sweep and writes the files.
pub fn run(config: &ExperimentConfig) -> Result<MetricsTable> {
    config.validate()?;
    probe_output_dir(&config.output_dir)?;
    let table = run_experiment(config)?;
    write_outputs(&table, config, &config.output_dir)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            methods: vec![Method::BruteForce, Method::Mrt, Method::Random],
            cells_sweep: vec![2],
            eval_episodes: 3,
            seeds: vec![4],
            output_dir: dir.to_path_buf(),
            ..Default::default()
        }
    }

    #[test]
    fn ccdf_examples() {
        let s = [1.0, 2.0, 3.0];
        let p = ccdf(&s, &[0.0, 2.0, 4.0]).unwrap();
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p[0], 1.0);
        assert_eq!(p[2], 0.0);
        assert!(matches!(ccdf(&[], &[0.0]), Err(Error::EmptySamples)));
        assert!(ccdf(&s, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn grid_includes_endpoints() {
        let g = CcdfGrid::default().points();
        assert_eq!(g.first(), Some(&-30.0));
        assert_eq!(g.last(), Some(&50.0));
        assert!(g.contains(&-3.0));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("dqn".parse::<Method>().is_err());
    }

    #[test]
    fn validation_rejects_before_compute() {
        let dir = tempfile::tempdir().unwrap();
        let base = small(dir.path());
        let bad = [
            ExperimentConfig { seeds: vec![], ..base.clone() },
            ExperimentConfig { methods: vec![], ..base.clone() },
            ExperimentConfig { methods: vec![Method::Mrt, Method::Mrt], ..base.clone() },
            ExperimentConfig { cells_sweep: vec![0], ..base.clone() },
            ExperimentConfig { eval_episodes: 0, ..base.clone() },
            ExperimentConfig { methods: vec![Method::DqnGlobal], episodes: 0, ..base.clone() },
            ExperimentConfig { methods: vec![Method::DqnGlobal], cells_sweep: vec![9], ..base.clone() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))), "{c:?}");
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"seeds":[1],"epochs":3}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"seeds":[1,2]}"#).unwrap();
        assert_eq!(c.seeds, vec![1, 2]);
        assert_eq!(c.episodes, ExperimentConfig::default().episodes);
    }

    #[test]
    fn unwritable_output_fails_first() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("occupied");
        fs::write(&file, b"x").unwrap();
        let c = small(&file.join("sub"));
        assert!(matches!(run(&c), Err(Error::OutputDir { .. })));
    }

    #[test]
    fn baseline_sweep_shape_and_dominance() {
        let dir = tempfile::tempdir().unwrap();
        let c = small(dir.path());
        let t = run(&c).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.ccdf.len(), 3);
        let bf = t.mean_sum_rate(Method::BruteForce, 2).unwrap();
        let rnd = t.mean_sum_rate(Method::Random, 2).unwrap();
        assert!(bf >= rnd);
        for curve in &t.ccdf {
            assert_eq!(curve.samples_db.len(), 2 * 3);
            assert!(curve.ccdf.windows(2).all(|w| w[1] <= w[0]));
        }
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 4);
        assert!(summary.starts_with("method,L,seed,mean_sum_rate,std_sum_rate,mean_reward\n"));
        assert!(!summary.contains('\r'));
        assert!(dir.path().join("ccdf_mrt_L2.csv").exists());
    }

    #[test]
    fn brute_force_over_cap_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(dir.path());
        c.methods = vec![Method::BruteForce, Method::Random];
        c.baseline.search_cap = 100;
        c.eval_episodes = 1;
        let t = run(&c).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.skipped.len(), 1);
        assert!(t.skipped[0].reason.contains("6400"));
        let s = fs::read_to_string(dir.path().join("skipped.csv")).unwrap();
        assert_eq!(s.lines().count(), 2);
    }

    #[test]
    fn reruns_and_echo_are_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut c = small(a.path());
        c.methods.push(Method::Sequential);
        c.episodes = 3;
        c.eval_episodes = 2;
        c.sequential.dqn.warmup = 20;
        c.sequential.dqn.batch_size = 8;
        run(&c).unwrap();
        let mut echo = ExperimentConfig::load(&a.path().join("config_echo.json")).unwrap();
        assert_eq!(echo, c);
        echo.output_dir = b.path().to_path_buf();
        run(&echo).unwrap();
        for name in ["summary.csv", "ccdf_sequential_L2.csv", "ccdf_random_L2.csv", "skipped.csv"] {
            let x = fs::read(a.path().join(name)).unwrap();
            let y = fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
    }

    #[test]
    fn floats_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let c = small(dir.path());
        let t = run(&c).unwrap();
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        for (line, row) in summary.lines().skip(1).zip(&t.rows) {
            let v: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
            assert_eq!(v.to_bits(), row.mean_sum_rate.to_bits());
        }
    }
}
