//! Reference policies that do not learn: exhaustive search over the joint
//! power/beam grid, codebook MRT with TDMA sharing, and a uniform random walk.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Policy;
use crate::channel::{norm_sqr, ChannelSet};
use crate::environment::{ActionVector, CellularEnv};
use crate::error::{Error, Result};
use crate::radio::{Codebook, GainTable, PowerSet, TxConfig};

/// Default ceiling on the number of joint configurations brute force visits.
pub const DEFAULT_SEARCH_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub best: TxConfig,
    pub best_sum_rate: f64,
    pub evaluated: u128,
}

/// Number of joint configurations `(|P| |W|)^L`, saturating.
pub fn joint_config_count(num_cells: usize, num_powers: usize, num_beams: usize) -> u128 {
    let per_cell = (num_powers * num_beams) as u128;
    (0..num_cells).fold(1u128, |acc, _| acc.saturating_mul(per_cell))
}

/// Decodes the `index`-th configuration in lexicographic order of
/// `(power_idx[0..L], beam_idx[0..L])`.
fn decode(mut index: u64, n: usize, np: usize, nb: usize, tx: &mut TxConfig) {
    for c in (0..n).rev() {
        tx.beam_idx[c] = (index % nb as u64) as usize;
        index /= nb as u64;
    }
    for c in (0..n).rev() {
        tx.power_idx[c] = (index % np as u64) as usize;
        index /= np as u64;
    }
}

/// Exact sum-rate maximiser over the joint grid.
///
/// The grid is split into contiguous index ranges scanned in parallel; each
/// range keeps its first maximum and ranges are reduced in index order, so
/// ties resolve to the lexicographically smallest configuration.
pub fn brute_force_search(
    channels: &ChannelSet,
    codebook: &Codebook,
    powers: &PowerSet,
    noise_watts: f64,
    cap: u128,
) -> Result<BruteForceResult> {
    let n = channels.num_cells();
    let (np, nb) = (powers.len(), codebook.len());
    let total = joint_config_count(n, np, nb);
    if total > cap {
        return Err(Error::SearchCapExceeded { configs: total, cap });
    }
    let total = total as u64;
    let gains = GainTable::new(channels, codebook);
    let watts: Vec<f64> = (0..np).map(|i| powers.watts(i)).collect();
    let chunk = 1u64 << 14;
    let chunks = total.div_ceil(chunk);
    let (best_rate, best_index) = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut tx = TxConfig {
                power_idx: vec![0; n],
                beam_idx: vec![0; n],
            };
            let mut p = vec![0.0; n];
            let mut best = (f64::NEG_INFINITY, u64::MAX);
            for i in k * chunk..((k + 1) * chunk).min(total) {
                decode(i, n, np, nb, &mut tx);
                for (pw, &pi) in p.iter_mut().zip(&tx.power_idx) {
                    *pw = watts[pi];
                }
                let rate: f64 = gains
                    .budgets_watts(&p, &tx.beam_idx, noise_watts)
                    .iter()
                    .map(|b| b.rate)
                    .sum();
                if rate > best.0 {
                    best = (rate, i);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    let mut best = TxConfig {
        power_idx: vec![0; n],
        beam_idx: vec![0; n],
    };
    decode(best_index, n, np, nb, &mut best);
    Ok(BruteForceResult {
        best,
        best_sum_rate: best_rate,
        evaluated: total as u128,
    })
}

/// Beamformer used by the MRT baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MrtVariant {
    /// Best codeword on the serving link.
    #[default]
    Codebook,
    /// Unconstrained conjugate beamformer `h / |h|`, for reference.
    Continuous,
}

/// Per-cell codeword maximising the serving-link gain.
pub fn mrt_select(channels: &ChannelSet, codebook: &Codebook) -> Vec<usize> {
    (0..channels.num_cells())
        .map(|l| codebook.best_beam(channels.link(l, l)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrtTdma {
    /// Codebook beams (also reported for the continuous variant).
    pub beams: Vec<usize>,
    /// Interference-free SNR of each cell at maximum power.
    pub snr: Vec<f64>,
    pub dropped: Vec<bool>,
    pub sum_rate: f64,
}

/// MRT at maximum power with cells taking turns in equal time slots.
///
/// Cells whose SNR is at or below `gamma_min` are dropped; their slots stay
/// idle, so the rate is `(1/L) * sum over survivors of log2(1 + SNR)`.
pub fn mrt_tdma(
    channels: &ChannelSet,
    codebook: &Codebook,
    powers: &PowerSet,
    noise_watts: f64,
    gamma_min: f64,
    variant: MrtVariant,
) -> MrtTdma {
    let n = channels.num_cells();
    let beams = mrt_select(channels, codebook);
    let p = powers.watts(powers.max_index());
    let snr: Vec<f64> = (0..n)
        .map(|l| {
            let h = channels.link(l, l);
            let gain = match variant {
                MrtVariant::Codebook => crate::radio::inner(h, &codebook.codewords[beams[l]]).norm_sqr(),
                MrtVariant::Continuous => norm_sqr(h),
            };
            p * gain / noise_watts
        })
        .collect();
    let dropped: Vec<bool> = snr.iter().map(|&s| s <= gamma_min).collect();
    let sum_rate = mrt_tdma_rate(&snr, gamma_min);
    MrtTdma {
        beams,
        snr,
        dropped,
        sum_rate,
    }
}

/// `(1/L) * sum_{SNR > gamma_min} log2(1 + SNR)`.
pub fn mrt_tdma_rate(snr: &[f64], gamma_min: f64) -> f64 {
    if snr.is_empty() {
        return 0.0;
    }
    snr.iter()
        .filter(|&&s| s > gamma_min)
        .map(|s| (1.0 + s).log2())
        .sum::<f64>()
        / snr.len() as f64
}

/// MRT-TDMA for the network currently installed in `env`.
pub fn mrt_tdma_for(env: &CellularEnv, variant: MrtVariant) -> MrtTdma {
    mrt_tdma(
        env.channels(),
        env.codebook(),
        env.powers(),
        env.noise_watts(),
        env.config().reward.gamma_min_linear(),
        variant,
    )
}

/// Brute force for the network currently installed in `env`.
pub fn brute_force_for(env: &CellularEnv, cap: u128) -> Result<BruteForceResult> {
    brute_force_search(env.channels(), env.codebook(), env.powers(), env.noise_watts(), cap)
}

/// Uniformly random joint actions.
#[derive(Debug, Clone)]
pub struct RandomPolicy<R> {
    rng: R,
}

impl<R: Rng> RandomPolicy<R> {
    pub fn new(rng: R) -> Self {
        RandomPolicy { rng }
    }

    pub fn action(&mut self, num_cells: usize) -> ActionVector {
        ActionVector((0..2 * num_cells).map(|_| self.rng.random_bool(0.5)).collect())
    }
}

impl<R: Rng> Policy for RandomPolicy<R> {
    fn decide(&mut self, env: &CellularEnv) -> ActionVector {
        self.action(env.num_cells())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::rollout;
    use crate::channel::array_response;
    use crate::environment::EnvConfig;
    use crate::radio::{dft_codebook, sum_rate, sum_rate_of_sinrs};
    use crate::rng::seeded_rng;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn env(cells: usize, beams: usize, powers: usize, seed: u64) -> CellularEnv {
        let mut c = EnvConfig::default().with_cells(cells);
        c.radio.codebook_size = beams;
        c.radio.power_levels = powers;
        let mut e = CellularEnv::new(c).unwrap();
        e.reset(seed);
        e
    }

    #[test]
    fn tiny_grid_matches_hand_enumeration() {
        let e = env(1, 2, 2, 3);
        let r = brute_force_for(&e, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(r.evaluated, 4);
        let mut hand = f64::NEG_INFINITY;
        for p in 0..2 {
            for b in 0..2 {
                let tx = TxConfig { power_idx: vec![p], beam_idx: vec![b] };
                hand = hand.max(sum_rate(&e.budgets_for(&tx)));
            }
        }
        assert_eq!(r.best_sum_rate, hand);
    }

    #[test]
    fn brute_force_dominates_random_configs() {
        let e = env(2, 4, 4, 1);
        let r = brute_force_for(&e, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(r.evaluated, 256);
        assert_eq!(sum_rate(&e.budgets_for(&r.best)), r.best_sum_rate);
        let mut rng = seeded_rng(2);
        for _ in 0..1000 {
            let tx = TxConfig {
                power_idx: (0..2).map(|_| rng.random_range(0..4)).collect(),
                beam_idx: (0..2).map(|_| rng.random_range(0..4)).collect(),
            };
            assert!(sum_rate(&e.budgets_for(&tx)) <= r.best_sum_rate);
        }
    }

    #[test]
    fn single_cell_optimum_is_max_power_best_beam() {
        for seed in 0..10 {
            let e = env(1, 8, 10, seed);
            let r = brute_force_for(&e, DEFAULT_SEARCH_CAP).unwrap();
            assert_eq!(r.best.power_idx, vec![9]);
            assert_eq!(r.best.beam_idx, mrt_select(e.channels(), e.codebook()));
        }
    }

    #[test]
    fn ties_resolve_to_smallest_tuple() {
        // a single-antenna network: every beam has the same gain
        let mut c = EnvConfig::default().with_cells(2);
        c.radio.num_antennas = 1;
        c.radio.codebook_size = 3;
        c.radio.power_levels = 2;
        let mut e = CellularEnv::new(c).unwrap();
        e.reset(0);
        let r = brute_force_for(&e, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(r.best.beam_idx, vec![0, 0]);
    }

    #[test]
    fn cap_is_enforced() {
        let e = env(3, 8, 10, 0);
        assert!(matches!(
            brute_force_for(&e, 1000),
            Err(Error::SearchCapExceeded { configs: 512_000, cap: 1000 })
        ));
    }

    #[test]
    fn mrt_picks_the_aligned_codeword() {
        let cb = dft_codebook(4, 8);
        for i in 0..8 {
            let h: Vec<Complex64> = array_response(cb.angles[i], 4).into_iter().map(|z| z * 3.0).collect();
            let ch = ChannelSet { num_antennas: 4, h: vec![vec![h]] };
            assert_eq!(mrt_select(&ch, &cb), vec![i]);
        }
    }

    #[test]
    fn mrt_ignores_positive_scaling() {
        let e = env(3, 8, 10, 5);
        let scaled = ChannelSet {
            num_antennas: e.channels().num_antennas,
            h: e.channels()
                .h
                .iter()
                .map(|row| row.iter().map(|v| v.iter().map(|z| z * 17.5).collect()).collect())
                .collect(),
        };
        assert_eq!(mrt_select(e.channels(), e.codebook()), mrt_select(&scaled, e.codebook()));
    }

    #[test]
    fn mrt_gain_never_below_scalloping_bound() {
        // worst case of a size-M DFT grid: half a bin off, 1 / (M^2 sin^2(pi / 2M))
        let m = 4;
        let cb = dft_codebook(m, m);
        let bound = 1.0 / ((m * m) as f64 * (PI / (2.0 * m as f64)).sin().powi(2));
        let mut rng = seeded_rng(6);
        let mut worst = f64::INFINITY;
        for _ in 0..1000 {
            let theta = rng.random_range(-PI / 2.0..PI / 2.0);
            let h = array_response(theta, m);
            let ch = ChannelSet { num_antennas: m, h: vec![vec![h.clone()]] };
            let b = mrt_select(&ch, &cb)[0];
            let frac = crate::radio::inner(&h, &cb.codewords[b]).norm_sqr() / norm_sqr(&h);
            worst = worst.min(frac);
        }
        assert!(worst >= bound - 1e-12, "{worst} < {bound}");
        assert!(bound >= 4.0 / (PI * PI));
    }

    #[test]
    fn tdma_examples() {
        let g = 0.5;
        assert_eq!(mrt_tdma_rate(&[7.0], g), 3.0);
        assert_eq!(mrt_tdma_rate(&[0.1, 0.2, 0.5], g), 0.0);
        for l in 1..8 {
            assert!((mrt_tdma_rate(&vec![15.0; l], g) - 4.0).abs() < 1e-12);
        }
        // dropped slots are not handed to the survivors
        assert_eq!(mrt_tdma_rate(&[7.0, 0.1], g), 1.5);
    }

    #[test]
    fn dropped_cells_are_those_below_threshold() {
        for seed in 0..20 {
            let e = env(4, 8, 10, seed);
            let m = mrt_tdma_for(&e, MrtVariant::Codebook);
            let tx = TxConfig {
                power_idx: vec![9; 4],
                beam_idx: m.beams.clone(),
            };
            let snr: Vec<f64> = e.budgets_for(&tx).iter().map(|b| b.snr).collect();
            let g = e.config().reward.gamma_min_linear();
            assert_eq!(m.dropped, snr.iter().map(|&s| s <= g).collect::<Vec<_>>());
            for (a, b) in m.snr.iter().zip(&snr) {
                assert!((a - b).abs() <= 1e-12 * b);
            }
            let survivors: Vec<f64> = snr.iter().copied().filter(|&s| s > g).collect();
            assert!((m.sum_rate - sum_rate_of_sinrs(&survivors) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn continuous_mrt_upper_bounds_codebook_mrt() {
        for seed in 0..20 {
            let e = env(2, 8, 10, seed);
            let c = mrt_tdma_for(&e, MrtVariant::Codebook);
            let u = mrt_tdma_for(&e, MrtVariant::Continuous);
            for (a, b) in c.snr.iter().zip(&u.snr) {
                assert!(a <= &(b * (1.0 + 1e-12)));
            }
        }
    }

    #[test]
    fn random_policy_is_uniform() {
        // 15 degrees of freedom, 0.1% critical value
        let mut p = RandomPolicy::new(seeded_rng(3));
        let mut counts = [0usize; 16];
        for _ in 0..10_000 {
            counts[p.action(2).to_index()] += 1;
        }
        let e = 10_000.0 / 16.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(chi2 < 37.70, "chi2 = {chi2}");
    }

    #[test]
    fn random_policy_is_deterministic_and_below_oracle() {
        for seed in 0..5 {
            let mut e = env(2, 4, 4, seed);
            let oracle = brute_force_for(&e, DEFAULT_SEARCH_CAP).unwrap().best_sum_rate;
            let run = |e: &mut CellularEnv| {
                e.reset(seed);
                rollout(e, &mut RandomPolicy::new(seeded_rng(seed))).unwrap()
            };
            let a = run(&mut e);
            let b = run(&mut e);
            assert_eq!(a, b);
            assert!(a.mean_sum_rate <= oracle && a.final_sum_rate <= oracle);
        }
    }
}
