//! Codebooks, link budgets and the power measurements a UE can make without
//! channel knowledge.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{array_response, ChannelSet};
use crate::error::{Error, Result};

/// Radio-level constants shared by every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub num_antennas: usize,
    pub codebook_size: usize,
    /// Highest transmit power; the power set counts down from here in 1 dB steps.
    pub max_power_dbm: f64,
    pub power_levels: usize,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            num_antennas: 4,
            codebook_size: 8,
            max_power_dbm: 30.0,
            power_levels: 10,
            bandwidth_hz: 1e8,
            noise_figure_db: 9.0,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_antennas < 1 || self.codebook_size < 1 || self.power_levels < 1 {
            return Err(Error::InvalidConfig(
                "num_antennas, codebook_size and power_levels must be at least 1".into(),
            ));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::InvalidConfig("bandwidth_hz must be positive".into()));
        }
        if !self.max_power_dbm.is_finite() || !self.noise_figure_db.is_finite() {
            return Err(Error::InvalidConfig("power and noise figure must be finite".into()));
        }
        Ok(())
    }

    pub fn codebook(&self) -> Codebook {
        dft_codebook(self.num_antennas, self.codebook_size)
    }

    pub fn power_set(&self) -> PowerSet {
        PowerSet::stepped(self.max_power_dbm, self.power_levels)
    }

    pub fn noise_watts(&self) -> f64 {
        noise_power_watts(self.bandwidth_hz, self.noise_figure_db)
    }
}

/// Grid-of-beams codebook of unit-norm analog beamformers.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub angles: Vec<f64>,
    pub codewords: Vec<Vec<Complex64>>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn num_antennas(&self) -> usize {
        self.codewords.first().map_or(0, Vec::len)
    }

    /// Index of the codeword with the largest `|h^H w|`, lowest index on ties.
    pub fn best_beam(&self, h: &[Complex64]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, w) in self.codewords.iter().enumerate() {
            let g = inner(h, w).norm_sqr();
            if g > best.1 {
                best = (i, g);
            }
        }
        best.0
    }
}

/// Codeword `i` steers toward `arcsin(-1 + (2i + 1) / size)`, which spaces the
/// beams uniformly in sine space. With `size == M` the codebook is a DFT basis.
pub fn dft_codebook(num_antennas: usize, size: usize) -> Codebook {
    let scale = 1.0 / (num_antennas as f64).sqrt();
    let angles: Vec<f64> = (0..size)
        .map(|i| (-1.0 + (2 * i + 1) as f64 / size as f64).asin())
        .collect();
    let codewords = angles
        .iter()
        .map(|&theta| {
            array_response(theta, num_antennas)
                .into_iter()
                .map(|z| z * scale)
                .collect()
        })
        .collect();
    Codebook { angles, codewords }
}

/// Discrete transmit powers, ascending, 1 dB apart.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSet {
    pub levels_dbm: Vec<f64>,
}

impl PowerSet {
    /// `count` levels ending at `max_dbm`.
    pub fn stepped(max_dbm: f64, count: usize) -> Self {
        let lowest = max_dbm - (count as f64 - 1.0);
        PowerSet {
            levels_dbm: (0..count).map(|i| lowest + i as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.levels_dbm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels_dbm.is_empty()
    }

    pub fn watts(&self, idx: usize) -> f64 {
        dbm_to_watts(self.levels_dbm[idx])
    }

    pub fn max_index(&self) -> usize {
        self.levels_dbm.len() - 1
    }
}

/// The controllable network state: one power level and one beam per BS.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TxConfig {
    pub power_idx: Vec<usize>,
    pub beam_idx: Vec<usize>,
}

impl TxConfig {
    pub fn num_cells(&self) -> usize {
        self.power_idx.len()
    }

    pub fn is_valid(&self, powers: &PowerSet, codebook: &Codebook) -> bool {
        self.power_idx.len() == self.beam_idx.len()
            && self.power_idx.iter().all(|&p| p < powers.len())
            && self.beam_idx.iter().all(|&b| b < codebook.len())
    }
}

/// Per-cell ground-truth link budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
    pub sinr: f64,
    pub snr: f64,
    pub rate: f64,
}

impl LinkBudget {
    pub fn new(signal: f64, interference: f64, noise: f64) -> Self {
        let sinr = signal / (interference + noise);
        LinkBudget {
            signal,
            interference,
            noise,
            sinr,
            snr: signal / noise,
            rate: (1.0 + sinr).log2(),
        }
    }
}

/// What a UE reports after the two-phase probe of its serving cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementReport {
    /// Total received power `S + I + N`.
    pub rssi: f64,
    /// Serving-cell received power recovered by subtraction.
    pub rsrp: f64,
    pub rsrq: f64,
    pub measured_sinr: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Thermal noise over `bandwidth_hz` with the given receiver noise figure.
pub fn noise_power_watts(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(-174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

/// `h^H w`
pub fn inner(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    h.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

/// `p * |h^H w|^2`
pub fn received_power(p_watts: f64, h: &[Complex64], w: &[Complex64]) -> Result<f64> {
    if h.len() != w.len() {
        return Err(Error::ShapeMismatch {
            expected: h.len(),
            got: w.len(),
        });
    }
    Ok(p_watts * inner(h, w).norm_sqr())
}

fn check_tx(channels: &ChannelSet, tx: &TxConfig, codebook: &Codebook, powers: &PowerSet) {
    let n = channels.num_cells();
    assert_eq!(tx.num_cells(), n, "tx config covers {} cells, network has {n}", tx.num_cells());
    assert!(tx.is_valid(powers, codebook), "tx indices out of range: {tx:?}");
    assert_eq!(codebook.num_antennas(), channels.num_antennas);
}

/// Exact SINR, SNR and rate of every cell under full frequency reuse.
pub fn sinr_all(
    channels: &ChannelSet,
    tx: &TxConfig,
    codebook: &Codebook,
    powers: &PowerSet,
    noise_watts: f64,
) -> Vec<LinkBudget> {
    check_tx(channels, tx, codebook, powers);
    let n = channels.num_cells();
    (0..n)
        .map(|l| {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for j in 0..n {
                let w = &codebook.codewords[tx.beam_idx[j]];
                let rx = powers.watts(tx.power_idx[j]) * inner(channels.link(j, l), w).norm_sqr();
                if j == l {
                    signal = rx;
                } else {
                    interference += rx;
                }
            }
            LinkBudget::new(signal, interference, noise_watts)
        })
        .collect()
}

/// Network sum-rate in bits/s/Hz.
pub fn sum_rate(budgets: &[LinkBudget]) -> f64 {
    budgets.iter().map(|b| b.rate).sum()
}

/// Sum of `log2(1 + sinr)` straight from SINR values.
pub fn sum_rate_of_sinrs(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|g| (1.0 + g).log2()).sum()
}

/// Simulates the mute/transmit probe in every cell.
///
/// Phase A silences only the serving BS, so the UE reads `I + N`; phase B has
/// every BS on and the UE reads `S + I + N`. Other cells keep their beams and
/// powers across both phases.
pub fn probe_measurements(
    channels: &ChannelSet,
    tx: &TxConfig,
    codebook: &Codebook,
    powers: &PowerSet,
    noise_watts: f64,
) -> Vec<MeasurementReport> {
    check_tx(channels, tx, codebook, powers);
    let n = channels.num_cells();
    let rx_at = |l: usize, muted: Option<usize>| -> f64 {
        let mut total = noise_watts;
        for j in 0..n {
            if Some(j) == muted {
                continue;
            }
            let w = &codebook.codewords[tx.beam_idx[j]];
            total += powers.watts(tx.power_idx[j]) * inner(channels.link(j, l), w).norm_sqr();
        }
        total
    };
    (0..n)
        .map(|l| report_from_readings(rx_at(l, Some(l)), rx_at(l, None)))
        .collect()
}

/// Builds a report from the two probe readings (`I + N`, then `S + I + N`).
pub fn report_from_readings(interference_plus_noise: f64, total: f64) -> MeasurementReport {
    let signal = (total - interference_plus_noise).max(0.0);
    MeasurementReport {
        rssi: total,
        rsrp: signal,
        rsrq: signal / total,
        measured_sinr: signal / interference_plus_noise,
    }
}

/// `|h_{j,l}^H w_b|^2` for every BS `j`, user `l` and codeword `b`.
///
/// Lets search and simulation loops evaluate a TxConfig without touching the
/// complex vectors again.
#[derive(Debug, Clone)]
pub struct GainTable {
    num_cells: usize,
    num_beams: usize,
    gains: Vec<f64>,
}

impl GainTable {
    pub fn new(channels: &ChannelSet, codebook: &Codebook) -> Self {
        let n = channels.num_cells();
        let nb = codebook.len();
        let mut gains = Vec::with_capacity(n * n * nb);
        for j in 0..n {
            for l in 0..n {
                for w in &codebook.codewords {
                    gains.push(inner(channels.link(j, l), w).norm_sqr());
                }
            }
        }
        GainTable {
            num_cells: n,
            num_beams: nb,
            gains,
        }
    }

    #[inline]
    pub fn gain(&self, bs: usize, user: usize, beam: usize) -> f64 {
        self.gains[(bs * self.num_cells + user) * self.num_beams + beam]
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    /// Same result as [`sinr_all`], from precomputed gains.
    pub fn budgets(&self, tx: &TxConfig, powers: &PowerSet, noise_watts: f64) -> Vec<LinkBudget> {
        let p: Vec<f64> = tx.power_idx.iter().map(|&i| powers.watts(i)).collect();
        self.budgets_watts(&p, &tx.beam_idx, noise_watts)
    }

    pub fn budgets_watts(&self, p: &[f64], beams: &[usize], noise_watts: f64) -> Vec<LinkBudget> {
        let n = self.num_cells;
        (0..n)
            .map(|l| {
                let mut interference = 0.0;
                for j in (0..n).filter(|&j| j != l) {
                    interference += p[j] * self.gain(j, l, beams[j]);
                }
                LinkBudget::new(p[l] * self.gain(l, l, beams[l]), interference, noise_watts)
            })
            .collect()
    }
}
