//! Large-scale path loss and geometric small-scale channels for a uniform
//! linear array at every base station.
//!
//! Each BS carries an `M`-element half-wavelength ULA whose axis is the global
//! y axis, so broadside faces +x. A ULA cannot tell front from back, which is
//! why azimuths are folded into `[-pi/2, pi/2]`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{link_distance, ScenarioRealization, Vec3};

/// Close-in style LoS/NLoS path-loss parameters (28 GHz defaults).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossParams {
    pub los_intercept_db: f64,
    pub los_exponent: f64,
    pub nlos_intercept_db: f64,
    pub nlos_exponent: f64,
    /// Number of scattered paths in an NLoS channel.
    pub nlos_paths: usize,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            los_intercept_db: 61.4,
            los_exponent: 2.0,
            nlos_intercept_db: 72.0,
            nlos_exponent: 2.92,
            nlos_paths: 3,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.los_exponent > 0.0
            && self.nlos_exponent > 0.0
            && self.los_intercept_db > 0.0
            && self.nlos_intercept_db > 0.0
            && self.nlos_paths >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "path loss exponents and intercepts must be positive and nlos_paths >= 1".into(),
            ))
        }
    }
}

/// Ground-truth CSI: `h[j][l]` is the channel from BS `j` to user `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub num_antennas: usize,
    pub h: Vec<Vec<Vec<Complex64>>>,
}

impl ChannelSet {
    pub fn num_cells(&self) -> usize {
        self.h.len()
    }

    pub fn link(&self, bs: usize, user: usize) -> &[Complex64] {
        &self.h[bs][user]
    }
}

/// ULA steering vector, entry `m = exp(i*pi*m*sin(theta))`.
pub fn array_response(theta: f64, num_antennas: usize) -> Vec<Complex64> {
    let phase = PI * theta.sin();
    (0..num_antennas)
        .map(|m| Complex64::from_polar(1.0, phase * m as f64))
        .collect()
}

/// Path loss in dB; distances below 1 m are clamped to 1 m.
pub fn path_loss_db(distance: f64, los: bool, params: &PathLossParams) -> f64 {
    let d = distance.max(1.0);
    let (intercept, exponent) = if los {
        (params.los_intercept_db, params.los_exponent)
    } else {
        (params.nlos_intercept_db, params.nlos_exponent)
    };
    intercept + 10.0 * exponent * d.log10()
}

/// Free-space (Friis) path loss in dB for air-to-air links.
pub fn free_space_path_loss_db(distance: f64, wavelength: f64) -> f64 {
    20.0 * (4.0 * PI * distance / wavelength).log10()
}

/// Angle of `user` off the broadside of the array at `bs`, folded into
/// `[-pi/2, pi/2]`. A user straight overhead sits at broadside.
pub fn ula_angle(bs: Vec3, user: Vec3) -> f64 {
    let horizontal = bs.horizontal_distance(&user);
    if horizontal == 0.0 {
        return 0.0;
    }
    ((user.y - bs.y) / horizontal).clamp(-1.0, 1.0).asin()
}

/// Draws the channel of one BS -> user link.
///
/// LoS links carry a single unit-gain path from the true direction; NLoS links
/// sum `nlos_paths` Rayleigh-weighted paths from uniformly random directions.
pub fn draw_link_channel<R: Rng + ?Sized>(
    bs: Vec3,
    user: Vec3,
    los: bool,
    num_antennas: usize,
    params: &PathLossParams,
    rng: &mut R,
) -> Vec<Complex64> {
    let gain = 10f64.powf(-path_loss_db(link_distance(bs, user), los, params) / 10.0);
    let amplitude = gain.sqrt();
    if los {
        return array_response(ula_angle(bs, user), num_antennas)
            .into_iter()
            .map(|a| a * amplitude)
            .collect();
    }

    let paths = params.nlos_paths.max(1);
    let path_scale = amplitude / (paths as f64).sqrt();
    let mut h = vec![Complex64::new(0.0, 0.0); num_antennas];
    for _ in 0..paths {
        // CN(0, 1): independent N(0, 1/2) real and imaginary parts
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let alpha = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        let theta = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        for (hm, am) in h.iter_mut().zip(array_response(theta, num_antennas)) {
            *hm += alpha * am * path_scale;
        }
    }
    h
}

/// Draws all `L x L` link channels of a scenario, BS-major order.
pub fn realize_network_channels<R: Rng + ?Sized>(
    scenario: &ScenarioRealization,
    num_antennas: usize,
    params: &PathLossParams,
    rng: &mut R,
) -> ChannelSet {
    let n = scenario.num_cells();
    let h = (0..n)
        .map(|j| {
            (0..n)
                .map(|l| {
                    draw_link_channel(
                        scenario.bs_positions[j],
                        scenario.user_positions[l],
                        scenario.los[j][l],
                        num_antennas,
                        params,
                        rng,
                    )
                })
                .collect()
        })
        .collect();
    ChannelSet { num_antennas, h }
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use crate::scenario::{realize, ScenarioConfig};

    const TOL: f64 = 1e-12;

    #[test]
    fn array_response_examples() {
        assert_eq!(array_response(0.7, 1), vec![Complex64::new(1.0, 0.0)]);
        let broadside = array_response(0.0, 2);
        assert!((broadside[1] - Complex64::new(1.0, 0.0)).norm() < TOL);
        let endfire = array_response(FRAC_PI_2, 2);
        assert!((endfire[0] - Complex64::new(1.0, 0.0)).norm() < TOL);
        assert!((endfire[1] - Complex64::new(-1.0, 0.0)).norm() < TOL);
        assert!(array_response(0.3, 8).iter().all(|z| (z.norm() - 1.0).abs() < TOL));
    }

    #[test]
    fn path_loss_examples() {
        let p = PathLossParams::default();
        assert!((path_loss_db(1.0, true, &p) - 61.4).abs() < TOL);
        assert!((path_loss_db(100.0, true, &p) - 101.4).abs() < 1e-9);
        assert!(path_loss_db(100.0, false, &p) > path_loss_db(100.0, true, &p));
        // clamped below 1 m
        assert_eq!(path_loss_db(0.2, true, &p), path_loss_db(1.0, true, &p));
    }

    #[test]
    fn path_loss_increases_with_distance() {
        let p = PathLossParams::default();
        let mut prev = path_loss_db(1.0, false, &p);
        for i in 1..500 {
            let pl = path_loss_db(1.0 + i as f64 * 0.7, false, &p);
            assert!(pl > prev);
            prev = pl;
        }
    }

    #[test]
    fn free_space_examples() {
        let lambda = 0.0107;
        assert!(free_space_path_loss_db(lambda / (4.0 * PI), lambda).abs() < 1e-9);
        let step = free_space_path_loss_db(200.0, lambda) - free_space_path_loss_db(100.0, lambda);
        assert!((step - 20.0 * 2f64.log10()).abs() < 1e-9);
        let direct = 20.0 * (4.0 * PI * 100.0 / lambda).log10();
        let pl = free_space_path_loss_db(100.0, lambda);
        assert!((pl - direct).abs() < 1e-12);
        assert!((pl - 101.4).abs() < 0.05, "{pl}");
    }

    #[test]
    fn los_channel_calibration() {
        let p = PathLossParams::default();
        let bs = Vec3::new(0.0, 0.0, 25.0);
        let user = Vec3::new(120.0, -40.0, 80.0);
        let g = 10f64.powf(-path_loss_db(link_distance(bs, user), true, &p) / 10.0);
        let mut rng = seeded_rng(1);

        let h1 = draw_link_channel(bs, user, true, 1, &p, &mut rng);
        assert!((h1[0] - Complex64::new(g.sqrt(), 0.0)).norm() < 1e-18);

        for m in [2, 4, 16] {
            let h = draw_link_channel(bs, user, true, m, &p, &mut rng);
            assert!((norm_sqr(&h) - g * m as f64).abs() <= 1e-12 * g * m as f64);
        }
    }

    #[test]
    fn nlos_mean_power_matches_path_gain() {
        let p = PathLossParams::default();
        let bs = Vec3::new(0.0, 0.0, 25.0);
        let user = Vec3::new(90.0, 30.0, 60.0);
        let g = 10f64.powf(-path_loss_db(link_distance(bs, user), false, &p) / 10.0);
        let mut rng = seeded_rng(2);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| norm_sqr(&draw_link_channel(bs, user, false, 1, &p, &mut rng)))
            .sum::<f64>()
            / n as f64;
        assert!((mean / g - 1.0).abs() < 0.03, "{}", mean / g);
    }

    #[test]
    fn network_channels_shape_and_determinism() {
        let p = PathLossParams::default();
        for n in [1, 3] {
            let cfg = ScenarioConfig { num_cells: n, ..Default::default() };
            let s = realize(&cfg, &mut seeded_rng(4));
            let a = realize_network_channels(&s, 4, &p, &mut seeded_rng(8));
            let b = realize_network_channels(&s, 4, &p, &mut seeded_rng(8));
            assert_eq!(a, b);
            assert_eq!(a.h.len(), n);
            for row in &a.h {
                assert_eq!(row.len(), n);
                for link in row {
                    assert_eq!(link.len(), 4);
                    assert!(link.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
                }
            }
        }
    }

    #[test]
    fn overhead_user_is_broadside() {
        let bs = Vec3::new(5.0, 5.0, 25.0);
        assert_eq!(ula_angle(bs, Vec3::new(5.0, 5.0, 100.0)), 0.0);
        let side = ula_angle(bs, Vec3::new(5.0, 50.0, 100.0));
        assert!((side - FRAC_PI_2).abs() < 1e-12);
    }
}
