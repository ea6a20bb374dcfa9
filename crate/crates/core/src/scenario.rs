//! Network geometry: hexagonal cell layout, per-cell user drops and LoS flags.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in 3D space, meters. `z` is height above ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn horizontal_distance(&self, other: &Vec3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Euclidean distance between two nodes.
pub fn link_distance(a: Vec3, b: Vec3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserPlacement {
    /// Uniform over the disc of the serving cell.
    UniformInCell,
    /// Radial distance uniform in `[0.8, 1.0]` of the cell radius.
    CellEdgeBand,
}

/// Inner edge of the cell-edge band, as a fraction of the cell radius.
pub const CELL_EDGE_INNER: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_cells: usize,
    pub cell_radius: f64,
    pub bs_height: f64,
    /// `[z_min, z_max]` user altitude, meters.
    pub user_altitude_range: [f64; 2],
    pub user_placement: UserPlacement,
    pub los_probability: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_cells: 3,
            cell_radius: 200.0,
            bs_height: 25.0,
            user_altitude_range: [50.0, 120.0],
            user_placement: UserPlacement::UniformInCell,
            los_probability: 0.8,
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let [z_min, z_max] = self.user_altitude_range;
        if self.num_cells < 1 {
            return Err(Error::InvalidConfig("num_cells must be at least 1".into()));
        }
        if !(self.cell_radius > 0.0 && self.cell_radius.is_finite()) {
            return Err(Error::InvalidConfig("cell_radius must be positive".into()));
        }
        if !(self.bs_height >= 0.0 && self.bs_height.is_finite()) {
            return Err(Error::InvalidConfig("bs_height must be non-negative".into()));
        }
        if !(z_min >= 0.0 && z_min <= z_max && z_max.is_finite()) {
            return Err(Error::InvalidConfig(
                "user_altitude_range must satisfy 0 <= z_min <= z_max".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.los_probability) {
            return Err(Error::InvalidConfig(
                "los_probability must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Distance between neighbouring base stations.
    pub fn inter_site_distance(&self) -> f64 {
        2.0 * self.cell_radius * (30f64).to_radians().cos()
    }
}

/// One drop of the network: where everything is and which links see LoS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRealization {
    pub bs_positions: Vec<Vec3>,
    pub user_positions: Vec<Vec3>,
    /// `serving[l]` is the BS serving user `l`; always `l` with one user per cell.
    pub serving: Vec<usize>,
    /// `los[j][l]` is true when the link BS `j` -> user `l` is line of sight.
    pub los: Vec<Vec<bool>>,
}

impl ScenarioRealization {
    pub fn num_cells(&self) -> usize {
        self.bs_positions.len()
    }
}

/// Base-station sites on a hexagonal grid, filled ring by ring from the origin.
pub fn build_layout(config: &ScenarioConfig) -> Vec<Vec3> {
    let isd = config.inter_site_distance();
    let h = config.bs_height;
    let dirs: Vec<(f64, f64)> = (0..6)
        .map(|k| {
            let a = (60.0 * k as f64).to_radians();
            (isd * a.cos(), isd * a.sin())
        })
        .collect();

    let mut sites = vec![Vec3::new(0.0, 0.0, h)];
    let mut ring = 1usize;
    while sites.len() < config.num_cells {
        let (mut x, mut y) = (ring as f64 * dirs[4].0, ring as f64 * dirs[4].1);
        'ring: for dir in &dirs {
            for _ in 0..ring {
                if sites.len() == config.num_cells {
                    break 'ring;
                }
                sites.push(Vec3::new(x, y, h));
                x += dir.0;
                y += dir.1;
            }
        }
        ring += 1;
    }
    sites.truncate(config.num_cells);
    sites
}

/// Drops one user per cell and draws the LoS state of every BS-user link.
pub fn place_users<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    layout: &[Vec3],
    rng: &mut R,
) -> ScenarioRealization {
    let [z_min, z_max] = config.user_altitude_range;
    let r_max = config.cell_radius;
    let user_positions: Vec<Vec3> = layout
        .iter()
        .map(|bs| {
            let radial = match config.user_placement {
                // sqrt of a uniform variate gives a uniform density over the disc
                UserPlacement::UniformInCell => r_max * rng.random::<f64>().sqrt(),
                UserPlacement::CellEdgeBand => {
                    r_max * (CELL_EDGE_INNER + (1.0 - CELL_EDGE_INNER) * rng.random::<f64>())
                }
            };
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let z = if z_max > z_min {
                rng.random_range(z_min..=z_max)
            } else {
                z_min
            };
            Vec3::new(bs.x + radial * phi.cos(), bs.y + radial * phi.sin(), z)
        })
        .collect();

    let n = layout.len();
    let los = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| rng.random_bool(config.los_probability))
                .collect()
        })
        .collect();

    ScenarioRealization {
        bs_positions: layout.to_vec(),
        user_positions,
        serving: (0..n).collect(),
        los,
    }
}

/// Layout plus user drop in one call.
pub fn realize<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> ScenarioRealization {
    let layout = build_layout(config);
    place_users(config, &layout, rng)
}
