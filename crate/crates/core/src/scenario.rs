//! World description and scenario file handling.
//!
//! A [`Scenario`] is the immutable input to everything else: the service
//! area, the hourly user demand (hotspot clusters plus a uniform remainder),
//! the fleet size, and the physics/radio/solar/reward parameter blocks.
//! Scenario files are TOML with one section per parameter block; every
//! field has a documented default, so a minimal file only states what it
//! changes. All units are SI; times are in hours.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{Altitudes, PhysicsParams, SolarParams};
use crate::env::RewardParams;
use crate::radio::RadioParams;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse failure in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

/// Axis-aligned service area `[0, width] x [0, height]` on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }
}

/// One Gaussian demand hotspot: center and spread on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub x: f64,
    pub y: f64,
    /// Isotropic standard deviation of user offsets from the center, m.
    pub sigma: f64,
}

/// User demand for one hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyDemand {
    /// Number of users present this hour.
    pub n_users: u32,
    /// Expected fraction of users drawn near hotspots; the rest are uniform.
    pub hotspot_fraction_p: f64,
    /// Hotspot centers; may be empty, in which case everyone is uniform.
    pub hotspots: Vec<Hotspot>,
    /// Minimum throughput each user requires, bit/s.
    pub per_user_rate_r_u: f64,
}

impl HourlyDemand {
    pub fn validate(&self, idx: usize, area: Area) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.hotspot_fraction_p) {
            return Err(format!(
                "demand[{idx}].hotspot_fraction_p out of [0,1]: {}",
                self.hotspot_fraction_p
            ));
        }
        if !(self.per_user_rate_r_u >= 0.0) {
            return Err(format!(
                "demand[{idx}].per_user_rate_r_u must be >= 0, got {}",
                self.per_user_rate_r_u
            ));
        }
        for (h, spot) in self.hotspots.iter().enumerate() {
            if !(spot.sigma > 0.0) {
                return Err(format!(
                    "demand[{idx}].hotspots[{h}].sigma must be > 0, got {}",
                    spot.sigma
                ));
            }
            if !area.contains(spot.x, spot.y) {
                return Err(format!(
                    "demand[{idx}].hotspots[{h}] at ({}, {}) outside the area",
                    spot.x, spot.y
                ));
            }
        }
        Ok(())
    }
}

/// Positions of the users present in one hour, all inside the area.
#[derive(Debug, Clone, PartialEq)]
pub struct UserField {
    pub positions: Vec<(f64, f64)>,
    /// Per-user throughput requirement, bit/s.
    pub rate_requirement: f64,
}

impl UserField {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// The immutable world description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    /// Service area width, m.
    pub area_width: f64,
    /// Service area height, m.
    pub area_height: f64,
    /// Number of decision slots in the horizon.
    pub horizon_t: usize,
    /// Wall-clock length of one slot, s.
    pub slot_seconds: f64,
    /// Fleet size.
    pub fleet_size_n: usize,
    /// Serving and charging heights (ground is 0 m).
    pub altitudes: Altitudes,
    /// Per-slot demand; must have exactly `horizon_t` entries. An empty list
    /// is replaced by the shipped default profile on load/validate.
    pub demand: Vec<HourlyDemand>,
    pub physics: PhysicsParams,
    pub radio: RadioParams,
    pub solar: SolarParams,
    pub reward: RewardParams,
    /// Minimum fraction of present users that must be served each slot.
    pub p_min: f64,
    /// Base seed for everything stochastic derived from this scenario.
    pub rng_seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            area_width: 1000.0,
            area_height: 1000.0,
            horizon_t: 24,
            slot_seconds: 3600.0,
            fleet_size_n: 3,
            altitudes: Altitudes::default(),
            demand: Vec::new(),
            physics: PhysicsParams::default(),
            radio: RadioParams::default(),
            solar: SolarParams::default(),
            reward: RewardParams::default(),
            p_min: 0.85,
            rng_seed: 7,
        }
    }
}

impl Scenario {
    pub fn area(&self) -> Area {
        Area {
            width: self.area_width,
            height: self.area_height,
        }
    }

    /// Users present in slot `t`.
    pub fn n_users(&self, t: usize) -> u32 {
        self.demand[t].n_users
    }

    /// Fills an empty demand list with the default profile, then checks all
    /// invariants, reporting the first violated one by name.
    pub fn finalize(mut self) -> Result<Self, ScenarioError> {
        if self.demand.is_empty() {
            self.demand = default_demand_profile(self.horizon_t);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |m: String| Err(ScenarioError::Validation(m));
        if self.horizon_t < 1 {
            return err(format!("horizon_t must be >= 1, got {}", self.horizon_t));
        }
        if self.fleet_size_n < 1 {
            return err(format!("fleet_size_n must be >= 1, got {}", self.fleet_size_n));
        }
        if !(self.slot_seconds > 0.0) {
            return err(format!("slot_seconds must be > 0, got {}", self.slot_seconds));
        }
        if !(self.area_width > 0.0) || !(self.area_height > 0.0) {
            return err(format!(
                "area must have positive extent, got {} x {}",
                self.area_width, self.area_height
            ));
        }
        if !(0.0 <= self.altitudes.h_srv && self.altitudes.h_srv < self.altitudes.h_chg) {
            return err(format!(
                "altitudes must satisfy 0 <= h_srv < h_chg, got h_srv={} h_chg={}",
                self.altitudes.h_srv, self.altitudes.h_chg
            ));
        }
        if !(0.0..=1.0).contains(&self.p_min) {
            return err(format!("p_min out of [0,1]: {}", self.p_min));
        }
        if self.demand.len() != self.horizon_t {
            return err(format!(
                "demand has {} entries but horizon_t is {}",
                self.demand.len(),
                self.horizon_t
            ));
        }
        for (idx, d) in self.demand.iter().enumerate() {
            d.validate(idx, self.area()).map_err(ScenarioError::Validation)?;
        }
        self.physics.validate().map_err(ScenarioError::Validation)?;
        self.solar.validate().map_err(ScenarioError::Validation)?;
        self.radio.validate().map_err(ScenarioError::Validation)?;
        self.reward.validate().map_err(ScenarioError::Validation)?;
        Ok(())
    }
}

/// Loads and validates a scenario from a TOML file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let scenario: Scenario = toml::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    scenario.finalize()
}

/// Writes a scenario as TOML. A saved scenario loads back equal.
pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let text = toml::to_string_pretty(scenario).expect("scenario serializes");
    std::fs::write(path, text).map_err(|source| ScenarioError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Draws the user field for one hour.
///
/// Each user independently joins a hotspot with probability
/// `hotspot_fraction_p` (uniform choice among centers, isotropic Gaussian
/// offset, resampled until inside the area) and is otherwise uniform over
/// the area. Pure function of `(demand, area, seed)`.
pub fn generate_users(demand: &HourlyDemand, area: Area, seed: u64) -> UserField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut positions = Vec::with_capacity(demand.n_users as usize);
    for _ in 0..demand.n_users {
        let clustered =
            !demand.hotspots.is_empty() && rng.gen::<f64>() < demand.hotspot_fraction_p;
        let pos = if clustered {
            let spot = demand.hotspots[rng.gen_range(0..demand.hotspots.len())];
            loop {
                let x = spot.x + spot.sigma * unit_normal.sample(&mut rng);
                let y = spot.y + spot.sigma * unit_normal.sample(&mut rng);
                if area.contains(x, y) {
                    break (x, y);
                }
            }
        } else {
            (
                rng.gen_range(0.0..=area.width),
                rng.gen_range(0.0..=area.height),
            )
        };
        positions.push(pos);
    }
    UserField {
        positions,
        rate_requirement: demand.per_user_rate_r_u,
    }
}

/// Shipped weekday demand table, users per hour of day.
///
/// Version 1. Low counts overnight, a late-morning rise and an afternoon
/// peak (maximum at 15:00). Stand-in numbers; any scenario file can override
/// them with its own `[[demand]]` entries.
pub const DEFAULT_DEMAND_USERS_V1: [u32; 24] = [
    2, 1, 1, 1, 1, 2, 4, 8, 14, 20, 26, 30, 28, 26, 28, 31, 27, 22, 16, 12, 8, 6, 4, 2,
];

/// Default hotspots for the default 1000 m x 1000 m area.
pub const DEFAULT_HOTSPOTS_V1: [Hotspot; 2] = [
    Hotspot {
        x: 250.0,
        y: 250.0,
        sigma: 80.0,
    },
    Hotspot {
        x: 700.0,
        y: 650.0,
        sigma: 100.0,
    },
];

const DEFAULT_HOTSPOT_FRACTION: f64 = 0.7;
const DEFAULT_USER_RATE: f64 = 1e6;

/// Builds a demand profile of length `t_slots` from the shipped table.
///
/// Slot `t` reads the table at the hour its midpoint falls on when the
/// horizon is stretched over a day, so a single-slot horizon gets the
/// midday entry and a 24-slot horizon gets the table verbatim.
pub fn default_demand_profile(t_slots: usize) -> Vec<HourlyDemand> {
    assert!(t_slots >= 1, "horizon must have at least one slot");
    (0..t_slots)
        .map(|t| {
            let hour = ((t as f64 + 0.5) * 24.0 / t_slots as f64).floor() as usize;
            HourlyDemand {
                n_users: DEFAULT_DEMAND_USERS_V1[hour.min(23)],
                hotspot_fraction_p: DEFAULT_HOTSPOT_FRACTION,
                hotspots: DEFAULT_HOTSPOTS_V1.to_vec(),
                per_user_rate_r_u: DEFAULT_USER_RATE,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area() -> Area {
        Area {
            width: 1000.0,
            height: 1000.0,
        }
    }

    #[test]
    fn default_scenario_validates() {
        let s = Scenario::default().finalize().unwrap();
        assert_eq!(s.demand.len(), 24);
        assert_eq!(s.fleet_size_n, 3);
    }

    #[test]
    fn load_round_trips_stated_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, "fleet_size_n = 10\nhorizon_t = 24\n").unwrap();
        let s = load_scenario(&path).unwrap();
        assert_eq!(s.fleet_size_n, 10);
        assert_eq!(s.horizon_t, 24);
    }

    #[test]
    fn p_min_out_of_range_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, "p_min = 1.3\n").unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert!(
            err.to_string().contains("p_min out of [0,1]"),
            "unexpected message: {err}"
        );
    }

    #[test]
    fn missing_solar_block_gets_documented_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, "fleet_size_n = 2\n").unwrap();
        let s = load_scenario(&path).unwrap();
        assert_eq!(s.solar.i_max, 2000.0);
        assert_eq!(s.solar.k_c, 150.0);
        assert_eq!(s.solar.efficiency_eta_c, 0.25);
    }

    #[test]
    fn parse_error_names_file_and_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "fleet_size_n = \"many\"\n").unwrap();
        let err = load_scenario(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.toml"), "message lacks path: {msg}");
        assert!(msg.contains("line 1"), "message lacks location: {msg}");
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        let mut s = Scenario::default();
        s.rng_seed = 0xDEADBEEF;
        s.p_min = 0.8500000000000001;
        s.radio.tx_psd_p_t = 5.5600000001e-8;
        let s = s.finalize().unwrap();
        save_scenario(&s, &path).unwrap();
        let back = load_scenario(&path).unwrap();
        assert_eq!(s, back);
        // Saving again yields identical bytes.
        let path2 = dir.path().join("s2.toml");
        save_scenario(&back, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn generate_users_empty_and_deterministic() {
        let d = HourlyDemand {
            n_users: 0,
            hotspot_fraction_p: 0.5,
            hotspots: DEFAULT_HOTSPOTS_V1.to_vec(),
            per_user_rate_r_u: 1e6,
        };
        assert!(generate_users(&d, area(), 3).is_empty());

        let d = HourlyDemand {
            n_users: 200,
            ..d
        };
        let a = generate_users(&d, area(), 42);
        let b = generate_users(&d, area(), 42);
        assert_eq!(a, b);
        let c = generate_users(&d, area(), 43);
        assert_ne!(a, c);
        assert!(a.positions.iter().all(|&(x, y)| area().contains(x, y)));
    }

    #[test]
    fn zero_hotspot_fraction_is_uniform() {
        // Chi-square goodness of fit on a 4x4 grid against the uniform law;
        // 15 degrees of freedom, 1% critical value 30.578.
        let d = HourlyDemand {
            n_users: 1000,
            hotspot_fraction_p: 0.0,
            hotspots: DEFAULT_HOTSPOTS_V1.to_vec(),
            per_user_rate_r_u: 1e6,
        };
        let field = generate_users(&d, area(), 17);
        let mut counts = [0usize; 16];
        for &(x, y) in &field.positions {
            let i = ((x / 250.0) as usize).min(3);
            let j = ((y / 250.0) as usize).min(3);
            counts[4 * i + j] += 1;
        }
        let expected = 1000.0 / 16.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 30.57791416689249, "chi2 = {chi2}");
    }

    #[test]
    fn hotspot_fraction_matches_over_many_samples() {
        let d = HourlyDemand {
            n_users: 10_000,
            hotspot_fraction_p: 0.7,
            hotspots: vec![Hotspot {
                x: 500.0,
                y: 500.0,
                sigma: 30.0,
            }],
            per_user_rate_r_u: 1e6,
        };
        let field = generate_users(&d, area(), 5);
        // Users within 4 sigma of the single center are (essentially) the
        // clustered ones; uniform users land there with probability ~4.5%.
        let near = field
            .positions
            .iter()
            .filter(|&&(x, y)| ((x - 500.0).powi(2) + (y - 500.0).powi(2)).sqrt() < 120.0)
            .count() as f64;
        let uniform_in_disk = 0.3 * std::f64::consts::PI * 120.0f64.powi(2) / 1e6;
        let frac = near / 10_000.0 - uniform_in_disk;
        assert!((frac - 0.7).abs() < 0.03, "hotspot fraction ~ {frac}");
    }

    #[test]
    fn default_profile_shape() {
        let p = default_demand_profile(24);
        assert_eq!(p.len(), 24);
        let max = p.iter().map(|d| d.n_users).max().unwrap();
        let argmax = p.iter().position(|d| d.n_users == max).unwrap();
        assert!((10..=17).contains(&argmax), "peak at {argmax}");
        assert!(p.iter().all(|d| d.n_users >= 1));

        let single = default_demand_profile(1);
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].n_users, DEFAULT_DEMAND_USERS_V1[12]);
    }
}
