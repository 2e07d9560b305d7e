//! The episodic fleet-scheduling decision process.
//!
//! State: each UAV's battery residue and level, plus the slot index. Action:
//! one of {ground, serve, charge} per UAV. A step runs every UAV through the
//! slot-level energy ledger, looks the serving count up in the coverage map
//! to get the users served, and scores the slot with a three-part reward:
//!
//! - `r1` — constraint penalties: a per-UAV penalty when a post-slot residue
//!   falls below the altitude-dependent battery floor, and a fleet-level
//!   penalty when the served users miss the service-rate floor.
//! - `r2` — the users served, capped at the value of the smallest serving
//!   count that already reaches full service, so over-provisioning earns
//!   zero margin.
//! - `r3` — an energy-shaping bonus: per grounded UAV in hours where landing
//!   beats charging, per charging UAV in hours where harvest exceeds hover
//!   consumption.
//!
//! The dynamics are deterministic; all randomness lives in scenario
//! generation and in the solvers.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{
    harvest_power, min_energy, slot_transition, solar_intensity, total_power, Altitude,
};
use crate::radio::CoverageMap;
use crate::scenario::Scenario;

/// Slack for comparing integer served counts and battery residues against
/// real-valued thresholds, so exact boundary cases are not decided by the
/// last bit of a product like `0.85 * 20`.
pub const CONSTRAINT_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("initial residue {value} for UAV {uav} outside [0, {cap}]")]
    BadResidue { uav: usize, value: f64, cap: f64 },
    #[error("expected {expected} residues, got {got}")]
    BadResidueCount { expected: usize, got: usize },
    #[error("action has {got} entries for a fleet of {expected}")]
    BadActionLength { expected: usize, got: usize },
    #[error("cannot step past the horizon (t = {t}, horizon {horizon})")]
    PastHorizon { t: usize, horizon: usize },
    #[error("coverage map shape ({map_t} hours, {map_n} UAVs) does not match scenario ({t} hours, {n} UAVs)")]
    MapMismatch {
        map_t: usize,
        map_n: usize,
        t: usize,
        n: usize,
    },
    #[error("coverage map invalid: {0}")]
    MapInvalid(String),
    #[error(transparent)]
    Energy(#[from] crate::energy::EnergyError),
}

/// Reward shaping and penalty coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    /// Penalty per UAV breaking the sustainability floor; strictly below
    /// `penalty_p_c2`.
    pub penalty_p_c1: f64,
    /// Penalty when the slot misses the service-rate floor; in
    /// `(penalty_p_c1, 0)`.
    pub penalty_p_c2: f64,
    /// Bonus per grounded UAV in landing-beneficial hours.
    pub coeff_c1: f64,
    /// Bonus per charging UAV in charging-beneficial hours.
    pub coeff_c2: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            penalty_p_c1: -200.0,
            penalty_p_c2: -100.0,
            coeff_c1: 1.0,
            coeff_c2: 2.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.penalty_p_c1 < self.penalty_p_c2 && self.penalty_p_c2 < 0.0) {
            return Err(format!(
                "reward penalties must satisfy p_c1 < p_c2 < 0, got p_c1={} p_c2={}",
                self.penalty_p_c1, self.penalty_p_c2
            ));
        }
        if !(self.coeff_c1 >= 0.0 && self.coeff_c2 >= 0.0) {
            return Err(format!(
                "reward coefficients must be >= 0, got c1={} c2={}",
                self.coeff_c1, self.coeff_c2
            ));
        }
        Ok(())
    }
}

/// Fleet state at a slot boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// Battery residue per UAV, Wh.
    pub residues_wh: Vec<f64>,
    /// Level per UAV.
    pub altitudes: Vec<Altitude>,
    /// Next slot to play, in `0..=horizon`.
    pub t: usize,
}

/// One altitude choice per UAV for the coming slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction(pub Vec<Altitude>);

impl JointAction {
    pub fn codes(&self) -> Vec<u8> {
        self.0.iter().map(|a| a.code()).collect()
    }

    pub fn from_codes(codes: &[u8]) -> Option<Self> {
        codes
            .iter()
            .map(|&c| Altitude::from_code(c))
            .collect::<Option<Vec<_>>>()
            .map(JointAction)
    }
}

/// Whether parking or charging is the energy-positive idle mode this hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeneficialMode {
    LandingBeneficial,
    ChargingBeneficial,
}

/// Everything one step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: EnvState,
    pub reward_total: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub served_users: u32,
    pub n_srv: usize,
    pub n_gnd: usize,
    pub n_chg: usize,
    /// Harvest that entered the fleet ledger this slot, Wh.
    pub harvested_wh: f64,
    /// Energy the fleet consumed this slot, Wh.
    pub consumed_wh: f64,
    /// Harvest discarded on full batteries, Wh.
    pub discarded_wh: f64,
    /// Per-UAV sustainability-floor violations (post-slot residue below the
    /// floor for the slot's action).
    pub sustainability_violations: Vec<bool>,
    /// Slot missed the service-rate floor.
    pub service_violation: bool,
}

/// `true` when `served` meets the service-rate floor for `n_users`.
pub fn meets_service_rate(served: u32, n_users: u32, p_min: f64) -> bool {
    served as f64 + CONSTRAINT_EPS >= p_min * n_users as f64
}

/// Charging is beneficial iff a full dwell slot at the charging altitude
/// has positive net energy, i.e. the harvest power at the slot-start hour
/// exceeds hover power; otherwise landing is beneficial. Transit costs are
/// deliberately not part of this rule; the ledger already charges them.
pub fn beneficial_mode(t: usize, scenario: &Scenario) -> BeneficialMode {
    let hour = (t as f64 * scenario.slot_seconds / 3600.0).rem_euclid(24.0);
    let harvest = harvest_power(
        solar_intensity(hour, &scenario.solar).expect("hour wrapped into a day"),
        &scenario.solar,
    )
    .expect("nonnegative intensity");
    let hover = total_power(0.0, 0.0, &scenario.physics).expect("finite hover power");
    if harvest > hover {
        BeneficialMode::ChargingBeneficial
    } else {
        BeneficialMode::LandingBeneficial
    }
}

/// Service part of the reward for `n_srv` serving UAVs in slot `t`:
/// `(r2, service_violation)`. `r2` is the map entry, capped at the value of
/// the minimal serving count that reaches all present users.
pub fn service_reward(scenario: &Scenario, map: &CoverageMap, t: usize, n_srv: usize) -> (f64, bool) {
    let n_users = scenario.n_users(t);
    let served = map.served_at(t, n_srv);
    let full = map.min_uavs_reaching(t, n_users as f64);
    let r2 = match full {
        Some(n_full) if n_srv > n_full => map.served_at(t, n_full) as f64,
        _ => served as f64,
    };
    let violated = !meets_service_rate(served, n_users, scenario.p_min);
    (r2, violated)
}

/// Energy-shaping reward for the fleet split `(n_gnd, n_chg)` in slot `t`.
pub fn energy_shaping_reward(scenario: &Scenario, t: usize, n_gnd: usize, n_chg: usize) -> f64 {
    match beneficial_mode(t, scenario) {
        BeneficialMode::LandingBeneficial => scenario.reward.coeff_c1 * n_gnd as f64,
        BeneficialMode::ChargingBeneficial => scenario.reward.coeff_c2 * n_chg as f64,
    }
}

/// Pure single-slot dynamics: the step function without an owning
/// environment. The solvers (DP, enumeration) share this with
/// [`Environment::step`], so every consumer prices a slot identically.
pub fn step_dynamics(
    scenario: &Scenario,
    map: &CoverageMap,
    state: &EnvState,
    action: &JointAction,
) -> Result<StepOutcome, EnvError> {
    let n = scenario.fleet_size_n;
    if action.0.len() != n {
        return Err(EnvError::BadActionLength {
            expected: n,
            got: action.0.len(),
        });
    }
    if state.t >= scenario.horizon_t {
        return Err(EnvError::PastHorizon {
            t: state.t,
            horizon: scenario.horizon_t,
        });
    }
    let t = state.t;
    let hour = (t as f64 * scenario.slot_seconds / 3600.0).rem_euclid(24.0);

    let mut residues = Vec::with_capacity(n);
    let mut altitudes = Vec::with_capacity(n);
    let mut harvested = 0.0;
    let mut consumed = 0.0;
    let mut discarded = 0.0;
    let mut violations = vec![false; n];
    let mut r1 = 0.0;
    for i in 0..n {
        let slot = slot_transition(
            state.altitudes[i],
            action.0[i],
            state.residues_wh[i],
            hour,
            scenario.slot_seconds,
            &scenario.physics,
            &scenario.solar,
            &scenario.altitudes,
        )?;
        let floor = min_energy(action.0[i], &scenario.physics, &scenario.altitudes);
        if slot.new_residue_wh + CONSTRAINT_EPS < floor {
            violations[i] = true;
            r1 += scenario.reward.penalty_p_c1;
        }
        harvested += slot.harvested_wh;
        consumed += slot.consumed_wh;
        discarded += slot.discarded_wh;
        residues.push(slot.new_residue_wh);
        altitudes.push(slot.new_altitude);
    }

    let n_srv = action.0.iter().filter(|&&a| a == Altitude::Serve).count();
    let n_gnd = action.0.iter().filter(|&&a| a == Altitude::Ground).count();
    let n_chg = n - n_srv - n_gnd;

    let (r2, service_violation) = service_reward(scenario, map, t, n_srv);
    if service_violation {
        r1 += scenario.reward.penalty_p_c2;
    }
    let r3 = energy_shaping_reward(scenario, t, n_gnd, n_chg);

    let served_users = map.served_at(t, n_srv);
    Ok(StepOutcome {
        next: EnvState {
            residues_wh: residues,
            altitudes,
            t: t + 1,
        },
        reward_total: r1 + r2 + r3,
        r1,
        r2,
        r3,
        served_users,
        n_srv,
        n_gnd,
        n_chg,
        harvested_wh: harvested,
        consumed_wh: consumed,
        discarded_wh: discarded,
        sustainability_violations: violations,
        service_violation,
    })
}

/// An owned instance of the decision process over a scenario and its
/// coverage map. Single-threaded; spawn one per worker for parallel
/// evaluation, sharing the immutable inputs.
pub struct Environment<'a> {
    scenario: &'a Scenario,
    map: &'a CoverageMap,
    state: EnvState,
}

impl<'a> Environment<'a> {
    /// Validates the map against the scenario and starts at the default
    /// initial state (every UAV grounded with a full battery).
    pub fn new(scenario: &'a Scenario, map: &'a CoverageMap) -> Result<Self, EnvError> {
        if map.horizon_t != scenario.horizon_t || map.fleet_size_n != scenario.fleet_size_n {
            return Err(EnvError::MapMismatch {
                map_t: map.horizon_t,
                map_n: map.fleet_size_n,
                t: scenario.horizon_t,
                n: scenario.fleet_size_n,
            });
        }
        map.validate().map_err(EnvError::MapInvalid)?;
        for (t, row) in map.served.iter().enumerate() {
            let cap = scenario.n_users(t);
            if row.iter().any(|&s| s > cap) {
                return Err(EnvError::MapInvalid(format!(
                    "hour {t} claims more served users than the {cap} present"
                )));
            }
        }
        let state = default_initial_state(scenario);
        Ok(Self {
            scenario,
            map,
            state,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn coverage_map(&self) -> &CoverageMap {
        self.map
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// Back to the default initial state: grounded, full batteries, t = 0.
    pub fn reset(&mut self) -> EnvState {
        self.state = default_initial_state(self.scenario);
        self.state.clone()
    }

    /// Reset with explicit initial residues (all UAVs grounded).
    pub fn reset_with_residues(&mut self, residues: &[f64]) -> Result<EnvState, EnvError> {
        let n = self.scenario.fleet_size_n;
        if residues.len() != n {
            return Err(EnvError::BadResidueCount {
                expected: n,
                got: residues.len(),
            });
        }
        let cap = self.scenario.physics.battery_capacity_e_cap;
        for (i, &r) in residues.iter().enumerate() {
            if !(0.0..=cap).contains(&r) || !r.is_finite() {
                return Err(EnvError::BadResidue {
                    uav: i,
                    value: r,
                    cap,
                });
            }
        }
        self.state = EnvState {
            residues_wh: residues.to_vec(),
            altitudes: vec![Altitude::Ground; n],
            t: 0,
        };
        Ok(self.state.clone())
    }

    pub fn step(&mut self, action: &JointAction) -> Result<StepOutcome, EnvError> {
        let outcome = step_dynamics(self.scenario, self.map, &self.state, action)?;
        self.state = outcome.next.clone();
        Ok(outcome)
    }
}

/// The default episode start: every UAV grounded with a full battery.
pub fn default_initial_state(scenario: &Scenario) -> EnvState {
    EnvState {
        residues_wh: vec![scenario.physics.battery_capacity_e_cap; scenario.fleet_size_n],
        altitudes: vec![Altitude::Ground; scenario.fleet_size_n],
        t: 0,
    }
}

/// One slot of an episode record.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub action: JointAction,
    pub outcome: StepOutcome,
}

/// Full episode record, one entry per slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub records: Vec<TraceRecord>,
}

impl EpisodeTrace {
    pub fn total_return(&self) -> f64 {
        self.records.iter().map(|r| r.outcome.reward_total).sum()
    }

    pub fn total_served(&self) -> u64 {
        self.records
            .iter()
            .map(|r| r.outcome.served_users as u64)
            .sum()
    }

    pub fn sustainability_violation_count(&self) -> u64 {
        self.records
            .iter()
            .map(|r| {
                r.outcome
                    .sustainability_violations
                    .iter()
                    .filter(|&&v| v)
                    .count() as u64
            })
            .sum()
    }

    pub fn service_violation_count(&self) -> u64 {
        self.records
            .iter()
            .filter(|r| r.outcome.service_violation)
            .count() as u64
    }

    /// CSV rows: slot, per-UAV actions, per-UAV post-slot residues, serving
    /// count, served users, reward parts, slot energy ledger.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self
            .records
            .first()
            .map(|r| r.action.0.len())
            .unwrap_or(0);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("a_{i}")));
        header.extend((0..n).map(|i| format!("residue_{i}")));
        header.extend(
            ["n_srv", "served_users", "r1", "r2", "r3", "e_h", "e_c"]
                .iter()
                .map(|s| s.to_string()),
        );
        w.write_record(&header)?;
        for rec in &self.records {
            let mut row = vec![rec.t.to_string()];
            row.extend(rec.action.codes().iter().map(|c| c.to_string()));
            row.extend(
                rec.outcome
                    .next
                    .residues_wh
                    .iter()
                    .map(|r| format!("{r:.6}")),
            );
            row.push(rec.outcome.n_srv.to_string());
            row.push(rec.outcome.served_users.to_string());
            row.push(format!("{:.6}", rec.outcome.r1));
            row.push(format!("{:.6}", rec.outcome.r2));
            row.push(format!("{:.6}", rec.outcome.r3));
            row.push(format!("{:.6}", rec.outcome.harvested_wh));
            row.push(format!("{:.6}", rec.outcome.consumed_wh));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Plays one full episode from reset under `policy`.
pub fn rollout<F>(env: &mut Environment, mut policy: F) -> Result<EpisodeTrace, EnvError>
where
    F: FnMut(&EnvState) -> JointAction,
{
    env.reset();
    let mut trace = EpisodeTrace::default();
    for t in 0..env.scenario.horizon_t {
        let action = policy(env.state());
        let outcome = env.step(&action)?;
        trace.records.push(TraceRecord { t, action, outcome });
    }
    Ok(trace)
}
