//! UAV power and energy physics.
//!
//! Covers rotorcraft kinematic power (level, vertical and blade-drag terms),
//! total electrical power, the daily solar-intensity curve, panel harvest
//! power, the altitude-dependent battery floor that keeps a UAV able to
//! reach the charging altitude, and the slot-level battery ledger that the
//! decision process steps through.
//!
//! All energies are in watt-hours, powers in watts, times in seconds unless
//! a suffix says otherwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hours in a day; the solar curve is periodic over this.
const HOURS_PER_DAY: f64 = 24.0;
/// Speed of light, m/s (shared with the radio link budget).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("non-finite input to {op}: {value}")]
    NonFinite { op: &'static str, value: f64 },
    #[error("hour-of-day {0} outside [0, 24)")]
    HourOutOfRange(f64),
    #[error("negative radiation intensity {0}")]
    NegativeIntensity(f64),
    #[error("vertical transit needs {transit_seconds:.1} s but the slot is {slot_seconds:.1} s")]
    TransitExceedsSlot {
        transit_seconds: f64,
        slot_seconds: f64,
    },
}

/// The three operating levels a UAV can occupy at a slot boundary.
///
/// The numeric codes double as the action encoding: 0 ground, 1 serve,
/// 2 charge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Altitude {
    Ground,
    Serve,
    Charge,
}

impl Altitude {
    pub const ALL: [Altitude; 3] = [Altitude::Ground, Altitude::Serve, Altitude::Charge];

    pub fn code(self) -> u8 {
        match self {
            Altitude::Ground => 0,
            Altitude::Serve => 1,
            Altitude::Charge => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Altitude::Ground),
            1 => Some(Altitude::Serve),
            2 => Some(Altitude::Charge),
            _ => None,
        }
    }

    /// Height above ground for this level, in meters.
    pub fn height_m(self, alt: &Altitudes) -> f64 {
        match self {
            Altitude::Ground => 0.0,
            Altitude::Serve => alt.h_srv,
            Altitude::Charge => alt.h_chg,
        }
    }
}

/// The two fixed operational heights; ground is always 0 m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Altitudes {
    /// Serving altitude, m.
    pub h_srv: f64,
    /// Charging altitude (above the cloud layer), m.
    pub h_chg: f64,
}

impl Default for Altitudes {
    fn default() -> Self {
        Self {
            h_srv: 300.0,
            h_chg: 1400.0,
        }
    }
}

/// Airframe and electrical parameters of one UAV.
///
/// Defaults describe a 5 kg quadrotor: four 0.3 m rotors, blade solidity
/// 0.056, tip speed 150 m/s, 600 Wh battery, 5 W static electronics load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParams {
    /// Aircraft weight, N.
    pub weight_w: f64,
    /// Air density, kg/m^3.
    pub air_density_rho: f64,
    /// Number of rotors; the total disk area is `rotor_count * pi * r^2`.
    pub rotor_count: u32,
    /// Radius of one rotor disk, m.
    pub rotor_radius: f64,
    /// Profile drag coefficient.
    pub profile_drag_c_d0: f64,
    /// Rotor solidity; blade area is `solidity * disk area`.
    pub solidity_sigma: f64,
    /// Blade tip speed, m/s.
    pub tip_speed_v_t: f64,
    /// Maximum level speed, m/s.
    pub max_level_speed_v_lv: f64,
    /// Climb speed, m/s.
    pub climb_speed_v_up: f64,
    /// Descent speed, m/s.
    pub descent_speed_v_dn: f64,
    /// Transmit power, W (small against kinematic power; often 0).
    pub tx_power_p_tx: f64,
    /// Static electronics load, W; also the full draw while parked.
    pub static_power_p_static: f64,
    /// Battery capacity, Wh.
    pub battery_capacity_e_cap: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            weight_w: 5.0 * 9.8,
            air_density_rho: 1.225,
            rotor_count: 4,
            rotor_radius: 0.3,
            profile_drag_c_d0: 5e-4,
            solidity_sigma: 0.056,
            tip_speed_v_t: 150.0,
            max_level_speed_v_lv: 6.0,
            climb_speed_v_up: 4.0,
            descent_speed_v_dn: 4.0,
            tx_power_p_tx: 0.0,
            static_power_p_static: 5.0,
            battery_capacity_e_cap: 600.0,
        }
    }
}

impl PhysicsParams {
    /// Total rotor disk area, m^2.
    pub fn disk_area(&self) -> f64 {
        self.rotor_count as f64 * std::f64::consts::PI * self.rotor_radius * self.rotor_radius
    }

    /// Induced hover speed `V_h = sqrt(W / (2 rho A))`, m/s.
    pub fn hover_induced_speed(&self) -> f64 {
        (self.weight_w / (2.0 * self.air_density_rho * self.disk_area())).sqrt()
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("physics.weight_w", self.weight_w),
            ("physics.air_density_rho", self.air_density_rho),
            ("physics.rotor_radius", self.rotor_radius),
            ("physics.profile_drag_c_d0", self.profile_drag_c_d0),
            ("physics.solidity_sigma", self.solidity_sigma),
            ("physics.tip_speed_v_t", self.tip_speed_v_t),
            ("physics.max_level_speed_v_lv", self.max_level_speed_v_lv),
            ("physics.climb_speed_v_up", self.climb_speed_v_up),
            ("physics.descent_speed_v_dn", self.descent_speed_v_dn),
            ("physics.static_power_p_static", self.static_power_p_static),
            ("physics.battery_capacity_e_cap", self.battery_capacity_e_cap),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be strictly positive, got {v}"));
            }
        }
        if self.rotor_count == 0 {
            return Err("physics.rotor_count must be at least 1".into());
        }
        if !(self.tx_power_p_tx >= 0.0) || !self.tx_power_p_tx.is_finite() {
            return Err(format!(
                "physics.tx_power_p_tx must be >= 0, got {}",
                self.tx_power_p_tx
            ));
        }
        Ok(())
    }
}

/// Solar panel and radiation-curve parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolarParams {
    /// Peak above-cloud radiation intensity, W/m^2.
    pub i_max: f64,
    /// Intensity threshold between the quadratic and linear harvest
    /// branches, W/m^2.
    pub k_c: f64,
    /// Panel area, m^2.
    pub panel_area_a_c: f64,
    /// Charging efficiency, in (0, 1].
    pub efficiency_eta_c: f64,
}

impl Default for SolarParams {
    fn default() -> Self {
        Self {
            i_max: 2000.0,
            k_c: 150.0,
            panel_area_a_c: 1.0,
            efficiency_eta_c: 0.25,
        }
    }
}

impl SolarParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.i_max > 0.0) {
            return Err(format!("solar.i_max must be > 0, got {}", self.i_max));
        }
        if !(self.k_c > 0.0) {
            return Err(format!("solar.k_c must be > 0, got {}", self.k_c));
        }
        if !(self.panel_area_a_c > 0.0) {
            return Err(format!(
                "solar.panel_area_a_c must be > 0, got {}",
                self.panel_area_a_c
            ));
        }
        if !(self.efficiency_eta_c > 0.0 && self.efficiency_eta_c <= 1.0) {
            return Err(format!(
                "solar.efficiency_eta_c must be in (0, 1], got {}",
                self.efficiency_eta_c
            ));
        }
        Ok(())
    }
}

/// Outcome of one UAV's slot: battery ledger entries plus where it ended up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotEnergyResult {
    /// Harvest that entered the ledger (stored, or spent in place once the
    /// battery saturated), Wh.
    pub harvested_wh: f64,
    /// Energy actually consumed, Wh. Equals demanded power x time unless the
    /// battery ran dry mid-slot, in which case draw stops at what battery
    /// plus concurrent harvest could supply.
    pub consumed_wh: f64,
    /// Harvest discarded because the battery was already full, Wh.
    pub discarded_wh: f64,
    /// Battery residue at the slot end, Wh; always within [0, capacity].
    pub new_residue_wh: f64,
    /// Level occupied from the end of the transit onward.
    pub new_altitude: Altitude,
    /// Time spent climbing or descending at the slot start, s.
    pub transit_seconds: f64,
}

impl SlotEnergyResult {
    /// Harvest the panel could have delivered over the slot, Wh.
    pub fn potential_harvest_wh(&self) -> f64 {
        self.harvested_wh + self.discarded_wh
    }
}

fn check_finite(op: &'static str, v: f64) -> Result<(), EnergyError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(EnergyError::NonFinite { op, value: v })
    }
}

/// Kinematic power at level speed `v_lv` and vertical speed `v_vt`
/// (positive climbing, negative descending), W.
///
/// Level, vertical and blade-drag terms:
/// `P_lv = W^2 / (sqrt(2) rho A) / sqrt(v_lv^2 + sqrt(v_lv^4 + 4 V_h^4))`,
/// `P_vt = W v_vt`, `P_drag = C_D0 rho sigma A |v_T|^3 / 8`.
/// The sum is clamped at zero so a steep descent cannot report negative
/// consumption under pathological parameter sets.
pub fn kinematic_power(v_lv: f64, v_vt: f64, p: &PhysicsParams) -> Result<f64, EnergyError> {
    check_finite("kinematic_power", v_lv)?;
    check_finite("kinematic_power", v_vt)?;
    let area = p.disk_area();
    let v_h = p.hover_induced_speed();
    let p_lv = p.weight_w * p.weight_w / (2f64.sqrt() * p.air_density_rho * area)
        / (v_lv * v_lv + (v_lv.powi(4) + 4.0 * v_h.powi(4)).sqrt()).sqrt();
    let p_vt = p.weight_w * v_vt;
    let p_drag = 0.125
        * p.profile_drag_c_d0
        * p.air_density_rho
        * (p.solidity_sigma * area)
        * p.tip_speed_v_t.powi(3);
    Ok((p_lv + p_vt + p_drag).max(0.0))
}

/// Total electrical power in flight: kinematic plus transmit plus static, W.
pub fn total_power(v_lv: f64, v_vt: f64, p: &PhysicsParams) -> Result<f64, EnergyError> {
    Ok(kinematic_power(v_lv, v_vt, p)? + p.tx_power_p_tx + p.static_power_p_static)
}

/// Above-cloud radiation intensity at hour-of-day `t`, W/m^2.
///
/// `max(0, I_max (-t^2/36 + 2t/3 - 3))`: zero outside (6, 18), peaking at
/// exactly `I_max` at noon.
pub fn solar_intensity(t: f64, s: &SolarParams) -> Result<f64, EnergyError> {
    check_finite("solar_intensity", t)?;
    if !(0.0..HOURS_PER_DAY).contains(&t) {
        return Err(EnergyError::HourOutOfRange(t));
    }
    Ok((s.i_max * (-t * t / 36.0 + 2.0 * t / 3.0 - 3.0)).max(0.0))
}

/// Panel harvest power at radiation intensity `i_rad`, W.
///
/// Quadratic in the intensity below the threshold `K_c`, linear above it;
/// the two branches agree at the threshold.
pub fn harvest_power(i_rad: f64, s: &SolarParams) -> Result<f64, EnergyError> {
    check_finite("harvest_power", i_rad)?;
    if i_rad < 0.0 {
        return Err(EnergyError::NegativeIntensity(i_rad));
    }
    Ok(if i_rad == 0.0 {
        0.0
    } else if i_rad < s.k_c {
        s.panel_area_a_c * s.efficiency_eta_c / s.k_c * i_rad * i_rad
    } else {
        s.panel_area_a_c * s.efficiency_eta_c * i_rad
    })
}

/// Battery floor for a UAV holding level `action`: the energy of a climb
/// from that level to the charging altitude, Wh.
///
/// A UAV that keeps at least this much can always retreat upward to
/// recharge instead of dropping out of the fleet.
pub fn min_energy(action: Altitude, p: &PhysicsParams, alt: &Altitudes) -> f64 {
    let delta_h = alt.h_chg - action.height_m(alt);
    if delta_h <= 0.0 {
        return 0.0;
    }
    let climb_power = total_power(0.0, p.climb_speed_v_up, p)
        .expect("climb power is finite for validated parameters");
    delta_h / p.climb_speed_v_up * climb_power / 3600.0
}

/// Advances one constant-rate phase of the battery ledger.
///
/// `harvest_w` and `consume_w` hold for `seconds`; returns
/// `(stored_wh, consumed_wh, discarded_wh, end_residue_wh)`. The net rate
/// has one sign per phase, so the capacity or empty crossing (at most one)
/// has a closed form and the ledger identity
/// `end - start = stored - consumed` is exact.
fn run_phase(
    residue: f64,
    harvest_w: f64,
    consume_w: f64,
    seconds: f64,
    cap: f64,
) -> (f64, f64, f64, f64) {
    if seconds <= 0.0 {
        return (0.0, 0.0, 0.0, residue);
    }
    let hours = seconds / 3600.0;
    let net_w = harvest_w - consume_w;
    let potential = harvest_w * hours;

    if net_w > 0.0 {
        let headroom = cap - residue;
        let t_full = headroom / net_w; // hours until saturation
        if t_full < hours {
            // Battery tops out mid-phase: afterwards harvest covers the
            // draw in place and the surplus is discarded.
            let stored = harvest_w * t_full + consume_w * (hours - t_full);
            let consumed = consume_w * hours;
            let end = (residue + stored - consumed).clamp(0.0, cap);
            (stored, consumed, potential - stored, end)
        } else {
            let consumed = consume_w * hours;
            let end = (residue + potential - consumed).clamp(0.0, cap);
            (potential, consumed, 0.0, end)
        }
    } else if net_w < 0.0 {
        let t_empty = residue / -net_w; // hours until the battery runs dry
        if t_empty < hours {
            // Dry battery: from here only concurrent harvest can be drawn.
            let consumed = consume_w * t_empty + harvest_w * (hours - t_empty);
            (potential, consumed, 0.0, 0.0)
        } else {
            let consumed = consume_w * hours;
            let end = (residue + potential - consumed).clamp(0.0, cap);
            (potential, consumed, 0.0, end)
        }
    } else {
        (potential, consume_w * hours, 0.0, residue)
    }
}

/// Runs one UAV through one slot: a vertical transit from `prev` to the
/// level picked by `action`, then a dwell at the target level.
///
/// Dwell power is the static load on the ground and hover power aloft;
/// harvesting happens only while dwelling at the charging altitude, with
/// the radiation curve frozen at the slot-start hour `t` (wrapped into a
/// day). The battery may saturate or run dry mid-phase; both crossings are
/// handled in closed form so the returned ledger is exact.
#[allow(clippy::too_many_arguments)]
pub fn slot_transition(
    prev: Altitude,
    action: Altitude,
    residue_wh: f64,
    t: f64,
    slot_seconds: f64,
    p: &PhysicsParams,
    s: &SolarParams,
    alt: &Altitudes,
) -> Result<SlotEnergyResult, EnergyError> {
    check_finite("slot_transition", residue_wh)?;
    check_finite("slot_transition", t)?;
    let cap = p.battery_capacity_e_cap;
    debug_assert!((0.0..=cap).contains(&residue_wh), "residue out of range");

    let delta_h = action.height_m(alt) - prev.height_m(alt);
    let (transit_seconds, transit_power) = if delta_h > 0.0 {
        (delta_h / p.climb_speed_v_up, total_power(0.0, p.climb_speed_v_up, p)?)
    } else if delta_h < 0.0 {
        (
            -delta_h / p.descent_speed_v_dn,
            total_power(0.0, -p.descent_speed_v_dn, p)?,
        )
    } else {
        (0.0, 0.0)
    };
    if transit_seconds > slot_seconds {
        return Err(EnergyError::TransitExceedsSlot {
            transit_seconds,
            slot_seconds,
        });
    }

    let (t_stored, t_consumed, t_discarded, after_transit) =
        run_phase(residue_wh, 0.0, transit_power, transit_seconds, cap);

    let dwell_seconds = slot_seconds - transit_seconds;
    let dwell_power = match action {
        Altitude::Ground => p.static_power_p_static,
        Altitude::Serve | Altitude::Charge => total_power(0.0, 0.0, p)?,
    };
    let dwell_harvest = if action == Altitude::Charge {
        harvest_power(solar_intensity(t.rem_euclid(HOURS_PER_DAY), s)?, s)?
    } else {
        0.0
    };
    let (d_stored, d_consumed, d_discarded, end) =
        run_phase(after_transit, dwell_harvest, dwell_power, dwell_seconds, cap);

    Ok(SlotEnergyResult {
        harvested_wh: t_stored + d_stored,
        consumed_wh: t_consumed + d_consumed,
        discarded_wh: t_discarded + d_discarded,
        new_residue_wh: end,
        new_altitude: action,
        transit_seconds,
    })
}
