//! True optimum by full enumeration on exact dynamics.
//!
//! Walks the complete depth-`T` tree of joint actions (3^N branches per
//! slot) sharing prefixes, so the work is about `3^(N T)` environment
//! steps. Only viable for tiny instances; the budget guards that.

use crate::energy::Altitude;
use crate::env::{default_initial_state, step_dynamics, EnvState, Environment, JointAction};
use crate::radio::CoverageMap;
use crate::scenario::Scenario;

use super::SolverError;

/// Default cap on the number of enumerated action sequences.
pub const EXHAUSTIVE_DEFAULT_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone)]
pub struct ExhaustiveSolution {
    /// Optimal undiscounted return.
    pub value: f64,
    /// One optimal action profile.
    pub profile: Vec<JointAction>,
}

/// Enumerates every action sequence and returns the best.
pub fn exhaustive_oracle(
    scenario: &Scenario,
    map: &CoverageMap,
    budget: Option<u64>,
) -> Result<ExhaustiveSolution, SolverError> {
    let n = scenario.fleet_size_n;
    let t_slots = scenario.horizon_t;
    let budget = budget.unwrap_or(EXHAUSTIVE_DEFAULT_BUDGET);
    let sequences = 3u64
        .checked_pow((n * t_slots) as u32)
        .filter(|&s| s <= budget);
    let Some(_) = sequences else {
        return Err(SolverError::Budget(format!(
            "3^({n} UAVs x {t_slots} slots) sequences exceed the budget of {budget}"
        )));
    };
    Environment::new(scenario, map)?;

    let joint_actions: Vec<JointAction> = (0..3usize.pow(n as u32))
        .map(|mut a| {
            let mut codes = Vec::with_capacity(n);
            for _ in 0..n {
                codes.push(Altitude::from_code((a % 3) as u8).unwrap());
                a /= 3;
            }
            JointAction(codes)
        })
        .collect();

    struct Search<'a> {
        scenario: &'a Scenario,
        map: &'a CoverageMap,
        joint_actions: &'a [JointAction],
        best_value: f64,
        best_profile: Vec<usize>,
        stack: Vec<usize>,
    }

    impl Search<'_> {
        fn dfs(&mut self, state: &EnvState, acc: f64) -> Result<(), SolverError> {
            if state.t == self.scenario.horizon_t {
                if acc > self.best_value {
                    self.best_value = acc;
                    self.best_profile = self.stack.clone();
                }
                return Ok(());
            }
            for (i, action) in self.joint_actions.iter().enumerate() {
                let out = step_dynamics(self.scenario, self.map, state, action)?;
                self.stack.push(i);
                self.dfs(&out.next, acc + out.reward_total)?;
                self.stack.pop();
            }
            Ok(())
        }
    }

    let mut search = Search {
        scenario,
        map,
        joint_actions: &joint_actions,
        best_value: f64::NEG_INFINITY,
        best_profile: Vec::new(),
        stack: Vec::with_capacity(t_slots),
    };
    search.dfs(&default_initial_state(scenario), 0.0)?;

    Ok(ExhaustiveSolution {
        value: search.best_value,
        profile: search
            .best_profile
            .iter()
            .map(|&i| joint_actions[i].clone())
            .collect(),
    })
}
