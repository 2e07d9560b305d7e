//! Solvers for the fleet-scheduling process.
//!
//! - [`ddpg`] — deterministic actor-critic over a continuous relaxation of
//!   the joint altitude action: the actor emits one real per UAV in
//!   `(-0.5, 2.5)`, which rounds to the discrete codes `{0, 1, 2}`. The
//!   output width grows linearly with the fleet instead of as `3^N`.
//! - [`dp`] — exact backward induction over battery-quantized states, the
//!   optimality oracle for small fleets.
//! - [`exhaustive`] — full enumeration of all action sequences on exact
//!   dynamics, for tiny horizons.
//! - [`greedy`] — a myopic baseline: serve with the minimum compliant
//!   count, park or charge everyone else by the hour's energy mode.
//! - [`eval`] — rollout metrics (returns, hourly serving counts,
//!   accumulated served users, energy ledger) and their CSV forms.

use thiserror::Error;

use crate::energy::Altitude;
use crate::env::JointAction;

pub mod ddpg;
pub mod dp;
pub mod eval;
pub mod exhaustive;
pub mod greedy;
pub mod nn;

pub use ddpg::{train_ddpg, DdpgHyper, DdpgPolicy, ReplayBuffer, TrainingLog};
pub use dp::{dp_oracle, DpSolution};
pub use eval::{evaluate, EvalMetrics};
pub use exhaustive::{exhaustive_oracle, ExhaustiveSolution};
pub use greedy::{greedy_baseline, GreedyPolicy, GreedyRun};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("instance exceeds the solver budget: {0}")]
    Budget(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("policy file {path}: {message}")]
    PolicyFormat { path: String, message: String },
}

/// Lower edge of the relaxed per-UAV action interval.
pub const RELAXED_LOW: f64 = -0.5;
/// Upper edge of the relaxed per-UAV action interval.
pub const RELAXED_HIGH: f64 = 2.5;

/// Rounds a relaxed action vector to the nearest discrete altitude codes.
///
/// Values are first clamped into `[-0.5, 2.5]`; exact midpoints (0.5, 1.5)
/// round up.
pub fn relax_and_discretize(raw: &[f64]) -> JointAction {
    JointAction(
        raw.iter()
            .map(|&v| {
                let clamped = v.clamp(RELAXED_LOW, RELAXED_HIGH);
                let code = ((clamped + 0.5).floor() as i64).clamp(0, 2) as u8;
                Altitude::from_code(code).expect("code in 0..=2")
            })
            .collect(),
    )
}

/// Embeds a discrete joint action back into the relaxed space (the codes
/// as reals). `relax_and_discretize(embed(a)) == a` for every action.
pub fn embed_action(action: &JointAction) -> Vec<f64> {
    action.0.iter().map(|a| a.code() as f64).collect()
}
