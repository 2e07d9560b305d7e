//! Deterministic actor-critic training over the relaxed action space.
//!
//! The actor maps the normalized fleet state to one real per UAV inside the
//! relaxed interval; acting adds decaying Gaussian exploration noise, clamps
//! into the interval, and rounds to the discrete action actually applied
//! (which is also what the replay buffer stores). The critic regresses
//! one-step targets built from Polyak-averaged target copies of both
//! networks. Learning runs once per environment step once the buffer can
//! fill a minibatch.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::nn::{Activation, Adam, Grads, Layer, Mlp};
use super::{embed_action, relax_and_discretize, SolverError, RELAXED_HIGH, RELAXED_LOW};
use crate::env::{rollout, EnvState, Environment, JointAction};
use crate::radio::CoverageMap;
use crate::scenario::Scenario;
use crate::seeding::derive_seed;

/// Training hyperparameters. The defaults are the reference configuration:
/// two 400-node hidden layers, 1e-4 learning rates, L2 1e-4, per-array
/// gradient clipping at 1, Polyak factor 0.001 applied every update,
/// minibatch 512, Gaussian action-noise variance decaying from 1.5 to 0.2
/// by a factor `(1 - 1e-4)` per environment step, a 1e6-transition replay
/// buffer, discount 0.99, and up to 1e5 episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgHyper {
    pub hidden1: usize,
    pub hidden2: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub l2_lambda: f64,
    pub grad_clip: f64,
    pub tau: f64,
    pub target_update_every: usize,
    pub batch_size: usize,
    pub noise_var_max: f64,
    pub noise_var_decay: f64,
    pub noise_var_min: f64,
    pub replay_capacity: usize,
    pub gamma: f64,
    pub max_episodes: usize,
    /// Evaluate the noise-free policy every this many episodes; the best
    /// evaluation snapshot is what training returns.
    pub eval_every: usize,
}

impl Default for DdpgHyper {
    fn default() -> Self {
        Self {
            hidden1: 400,
            hidden2: 400,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            l2_lambda: 1e-4,
            grad_clip: 1.0,
            tau: 1e-3,
            target_update_every: 1,
            batch_size: 512,
            noise_var_max: 1.5,
            noise_var_decay: 1e-4,
            noise_var_min: 0.2,
            replay_capacity: 1_000_000,
            gamma: 0.99,
            max_episodes: 100_000,
            eval_every: 10,
        }
    }
}

impl DdpgHyper {
    pub fn validate(&self) -> Result<(), String> {
        if self.hidden1 == 0
            || self.hidden2 == 0
            || self.batch_size == 0
            || self.replay_capacity == 0
            || self.max_episodes == 0
            || self.eval_every == 0
            || self.target_update_every == 0
        {
            return Err("ddpg sizes must be positive".into());
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("l2_lambda", self.l2_lambda),
            ("grad_clip", self.grad_clip),
            ("tau", self.tau),
            ("noise_var_max", self.noise_var_max),
            ("noise_var_decay", self.noise_var_decay),
            ("noise_var_min", self.noise_var_min),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("ddpg.{name} must be positive, got {v}"));
            }
        }
        if self.noise_var_min > self.noise_var_max {
            return Err("ddpg noise floor above its ceiling".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("ddpg.gamma must be in (0, 1], got {}", self.gamma));
        }
        Ok(())
    }
}

/// Normalizes a fleet state into the `2N + 1` network features: residues
/// over capacity, altitude codes over 2, slot over horizon.
pub fn featurize(state: &EnvState, cap_wh: f64, horizon: usize) -> Vec<f64> {
    let mut f = Vec::with_capacity(2 * state.residues_wh.len() + 1);
    f.extend(state.residues_wh.iter().map(|r| r / cap_wh));
    f.extend(state.altitudes.iter().map(|a| a.code() as f64 / 2.0));
    f.push(state.t as f64 / horizon as f64);
    f
}

/// A trained deterministic policy: the actor network plus the
/// normalization constants it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct DdpgPolicy {
    pub actor: Mlp,
    pub battery_cap_wh: f64,
    pub horizon_t: usize,
}

impl DdpgPolicy {
    /// Raw actor output in the relaxed box.
    pub fn act_relaxed(&self, state: &EnvState) -> Vec<f64> {
        let x = Array2::from_shape_vec(
            (1, self.actor.input_dim()),
            featurize(state, self.battery_cap_wh, self.horizon_t),
        )
        .expect("feature length matches actor input");
        self.actor.predict(&x).row(0).to_vec()
    }

    /// Discretized deterministic action.
    pub fn act(&self, state: &EnvState) -> JointAction {
        relax_and_discretize(&self.act_relaxed(state))
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SolverError> {
        let path = path.as_ref();
        let file = serde_json::to_string(&PolicyFile::from(self)).expect("policy serializes");
        std::fs::write(path, file).map_err(|source| SolverError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SolverError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SolverError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: PolicyFile =
            serde_json::from_str(&text).map_err(|e| SolverError::PolicyFormat {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        file.into_policy()
            .map_err(|message| SolverError::PolicyFormat {
                path: path.display().to_string(),
                message,
            })
    }
}

/// On-disk checkpoint: layer shapes and parameters plus the normalization
/// constants, versioned for forward compatibility.
#[derive(Serialize, Deserialize)]
struct PolicyFile {
    version: u32,
    battery_cap_wh: f64,
    horizon_t: usize,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    act: Activation,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl From<&DdpgPolicy> for PolicyFile {
    fn from(p: &DdpgPolicy) -> Self {
        PolicyFile {
            version: 1,
            battery_cap_wh: p.battery_cap_wh,
            horizon_t: p.horizon_t,
            layers: p
                .actor
                .layers
                .iter()
                .map(|l| LayerFile {
                    rows: l.w.nrows(),
                    cols: l.w.ncols(),
                    act: l.act,
                    w: l.w.iter().copied().collect(),
                    b: l.b.to_vec(),
                })
                .collect(),
        }
    }
}

impl PolicyFile {
    fn into_policy(self) -> Result<DdpgPolicy, String> {
        if self.version != 1 {
            return Err(format!("unsupported policy version {}", self.version));
        }
        let layers = self
            .layers
            .into_iter()
            .map(|l| {
                let w = Array2::from_shape_vec((l.rows, l.cols), l.w)
                    .map_err(|e| format!("bad weight shape: {e}"))?;
                if l.b.len() != l.cols {
                    return Err(format!("bias length {} for {} columns", l.b.len(), l.cols));
                }
                Ok(Layer {
                    w,
                    b: Array1::from_vec(l.b),
                    act: l.act,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        if layers.is_empty() {
            return Err("policy has no layers".into());
        }
        Ok(DdpgPolicy {
            actor: Mlp { layers },
            battery_cap_wh: self.battery_cap_wh,
            horizon_t: self.horizon_t,
        })
    }
}

/// One stored transition; the action is the discretized one that was
/// actually applied, embedded back into the relaxed space.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Box<[f64]>,
    pub action: Box<[f64]>,
    pub reward: f64,
    pub next_state: Box<[f64]>,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer of transitions with uniform
/// without-replacement minibatch sampling.
pub struct ReplayBuffer {
    buf: Vec<Transition>,
    capacity: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            buf: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() < self.capacity {
            self.buf.push(t);
        } else {
            self.buf[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Uniform sample of `batch` distinct indices.
    pub fn sample_indices<R: Rng>(&self, rng: &mut R, batch: usize) -> Vec<usize> {
        rand::seq::index::sample(rng, self.buf.len(), batch.min(self.buf.len())).into_vec()
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.buf[idx]
    }
}

/// One row of the per-episode training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub episode: usize,
    pub ep_return: f64,
    /// Mean return over the last (up to) 300 episodes including this one.
    pub moving_avg_300: f64,
    pub noise_variance: f64,
}

/// Per-episode returns plus the evaluation history.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
    /// `(episode, noise-free evaluation return)` at every evaluation point.
    pub evals: Vec<(usize, f64)>,
    pub best_eval_return: f64,
    pub best_eval_episode: usize,
}

impl TrainingLog {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["episode", "return", "moving_avg_300", "noise_variance"])?;
        for r in &self.rows {
            w.write_record(&[
                r.episode.to_string(),
                format!("{:.6}", r.ep_return),
                format!("{:.6}", r.moving_avg_300),
                format!("{:.8}", r.noise_variance),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean-squared Bellman error plus the L2 term, the quantity whose
/// parameter gradients [`critic_grads`] returns.
pub fn critic_loss(critic: &Mlp, x: &Array2<f64>, targets: &Array1<f64>, l2: f64) -> f64 {
    let q = critic.predict(x);
    let n = x.nrows() as f64;
    let mse = q
        .column(0)
        .iter()
        .zip(targets.iter())
        .map(|(q, y)| (q - y) * (q - y))
        .sum::<f64>()
        / n;
    mse + 0.5 * l2 * critic.weight_squared_sum()
}

/// Analytic gradients of [`critic_loss`] (before clipping).
pub fn critic_grads(critic: &Mlp, x: &Array2<f64>, targets: &Array1<f64>, l2: f64) -> Grads {
    let (q, cache) = critic.forward(x);
    let n = x.nrows() as f64;
    let mut d_out = Array2::zeros(q.raw_dim());
    for (i, y) in targets.iter().enumerate() {
        d_out[[i, 0]] = 2.0 * (q[[i, 0]] - y) / n;
    }
    let (mut grads, _) = critic.backward(&cache, &d_out);
    grads.add_l2(critic, l2);
    grads
}

struct Learner {
    actor: Mlp,
    critic: Mlp,
    target_actor: Mlp,
    target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    hyper: DdpgHyper,
    state_dim: usize,
    action_dim: usize,
    learn_steps: usize,
}

impl Learner {
    fn new(state_dim: usize, action_dim: usize, hyper: DdpgHyper, rng: &mut ChaCha8Rng) -> Self {
        let squash = Activation::TanhAffine {
            mid: (RELAXED_LOW + RELAXED_HIGH) / 2.0,
            half: (RELAXED_HIGH - RELAXED_LOW) / 2.0,
        };
        let actor = Mlp::new(
            &[state_dim, hyper.hidden1, hyper.hidden2, action_dim],
            &[Activation::Relu, Activation::Relu, squash],
            rng,
        );
        let critic = Mlp::new(
            &[
                state_dim + action_dim,
                hyper.hidden1,
                hyper.hidden2,
                1,
            ],
            &[Activation::Relu, Activation::Relu, Activation::Linear],
            rng,
        );
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        let actor_opt = Adam::new_for(&actor);
        let critic_opt = Adam::new_for(&critic);
        Self {
            actor,
            critic,
            target_actor,
            target_critic,
            actor_opt,
            critic_opt,
            hyper,
            state_dim,
            action_dim,
            learn_steps: 0,
        }
    }

    /// One minibatch update of critic and actor plus target tracking.
    fn learn(&mut self, replay: &ReplayBuffer, rng: &mut ChaCha8Rng) -> Result<(), SolverError> {
        let idx = replay.sample_indices(rng, self.hyper.batch_size);
        let b = idx.len();
        let sd = self.state_dim;
        let ad = self.action_dim;
        let mut states = Array2::zeros((b, sd));
        let mut actions = Array2::zeros((b, ad));
        let mut rewards = Array1::zeros(b);
        let mut next_states = Array2::zeros((b, sd));
        let mut terminal = vec![false; b];
        for (row, &i) in idx.iter().enumerate() {
            let tr = replay.get(i);
            states.row_mut(row).assign(&Array1::from_iter(tr.state.iter().copied()));
            actions
                .row_mut(row)
                .assign(&Array1::from_iter(tr.action.iter().copied()));
            rewards[row] = tr.reward;
            next_states
                .row_mut(row)
                .assign(&Array1::from_iter(tr.next_state.iter().copied()));
            terminal[row] = tr.terminal;
        }

        // One-step targets from the target networks; terminal slots
        // bootstrap with zero (finite horizon).
        let next_actions = self.target_actor.predict(&next_states);
        let next_q = self
            .target_critic
            .predict(&concat_cols(&next_states, &next_actions));
        let mut targets = Array1::zeros(b);
        for i in 0..b {
            let boot = if terminal[i] { 0.0 } else { next_q[[i, 0]] };
            targets[i] = rewards[i] + self.hyper.gamma * boot;
        }

        // Critic regression.
        let x = concat_cols(&states, &actions);
        let loss = critic_loss(&self.critic, &x, &targets, self.hyper.l2_lambda);
        if !loss.is_finite() {
            return Err(SolverError::Divergence(format!(
                "critic loss became {loss} at learn step {}",
                self.learn_steps
            )));
        }
        let mut grads = critic_grads(&self.critic, &x, &targets, self.hyper.l2_lambda);
        grads.clip_per_array(self.hyper.grad_clip);
        self.critic_opt
            .step(&mut self.critic, &grads, self.hyper.critic_lr);

        // Actor ascent on Q(s, mu(s)).
        let (mu, actor_cache) = self.actor.forward(&states);
        let x_pi = concat_cols(&states, &mu);
        let (_, critic_cache) = self.critic.forward(&x_pi);
        let d_q = Array2::from_elem((b, 1), -1.0 / b as f64);
        let d_input = self.critic.backward_input(&critic_cache, &d_q);
        let d_actions = d_input.slice(ndarray::s![.., sd..]).to_owned();
        let (mut actor_grads, _) = self.actor.backward(&actor_cache, &d_actions);
        actor_grads.add_l2(&self.actor, self.hyper.l2_lambda);
        if !actor_grads.is_finite() {
            return Err(SolverError::Divergence(format!(
                "actor gradients became non-finite at learn step {}",
                self.learn_steps
            )));
        }
        actor_grads.clip_per_array(self.hyper.grad_clip);
        self.actor_opt
            .step(&mut self.actor, &actor_grads, self.hyper.actor_lr);

        self.learn_steps += 1;
        if self.learn_steps % self.hyper.target_update_every == 0 {
            self.target_actor.soft_update_from(&self.actor, self.hyper.tau);
            self.target_critic
                .soft_update_from(&self.critic, self.hyper.tau);
        }
        Ok(())
    }
}

fn concat_cols(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(ndarray::Axis(1), &[a.view(), b.view()]).expect("row counts match")
}

/// Trains a DDPG policy on a scenario and its coverage map.
///
/// Returns the best-by-evaluation policy and the per-episode log. The run
/// is deterministic given `seed`.
pub fn train_ddpg(
    scenario: &Scenario,
    map: &CoverageMap,
    hyper: &DdpgHyper,
    seed: u64,
) -> Result<(DdpgPolicy, TrainingLog), SolverError> {
    hyper
        .validate()
        .map_err(|m| SolverError::Divergence(format!("invalid hyperparameters: {m}")))?;
    let mut env = Environment::new(scenario, map)?;
    let n = scenario.fleet_size_n;
    let state_dim = 2 * n + 1;
    let cap = scenario.physics.battery_capacity_e_cap;
    let horizon = scenario.horizon_t;

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 10, 0));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 11, 0));
    let mut sample_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 12, 0));
    let unit_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut learner = Learner::new(state_dim, n, *hyper, &mut init_rng);
    let mut replay = ReplayBuffer::new(hyper.replay_capacity);
    let mut noise_var = hyper.noise_var_max;

    let mut log = TrainingLog {
        best_eval_return: f64::NEG_INFINITY,
        ..TrainingLog::default()
    };
    let mut best_policy: Option<DdpgPolicy> = None;
    let mut recent_returns: Vec<f64> = Vec::new();

    for episode in 0..hyper.max_episodes {
        let mut state = env.reset();
        let mut ep_return = 0.0;
        for t in 0..horizon {
            let features = featurize(&state, cap, horizon);
            let x = Array2::from_shape_vec((1, state_dim), features.clone())
                .expect("feature length");
            let mut raw = learner.actor.predict(&x).row(0).to_vec();
            let sigma = noise_var.sqrt();
            for v in &mut raw {
                *v = (*v + sigma * unit_normal.sample(&mut noise_rng))
                    .clamp(RELAXED_LOW, RELAXED_HIGH);
            }
            let action = relax_and_discretize(&raw);
            let outcome = env.step(&action)?;
            ep_return += outcome.reward_total;
            replay.push(Transition {
                state: features.into_boxed_slice(),
                action: embed_action(&action).into_boxed_slice(),
                reward: outcome.reward_total,
                next_state: featurize(&outcome.next, cap, horizon).into_boxed_slice(),
                terminal: t + 1 == horizon,
            });
            noise_var = (noise_var * (1.0 - hyper.noise_var_decay)).max(hyper.noise_var_min);
            if replay.len() >= hyper.batch_size {
                learner.learn(&replay, &mut sample_rng)?;
            }
            state = outcome.next;
        }

        recent_returns.push(ep_return);
        let window = &recent_returns[recent_returns.len().saturating_sub(300)..];
        log.rows.push(LogRow {
            episode,
            ep_return,
            moving_avg_300: window.iter().sum::<f64>() / window.len() as f64,
            noise_variance: noise_var,
        });

        let last = episode + 1 == hyper.max_episodes;
        if episode % hyper.eval_every == 0 || last {
            let candidate = DdpgPolicy {
                actor: learner.actor.clone(),
                battery_cap_wh: cap,
                horizon_t: horizon,
            };
            let trace = rollout(&mut env, |s| candidate.act(s))?;
            let eval_return = trace.total_return();
            log.evals.push((episode, eval_return));
            if eval_return > log.best_eval_return {
                log.best_eval_return = eval_return;
                log.best_eval_episode = episode;
                best_policy = Some(candidate);
            }
        }
    }

    Ok((
        best_policy.expect("at least one evaluation ran"),
        log,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Altitude;
    use crate::radio::Placement;

    fn tiny_fixture() -> (Scenario, CoverageMap) {
        let mut scenario = Scenario {
            fleet_size_n: 2,
            horizon_t: 4,
            ..Scenario::default()
        };
        scenario.demand = crate::scenario::default_demand_profile(4);
        scenario.validate().unwrap();
        let served = (0..4)
            .map(|t| {
                let u = scenario.n_users(t);
                vec![0, (u + 1) / 2, u]
            })
            .collect();
        let map = CoverageMap {
            horizon_t: 4,
            fleet_size_n: 2,
            served,
            placements: vec![vec![Placement { positions: vec![] }; 3]; 4],
        };
        map.validate().unwrap();
        (scenario, map)
    }

    #[test]
    fn featurize_has_2n_plus_1_entries() {
        let state = EnvState {
            residues_wh: vec![300.0, 600.0],
            altitudes: vec![Altitude::Ground, Altitude::Charge],
            t: 6,
        };
        let f = featurize(&state, 600.0, 24);
        assert_eq!(f.len(), 5);
        assert_eq!(f, vec![0.5, 1.0, 0.0, 1.0, 0.25]);
    }

    #[test]
    fn replay_buffer_ring_and_unique_samples() {
        let mut buf = ReplayBuffer::new(8);
        for i in 0..20 {
            buf.push(Transition {
                state: vec![i as f64].into_boxed_slice(),
                action: vec![0.0].into_boxed_slice(),
                reward: i as f64,
                next_state: vec![0.0].into_boxed_slice(),
                terminal: false,
            });
        }
        assert_eq!(buf.len(), 8);
        // Oldest entries were overwritten.
        let rewards: Vec<f64> = (0..8).map(|i| buf.get(i).reward).collect();
        assert!(rewards.iter().all(|&r| r >= 12.0));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let idx = buf.sample_indices(&mut rng, 6);
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), idx.len(), "duplicate indices in minibatch");
    }

    #[test]
    fn training_smoke_run_and_determinism() {
        let (scenario, map) = tiny_fixture();
        let hyper = DdpgHyper {
            hidden1: 16,
            hidden2: 16,
            batch_size: 8,
            max_episodes: 6,
            eval_every: 2,
            ..DdpgHyper::default()
        };
        let (policy_a, log_a) = train_ddpg(&scenario, &map, &hyper, 3).unwrap();
        let (policy_b, log_b) = train_ddpg(&scenario, &map, &hyper, 3).unwrap();
        assert_eq!(log_a.rows.len(), 6);
        assert_eq!(policy_a, policy_b, "training is not deterministic");
        assert_eq!(
            log_a.rows.iter().map(|r| r.ep_return).collect::<Vec<_>>(),
            log_b.rows.iter().map(|r| r.ep_return).collect::<Vec<_>>()
        );
        assert!(log_a.best_eval_return.is_finite());

        // Noise variance decays monotonically toward the floor.
        let vars: Vec<f64> = log_a.rows.iter().map(|r| r.noise_variance).collect();
        assert!(vars.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn noise_free_policy_rollouts_are_identical() {
        let (scenario, map) = tiny_fixture();
        let hyper = DdpgHyper {
            hidden1: 12,
            hidden2: 12,
            batch_size: 8,
            max_episodes: 3,
            eval_every: 1,
            ..DdpgHyper::default()
        };
        let (policy, _) = train_ddpg(&scenario, &map, &hyper, 5).unwrap();
        let mut env = Environment::new(&scenario, &map).unwrap();
        let a = rollout(&mut env, |s| policy.act(s)).unwrap();
        let b = rollout(&mut env, |s| policy.act(s)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn policy_save_load_round_trip() {
        let (scenario, map) = tiny_fixture();
        let hyper = DdpgHyper {
            hidden1: 10,
            hidden2: 10,
            batch_size: 8,
            max_episodes: 2,
            eval_every: 1,
            ..DdpgHyper::default()
        };
        let (policy, _) = train_ddpg(&scenario, &map, &hyper, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        policy.save(&path).unwrap();
        let back = DdpgPolicy::load(&path).unwrap();
        assert_eq!(policy, back);

        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(
            DdpgPolicy::load(&path),
            Err(SolverError::PolicyFormat { .. })
        ));
    }

    #[test]
    fn training_log_csv_shape() {
        let log = TrainingLog {
            rows: vec![
                LogRow {
                    episode: 0,
                    ep_return: -10.0,
                    moving_avg_300: -10.0,
                    noise_variance: 1.5,
                },
                LogRow {
                    episode: 1,
                    ep_return: -5.0,
                    moving_avg_300: -7.5,
                    noise_variance: 1.49,
                },
            ],
            ..TrainingLog::default()
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "episode,return,moving_avg_300,noise_variance"
        );
        assert_eq!(text.lines().count(), 3);
    }
}
