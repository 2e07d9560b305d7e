//! Policy evaluation: rollouts folded into per-episode and per-hour
//! metrics, with CSV writers matching the command-line outputs.

use std::io::Write;

use crate::env::{rollout, EnvState, Environment, JointAction};
use crate::radio::CoverageMap;
use crate::scenario::Scenario;

use super::SolverError;

/// One evaluated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub ep_return: f64,
    pub served_total: u64,
    pub sustainability_violations: u64,
    pub service_violations: u64,
    pub harvested_wh: f64,
    pub consumed_wh: f64,
}

/// Per-hour aggregates across the evaluated episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyStat {
    pub hour: usize,
    pub mean_n_srv: f64,
    /// Served users accumulated through the end of this hour, averaged
    /// over episodes; nondecreasing in the hour.
    pub mean_cum_served: f64,
    pub mean_harvested_wh: f64,
    pub mean_consumed_wh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub per_episode: Vec<EpisodeSummary>,
    pub hourly: Vec<HourlyStat>,
    pub mean_return: f64,
    pub min_return: f64,
    /// Fleet harvest minus consumption summed over all episodes, Wh.
    pub net_energy_wh: f64,
}

impl EvalMetrics {
    /// One CSV row per evaluated episode.
    pub fn write_metrics_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "episode",
            "return",
            "served_total",
            "sustainability_violations",
            "service_violations",
            "e_h",
            "e_c",
        ])?;
        for e in &self.per_episode {
            w.write_record(&[
                e.episode.to_string(),
                format!("{:.6}", e.ep_return),
                e.served_total.to_string(),
                e.sustainability_violations.to_string(),
                e.service_violations.to_string(),
                format!("{:.6}", e.harvested_wh),
                format!("{:.6}", e.consumed_wh),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One CSV row per hour: serving counts, accumulated served users and
    /// the energy ledger.
    pub fn write_hourly_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["hour", "mean_n_srv", "cum_served_users", "e_h", "e_c"])?;
        for h in &self.hourly {
            w.write_record(&[
                h.hour.to_string(),
                format!("{:.6}", h.mean_n_srv),
                format!("{:.6}", h.mean_cum_served),
                format!("{:.6}", h.mean_harvested_wh),
                format!("{:.6}", h.mean_consumed_wh),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rolls `episodes` episodes under `policy` and aggregates the metrics.
/// The dynamics are deterministic, so a deterministic policy yields
/// identical episodes; the episode count exists for stochastic policies.
pub fn evaluate<F>(
    scenario: &Scenario,
    map: &CoverageMap,
    episodes: usize,
    mut policy: F,
) -> Result<EvalMetrics, SolverError>
where
    F: FnMut(&EnvState) -> JointAction,
{
    let mut env = Environment::new(scenario, map)?;
    let horizon = scenario.horizon_t;
    let mut per_episode = Vec::with_capacity(episodes);
    let mut srv_sum = vec![0.0f64; horizon];
    let mut cum_sum = vec![0.0f64; horizon];
    let mut eh_sum = vec![0.0f64; horizon];
    let mut ec_sum = vec![0.0f64; horizon];
    let mut net = 0.0;

    for episode in 0..episodes {
        let trace = rollout(&mut env, &mut policy)?;
        let mut cum = 0.0;
        for (t, rec) in trace.records.iter().enumerate() {
            srv_sum[t] += rec.outcome.n_srv as f64;
            cum += rec.outcome.served_users as f64;
            cum_sum[t] += cum;
            eh_sum[t] += rec.outcome.harvested_wh;
            ec_sum[t] += rec.outcome.consumed_wh;
        }
        let harvested: f64 = trace.records.iter().map(|r| r.outcome.harvested_wh).sum();
        let consumed: f64 = trace.records.iter().map(|r| r.outcome.consumed_wh).sum();
        net += harvested - consumed;
        per_episode.push(EpisodeSummary {
            episode,
            ep_return: trace.total_return(),
            served_total: trace.total_served(),
            sustainability_violations: trace.sustainability_violation_count(),
            service_violations: trace.service_violation_count(),
            harvested_wh: harvested,
            consumed_wh: consumed,
        });
    }

    let denom = episodes.max(1) as f64;
    let hourly = (0..horizon)
        .map(|hour| HourlyStat {
            hour,
            mean_n_srv: srv_sum[hour] / denom,
            mean_cum_served: cum_sum[hour] / denom,
            mean_harvested_wh: eh_sum[hour] / denom,
            mean_consumed_wh: ec_sum[hour] / denom,
        })
        .collect();
    let mean_return = per_episode.iter().map(|e| e.ep_return).sum::<f64>() / denom;
    let min_return = per_episode
        .iter()
        .map(|e| e.ep_return)
        .fold(f64::INFINITY, f64::min);

    Ok(EvalMetrics {
        per_episode,
        hourly,
        mean_return,
        min_return,
        net_energy_wh: net,
    })
}
