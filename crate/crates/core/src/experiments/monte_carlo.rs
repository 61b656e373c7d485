use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{log_mean_series, AggregateSeries};
use super::config::ResolvedConfig;
use crate::error::{Error, Result};
use crate::posterior::Posterior;
use crate::pseudo_truth::{analyze, PseudoTruthReport};
use crate::thompson::{rng_from_seed, EpisodeSettings, PreparedScenario, Scenario};

/// Action counts over the steps `t_start < t ≤ t_end`, summed over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionHistogram {
    pub t_start: usize,
    pub t_end: usize,
    /// One count per grid action.
    pub counts: Vec<u64>,
}

/// What one replication contributes, recorded at each snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub map_index: Vec<usize>,
    /// Average regret over the first `t` steps; 0 at `t = 0`.
    pub avg_regret: Vec<f64>,
    pub dagger_mass: Vec<f64>,
    /// `ln(1 − π_t(Θ†))`, `−∞` when nothing is excluded.
    pub log_outside_mass: Vec<f64>,
    /// `[window][action]`
    pub window_counts: Vec<Vec<u64>>,
}

/// Runs one episode from the prior, keeping only the per-snapshot statistics.
/// Uses the same random stream as [`crate::thompson::run_episode`] with this seed.
pub fn run_replication(
    prepared: &PreparedScenario<'_>,
    settings: &EpisodeSettings,
    seed: u64,
    dagger: &[usize],
    windows: &[(usize, usize)],
) -> Result<ReplicationSummary> {
    let scenario = prepared.scenario();
    let outside: Vec<usize> = (0..scenario.space.len()).filter(|i| !dagger.contains(i)).collect();
    let times = settings.snapshot_times();
    let mut next = times.iter().copied().peekable();
    let mut rng = rng_from_seed(seed);
    let mut post = Posterior::new(&scenario.space);
    let mut out = ReplicationSummary {
        map_index: Vec::with_capacity(times.len()),
        avg_regret: Vec::with_capacity(times.len()),
        dagger_mass: Vec::with_capacity(times.len()),
        log_outside_mass: Vec::with_capacity(times.len()),
        window_counts: vec![vec![0; scenario.grid.len()]; windows.len()],
    };
    let mut cum_regret = 0.0;
    for t in 0..=settings.horizon {
        if t > 0 {
            let step = prepared.ts_step(&mut post, &mut rng, t)?;
            cum_regret += step.regret_increment;
            for (w, &(start, end)) in windows.iter().enumerate() {
                if t > start && t <= end {
                    out.window_counts[w][step.action_index] += 1;
                }
            }
        }
        if next.peek() == Some(&t) {
            next.next();
            out.map_index.push(post.map_estimate());
            out.avg_regret.push(if t == 0 { 0.0 } else { cum_regret / t as f64 });
            out.dagger_mass.push(post.mass_on(dagger)?);
            out.log_outside_mass.push(if outside.is_empty() {
                f64::NEG_INFINITY
            } else {
                post.log_mass_on(&outside)?
            });
        }
    }
    Ok(out)
}

/// Aggregated output of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub times: Vec<usize>,
    pub replications: usize,
    /// One series per parameter coordinate: the MAP parameter's coordinate value.
    pub map_series: Vec<AggregateSeries>,
    /// MAP parameter index of each replication at the horizon.
    pub final_map_indices: Vec<usize>,
    pub regret_series: AggregateSeries,
    pub dagger_mass_series: AggregateSeries,
    /// `1 − π_t(Θ†)` per replication, aggregated.
    pub outside_mass_series: AggregateSeries,
    /// `ln mean(1 − π_t(Θ†))`, exact even after the mass underflows.
    pub outside_log_mean: Vec<f64>,
    pub action_histograms: Vec<ActionHistogram>,
    pub report: PseudoTruthReport,
}

impl MonteCarloResult {
    /// Cross-replication standard deviation of each MAP coordinate at the horizon.
    pub fn final_map_std(&self) -> Vec<f64> {
        self.map_series.iter().map(|s| *s.std.last().unwrap_or(&0.0)).collect()
    }
}

/// Runs `replications` episodes with seeds `base_seed + i`.
///
/// Episodes run in parallel; results are reduced in replication order, so the
/// output is identical for any thread count.
pub fn monte_carlo_scenario(
    scenario: &Scenario,
    settings: &EpisodeSettings,
    replications: usize,
    base_seed: u64,
    windows: &[(usize, usize)],
    tol: f64,
    r_clip: f64,
) -> Result<MonteCarloResult> {
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be at least 1".into()));
    }
    if settings.horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let (report, _) = analyze(scenario, tol, r_clip)?;
    let prepared = PreparedScenario::new(scenario)?;
    let dagger = report.theta_dagger.clone();
    let summaries = (0..replications)
        .into_par_iter()
        .map(|i| run_replication(&prepared, settings, base_seed.wrapping_add(i as u64), &dagger, windows))
        .collect::<Result<Vec<_>>>()?;

    let times = settings.snapshot_times();
    let space = &scenario.space;
    let map_series = (0..space.arity())
        .map(|k| {
            let rows = summaries
                .iter()
                .map(|s| s.map_index.iter().map(|&i| space.param(i)[k]).collect())
                .collect();
            AggregateSeries::from_replications(times.clone(), rows, false)
        })
        .collect::<Result<Vec<_>>>()?;
    let series = |f: &dyn Fn(&ReplicationSummary) -> Vec<f64>| {
        AggregateSeries::from_replications(times.clone(), summaries.iter().map(f).collect(), false)
    };
    let regret_series = series(&|s| s.avg_regret.clone())?;
    let dagger_mass_series = series(&|s| s.dagger_mass.clone())?;
    let outside_mass_series = series(&|s| s.log_outside_mass.iter().map(|l| l.exp()).collect())?;
    let log_rows: Vec<Vec<f64>> = summaries.iter().map(|s| s.log_outside_mass.clone()).collect();
    let outside_log_mean = log_mean_series(&log_rows);

    let action_histograms = windows
        .iter()
        .enumerate()
        .map(|(w, &(t_start, t_end))| {
            let mut counts = vec![0u64; scenario.grid.len()];
            for s in &summaries {
                for (c, x) in counts.iter_mut().zip(&s.window_counts[w]) {
                    *c += x;
                }
            }
            ActionHistogram { t_start, t_end, counts }
        })
        .collect();

    Ok(MonteCarloResult {
        final_map_indices: summaries
            .iter()
            .map(|s| *s.map_index.last().expect("horizon snapshot"))
            .collect(),
        times,
        replications,
        map_series,
        regret_series,
        dagger_mass_series,
        outside_mass_series,
        outside_log_mean,
        action_histograms,
        report,
    })
}

pub fn monte_carlo(resolved: &ResolvedConfig) -> Result<MonteCarloResult> {
    let cfg = &resolved.config;
    monte_carlo_scenario(
        &resolved.scenario,
        &resolved.settings,
        cfg.replications,
        cfg.base_seed,
        &resolved.windows,
        cfg.tol,
        cfg.r_clip,
    )
}
