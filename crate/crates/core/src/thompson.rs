//! The Thompson Sampling loop and per-step pseudo-regret accounting.
//!
//! Each step samples a parameter index from the posterior, plays that
//! parameter's grid argmax, draws a reward from the true process and updates
//! the posterior. Regret increments are gaps in the *true* mean, so they carry
//! no reward noise.
//!
//! Randomness comes from a single ChaCha20 stream per episode
//! ([`rng_from_seed`]); the same `(scenario, settings, seed)` triple yields a
//! bit-identical [`Trace`] on every platform.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::posterior::Posterior;
use crate::reward_models::{
    oracle_action_index, sample_reward, true_best_action_index, true_mean, ActionGrid,
    ModelFamily, ParamSpace, TrueDgp,
};

/// Random stream used for every episode.
pub type SimRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Number of snapshot intervals used when no cadence is configured.
pub const DEFAULT_SNAPSHOT_INTERVALS: usize = 200;

/// Everything that defines the decision problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub space: ParamSpace,
    pub family: ModelFamily,
    pub dgp: TrueDgp,
    pub grid: ActionGrid,
}

impl Scenario {
    pub fn new(space: ParamSpace, family: ModelFamily, dgp: TrueDgp, grid: ActionGrid) -> Result<Self> {
        space.check_family(&family)?;
        Ok(Self {
            space,
            family,
            dgp,
            grid,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSettings {
    pub horizon: usize,
    /// Steps between posterior snapshots; `None` means `⌈T / 200⌉`.
    pub snapshot_every: Option<usize>,
}

impl EpisodeSettings {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            snapshot_every: None,
        }
    }

    pub fn cadence(&self) -> usize {
        self.snapshot_every
            .unwrap_or_else(|| self.horizon.div_ceil(DEFAULT_SNAPSHOT_INTERVALS))
            .max(1)
    }

    /// Snapshot times: 0, every cadence steps, and the horizon.
    pub fn snapshot_times(&self) -> Vec<usize> {
        let step = self.cadence();
        let mut times: Vec<usize> = (0..=self.horizon).step_by(step).collect();
        if times.last() != Some(&self.horizon) {
            times.push(self.horizon);
        }
        times
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidConfig("snapshot cadence must be at least 1".into()));
        }
        Ok(())
    }
}

/// One decision: `t` counts from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub sampled_index: usize,
    pub action_index: usize,
    pub action: f64,
    pub reward: f64,
    pub regret_increment: f64,
}

/// Normalized posterior after `t` observations, kept in log form.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: usize,
    pub log_weights: Vec<f64>,
}

impl Snapshot {
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub config_digest: String,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn cumulative_regret(&self) -> Vec<f64> {
        self.steps
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s.regret_increment;
                Some(*acc)
            })
            .collect()
    }

    /// Mean regret increment over the first `t` steps.
    pub fn average_regret(&self, t: usize) -> Result<f64> {
        average_regret(self, t)
    }
}

pub fn average_regret(trace: &Trace, t: usize) -> Result<f64> {
    if t == 0 || t > trace.steps.len() {
        return Err(Error::IndexOutOfRange {
            index: t,
            len: trace.steps.len(),
        });
    }
    let total: f64 = trace.steps[..t].iter().map(|s| s.regret_increment).sum();
    Ok(total / t as f64)
}

/// Scenario with model means, argmax actions and regret gaps tabulated on the grid.
#[derive(Debug, Clone)]
pub struct PreparedScenario<'a> {
    scenario: &'a Scenario,
    /// `[action][param]`
    means_by_action: Vec<Vec<f64>>,
    oracle_index: Vec<usize>,
    regret_by_action: Vec<f64>,
}

impl<'a> PreparedScenario<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let Scenario {
            space,
            family,
            dgp,
            grid,
        } = scenario;
        if !(family.sigma > 0.0) {
            return Err(Error::NonPositiveSigma(family.sigma));
        }
        let table = space.mean_table(family, grid)?;
        let means_by_action = (0..grid.len())
            .map(|a| table.iter().map(|row| row[a]).collect())
            .collect();
        let oracle_index = space
            .params()
            .iter()
            .map(|p| oracle_action_index(family, p, grid))
            .collect::<Result<Vec<_>>>()?;
        let best = true_mean(dgp, grid.action(true_best_action_index(dgp, grid)));
        let regret_by_action = grid
            .points()
            .iter()
            .map(|&a| (best - true_mean(dgp, a)).max(0.0))
            .collect();
        Ok(Self {
            scenario,
            means_by_action,
            oracle_index,
            regret_by_action,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    /// Grid index of each parameter's preferred action.
    pub fn oracle_indices(&self) -> &[usize] {
        &self.oracle_index
    }

    /// One Thompson step at time `t`, updating `post` in place.
    pub fn ts_step<R: Rng + ?Sized>(&self, post: &mut Posterior, rng: &mut R, t: usize) -> Result<StepRecord> {
        let sampled_index = post.sample_index(rng)?;
        let action_index = self.oracle_index[sampled_index];
        let action = self.scenario.grid.action(action_index);
        let reward = sample_reward(&self.scenario.dgp, action, rng);
        post.update_with_means(
            self.means_by_action[action_index].iter().copied(),
            reward,
            self.scenario.family.sigma,
        )?;
        Ok(StepRecord {
            t,
            sampled_index,
            action_index,
            action,
            reward,
            regret_increment: self.regret_by_action[action_index],
        })
    }
}

/// One Thompson step evaluated straight from the model definitions, without
/// tabulation. Produces the same record as [`PreparedScenario::ts_step`].
pub fn ts_step<R: Rng + ?Sized>(
    post: &mut Posterior,
    scenario: &Scenario,
    rng: &mut R,
    t: usize,
) -> Result<StepRecord> {
    let Scenario {
        space,
        family,
        dgp,
        grid,
    } = scenario;
    let sampled_index = post.sample_index(rng)?;
    let action_index = oracle_action_index(family, space.param(sampled_index), grid)?;
    let action = grid.action(action_index);
    let reward = sample_reward(dgp, action, rng);
    post.update(space, family, action, reward)?;
    let best = true_mean(dgp, grid.action(true_best_action_index(dgp, grid)));
    Ok(StepRecord {
        t,
        sampled_index,
        action_index,
        action,
        reward,
        regret_increment: (best - true_mean(dgp, action)).max(0.0),
    })
}

/// Hex SHA-256 of the scenario, episode settings and seed.
pub fn config_digest(scenario: &Scenario, settings: &EpisodeSettings, seed: u64) -> String {
    let payload = serde_json::json!({
        "scenario": scenario,
        "settings": settings,
        "seed": seed,
    });
    let bytes = serde_json::to_vec(&payload).expect("scenario serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs `settings.horizon` Thompson steps from the prior.
pub fn run_episode(scenario: &Scenario, settings: &EpisodeSettings, seed: u64) -> Result<Trace> {
    settings.validate()?;
    let prepared = PreparedScenario::new(scenario)?;
    let mut rng = rng_from_seed(seed);
    let mut post = Posterior::new(&scenario.space);

    let snapshot_times = settings.snapshot_times();
    let mut next_snapshot = snapshot_times.iter().copied().peekable();
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut steps = Vec::with_capacity(settings.horizon);

    for t in 0..=settings.horizon {
        if t > 0 {
            steps.push(prepared.ts_step(&mut post, &mut rng, t)?);
        }
        if next_snapshot.peek() == Some(&t) {
            next_snapshot.next();
            snapshots.push(Snapshot {
                t,
                log_weights: post.normalized_log_weights()?,
            });
        }
    }

    Ok(Trace {
        steps,
        snapshots,
        config_digest: config_digest(scenario, settings, seed),
    })
}
