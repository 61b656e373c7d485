use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pseudo_truth::{DEFAULT_R_CLIP, DEFAULT_TOL};
use crate::reward_models::{ActionGrid, DgpKind, FamilyKind, ModelFamily, ParamSpace, TrueDgp};
use crate::thompson::{EpisodeSettings, Scenario};

/// How the configured `sigma` is read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// `sigma` is the noise standard deviation.
    #[default]
    Std,
    /// `sigma` is the noise variance.
    Var,
}

impl std::str::FromStr for SigmaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "std" => Ok(SigmaMode::Std),
            "var" => Ok(SigmaMode::Var),
            other => Err(Error::InvalidConfig(format!(
                "sigma mode must be `std` or `var`, got `{other}`"
            ))),
        }
    }
}

/// Candidate parameter set as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamSpaceSpec {
    /// Cartesian product of per-coefficient values, uniform prior.
    Grid { coords: Vec<Vec<f64>> },
    /// Explicit parameter vectors; uniform prior when `prior` is omitted.
    Explicit {
        params: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior: Option<Vec<f64>>,
    },
}

impl ParamSpaceSpec {
    pub fn build(&self) -> Result<ParamSpace> {
        match self {
            ParamSpaceSpec::Grid { coords } => ParamSpace::from_coordinate_grid(coords),
            ParamSpaceSpec::Explicit { params, prior: None } => ParamSpace::uniform(params.clone()),
            ParamSpaceSpec::Explicit {
                params,
                prior: Some(prior),
            } => ParamSpace::new(params.clone(), prior.clone()),
        }
    }
}

fn default_family() -> FamilyKind {
    FamilyKind::Quadratic
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_r_clip() -> f64 {
    DEFAULT_R_CLIP
}

/// A complete experiment description, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_family")]
    pub family: FamilyKind,
    pub dgp: DgpKind,
    pub param_space: ParamSpaceSpec,
    #[serde(default)]
    pub actions: ActionGrid,
    pub sigma: f64,
    #[serde(default)]
    pub sigma_mode: SigmaMode,
    pub horizon: usize,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Half-open `(t_start, t_end]` windows for action histograms; quarters of `[0, T]` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<(usize, usize)>>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_r_clip")]
    pub r_clip: f64,
    /// First snapshot used for the decay-rate fit; `T / 10` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_t_min: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::notched()
    }
}

impl ExperimentConfig {
    /// Notched quadratic truth (vertex at 1, half-width 0.1) against the
    /// 36-point coefficient grid. The truth is not in the family.
    pub fn notched() -> Self {
        Self {
            family: FamilyKind::Quadratic,
            dgp: DgpKind::NotchedQuadratic {
                theta: [0.0, 2.0, -1.0],
                delta: 0.1,
                depth: crate::reward_models::DEFAULT_NOTCH_DEPTH,
            },
            param_space: ParamSpaceSpec::Grid {
                coords: vec![
                    vec![-1.0, -0.5, -0.1],
                    vec![1.0, 1.5, 2.0, 2.5],
                    vec![-1.5, -1.0, -0.5],
                ],
            },
            actions: ActionGrid::default(),
            sigma: 0.1,
            sigma_mode: SigmaMode::Std,
            horizon: 20_000,
            replications: 50,
            base_seed: 0,
            snapshot_every: None,
            output_dir: None,
            windows: None,
            tol: DEFAULT_TOL,
            r_clip: DEFAULT_R_CLIP,
            fit_t_min: None,
        }
    }

    /// Piecewise-linear truth with kink at 0 against the same coefficient grid.
    pub fn piecewise() -> Self {
        Self {
            dgp: DgpKind::PiecewiseLinear {
                alpha1: 0.0,
                alpha2: 1.0,
                beta1: 2.0,
                beta2: 0.5,
            },
            ..Self::notched()
        }
    }

    /// Correctly specified: quadratic truth `(0, 2, −1)` inside a 9-point space.
    pub fn control() -> Self {
        Self {
            dgp: DgpKind::Quadratic {
                theta: [0.0, 2.0, -1.0],
            },
            param_space: ParamSpaceSpec::Grid {
                coords: vec![vec![0.0], vec![1.5, 2.0, 2.5], vec![-1.5, -1.0, -0.5]],
            },
            sigma: 0.3,
            horizon: 5_000,
            ..Self::notched()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // a config copy written next to experiment outputs wraps the config with its digest
        let value: serde_json::Value = serde_json::from_str(text)?;
        let inner = match value {
            serde_json::Value::Object(mut map) if map.contains_key("config") && map.contains_key("digest") => {
                map.remove("config").unwrap_or_default()
            }
            other => other,
        };
        serde_json::from_value(inner).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Input {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Noise standard deviation after applying `sigma_mode`.
    pub fn sigma_std(&self) -> f64 {
        match self.sigma_mode {
            SigmaMode::Std => self.sigma,
            SigmaMode::Var => self.sigma.sqrt(),
        }
    }

    /// Histogram windows, defaulting to four equal quarters of `[0, T]`.
    pub fn resolved_windows(&self) -> Vec<(usize, usize)> {
        match &self.windows {
            Some(w) => w.clone(),
            None => {
                let t = self.horizon;
                (0..4).map(|q| (q * t / 4, (q + 1) * t / 4)).filter(|(s, e)| e > s).collect()
            }
        }
    }

    pub fn fit_start(&self) -> usize {
        self.fit_t_min.unwrap_or(self.horizon / 10)
    }

    pub fn episode_settings(&self) -> EpisodeSettings {
        EpisodeSettings {
            horizon: self.horizon,
            snapshot_every: self.snapshot_every,
        }
    }

    /// Checks every invariant and builds the scenario.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidConfig("snapshot_every must be at least 1".into()));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::NonPositiveSigma(self.sigma));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be nonnegative, got {}", self.tol)));
        }
        if !(self.r_clip.is_finite() && self.r_clip > 0.0) {
            return Err(Error::InvalidConfig(format!("r_clip must be positive, got {}", self.r_clip)));
        }
        let windows = self.resolved_windows();
        for &(s, e) in &windows {
            if s >= e || e > self.horizon {
                return Err(Error::InvalidConfig(format!(
                    "window ({s}, {e}] must be nonempty and lie within [0, {}]",
                    self.horizon
                )));
            }
        }
        if self.fit_start() > self.horizon {
            return Err(Error::InvalidConfig(format!(
                "fit_t_min {} exceeds the horizon {}",
                self.fit_start(),
                self.horizon
            )));
        }
        let sigma = self.sigma_std();
        let scenario = Scenario::new(
            self.param_space.build()?,
            ModelFamily::new(self.family, sigma)?,
            TrueDgp::new(self.dgp.clone(), sigma)?,
            self.actions.clone(),
        )?;
        let settings = self.episode_settings();
        Ok(ResolvedConfig {
            digest: self.digest(),
            scenario,
            settings,
            windows,
            config: self.clone(),
        })
    }

    /// Hex SHA-256 of the config's JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A validated config together with everything derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub scenario: Scenario,
    pub settings: EpisodeSettings,
    pub windows: Vec<(usize, usize)>,
    pub digest: String,
}

/// The form in which a config is copied next to experiment outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigCopy {
    pub config: ExperimentConfig,
    pub digest: String,
}
