//! Assumed reward family, true data-generating processes and grid argmax helpers.
//!
//! Actions live on a uniform finite grid. The assumed family is the quadratic
//! `θ₁ + θ₂·a + θ₃·a²` with known Gaussian noise; the true process may be a
//! quadratic (correct specification), a kinked piecewise-linear function, or a
//! quadratic with a notch cut out around its vertex.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_LO: f64 = -2.0;
pub const DEFAULT_GRID_HI: f64 = 2.0;
pub const DEFAULT_GRID_POINTS: usize = 401;

/// Default depth of the notch when a configuration leaves it unset.
pub const DEFAULT_NOTCH_DEPTH: f64 = 1.0;

/// Absolute slack on the notch boundary so that grid points that are
/// mathematically on the edge (e.g. 1.1 for a notch `[0.9, 1.1]`) count as inside.
pub const NOTCH_EDGE_TOL: f64 = 1e-9;

/// `ln(√(2π))`
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Uniform grid of `n` actions spanning `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct ActionGrid {
    lo: f64,
    hi: f64,
    points: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct GridSpec {
    lo: f64,
    hi: f64,
    n: usize,
}

impl TryFrom<GridSpec> for ActionGrid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        ActionGrid::new(spec.lo, spec.hi, spec.n)
    }
}

impl From<ActionGrid> for GridSpec {
    fn from(grid: ActionGrid) -> Self {
        GridSpec {
            lo: grid.lo,
            hi: grid.hi,
            n: grid.len(),
        }
    }
}

impl ActionGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "action grid needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "action grid needs at least 2 points, got {n}"
            )));
        }
        let last = (n - 1) as f64;
        // Weighted form keeps integer-valued numerators exact, so e.g. 0.9 lands on 0.9.
        let points = (0..n)
            .map(|i| {
                let i = i as f64;
                (lo * (last - i) + hi * i) / last
            })
            .collect();
        Ok(Self { lo, hi, points })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn action(&self, index: usize) -> f64 {
        self.points[index]
    }
}

impl Default for ActionGrid {
    fn default() -> Self {
        ActionGrid::new(DEFAULT_GRID_LO, DEFAULT_GRID_HI, DEFAULT_GRID_POINTS)
            .expect("default grid is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `θ₁ + θ₂·a + θ₃·a²`
    Quadratic,
}

impl FamilyKind {
    pub fn arity(self) -> usize {
        match self {
            FamilyKind::Quadratic => 3,
        }
    }
}

/// The decision maker's assumed reward model with known noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFamily {
    pub kind: FamilyKind,
    pub sigma: f64,
}

impl ModelFamily {
    pub fn new(kind: FamilyKind, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::NonPositiveSigma(sigma));
        }
        Ok(Self { kind, sigma })
    }

    pub fn quadratic(sigma: f64) -> Result<Self> {
        Self::new(FamilyKind::Quadratic, sigma)
    }

    pub fn arity(&self) -> usize {
        self.kind.arity()
    }

    fn check_arity(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.arity() {
            return Err(Error::InvalidParameter(format!(
                "{:?} family expects {} coefficients, got {}",
                self.kind,
                self.arity(),
                theta.len()
            )));
        }
        Ok(())
    }

    /// Model mean without the arity check; callers guarantee `theta.len() == arity`.
    #[inline]
    pub(crate) fn mean_unchecked(&self, theta: &[f64], a: f64) -> f64 {
        match self.kind {
            FamilyKind::Quadratic => theta[0] + theta[1] * a + theta[2] * a * a,
        }
    }
}

/// Noise-free model mean `f_θ(a)`.
pub fn expected_reward(family: &ModelFamily, theta: &[f64], a: f64) -> Result<f64> {
    family.check_arity(theta)?;
    Ok(family.mean_unchecked(theta, a))
}

/// Shape of the true mean function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpKind {
    /// Quadratic truth; with the quadratic family this is the correctly specified case.
    Quadratic { theta: [f64; 3] },
    /// `β₁(a−α₁)+α₂` left of the kink `α₁`, `β₂(a−α₁)+α₂` from the kink on.
    PiecewiseLinear {
        alpha1: f64,
        alpha2: f64,
        beta1: f64,
        beta2: f64,
    },
    /// Quadratic lowered by `depth` on `[v−δ, v+δ]`, `v = −θ₂/(2θ₃)` the vertex.
    NotchedQuadratic {
        theta: [f64; 3],
        delta: f64,
        #[serde(default = "default_notch_depth")]
        depth: f64,
    },
}

fn default_notch_depth() -> f64 {
    DEFAULT_NOTCH_DEPTH
}

/// The true reward process `R = g(a) + σ·ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueDgp {
    pub kind: DgpKind,
    pub sigma: f64,
}

impl TrueDgp {
    /// Validates the kind. `sigma = 0` is accepted to allow noise-free runs.
    pub fn new(kind: DgpKind, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "true noise scale must be finite and nonnegative, got {sigma}"
            )));
        }
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match &kind {
            DgpKind::Quadratic { theta } => {
                if !finite(theta) {
                    return Err(Error::InvalidParameter("non-finite quadratic coefficient".into()));
                }
            }
            DgpKind::PiecewiseLinear {
                alpha1,
                alpha2,
                beta1,
                beta2,
            } => {
                if !finite(&[*alpha1, *alpha2, *beta1, *beta2]) {
                    return Err(Error::InvalidParameter("non-finite piecewise coefficient".into()));
                }
                if beta1 == beta2 {
                    return Err(Error::InvalidParameter(format!(
                        "piecewise-linear truth needs distinct slopes, got beta1 = beta2 = {beta1}"
                    )));
                }
            }
            DgpKind::NotchedQuadratic {
                theta,
                delta,
                depth,
            } => {
                if !finite(theta) || !depth.is_finite() {
                    return Err(Error::InvalidParameter("non-finite notched coefficient".into()));
                }
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "notch half-width must be positive, got {delta}"
                    )));
                }
                if theta[2] == 0.0 {
                    return Err(Error::InvalidParameter(
                        "notched quadratic needs a nonzero curvature to have a vertex".into(),
                    ));
                }
            }
        }
        Ok(Self { kind, sigma })
    }

    /// Center of the notch for [`DgpKind::NotchedQuadratic`].
    pub fn notch_center(&self) -> Option<f64> {
        match &self.kind {
            DgpKind::NotchedQuadratic { theta, .. } => Some(-theta[1] / (2.0 * theta[2])),
            _ => None,
        }
    }
}

fn quadratic(theta: &[f64; 3], a: f64) -> f64 {
    theta[0] + theta[1] * a + theta[2] * a * a
}

/// Noise-free true mean `g(a)`.
pub fn true_mean(dgp: &TrueDgp, a: f64) -> f64 {
    match &dgp.kind {
        DgpKind::Quadratic { theta } => quadratic(theta, a),
        DgpKind::PiecewiseLinear {
            alpha1,
            alpha2,
            beta1,
            beta2,
        } => {
            let slope = if a < *alpha1 { beta1 } else { beta2 };
            slope * (a - alpha1) + alpha2
        }
        DgpKind::NotchedQuadratic {
            theta,
            delta,
            depth,
        } => {
            let center = -theta[1] / (2.0 * theta[2]);
            let base = quadratic(theta, a);
            if (a - center).abs() <= delta + NOTCH_EDGE_TOL {
                base - depth
            } else {
                base
            }
        }
    }
}

/// One reward draw `g(a) + σ·z`, `z ~ N(0, 1)` from `rng`.
pub fn sample_reward<R: Rng + ?Sized>(dgp: &TrueDgp, a: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    true_mean(dgp, a) + dgp.sigma * z
}

/// Gaussian log-density of `r` around `mean`; no validation, `sigma > 0` assumed.
#[inline]
pub fn gaussian_log_density(r: f64, mean: f64, sigma: f64) -> f64 {
    let z = (r - mean) / sigma;
    -0.5 * z * z - sigma.ln() - LN_SQRT_2PI
}

pub fn log_likelihood(family: &ModelFamily, theta: &[f64], a: f64, r: f64) -> Result<f64> {
    if !(family.sigma > 0.0) {
        return Err(Error::NonPositiveSigma(family.sigma));
    }
    let mean = expected_reward(family, theta, a)?;
    Ok(gaussian_log_density(r, mean, family.sigma))
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax_index<I: IntoIterator<Item = f64>>(values: I) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value || i == 0 {
            best = i;
            best_value = v;
        }
    }
    best
}

pub fn oracle_action_index(family: &ModelFamily, theta: &[f64], grid: &ActionGrid) -> Result<usize> {
    family.check_arity(theta)?;
    Ok(argmax_index(
        grid.points().iter().map(|&a| family.mean_unchecked(theta, a)),
    ))
}

/// Grid action maximizing the model mean under `theta`.
pub fn oracle_action(family: &ModelFamily, theta: &[f64], grid: &ActionGrid) -> Result<f64> {
    oracle_action_index(family, theta, grid).map(|i| grid.action(i))
}

pub fn true_best_action_index(dgp: &TrueDgp, grid: &ActionGrid) -> usize {
    argmax_index(grid.points().iter().map(|&a| true_mean(dgp, a)))
}

/// Grid action maximizing the true mean.
pub fn true_best_action(dgp: &TrueDgp, grid: &ActionGrid) -> f64 {
    grid.action(true_best_action_index(dgp, grid))
}

/// Largest per-step regret attainable on the grid.
pub fn max_regret_gap(dgp: &TrueDgp, grid: &ActionGrid) -> f64 {
    let means: Vec<f64> = grid.points().iter().map(|&a| true_mean(dgp, a)).collect();
    let best = means[argmax_index(means.iter().copied())];
    means.iter().map(|m| best - m).fold(0.0, f64::max)
}

/// Finite candidate parameter set with a strictly positive prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct ParamSpace {
    params: Vec<Vec<f64>>,
    prior: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSpace {
    params: Vec<Vec<f64>>,
    prior: Vec<f64>,
}

impl TryFrom<RawSpace> for ParamSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        ParamSpace::new(raw.params, raw.prior)
    }
}

/// Tolerance on the prior's total mass.
pub const PRIOR_SUM_TOL: f64 = 1e-12;

impl ParamSpace {
    pub fn new(params: Vec<Vec<f64>>, prior: Vec<f64>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidParameter("parameter space is empty".into()));
        }
        if params.len() != prior.len() {
            return Err(Error::InvalidParameter(format!(
                "{} parameters but {} prior weights",
                params.len(),
                prior.len()
            )));
        }
        let arity = params[0].len();
        if arity == 0 {
            return Err(Error::InvalidParameter("parameter vectors are empty".into()));
        }
        for (i, p) in params.iter().enumerate() {
            if p.len() != arity {
                return Err(Error::InvalidParameter(format!(
                    "parameter {i} has {} coefficients, expected {arity}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("parameter {i} is not finite")));
            }
            if let Some(j) = params[..i].iter().position(|q| q == p) {
                return Err(Error::InvalidParameter(format!(
                    "parameters {j} and {i} are duplicates"
                )));
            }
        }
        if let Some(i) = prior.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "prior weight {i} must be positive, got {}",
                prior[i]
            )));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "prior weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { params, prior })
    }

    pub fn uniform(params: Vec<Vec<f64>>) -> Result<Self> {
        let k = params.len().max(1);
        let prior = vec![1.0 / k as f64; params.len()];
        Self::new(params, prior)
    }

    /// Cartesian product of per-coordinate value lists (last coordinate varies
    /// fastest) with a uniform prior.
    pub fn from_coordinate_grid(coords: &[Vec<f64>]) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|c| c.is_empty()) {
            return Err(Error::InvalidParameter(
                "coordinate grid needs at least one value per coordinate".into(),
            ));
        }
        let mut params: Vec<Vec<f64>> = vec![Vec::new()];
        for values in coords {
            params = params
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        Self::uniform(params)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.params[0].len()
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn param(&self, index: usize) -> &[f64] {
        &self.params[index]
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// Index of an exact parameter vector, if present.
    pub fn position(&self, theta: &[f64]) -> Option<usize> {
        self.params.iter().position(|p| p.as_slice() == theta)
    }

    pub fn prior_mass(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.prior[i]).sum()
    }

    pub fn check_family(&self, family: &ModelFamily) -> Result<()> {
        if self.arity() != family.arity() {
            return Err(Error::InvalidParameter(format!(
                "parameter space has arity {} but the {:?} family needs {}",
                self.arity(),
                family.kind,
                family.arity()
            )));
        }
        Ok(())
    }

    /// Model means for every parameter at every grid action, `[param][action]`.
    pub fn mean_table(&self, family: &ModelFamily, grid: &ActionGrid) -> Result<Vec<Vec<f64>>> {
        self.check_family(family)?;
        Ok(self
            .params
            .iter()
            .map(|p| {
                grid.points()
                    .iter()
                    .map(|&a| family.mean_unchecked(p, a))
                    .collect()
            })
            .collect())
    }
}
