//! Static KL analysis of a misspecified scenario.
//!
//! `Δ(θ, a)` is the KL divergence from the true reward law at action `a` to the
//! model law under `θ`; with equal-variance Gaussians it is the squared mean
//! gap over `2σ²`. From the fit table this module derives:
//!
//! - per-action rank classes of the parameters (best fit first),
//! - the pseudo-truth set: every parameter that no other parameter beats by a
//!   positive margin at *every* grid action,
//! - the uniform gap `ε`, the truncated log-likelihood-ratio bound `d`, and the
//!   resulting constants `(a, b)` of the bound `E[1 − π_t(Θ†)] ≤ a·e^{−b t}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward_models::{oracle_action_index, true_mean};
use crate::thompson::Scenario;

/// Absolute tolerance on KL values when deciding ties.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Reward range half-width, in noise standard deviations, used for `d`.
pub const DEFAULT_R_CLIP: f64 = 6.0;

/// KL divergence between `N(m1, σ²)` and `N(m2, σ²)`.
pub fn kl_gaussian(m1: f64, m2: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let gap = m1 - m2;
    Ok(gap * gap / (2.0 * sigma * sigma))
}

/// `Δ(θ, a)` for every parameter and grid action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTable {
    /// `[param][action]`
    pub delta: Vec<Vec<f64>>,
}

impl FitTable {
    pub fn n_params(&self) -> usize {
        self.delta.len()
    }

    pub fn n_actions(&self) -> usize {
        self.delta.first().map_or(0, Vec::len)
    }

    pub fn get(&self, theta: usize, action: usize) -> f64 {
        self.delta[theta][action]
    }

    /// `min_a [Δ(θ, a) − Δ(γ, a)]`: positive when `γ` fits strictly better everywhere.
    pub fn dominance_margin(&self, theta: usize, gamma: usize) -> f64 {
        self.delta[theta]
            .iter()
            .zip(&self.delta[gamma])
            .map(|(t, g)| t - g)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn fit_delta(scenario: &Scenario) -> Result<FitTable> {
    let Scenario {
        space,
        family,
        dgp,
        grid,
    } = scenario;
    let table = space.mean_table(family, grid)?;
    let truth: Vec<f64> = grid.points().iter().map(|&a| true_mean(dgp, a)).collect();
    let delta = table
        .iter()
        .map(|row| {
            row.iter()
                .zip(&truth)
                .map(|(&m, &g)| kl_gaussian(g, m, family.sigma))
                .collect()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(FitTable { delta })
}

/// Grid index of `φ(θ)`, the model's own argmax.
pub fn preferred_action(scenario: &Scenario, theta_index: usize) -> Result<usize> {
    let len = scenario.space.len();
    if theta_index >= len {
        return Err(Error::IndexOutOfRange {
            index: theta_index,
            len,
        });
    }
    oracle_action_index(&scenario.family, scenario.space.param(theta_index), &scenario.grid)
}

/// `φ(θ)` for every parameter.
pub fn preferred_actions(scenario: &Scenario) -> Result<Vec<usize>> {
    (0..scenario.space.len())
        .map(|i| preferred_action(scenario, i))
        .collect()
}

/// Sorted, deduplicated image of `phi`.
pub fn attainable_actions(phi: &[usize]) -> Vec<usize> {
    let mut out = phi.to_vec();
    out.sort_unstable();
    out.dedup();
    out
}

/// Groups `members` into rank classes at `action`, best fit first.
///
/// A class holds every member within `tol` of the class's smallest `Δ`.
pub fn partition_rank(fit: &FitTable, action: usize, members: &[usize], tol: f64) -> Vec<Vec<usize>> {
    let mut sorted = members.to_vec();
    sorted.sort_by(|&i, &j| fit.get(i, action).total_cmp(&fit.get(j, action)).then(i.cmp(&j)));
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    for i in sorted {
        let v = fit.get(i, action);
        match classes.last_mut() {
            Some(class) if v - anchor <= tol => class.push(i),
            _ => {
                anchor = v;
                classes.push(vec![i]);
            }
        }
    }
    for class in &mut classes {
        class.sort_unstable();
    }
    classes
}

/// Which parameters compete at an attainable action.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingScope {
    /// Every parameter is ranked at every attainable action.
    #[default]
    FullSet,
    /// Only parameters whose preferred action is `a` are ranked at `a`.
    PhiPreimage,
}

/// Rank classes at every attainable action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPartition {
    /// action index → classes, best first
    pub classes: BTreeMap<usize, Vec<Vec<usize>>>,
}

impl RankedPartition {
    pub fn build(fit: &FitTable, phi: &[usize], scope: RankingScope, tol: f64) -> Self {
        let all: Vec<usize> = (0..fit.n_params()).collect();
        let classes = attainable_actions(phi)
            .into_iter()
            .map(|a| {
                let members: Vec<usize> = match scope {
                    RankingScope::FullSet => all.clone(),
                    RankingScope::PhiPreimage => all.iter().copied().filter(|&i| phi[i] == a).collect(),
                };
                (a, partition_rank(fit, a, &members, tol))
            })
            .collect();
        Self { classes }
    }

    /// Zero-based class index of `theta` at `action`, if ranked there.
    pub fn rank_of(&self, action: usize, theta: usize) -> Option<usize> {
        self.classes
            .get(&action)?
            .iter()
            .position(|class| class.contains(&theta))
    }

    /// Number of classes at `action`.
    pub fn class_count(&self, action: usize) -> usize {
        self.classes.get(&action).map_or(0, Vec::len)
    }

    /// Union of the top classes over all attainable actions, sorted.
    pub fn top_class_union(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .classes
            .values()
            .filter_map(|c| c.first())
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Parameters that are best-fitting at some attainable action.
///
/// Always a subset of [`pseudo_truth_set`]; generally a strict one, because a
/// parameter can be second-best at every attainable action without any single
/// rival beating it everywhere.
pub fn top_class_union(scenario: &Scenario, scope: RankingScope, tol: f64) -> Result<Vec<usize>> {
    let fit = fit_delta(scenario)?;
    let phi = preferred_actions(scenario)?;
    Ok(RankedPartition::build(&fit, &phi, scope, tol).top_class_union())
}

/// Parameters not uniformly dominated in KL over the action grid.
///
/// `θ` is excluded iff some `γ` satisfies `Δ(θ, a) − Δ(γ, a) > tol` at every
/// grid action. Strict uniform dominance is a strict partial order, so each
/// excluded parameter is dominated by a member of the returned set; this is the
/// smallest set with that property.
pub fn pseudo_truth_from_fit(fit: &FitTable, tol: f64) -> Vec<usize> {
    let k = fit.n_params();
    (0..k)
        .filter(|&theta| !(0..k).any(|gamma| gamma != theta && fit.dominance_margin(theta, gamma) > tol))
        .collect()
}

pub fn pseudo_truth_set(scenario: &Scenario, tol: f64) -> Result<Vec<usize>> {
    Ok(pseudo_truth_from_fit(&fit_delta(scenario)?, tol))
}

/// `min_{θ∉Θ†} max_{θ†∈Θ†} min_a [Δ(θ, a) − Δ(θ†, a)]`.
pub fn epsilon_from_fit(fit: &FitTable, dagger: &[usize]) -> Result<f64> {
    let k = fit.n_params();
    if dagger.is_empty() {
        return Err(Error::InvalidParameter("pseudo-truth set is empty".into()));
    }
    if let Some(&index) = dagger.iter().find(|&&i| i >= k) {
        return Err(Error::IndexOutOfRange { index, len: k });
    }
    let mut excluded = (0..k).filter(|i| !dagger.contains(i)).peekable();
    if excluded.peek().is_none() {
        return Err(Error::NoExcludedParameters);
    }
    Ok(excluded
        .map(|theta| {
            dagger
                .iter()
                .map(|&d| fit.dominance_margin(theta, d))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min))
}

pub fn epsilon_gap(scenario: &Scenario, dagger: &[usize]) -> Result<f64> {
    epsilon_from_fit(&fit_delta(scenario)?, dagger)
}

/// Largest `|log f_θ(r|a) − log f_γ(r|a)|` over parameter pairs, grid actions,
/// and rewards `r` within `r_clip·σ` of the model means' range.
///
/// For equal-variance Gaussians the log ratio is `Δm·(r − m̄)/σ²`, linear in
/// `r`, so each pair's maximum sits at an end of the reward interval.
pub fn increment_bound_d(scenario: &Scenario, r_clip: f64) -> Result<f64> {
    if !(r_clip > 0.0 && r_clip.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "reward clip must be positive, got {r_clip}"
        )));
    }
    let Scenario {
        space,
        family,
        grid,
        ..
    } = scenario;
    let sigma = family.sigma;
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let table = space.mean_table(family, grid)?;
    let (lo, hi) = table
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| (lo.min(m), hi.max(m)));
    let (r_lo, r_hi) = (lo - r_clip * sigma, hi + r_clip * sigma);
    let var = sigma * sigma;
    let mut d: f64 = 0.0;
    for (i, row_i) in table.iter().enumerate() {
        for row_j in &table[i + 1..] {
            for (&mi, &mj) in row_i.iter().zip(row_j) {
                let gap = (mi - mj).abs();
                let mid = 0.5 * (mi + mj);
                let reach = (r_lo - mid).abs().max((r_hi - mid).abs());
                d = d.max(gap * reach / var);
            }
        }
    }
    Ok(d)
}

/// Constants of the concentration bound `E[1 − π_t(Θ†)] ≤ a·e^{−b t}`:
/// `a = 2·max{(1 − π₀(Θ†))/π₀(Θ†), 2(|Θ| − |Θ†|)}` and `b = min{ε/2, ε²/(8d²)}`.
pub fn concentration_bound_constants(
    prior_mass_dagger: f64,
    n_params: usize,
    n_dagger: usize,
    epsilon: f64,
    d: f64,
) -> Result<(f64, f64)> {
    if n_dagger == 0 || n_dagger > n_params {
        return Err(Error::InvalidParameter(format!(
            "pseudo-truth size {n_dagger} incompatible with {n_params} parameters"
        )));
    }
    let has_excluded = n_dagger < n_params;
    if !(prior_mass_dagger > 0.0 && prior_mass_dagger <= 1.0)
        || (has_excluded && prior_mass_dagger >= 1.0)
    {
        return Err(Error::InvalidParameter(format!(
            "prior mass of the pseudo-truth set must lie in (0, 1), got {prior_mass_dagger}"
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gap epsilon must be positive, got {epsilon}"
        )));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "increment bound d must be positive, got {d}"
        )));
    }
    let odds = (1.0 - prior_mass_dagger) / prior_mass_dagger;
    let outsiders = 2.0 * (n_params - n_dagger) as f64;
    let a = 2.0 * odds.max(outsiders);
    let b = (epsilon / 2.0).min(epsilon * epsilon / (8.0 * d * d));
    Ok((a, b))
}

/// Everything the static analysis reports about a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoTruthReport {
    pub theta_dagger: Vec<usize>,
    /// `None` when nothing is excluded.
    pub epsilon: Option<f64>,
    /// Truncated at `r_clip` noise standard deviations.
    pub d: f64,
    pub a_const: Option<f64>,
    pub b_const: Option<f64>,
    pub r_clip: f64,
    pub tol: f64,
    pub prior_mass_dagger: f64,
    /// Best-fitting parameters at attainable actions (full-set ranking).
    pub top_class_union: Vec<usize>,
    /// Attainable preferred actions, as grid indices.
    pub attainable_actions: Vec<usize>,
}

pub fn analyze(scenario: &Scenario, tol: f64, r_clip: f64) -> Result<(PseudoTruthReport, FitTable)> {
    let fit = fit_delta(scenario)?;
    let phi = preferred_actions(scenario)?;
    let theta_dagger = pseudo_truth_from_fit(&fit, tol);
    let d = increment_bound_d(scenario, r_clip)?;
    let prior_mass_dagger = scenario.space.prior_mass(&theta_dagger).min(1.0);
    let n = scenario.space.len();

    let (epsilon, a_const, b_const) = if theta_dagger.len() < n {
        let eps = epsilon_from_fit(&fit, &theta_dagger)?;
        let (a, b) = concentration_bound_constants(prior_mass_dagger, n, theta_dagger.len(), eps, d)?;
        (Some(eps), Some(a), Some(b))
    } else {
        (None, None, None)
    };

    let partition = RankedPartition::build(&fit, &phi, RankingScope::FullSet, tol);
    let report = PseudoTruthReport {
        theta_dagger,
        epsilon,
        d,
        a_const,
        b_const,
        r_clip,
        tol,
        prior_mass_dagger,
        top_class_union: partition.top_class_union(),
        attainable_actions: attainable_actions(&phi),
    };
    Ok((report, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward_models::{
        expected_reward, oracle_action_index, ActionGrid, DgpKind, ModelFamily, ParamSpace, TrueDgp,
    };

    fn scenario(params: Vec<Vec<f64>>, dgp: DgpKind, sigma: f64, grid: ActionGrid) -> Scenario {
        Scenario::new(
            ParamSpace::uniform(params).unwrap(),
            ModelFamily::quadratic(sigma).unwrap(),
            TrueDgp::new(dgp, sigma).unwrap(),
            grid,
        )
        .unwrap()
    }

    fn fit_from(rows: Vec<Vec<f64>>) -> FitTable {
        FitTable { delta: rows }
    }

    /// Trapezoid rule on `p log(p/q)` over ±12σ around both means.
    fn kl_by_quadrature(m1: f64, m2: f64, sigma: f64) -> f64 {
        let lo = m1.min(m2) - 12.0 * sigma;
        let hi = m1.max(m2) + 12.0 * sigma;
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let f = |x: f64| {
            let zp = (x - m1) / sigma;
            let zq = (x - m2) / sigma;
            let p = norm * (-0.5 * zp * zp).exp();
            // log(p/q) in closed form avoids 0/0 in the tails
            p * (0.5 * (zq * zq - zp * zp))
        };
        let inner: f64 = (1..n).map(|i| f(lo + i as f64 * h)).sum();
        h * (inner + 0.5 * (f(lo) + f(hi)))
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_gaussian(0.3, 0.3, 0.7).unwrap(), 0.0);
        assert!((kl_gaussian(1.0, 0.0, 0.1).unwrap() - 50.0).abs() < 1e-12);
        let q = kl_by_quadrature(2.0, -1.0, 1.0);
        assert!((q - 4.5).abs() < 1e-8);
        assert!((kl_gaussian(2.0, -1.0, 1.0).unwrap() - 4.5).abs() < 1e-15);
        assert!(kl_gaussian(0.0, 1.0, 0.0).is_err());
        assert!(kl_gaussian(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn fit_table_matches_hand_computation() {
        let grid = ActionGrid::new(-1.0, 1.0, 5).unwrap();
        let params = vec![vec![0.0, 1.0, 0.0], vec![0.5, 0.0, -1.0], vec![0.0, 2.0, -1.0]];
        let sigma = 0.5;
        let sc = scenario(
            params.clone(),
            DgpKind::Quadratic { theta: [0.0, 2.0, -1.0] },
            sigma,
            grid.clone(),
        );
        let fit = fit_delta(&sc).unwrap();
        for (i, p) in params.iter().enumerate() {
            for (j, &a) in grid.points().iter().enumerate() {
                let model = p[0] + p[1] * a + p[2] * a * a;
                let truth = 2.0 * a - a * a;
                let expect = (model - truth).powi(2) / (2.0 * sigma * sigma);
                assert!((fit.get(i, j) - expect).abs() < 1e-12);
            }
        }
        // the true parameter's row is all zeros
        assert!(fit.delta[2].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fit_order_follows_absolute_gap() {
        let sc = scenario(
            vec![vec![0.0, 0.0, 0.0], vec![0.3, 0.0, 0.0], vec![-0.9, 0.0, 0.0]],
            DgpKind::PiecewiseLinear {
                alpha1: 0.0,
                alpha2: 0.1,
                beta1: 1.0,
                beta2: -1.0,
            },
            0.2,
            ActionGrid::new(-1.0, 1.0, 7).unwrap(),
        );
        let fit = fit_delta(&sc).unwrap();
        for (j, &a) in sc.grid.points().iter().enumerate() {
            let g = true_mean(&sc.dgp, a);
            let mut by_gap: Vec<usize> = (0..3).collect();
            by_gap.sort_by(|&x, &y| {
                let gx = (g - sc.space.param(x)[0]).abs();
                let gy = (g - sc.space.param(y)[0]).abs();
                gx.total_cmp(&gy)
            });
            let mut by_delta: Vec<usize> = (0..3).collect();
            by_delta.sort_by(|&x, &y| fit.get(x, j).total_cmp(&fit.get(y, j)));
            assert_eq!(by_gap, by_delta);
        }
    }

    #[test]
    fn preferred_action_is_oracle_action() {
        let sc = scenario(
            vec![vec![0.0, 2.0, -1.0], vec![0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            DgpKind::Quadratic { theta: [0.0, 2.0, -1.0] },
            0.1,
            ActionGrid::default(),
        );
        let expect = [1.0, -2.0, 2.0];
        for i in 0..3 {
            let a = preferred_action(&sc, i).unwrap();
            assert_eq!(a, oracle_action_index(&sc.family, sc.space.param(i), &sc.grid).unwrap());
            assert_eq!(sc.grid.action(a), expect[i]);
        }
        assert!(preferred_action(&sc, 3).is_err());
    }

    #[test]
    fn partition_examples() {
        let fit = fit_from(vec![vec![0.1], vec![0.1], vec![0.5]]);
        assert_eq!(partition_rank(&fit, 0, &[0, 1, 2], 1e-9), vec![vec![0, 1], vec![2]]);
        let flat = fit_from(vec![vec![0.2]; 4]);
        assert_eq!(partition_rank(&flat, 0, &[0, 1, 2, 3], 1e-9), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn partition_matches_sort_and_group() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(99);
        for _ in 0..200 {
            // draw from a coarse lattice so ties occur
            let values: Vec<f64> = (0..6).map(|_| rng.random_range(0..4) as f64 * 0.25).collect();
            let fit = fit_from(values.iter().map(|&v| vec![v]).collect());
            let got = partition_rank(&fit, 0, &[0, 1, 2, 3, 4, 5], 1e-9);

            let mut distinct = values.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let expect: Vec<Vec<usize>> = distinct
                .iter()
                .map(|&d| (0..6).filter(|&i| values[i] == d).collect())
                .collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn ranked_partition_scopes() {
        // phi: params 0,1 prefer action 0; param 2 prefers action 1
        let fit = fit_from(vec![vec![0.3, 0.9], vec![0.1, 0.2], vec![0.2, 0.05]]);
        let phi = vec![0, 0, 1];
        let full = RankedPartition::build(&fit, &phi, RankingScope::FullSet, 1e-9);
        assert_eq!(full.classes[&0], vec![vec![1], vec![2], vec![0]]);
        assert_eq!(full.classes[&1], vec![vec![2], vec![1], vec![0]]);
        assert_eq!(full.rank_of(0, 0), Some(2));
        assert_eq!(full.top_class_union(), vec![1, 2]);

        let pre = RankedPartition::build(&fit, &phi, RankingScope::PhiPreimage, 1e-9);
        assert_eq!(pre.classes[&0], vec![vec![1], vec![0]]);
        assert_eq!(pre.classes[&1], vec![vec![2]]);
        assert_eq!(pre.rank_of(1, 0), None);
    }

    #[test]
    fn correctly_specified_truth_is_in_the_set() {
        let sc = scenario(
            vec![
                vec![0.0, 2.0, -1.0],
                vec![0.0, 1.5, -0.5],
                vec![-1.0, 2.0, -1.0],
                vec![0.5, 1.0, -1.0],
            ],
            DgpKind::Quadratic { theta: [0.0, 2.0, -1.0] },
            0.3,
            ActionGrid::default(),
        );
        let fit = fit_delta(&sc).unwrap();
        let dagger = pseudo_truth_set(&sc, DEFAULT_TOL).unwrap();
        assert!(dagger.contains(&0));
        // members are exactly the curves touching the truth somewhere on the grid
        for i in 0..sc.space.len() {
            let touches = fit.delta[i].iter().any(|&v| v <= DEFAULT_TOL);
            assert_eq!(dagger.contains(&i), touches, "param {i}");
        }
        // (0,1.5,-0.5) meets the truth at a = 1, (-1,2,-1) never does
        assert!(dagger.contains(&1));
        assert!(!dagger.contains(&2));
    }

    #[test]
    fn singleton_space_is_its_own_pseudo_truth() {
        let sc = scenario(
            vec![vec![0.2, 0.1, -0.3]],
            DgpKind::Quadratic { theta: [0.0, 2.0, -1.0] },
            0.3,
            ActionGrid::default(),
        );
        assert_eq!(pseudo_truth_set(&sc, DEFAULT_TOL).unwrap(), vec![0]);
        assert_eq!(increment_bound_d(&sc, 6.0).unwrap(), 0.0);
    }

    #[test]
    fn notched_instance_matches_assumption_two_by_exhaustion() {
        let sc = scenario(
            vec![
                vec![-0.1, 2.0, -1.0],
                vec![-1.0, 2.0, -1.0],
                vec![-0.5, 1.0, -0.5],
                vec![-0.1, 2.5, -1.5],
            ],
            DgpKind::NotchedQuadratic {
                theta: [0.0, 2.0, -1.0],
                delta: 0.1,
                depth: 1.0,
            },
            0.1,
            ActionGrid::default(),
        );
        let fit = fit_delta(&sc).unwrap();
        let dagger = pseudo_truth_set(&sc, DEFAULT_TOL).unwrap();
        for theta in 0..4 {
            let excluded_by_oracle = dagger.iter().any(|&d| {
                (0..sc.grid.len()).all(|a| fit.get(theta, a) - fit.get(d, a) > DEFAULT_TOL)
            });
            assert_eq!(!dagger.contains(&theta), excluded_by_oracle);
        }
        // (-1, 2, -1) meets the notch floor exactly at the vertex, so nothing beats it there
        assert_eq!(fit.get(1, sc.grid.len() * 3 / 4), 0.0);
        assert!(dagger.contains(&1));
    }

    #[test]
    fn top_class_union_is_inside_pseudo_truth() {
        let sc = scenario(
            vec![
                vec![-0.1, 2.0, -1.0],
                vec![-1.0, 2.0, -1.0],
                vec![-0.5, 1.0, -0.5],
                vec![-0.1, 2.5, -1.5],
                vec![-0.5, 2.0, -0.5],
            ],
            DgpKind::NotchedQuadratic {
                theta: [0.0, 2.0, -1.0],
                delta: 0.1,
                depth: 1.0,
            },
            0.1,
            ActionGrid::default(),
        );
        let dagger = pseudo_truth_set(&sc, DEFAULT_TOL).unwrap();
        for scope in [RankingScope::FullSet, RankingScope::PhiPreimage] {
            let top = top_class_union(&sc, scope, DEFAULT_TOL).unwrap();
            assert!(!top.is_empty());
            assert!(top.iter().all(|t| dagger.contains(t)));
        }
    }

    #[test]
    fn epsilon_examples() {
        // param 2 trails param 0 by at least 0.4 everywhere, param 1 by less
        let fit = fit_from(vec![
            vec![0.0, 1.0, 0.5],
            vec![0.5, 0.2, 0.8],
            vec![0.4, 1.5, 0.9],
        ]);
        let dagger = pseudo_truth_from_fit(&fit, DEFAULT_TOL);
        assert_eq!(dagger, vec![0, 1]);
        let eps = epsilon_from_fit(&fit, &dagger).unwrap();
        // brute-force triple loop
        let mut oracle = f64::INFINITY;
        for theta in 0..3 {
            if dagger.contains(&theta) {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for &d in &dagger {
                let mut worst = f64::INFINITY;
                for a in 0..3 {
                    worst = worst.min(fit.get(theta, a) - fit.get(d, a));
                }
                best = best.max(worst);
            }
            oracle = oracle.min(best);
        }
        assert_eq!(eps, oracle);
        assert!(eps > 0.0 && eps <= 0.4 + 1e-12);

        // a copy of the excluded parameter that fits even worse cannot raise epsilon
        let mut rows = fit.delta.clone();
        rows.push(vec![0.9, 2.0, 1.4]);
        let bigger = fit_from(rows);
        let dagger2 = pseudo_truth_from_fit(&bigger, DEFAULT_TOL);
        assert_eq!(dagger2, dagger);
        assert!(epsilon_from_fit(&bigger, &dagger2).unwrap() <= eps);

        assert!(matches!(
            epsilon_from_fit(&fit, &[0, 1, 2]),
            Err(Error::NoExcludedParameters)
        ));
    }

    #[test]
    fn epsilon_correctly_specified_is_min_kl_gap() {
        let sc = scenario(
            vec![vec![0.0, 2.0, -1.0], vec![0.5, 2.0, -1.0], vec![-0.7, 2.0, -1.0]],
            DgpKind::Quadratic { theta: [0.0, 2.0, -1.0] },
            0.3,
            ActionGrid::new(-2.0, 2.0, 41).unwrap(),
        );
        let dagger = pseudo_truth_set(&sc, DEFAULT_TOL).unwrap();
        assert_eq!(dagger, vec![0]);
        let eps = epsilon_gap(&sc, &dagger).unwrap();
        let direct = [0.5f64, -0.7]
            .iter()
            .map(|s| kl_gaussian(*s, 0.0, 0.3).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((eps - direct).abs() < 1e-12);
    }

    #[test]
    fn increment_bound_matches_dense_scan() {
        let grid = ActionGrid::new(-1.0, 1.0, 11).unwrap();
        let sc = scenario(
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
            DgpKind::Quadratic { theta: [0.0, 0.0, 0.0] },
            1.0,
            grid.clone(),
        );
        let d = increment_bound_d(&sc, 6.0).unwrap();
        // reward range is [0 − 6, 1 + 6]
        let mut scan: f64 = 0.0;
        let steps = 100_000;
        for k in 0..=steps {
            let r = -6.0 + 13.0 * k as f64 / steps as f64;
            for &a in grid.points() {
                let m0 = expected_reward(&sc.family, sc.space.param(0), a).unwrap();
                let m1 = expected_reward(&sc.family, sc.space.param(1), a).unwrap();
                let l0 = -(r - m0).powi(2) / 2.0;
                let l1 = -(r - m1).powi(2) / 2.0;
                scan = scan.max((l0 - l1).abs());
            }
        }
        assert!((d - scan).abs() < 1e-9);
        assert!((d - 6.5).abs() < 1e-12);

        let same = scenario(
            vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0001]],
            DgpKind::Quadratic { theta: [0.0, 0.0, 0.0] },
            1.0,
            ActionGrid::new(0.0, 1.0, 2).unwrap(),
        );
        // means only differ at a = 1
        assert!(increment_bound_d(&same, 6.0).unwrap() > 0.0);
        let identical_on_grid = scenario(
            vec![vec![0.0, 1.0, -1.0], vec![0.0, 0.0, 0.0]],
            DgpKind::Quadratic { theta: [0.0, 0.0, 0.0] },
            1.0,
            ActionGrid::new(0.0, 1.0, 2).unwrap(),
        );
        assert_eq!(increment_bound_d(&identical_on_grid, 6.0).unwrap(), 0.0);
        assert!(increment_bound_d(&sc, 0.0).is_err());
    }

    #[test]
    fn constants_golden() {
        assert_eq!(concentration_bound_constants(0.5, 4, 2, 0.4, 2.0).unwrap().0, 8.0);
        let (_, b) = concentration_bound_constants(0.5, 4, 2, 0.4, 2.0).unwrap();
        assert!((b - 0.005).abs() < 1e-15);
        assert_eq!(concentration_bound_constants(0.5, 2, 1, 2.0, 1.0).unwrap(), (4.0, 0.5));
    }

    #[test]
    fn constants_errors_and_monotonicity() {
        assert!(concentration_bound_constants(1.0, 4, 2, 0.4, 2.0).is_err());
        assert!(concentration_bound_constants(0.0, 4, 2, 0.4, 2.0).is_err());
        assert!(concentration_bound_constants(0.5, 4, 2, 0.0, 2.0).is_err());
        assert!(concentration_bound_constants(0.5, 4, 2, 0.4, 0.0).is_err());
        let mut last = 0.0;
        for k in 1..200 {
            let eps = k as f64 * 0.05;
            let (_, b) = concentration_bound_constants(0.3, 10, 4, eps, 1.7).unwrap();
            assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn analyze_default_notched_instance() {
        let sc = scenario(
            crate::reward_models::ParamSpace::from_coordinate_grid(&[
                vec![-1.0, -0.5, -0.1],
                vec![1.0, 1.5, 2.0, 2.5],
                vec![-1.5, -1.0, -0.5],
            ])
            .unwrap()
            .params()
            .to_vec(),
            DgpKind::NotchedQuadratic {
                theta: [0.0, 2.0, -1.0],
                delta: 0.1,
                depth: 1.0,
            },
            0.1,
            ActionGrid::default(),
        );
        let (report, fit) = analyze(&sc, DEFAULT_TOL, DEFAULT_R_CLIP).unwrap();
        assert_eq!(fit.n_params(), 36);
        assert!(report.theta_dagger.len() < 36);
        let eps = report.epsilon.unwrap();
        assert!(eps > 0.0);
        assert!(report.a_const.unwrap() > 0.0 && report.b_const.unwrap() > 0.0);
        assert!(report.top_class_union.iter().all(|t| report.theta_dagger.contains(t)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Coarse values so that ties and near-ties are common.
        fn fit_strategy() -> impl Strategy<Value = FitTable> {
            (1usize..8, 1usize..6).prop_flat_map(|(k, m)| {
                prop::collection::vec(prop::collection::vec((0u8..6).prop_map(|v| v as f64 * 0.25), m), k)
                    .prop_map(|delta| FitTable { delta })
            })
        }

        proptest! {
            #[test]
            fn excluded_parameters_are_dominated_by_members(fit in fit_strategy()) {
                let dagger = pseudo_truth_from_fit(&fit, DEFAULT_TOL);
                prop_assert!(!dagger.is_empty());
                for theta in (0..fit.n_params()).filter(|t| !dagger.contains(t)) {
                    prop_assert!(dagger.iter().any(|&d| fit.dominance_margin(theta, d) > DEFAULT_TOL));
                }
                for &d in &dagger {
                    prop_assert!((0..fit.n_params()).all(|g| g == d || fit.dominance_margin(d, g) <= DEFAULT_TOL));
                }
            }

            #[test]
            fn epsilon_is_positive_whenever_something_is_excluded(fit in fit_strategy()) {
                let dagger = pseudo_truth_from_fit(&fit, DEFAULT_TOL);
                match epsilon_from_fit(&fit, &dagger) {
                    Ok(eps) => prop_assert!(eps > DEFAULT_TOL),
                    Err(Error::NoExcludedParameters) => prop_assert_eq!(dagger.len(), fit.n_params()),
                    Err(e) => prop_assert!(false, "unexpected error {e}"),
                }
            }

            #[test]
            fn top_classes_lie_inside_the_pseudo_truth_set(fit in fit_strategy(), seed in any::<u64>()) {
                let m = fit.n_actions();
                let phi: Vec<usize> = (0..fit.n_params())
                    .map(|i| (seed.rotate_left(i as u32 * 7) as usize) % m)
                    .collect();
                let dagger = pseudo_truth_from_fit(&fit, DEFAULT_TOL);
                for scope in [RankingScope::FullSet, RankingScope::PhiPreimage] {
                    let top = RankedPartition::build(&fit, &phi, scope, DEFAULT_TOL).top_class_union();
                    if scope == RankingScope::FullSet {
                        prop_assert!(top.iter().all(|t| dagger.contains(t)));
                    }
                    prop_assert!(!top.is_empty());
                }
            }
        }
    }
}
