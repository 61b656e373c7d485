//! Exponential-rate fitting and bound checks on aggregated series.

use serde::{Deserialize, Serialize};

use super::aggregate::AggregateSeries;
use crate::error::{Error, Result};

/// Values below this are clipped before taking logs.
pub const LOG_FLOOR: f64 = 1e-300;

/// Least-squares fit of `log y = log a − b t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub a_hat: f64,
    pub b_hat: f64,
    pub r_squared: f64,
    pub t_min: usize,
    pub n_points: usize,
    /// Points whose value was clipped to [`LOG_FLOOR`].
    pub clipped: usize,
}

/// Fits `a·e^{−bt}` to the series mean over snapshots with `t ≥ t_min`.
pub fn fit_exponential_rate(series: &AggregateSeries, t_min: usize) -> Result<RateFit> {
    let unusable = |v: f64| v.is_nan() || v < LOG_FLOOR;
    let logs: Vec<f64> = series
        .mean
        .iter()
        .map(|&v| if unusable(v) { LOG_FLOOR.ln() } else { v.ln() })
        .collect();
    let mut fit = fit_log_rate(&series.times, &logs, t_min)?;
    fit.clipped = series
        .times
        .iter()
        .zip(&series.mean)
        .filter(|(&t, &v)| t >= t_min && unusable(v))
        .count();
    Ok(fit)
}

/// Same fit when the series is already in log form, e.g. a posterior mass far
/// below the smallest positive `f64`.
pub fn fit_log_rate(times: &[usize], log_values: &[f64], t_min: usize) -> Result<RateFit> {
    if times.len() != log_values.len() {
        return Err(Error::InvalidParameter(format!(
            "{} times but {} values",
            times.len(),
            log_values.len()
        )));
    }
    let points: Vec<(f64, f64)> = times
        .iter()
        .zip(log_values)
        .filter(|(&t, y)| t >= t_min && y.is_finite())
        .map(|(&t, &y)| (t as f64, y))
        .collect();
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "{n} usable points at or after t = {t_min}, need at least 3"
        )));
    }
    let nf = n as f64;
    let tx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let ty = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - tx) * (p.0 - tx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - tx) * (p.1 - ty)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("all usable points share one time".into()));
    }
    let slope = sxy / sxx;
    let intercept = ty - slope * tx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - ty) * (p.1 - ty)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum();
    // a flat series is fit exactly by a flat line
    let r_squared = if ss_tot <= f64::EPSILON * ty.abs().max(1.0) * nf {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(RateFit {
        a_hat: intercept.exp(),
        b_hat: -slope,
        r_squared,
        t_min,
        n_points: n,
        clipped: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Above the bound, but within two Monte Carlo standard errors.
    Inconclusive,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub t: usize,
    pub observed: f64,
    pub bound: f64,
    pub standard_error: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub a_const: f64,
    pub b_const: f64,
    pub checked: usize,
    pub hard_violations: usize,
    pub inconclusive: usize,
    pub violations: Vec<BoundViolation>,
}

/// Checks `mean(1 − π_t(Θ†)) ≤ a·e^{−bt}` at every time of `outside_mass`,
/// the aggregated series of posterior mass outside the pseudo-truth set.
pub fn verify_bound(outside_mass: &AggregateSeries, a_const: f64, b_const: f64) -> BoundReport {
    let mut violations = Vec::new();
    for (i, &t) in outside_mass.times.iter().enumerate() {
        let observed = outside_mass.mean[i];
        let bound = a_const * (-b_const * t as f64).exp();
        if observed <= bound {
            continue;
        }
        let standard_error = outside_mass.standard_error(i);
        let kind = if observed - bound <= 2.0 * standard_error {
            ViolationKind::Inconclusive
        } else {
            ViolationKind::Violated
        };
        violations.push(BoundViolation {
            t,
            observed,
            bound,
            standard_error,
            kind,
        });
    }
    let hard_violations = violations.iter().filter(|v| v.kind == ViolationKind::Violated).count();
    BoundReport {
        a_const,
        b_const,
        checked: outside_mass.len(),
        hard_violations,
        inconclusive: violations.len() - hard_violations,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn series(times: Vec<usize>, values: Vec<f64>) -> AggregateSeries {
        AggregateSeries::from_replications(times, vec![values], false).unwrap()
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let times: Vec<usize> = (0..=100).collect();
        let values = times.iter().map(|&t| 2.0 * (-0.1 * t as f64).exp()).collect();
        let fit = fit_exponential_rate(&series(times, values), 0).unwrap();
        assert!((fit.a_hat - 2.0).abs() < 1e-6);
        assert!((fit.b_hat - 0.1).abs() < 1e-6);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert_eq!(fit.n_points, 101);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let times: Vec<usize> = (0..50).collect();
        let fit = fit_exponential_rate(&series(times, vec![0.3; 50]), 0).unwrap();
        assert!(fit.b_hat.abs() < 1e-9);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn noisy_exponential_rate_within_five_percent() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let times: Vec<usize> = (0..=200).collect();
        let values = times
            .iter()
            .map(|&t| 0.7 * (-0.03 * t as f64).exp() * (1.0 + rng.random_range(-0.01..0.01)))
            .collect();
        let fit = fit_exponential_rate(&series(times, values), 0).unwrap();
        assert!((fit.b_hat - 0.03).abs() / 0.03 < 0.05);
    }

    #[test]
    fn zeros_are_clipped_and_counted() {
        let fit = fit_exponential_rate(&series(vec![0, 1, 2, 3], vec![1.0, 0.5, 0.0, 0.0]), 1).unwrap();
        assert_eq!(fit.clipped, 2);
        assert!(fit.b_hat > 0.0);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let s = series(vec![0, 10, 20], vec![1.0, 0.5, 0.25]);
        assert!(matches!(fit_exponential_rate(&s, 10), Err(Error::InsufficientData(_))));
        assert!(fit_log_rate(&[0, 1], &[0.0, -1.0, -2.0], 0).is_err());
    }

    #[test]
    fn log_fit_handles_underflowed_masses() {
        let times: Vec<usize> = (0..20).map(|i| i * 1000).collect();
        let logs: Vec<f64> = times.iter().map(|&t| 1.5 - 0.6 * t as f64).collect();
        let fit = fit_log_rate(&times, &logs, 0).unwrap();
        assert!((fit.b_hat - 0.6).abs() < 1e-9);
        assert!((fit.a_hat.ln() - 1.5).abs() < 1e-6);
    }

    #[test]
    fn bound_checks() {
        let times: Vec<usize> = (0..10).collect();
        let zeros = series(times.clone(), vec![0.0; 10]);
        assert!(verify_bound(&zeros, 1.0, 0.5).violations.is_empty());

        let exact: Vec<f64> = times.iter().map(|&t| 3.0 * (-0.2 * t as f64).exp()).collect();
        let report = verify_bound(&series(times.clone(), exact), 3.0, 0.2);
        assert!(report.violations.is_empty());
        assert_eq!(report.checked, 10);

        // two replications: mean 0.6, sd ≈ 0.283, se 0.2 against a bound of 0.5
        let s = AggregateSeries::from_replications(vec![0], vec![vec![0.4], vec![0.8]], false).unwrap();
        let report = verify_bound(&s, 0.5, 0.0);
        assert_eq!(report.inconclusive, 1);
        assert_eq!(report.hard_violations, 0);
        let report = verify_bound(&s, 0.1, 0.0);
        assert_eq!(report.hard_violations, 1);
    }
}
