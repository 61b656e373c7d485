use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linearly interpolated quantile of sorted data (the usual "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Cross-replication summary of a time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSeries {
    pub times: Vec<usize>,
    pub mean: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
    /// Sample standard deviation across replications (0 for a single replication).
    pub std: Vec<f64>,
    pub replications: usize,
    /// `[replication][time]`, when retained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_replication: Option<Vec<Vec<f64>>>,
}

impl AggregateSeries {
    /// Summarizes `rows[replication][time]`. Replications are reduced in index
    /// order, so the result does not depend on how they were computed.
    pub fn from_replications(times: Vec<usize>, rows: Vec<Vec<f64>>, keep: bool) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::InsufficientData("no replications to aggregate".into()));
        }
        if let Some(bad) = rows.iter().position(|row| row.len() != times.len()) {
            return Err(Error::InvalidParameter(format!(
                "replication {bad} has {} values for {} times",
                rows[bad].len(),
                times.len()
            )));
        }
        let n = times.len();
        let (mut mean, mut q25, mut q75, mut std) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        let mut column = Vec::with_capacity(r);
        for j in 0..n {
            column.clear();
            column.extend(rows.iter().map(|row| row[j]));
            let m = column.iter().sum::<f64>() / r as f64;
            let var = if r > 1 {
                column.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (r - 1) as f64
            } else {
                0.0
            };
            column.sort_by(f64::total_cmp);
            mean.push(m);
            std.push(var.sqrt());
            q25.push(quantile_sorted(&column, 0.25));
            q75.push(quantile_sorted(&column, 0.75));
        }
        Ok(Self {
            times,
            mean,
            q25,
            q75,
            std,
            replications: r,
            per_replication: keep.then_some(rows),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Position of time `t`, if it is a series time.
    pub fn position(&self, t: usize) -> Option<usize> {
        self.times.binary_search(&t).ok()
    }

    pub fn mean_at(&self, t: usize) -> Result<f64> {
        self.position(t)
            .map(|i| self.mean[i])
            .ok_or_else(|| Error::InvalidParameter(format!("time {t} is not a snapshot time")))
    }

    /// Monte Carlo standard error of the mean at position `i`.
    pub fn standard_error(&self, i: usize) -> f64 {
        self.std[i] / (self.replications as f64).sqrt()
    }
}

/// `ln(mean_i exp(x_i))` per time, for series tracked in log form.
pub fn log_mean_series(rows: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let ln_r = (rows.len() as f64).ln();
    (0..first.len())
        .map(|j| crate::posterior::log_sum_exp(rows.iter().map(|row| row[j])) - ln_r)
        .collect()
}
