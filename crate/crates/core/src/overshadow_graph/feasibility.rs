//! Does some probability vector `p` satisfy `C·p ≤ tol` row-wise?
//!
//! Phase I of the simplex method on
//!
//! ```text
//! C·p + s = tol,   Σ p + z = 1,   p, s, z ≥ 0,   minimize z
//! ```
//!
//! with Bland's rule for pivoting. The systems arising from joint-closure
//! checks have at most a few hundred rows and a handful of columns.

const PIVOT_EPS: f64 = 1e-12;
const FEASIBLE_EPS: f64 = 1e-10;

/// A point of the simplex satisfying every row of `rows` up to `tol`, or
/// `None` if none exists. Each row must have the same length `m ≥ 1`.
pub fn feasible_mixture(rows: &[Vec<f64>], tol: f64) -> Option<Vec<f64>> {
    let m = rows.first().map_or(0, Vec::len);
    if m == 0 {
        return None;
    }
    debug_assert!(rows.iter().all(|r| r.len() == m));
    let r = rows.len();
    // columns: p_0..p_{m-1}, s_0..s_{r-1}, z, rhs
    let width = m + r + 2;
    let rhs = width - 1;
    let z_col = m + r;
    let mut tab = vec![vec![0.0; width]; r + 1];
    for (i, row) in rows.iter().enumerate() {
        tab[i][..m].copy_from_slice(row);
        tab[i][m + i] = 1.0;
        tab[i][rhs] = tol.max(0.0);
    }
    for v in &mut tab[r][..m] {
        *v = 1.0;
    }
    tab[r][z_col] = 1.0;
    tab[r][rhs] = 1.0;
    let mut basis: Vec<usize> = (m..m + r).chain(std::iter::once(z_col)).collect();

    // reduced costs; obj[rhs] holds −(objective value)
    let mut obj = vec![0.0; width];
    for j in 0..width {
        obj[j] = -tab[r][j];
    }
    obj[z_col] = 0.0;

    let max_iter = 50 * (width + r + 1);
    for _ in 0..max_iter {
        let Some(enter) = (0..width - 1).find(|&j| obj[j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..=r {
            let a = tab[i][enter];
            if a > PIVOT_EPS {
                let ratio = tab[i][rhs] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_EPS || (ratio <= lr + PIVOT_EPS && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        // unbounded cannot happen: z ≥ 0 bounds the objective
        let (pr, _) = leave?;
        pivot(&mut tab, &mut obj, pr, enter);
        basis[pr] = enter;
    }

    let value = -obj[rhs];
    if value > FEASIBLE_EPS {
        return None;
    }
    let mut p = vec![0.0; m];
    for (i, &b) in basis.iter().enumerate() {
        if b < m {
            p[b] = tab[i][rhs].max(0.0);
        }
    }
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return None;
    }
    for v in &mut p {
        *v /= total;
    }
    Some(p)
}

fn pivot(tab: &mut [Vec<f64>], obj: &mut [f64], pr: usize, pc: usize) {
    let scale = tab[pr][pc];
    for v in tab[pr].iter_mut() {
        *v /= scale;
    }
    let pivot_row = tab[pr].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i == pr {
            continue;
        }
        let f = row[pc];
        if f != 0.0 {
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
        }
    }
    let f = obj[pc];
    if f != 0.0 {
        for (v, p) in obj.iter_mut().zip(&pivot_row) {
            *v -= f * p;
        }
    }
}

/// Largest row value `max_i C_i·p`.
pub fn worst_row(rows: &[Vec<f64>], p: &[f64]) -> f64 {
    rows.iter()
        .map(|row| row.iter().zip(p).map(|(c, x)| c * x).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}
