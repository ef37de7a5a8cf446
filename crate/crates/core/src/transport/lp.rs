//! Small dense tableau simplex for `max c·x` subject to `Ax ≤ b`, `x ≥ 0`
//! with `b ≥ 0`, so the slack basis is immediately feasible. Used for the
//! Lipschitz dual norm, which is a different route than the transportation
//! simplex and keeps the two sides of the Kantorovich–Rubinstein identity
//! independent.

use crate::{Error, Result};

const EPS: f64 = 1e-11;

pub fn simplex_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<(f64, Vec<f64>)> {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m);
    if b.iter().any(|&x| x < 0.0) {
        return Err(Error::Solver("simplex_max needs b >= 0".into()));
    }

    // Columns: n structural + m slack + rhs.
    let cols = n + m + 1;
    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.len(), n);
        let mut r = vec![0.0; cols];
        r[..n].copy_from_slice(row);
        r[n + i] = 1.0;
        r[cols - 1] = b[i];
        tab.push(r);
    }
    let mut obj = vec![0.0; cols];
    for j in 0..n {
        obj[j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let max_iters = 5000 * (n + m) + 10_000;
    let bland_after = 200 * (n + m) + 200;
    for iter in 0..max_iters {
        // Entering column.
        let mut enter: Option<usize> = None;
        if iter < bland_after {
            let mut best = -EPS;
            for (j, &o) in obj[..n + m].iter().enumerate() {
                if o < best {
                    best = o;
                    enter = Some(j);
                }
            }
        } else {
            enter = obj[..n + m].iter().position(|&o| o < -EPS);
        }
        let Some(e) = enter else {
            let mut x = vec![0.0; n];
            for (i, &bi) in basis.iter().enumerate() {
                if bi < n {
                    x[bi] = tab[i][cols - 1];
                }
            }
            return Ok((obj[cols - 1], x));
        };

        // Ratio test (Bland tie-break on the basis variable index).
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if tab[i][e] > EPS {
                let ratio = tab[i][cols - 1] / tab[i][e];
                let better = ratio < best_ratio - EPS
                    || (ratio < best_ratio + EPS
                        && leave.is_some_and(|l| basis[i] < basis[l]));
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(l) = leave else {
            return Err(Error::Solver("linear program is unbounded".into()));
        };

        // Pivot on (l, e).
        let piv = tab[l][e];
        for x in tab[l].iter_mut() {
            *x /= piv;
        }
        for i in 0..m {
            if i != l && tab[i][e].abs() > 0.0 {
                let f = tab[i][e];
                for j in 0..cols {
                    tab[i][j] -= f * tab[l][j];
                }
            }
        }
        let f = obj[e];
        if f.abs() > 0.0 {
            for j in 0..cols {
                obj[j] -= f * tab[l][j];
            }
        }
        basis[l] = e;
    }
    Err(Error::Solver("tableau simplex did not converge".into()))
}
