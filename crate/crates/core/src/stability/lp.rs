//! Dense primal simplex for `max c·x  s.t.  A·x <= b, x >= 0` with `b >= 0`.
//!
//! The origin is always feasible under `b >= 0`, so no phase one is needed.
//! Pivoting follows Bland's rule, which cannot cycle.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = a.len();
    if b.len() != m || a.iter().any(|r| r.len() != n) {
        return Err(Error::Lp("dimension mismatch".into()));
    }
    if let Some(bad) = b.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::Lp(format!(
            "right-hand side {bad} is negative or NaN"
        )));
    }

    // Columns: n structural, m slack, then the right-hand side.
    let width = n + m + 1;
    let mut t = vec![0.0; (m + 1) * width];
    for (i, row) in a.iter().enumerate() {
        let r = &mut t[i * width..(i + 1) * width];
        r[..n].copy_from_slice(row);
        r[n + i] = 1.0;
        r[width - 1] = b[i];
    }
    // Objective row holds reduced costs as −c.
    {
        let z = &mut t[m * width..];
        for (j, &cj) in c.iter().enumerate() {
            z[j] = -cj;
        }
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    for _ in 0..MAX_PIVOTS {
        let z = &t[m * width..(m + 1) * width];
        let Some(enter) = (0..n + m).find(|&j| z[j] < -PIVOT_TOL) else {
            let mut x = vec![0.0; n];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < n {
                    x[bv] = t[i * width + width - 1];
                }
            }
            let value = t[m * width + width - 1];
            return Ok(LpSolution { x, value });
        };

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = t[i * width + enter];
            if aij > PIVOT_TOL {
                let ratio = t[i * width + width - 1] / aij;
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && basis[i] < basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = leave else {
            return Err(Error::Lp(format!(
                "objective unbounded along column {enter}"
            )));
        };

        let pivot = t[row * width + enter];
        for v in &mut t[row * width..(row + 1) * width] {
            *v /= pivot;
        }
        let pivot_row: Vec<f64> = t[row * width..(row + 1) * width].to_vec();
        for i in 0..=m {
            if i == row {
                continue;
            }
            let factor = t[i * width + enter];
            if factor != 0.0 {
                for (v, p) in t[i * width..(i + 1) * width].iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
            }
        }
        basis[row] = enter;
    }
    Err(Error::Lp(format!("no optimum after {MAX_PIVOTS} pivots")))
}
