//! Dense primal simplex for small linear programs `max c·x` subject to `A·x ≤ b`, `x ≥ 0`
//! with `b ≥ 0`, so the origin is a feasible starting basis. Bland's rule prevents cycling.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::invalid;

/// Solution of a linear program.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

const EPS: f64 = 1e-12;

/// Maximise `c·x` subject to `a·x ≤ b`, `x ≥ 0`. `a` is row-major with `c.len()` columns.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64], max_iter: usize) -> Result<LpSolution> {
    let nv = c.len();
    let m = a.len();
    if b.len() != m || a.iter().any(|row| row.len() != nv) {
        return Err(invalid!("constraint matrix has inconsistent dimensions"));
    }
    if b.iter().any(|&v| !(v >= 0.0)) {
        return Err(invalid!("right-hand sides must be non-negative"));
    }
    let width = nv + m + 1;
    let mut t = alloc::vec![0.0; (m + 1) * width];
    for (i, row) in a.iter().enumerate() {
        t[i * width..i * width + nv].copy_from_slice(row);
        t[i * width + nv + i] = 1.0;
        t[i * width + width - 1] = b[i];
    }
    // Objective row holds reduced costs −c.
    for (j, &cj) in c.iter().enumerate() {
        t[m * width + j] = -cj;
    }
    let mut basis: Vec<usize> = (nv..nv + m).collect();
    let mut iterations = 0;
    loop {
        let obj = &t[m * width..(m + 1) * width];
        let Some(enter) = (0..width - 1).find(|&j| obj[j] < -EPS) else {
            break;
        };
        if iterations >= max_iter {
            return Err(Error::Numerical(alloc::format!("simplex did not converge within {iterations} iterations")));
        }
        iterations += 1;
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let aij = t[i * width + enter];
            if aij > EPS {
                let ratio = t[i * width + width - 1] / aij;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[l]),
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return Err(Error::Numerical("linear program is unbounded".into()));
        };
        let piv = t[r * width + enter];
        for j in 0..width {
            t[r * width + j] /= piv;
        }
        for i in 0..=m {
            if i == r {
                continue;
            }
            let f = t[i * width + enter];
            if f != 0.0 {
                for j in 0..width {
                    t[i * width + j] -= f * t[r * width + j];
                }
            }
        }
        basis[r] = enter;
    }
    let mut x = alloc::vec![0.0; nv];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < nv {
            x[bv] = t[i * width + width - 1];
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { x, objective, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36.
        let s = maximize(&[3.0, 5.0], &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]], &[4.0, 12.0, 18.0], 100).unwrap();
        assert!((s.objective - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        let s = maximize(
            &[10.0, -57.0, -9.0, -24.0],
            &[vec![0.5, -5.5, -2.5, 9.0], vec![0.5, -1.5, -0.5, 1.0], vec![1.0, 0.0, 0.0, 0.0]],
            &[0.0, 0.0, 1.0],
            100,
        )
        .unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_reported() {
        assert!(maximize(&[1.0], &[vec![-1.0]], &[1.0], 10).is_err());
    }
}
