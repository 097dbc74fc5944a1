//! Nonnegative least squares by the Lawson-Hanson active-set method.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    /// `||A x - b||`.
    pub residual: f64,
    pub iterations: usize,
    /// Whether `A` has fewer independent columns than unknowns.
    pub rank_deficient: bool,
}

/// Unconstrained least squares on the columns listed in `cols`.
fn subproblem(a: &DMatrix<f64>, b: &DVector<f64>, cols: &[usize]) -> DVector<f64> {
    let sub = DMatrix::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])]);
    let svd = sub.svd(true, true);
    let tol = f64::EPSILON * a.nrows().max(cols.len()) as f64 * svd.singular_values.max();
    svd.solve(b, tol).expect("SVD with both factors solves")
}

/// Minimizes `||A x - b||` subject to `x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<NnlsSolution> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::SizeMismatch { expected: m, found: b.len() });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("least squares with no unknowns".into()));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("least-squares system has non-finite entries".into()));
    }
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = 10.0 * f64::EPSILON * scale * m.max(n) as f64;
    let rank = a.clone().svd(false, false).rank(f64::EPSILON * m.max(n) as f64 * scale);

    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    // columns whose entry would not move off zero since x last changed
    let mut blocked = vec![false; n];
    let mut iterations = 0;
    let max_iter = 30 * n.max(10);
    loop {
        let w = a.transpose() * (b - a * &x);
        let pick = (0..n).filter(|&j| !passive[j] && !blocked[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
        let Some(j) = pick else { break };
        passive[j] = true;
        let mut first = true;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::Degenerate(format!("nonnegative least squares did not converge in {max_iter} steps")));
            }
            let cols: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let z = subproblem(a, b, &cols);
            if first && z[cols.iter().position(|&i| i == j).unwrap()] <= 0.0 {
                passive[j] = false;
                blocked[j] = true;
                break;
            }
            first = false;
            blocked.fill(false);
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (c, &i) in cols.iter().enumerate() {
                    x[i] = z[c];
                }
                break;
            }
            // step toward z until the first passive variable reaches zero
            let mut alpha = f64::INFINITY;
            for (c, &i) in cols.iter().enumerate() {
                if z[c] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[c]));
                }
            }
            for (c, &i) in cols.iter().enumerate() {
                x[i] += alpha * (z[c] - x[i]);
                if x[i] <= tol {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    let residual = (a * &x - b).norm();
    Ok(NnlsSolution { x, residual, iterations, rank_deficient: rank < n })
}
