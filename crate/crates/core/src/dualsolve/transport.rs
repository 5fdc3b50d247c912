//! Quadratic-cost transport variant: project the sample onto the model in
//! squared 2-Wasserstein distance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lmoments::SortedSample;
use crate::poly::PolyBasis;

use super::node_matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinFit {
    /// `(1/n) sum_i (x_{i:n} - y_i)^2`.
    pub cost: f64,
    pub y: Vec<f64>,
    /// Multipliers of the constraints.
    pub multipliers: DVector<f64>,
    /// `false` when the projected points are out of order, i.e. the solution is
    /// not the quantile function of a law.
    pub monotone: bool,
    /// Max-norm of the KKT residual.
    pub residual: f64,
}

/// Minimizes `(1/n) sum_i (x_{i:n} - y_i)^2` subject to
/// `sum_i K(i/n) (y_{i+1} - y_i) = f` by solving the KKT linear system.
pub fn wasserstein_fit_inner(
    sample: &SortedSample,
    basis: &PolyBasis,
    f: &DVector<f64>,
) -> Result<WassersteinFit> {
    let n = sample.len();
    let m = basis.len();
    let nodes = node_matrix(n, basis);
    // A y = sum_i K_i (y_{i+1} - y_i): column j of A is K_{j-1} - K_j with K_0 = K_n = 0
    let mut a = DMatrix::zeros(m, n);
    for j in 0..n {
        for r in 0..m {
            let prev = if j > 0 { nodes[(r, j - 1)] } else { 0.0 };
            let next = if j < n - 1 { nodes[(r, j)] } else { 0.0 };
            a[(r, j)] = prev - next;
        }
    }
    let rank = a.clone().svd(false, false).rank(1e-12 * a.amax().max(f64::MIN_POSITIVE));
    if rank < m {
        return Err(Error::Infeasible(format!(
            "transport constraints have rank {rank} < {m}"
        )));
    }
    let x = DVector::from_column_slice(sample.values());
    let c = 2.0 / n as f64;
    let mut kkt = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        kkt[(i, i)] = c;
    }
    kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(&a);
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(&x * c));
    rhs.rows_mut(n, m).copy_from(f);
    let sol = kkt.clone().lu().solve(&rhs).ok_or(Error::Singular {
        what: "transport KKT matrix",
        condition: f64::INFINITY,
    })?;
    let residual = (&kkt * &sol - &rhs).amax();
    let y: Vec<f64> = sol.rows(0, n).iter().copied().collect();
    let cost = y.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
    let spread = x[n - 1] - x[0];
    let monotone = y.windows(2).all(|w| w[1] >= w[0] - 1e-12 * spread.max(1.0));
    Ok(WassersteinFit {
        cost,
        y,
        multipliers: sol.rows(n, m).into_owned(),
        monotone,
        residual,
    })
}
