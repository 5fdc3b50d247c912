//! The inner problem: for fixed `θ`, maximize the concave dual
//! `ξ ↦ ξᵀf(θ) - sum_i ψ(ξᵀK_i) Δ_i` over `ξ ∈ ℝ^{l-1}`, where `K_i = K(i/n)`
//! and `Δ_i` are the sample spacings.

mod primal;
mod transport;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::lmoments::SortedSample;
use crate::poly::PolyBasis;

pub use primal::{primal_bruteforce, PrimalSolution};
pub use transport::{wasserstein_fit_inner, WassersteinFit};

/// `K(i/n)` for `i = 1..n-1`, one column per node.
fn node_matrix(n: usize, basis: &PolyBasis) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(basis.len(), n - 1);
    for i in 1..n {
        let t = i as f64 / n as f64;
        for (j, p) in basis.integrated_rows().iter().enumerate() {
            k[(j, i - 1)] = p.eval(t);
        }
    }
    k
}

/// `m_n = sum_i K(i/n) Δ_i = int K(F_n(x)) dx`; equals minus the sample L-moments for Legendre rows.
pub fn empirical_constraint_moments(sample: &SortedSample, basis: &PolyBasis) -> DVector<f64> {
    let k = node_matrix(sample.len(), basis);
    let d = DVector::from_column_slice(sample.spacings());
    k * d
}

/// `Ω_n = sum_i K_i K_iᵀ Δ_i`.
pub fn omega_empirical(sample: &SortedSample, basis: &PolyBasis) -> DMatrix<f64> {
    let k = node_matrix(sample.len(), basis);
    let mut weighted = k.clone();
    for (mut col, d) in weighted.column_iter_mut().zip(sample.spacings()) {
        col *= *d;
    }
    &weighted * k.transpose()
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualOptions {
    pub max_iter: usize,
    /// Converged when `‖∇‖_∞ <= grad_tol (1 + ‖f‖)`.
    pub grad_tol: f64,
    pub armijo: f64,
    /// Nodes must stay this far inside `dom ψ`.
    pub domain_margin: f64,
    /// Dual values above this are treated as unbounded.
    pub unbounded: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-9,
            armijo: 1e-4,
            domain_margin: 1e-12,
            unbounded: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DualStatus {
    Converged,
    MaxIter,
    /// The ascent could not make progress before meeting the gradient tolerance.
    Stalled,
    /// The dual is unbounded: `f(θ)` cannot be reached from the sample.
    InfeasibleDirection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub xi: DVector<f64>,
    /// Dual optimum; `+∞` on [`DualStatus::InfeasibleDirection`].
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: DualStatus,
}

/// The `θ`-independent part of the inner problem: nodes with positive spacing
/// and their weights. Solves take the target `f(θ)` as an argument, so one
/// problem serves every evaluation of the outer search.
#[derive(Debug, Clone)]
pub struct DualProblem {
    divergence: Divergence,
    /// `K_i` for nodes with `Δ_i > 0`, one column each.
    nodes: DMatrix<f64>,
    weights: DVector<f64>,
    m_n: DVector<f64>,
    omega: DMatrix<f64>,
}

impl DualProblem {
    pub fn new(sample: &SortedSample, basis: &PolyBasis, divergence: Divergence) -> Self {
        let all = node_matrix(sample.len(), basis);
        let keep: Vec<usize> = sample
            .spacings()
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 0.0)
            .map(|(i, _)| i)
            .collect();
        let nodes = all.select_columns(&keep);
        let weights = DVector::from_iterator(keep.len(), keep.iter().map(|&i| sample.spacings()[i]));
        let m_n = &nodes * &weights;
        let mut weighted = nodes.clone();
        for (mut col, d) in weighted.column_iter_mut().zip(weights.iter()) {
            col *= *d;
        }
        let omega = &weighted * nodes.transpose();
        Self {
            divergence,
            nodes,
            weights,
            m_n,
            omega,
        }
    }

    pub fn divergence(&self) -> Divergence {
        self.divergence
    }

    pub fn dim(&self) -> usize {
        self.nodes.nrows()
    }

    pub fn m_n(&self) -> &DVector<f64> {
        &self.m_n
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    /// Node values `ξᵀK_i`.
    fn node_values(&self, xi: &DVector<f64>) -> DVector<f64> {
        self.nodes.tr_mul(xi)
    }

    fn check_target(&self, f: &DVector<f64>, xi: &DVector<f64>) -> Result<()> {
        if f.len() != self.dim() || xi.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "dual problem has {} constraints; got target of length {} and ξ of length {}",
                self.dim(),
                f.len(),
                xi.len()
            )));
        }
        Ok(())
    }

    pub fn objective(&self, f: &DVector<f64>, xi: &DVector<f64>) -> Result<f64> {
        self.check_target(f, xi)?;
        let t = self.node_values(xi);
        let mut acc = 0.0;
        for (ti, wi) in t.iter().zip(self.weights.iter()) {
            acc += self.divergence.psi(*ti)? * wi;
        }
        Ok(xi.dot(f) - acc)
    }

    pub fn gradient(&self, f: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.evaluate(f, xi)?.1)
    }

    pub fn hessian(&self, f: &DVector<f64>, xi: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.evaluate(f, xi)?.2)
    }

    /// Value, gradient and Hessian in one pass over the nodes.
    pub fn evaluate(
        &self,
        f: &DVector<f64>,
        xi: &DVector<f64>,
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        self.check_target(f, xi)?;
        let m = self.dim();
        let t = self.node_values(xi);
        let mut value = 0.0;
        let mut grad = f.clone();
        let mut hess = DMatrix::zeros(m, m);
        for (i, (ti, wi)) in t.iter().zip(self.weights.iter()).enumerate() {
            let (p0, p1, p2) = self.divergence.psi_all(*ti)?;
            value += p0 * wi;
            let k = self.nodes.column(i);
            grad.axpy(-p1 * wi, &k, 1.0);
            hess.ger(-p2 * wi, &k, &k, 1.0);
        }
        Ok((xi.dot(f) - value, grad, hess))
    }

    /// Whether every node value lies inside `dom ψ` with the given margin.
    fn inside(&self, xi: &DVector<f64>, margin: f64) -> bool {
        let (lo, hi) = self.divergence.psi_domain();
        self.node_values(xi)
            .iter()
            .all(|t| *t > lo + margin && *t < hi - margin)
    }

    /// Damped Newton ascent from `ξ = 0`.
    pub fn solve(&self, f: &DVector<f64>, opts: &DualOptions) -> Result<DualSolution> {
        let m = self.dim();
        let mut xi = DVector::zeros(m);
        let tol = opts.grad_tol * (1.0 + f.norm());
        let (mut value, mut grad, mut hess) = self.evaluate(f, &xi)?;
        let mut iterations = 0;
        loop {
            let grad_norm = grad.amax();
            if grad_norm <= tol {
                return Ok(self.finish(xi, value, grad_norm, iterations, DualStatus::Converged));
            }
            if value > opts.unbounded {
                return Ok(self.finish(xi, f64::INFINITY, grad_norm, iterations, DualStatus::InfeasibleDirection));
            }
            if iterations >= opts.max_iter {
                return Ok(self.finish(xi, value, grad_norm, iterations, DualStatus::MaxIter));
            }
            iterations += 1;
            let dir = newton_direction(&hess, &grad);
            let slope = grad.dot(&dir);
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..80 {
                let trial = &xi + &dir * step;
                if self.inside(&trial, opts.domain_margin) {
                    if let Ok((v, g, h)) = self.evaluate(f, &trial) {
                        // the slack absorbs rounding once the ascent is at machine precision
                        let slack = 8.0 * f64::EPSILON * value.abs().max(1.0);
                        if v >= value + opts.armijo * step * slope - slack {
                            accepted = Some((trial, v, g, h));
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some((x, v, g, h)) => {
                    xi = x;
                    value = v;
                    grad = g;
                    hess = h;
                }
                None => {
                    let grad_norm = grad.amax();
                    return Ok(self.finish(xi, value, grad_norm, iterations, DualStatus::Stalled));
                }
            }
        }
    }

    fn finish(
        &self,
        xi: DVector<f64>,
        value: f64,
        grad_norm: f64,
        iterations: usize,
        status: DualStatus,
    ) -> DualSolution {
        DualSolution {
            xi,
            value,
            grad_norm,
            iterations,
            status,
        }
    }

    /// `(½ (f - m_n)ᵀ Ω_n^{-1} (f - m_n), Ω_n^{-1}(f - m_n))`.
    pub fn chi2_closed_form(&self, f: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let r = f - &self.m_n;
        let xi = crate::linalg::spd_solve(&self.omega, &r, "empirical Ω_n")?;
        Ok((0.5 * r.dot(&xi), xi))
    }
}

/// Solves `(-H + εI) d = g`, increasing `ε` from zero until the Cholesky
/// factorization succeeds.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let neg = -hess;
    let scale = neg.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut eps = 0.0;
    loop {
        let mut a = neg.clone();
        for k in 0..a.nrows() {
            a[(k, k)] += eps;
        }
        if let Some(ch) = a.cholesky() {
            return ch.solve(grad);
        }
        eps = if eps == 0.0 { 1e-12 * scale } else { eps * 10.0 };
        if eps > 1e12 * scale {
            // fully degenerate curvature: fall back to gradient ascent
            return grad.clone();
        }
    }
}

/// `(value, ξ*)` of the χ² dual in closed form, without building a [`DualProblem`].
pub fn chi2_value_closed_form(
    sample: &SortedSample,
    basis: &PolyBasis,
    f: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    DualProblem::new(sample, basis, Divergence::Chi2).chi2_closed_form(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmoments::sample_lmoments_v;

    fn sample(v: &[f64]) -> SortedSample {
        SortedSample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn constraint_moments_examples() {
        let basis = PolyBasis::legendre(&[2]).unwrap();
        let m = empirical_constraint_moments(&sample(&[1.0, 2.0, 4.0]), &basis);
        assert!((m[0] + 2.0 / 3.0).abs() < 1e-15);
        let basis = PolyBasis::legendre(&[2, 3, 4, 5]).unwrap();
        let s = sample(&[0.3, 1.7, 2.2, 5.0, 9.1, 0.0, 3.3]);
        let m = empirical_constraint_moments(&s, &basis);
        let l = sample_lmoments_v(&s, 5).unwrap();
        for r in 2..=5 {
            assert_eq!(m[r - 2], -l.order(r));
        }
        assert_eq!(empirical_constraint_moments(&sample(&[2.0; 4]), &basis).norm(), 0.0);
    }

    #[test]
    fn omega_examples() {
        let basis = PolyBasis::legendre(&[2]).unwrap();
        let o = omega_empirical(&sample(&[0.0, 1.0]), &basis);
        assert!((o[(0, 0)] - 0.0625).abs() < 1e-15);
        let basis = PolyBasis::legendre(&[2, 3]).unwrap();
        assert_eq!(omega_empirical(&sample(&[1.0; 5]), &basis).norm(), 0.0);
    }

    #[test]
    fn chi2_closed_form_example() {
        let basis = PolyBasis::legendre(&[2]).unwrap();
        let f = DVector::from_vec(vec![-0.75]);
        let (v, xi) = chi2_value_closed_form(&sample(&[0.0, 1.0]), &basis, &f).unwrap();
        assert!((xi[0] + 8.0).abs() < 1e-12);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn origin_values() {
        let basis = PolyBasis::legendre(&[2, 3, 4]).unwrap();
        let s = sample(&[0.1, 0.5, 0.9, 2.0, 3.5, 8.0]);
        for d in [Divergence::Chi2, Divergence::Kl, Divergence::Klm] {
            let p = DualProblem::new(&s, &basis, d);
            let f = DVector::from_vec(vec![-1.0, -0.4, -0.2]);
            let xi = DVector::zeros(3);
            assert_eq!(p.objective(&f, &xi).unwrap(), 0.0);
            let g = p.gradient(&f, &xi).unwrap();
            assert!((g - (&f - p.m_n())).amax() < 1e-15);
            let sol = p.solve(p.m_n(), &DualOptions::default()).unwrap();
            assert_eq!(sol.status, DualStatus::Converged);
            assert_eq!(sol.iterations, 0);
            assert_eq!(sol.value, 0.0);
        }
    }

    #[test]
    fn chi2_hessian_is_minus_omega() {
        let basis = PolyBasis::legendre(&[2, 3]).unwrap();
        let s = sample(&[0.0, 1.0, 1.5, 4.0]);
        let p = DualProblem::new(&s, &basis, Divergence::Chi2);
        let f = DVector::from_vec(vec![-1.0, 0.2]);
        let h = p.hessian(&f, &DVector::from_vec(vec![0.3, -2.0])).unwrap();
        assert!((h + p.omega()).amax() < 1e-15);
        let sol = p.solve(&f, &DualOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn domain_violation_is_an_error() {
        let basis = PolyBasis::legendre(&[2]).unwrap();
        let p = DualProblem::new(&sample(&[0.0, 1.0, 2.0]), &basis, Divergence::Klm);
        let f = DVector::from_vec(vec![-0.5]);
        // K_2 < 0 at interior nodes, so ξ = -10 pushes ξᵀK above 1
        assert!(p.objective(&f, &DVector::from_vec(vec![-10.0])).is_err());
    }

    #[test]
    fn unreachable_target_is_reported() {
        // klm: the deformed spacings must stay positive, so λ_2 <= 0 is unreachable
        let basis = PolyBasis::legendre(&[2]).unwrap();
        let p = DualProblem::new(&sample(&[0.0, 1.0, 3.0]), &basis, Divergence::Klm);
        let sol = p.solve(&DVector::from_vec(vec![0.5]), &DualOptions::default()).unwrap();
        assert_eq!(sol.status, DualStatus::InfeasibleDirection);
        assert_eq!(sol.value, f64::INFINITY);
    }
}
