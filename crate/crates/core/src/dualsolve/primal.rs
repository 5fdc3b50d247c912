//! Direct solution of the primal problem over deformed spacings; a test oracle
//! for the dual solver at small `n`.

use nalgebra::{DMatrix, DVector};

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::lmoments::SortedSample;
use crate::poly::PolyBasis;

use super::node_matrix;

/// Largest sample accepted by [`primal_bruteforce`].
pub const PRIMAL_MAX_N: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSolution {
    /// `min sum_i φ(s_i/Δ_i) Δ_i`.
    pub value: f64,
    /// Optimal spacings `s_i = y_{i+1} - y_i`, zero at tied nodes.
    pub spacings: Vec<f64>,
    /// Multipliers of `sum_i K_i s_i = f`; they coincide with the dual maximizer.
    pub xi: DVector<f64>,
    pub iterations: usize,
}

/// Minimizes `sum_i φ(s_i/Δ_i) Δ_i` subject to `sum_i K_i s_i = f` by
/// infeasible-start Newton on the KKT system, starting from `s = Δ`.
pub fn primal_bruteforce(
    sample: &SortedSample,
    basis: &PolyBasis,
    f: &DVector<f64>,
    divergence: Divergence,
) -> Result<PrimalSolution> {
    let n = sample.len();
    if n > PRIMAL_MAX_N {
        return Err(Error::InvalidInput(format!(
            "primal oracle limited to n <= {PRIMAL_MAX_N}, got {n}"
        )));
    }
    let all = node_matrix(n, basis);
    let spacings = sample.spacings();
    let keep: Vec<usize> = (0..n - 1).filter(|&i| spacings[i] > 0.0).collect();
    let a = all.select_columns(&keep);
    let delta: Vec<f64> = keep.iter().map(|&i| spacings[i]).collect();
    let (m, k) = (a.nrows(), a.ncols());
    let rank = a.clone().svd(false, false).rank(1e-12 * a.amax().max(f64::MIN_POSITIVE));
    if rank < m {
        return Err(Error::Infeasible(format!(
            "constraint rows have rank {rank} < {m} on the {k} positive-spacing nodes"
        )));
    }

    let mut s = DVector::from_column_slice(&delta);
    let mut nu = DVector::<f64>::zeros(m);
    let residual = |s: &DVector<f64>, nu: &DVector<f64>| -> Option<DVector<f64>> {
        let mut r = DVector::zeros(k + m);
        for i in 0..k {
            let g = divergence.phi_prime(s[i] / delta[i]);
            if !g.is_finite() {
                return None;
            }
            r[i] = g;
        }
        let atnu = a.tr_mul(nu);
        for i in 0..k {
            r[i] += atnu[i];
        }
        let feas = &a * s - f;
        r.rows_mut(k, m).copy_from(&feas);
        Some(r)
    };
    let scale = 1.0 + f.norm() + a.norm();
    let mut r = residual(&s, &nu).expect("s = Δ lies in dom φ");
    let mut iterations = 0;
    while r.norm() > 1e-13 * scale {
        if iterations >= 200 {
            return Err(Error::Estimation(format!(
                "primal Newton did not converge (residual {:.3e})",
                r.norm()
            )));
        }
        iterations += 1;
        let mut kkt = DMatrix::zeros(k + m, k + m);
        for i in 0..k {
            kkt[(i, i)] = divergence.phi_second(s[i] / delta[i]) / delta[i];
        }
        kkt.view_mut((0, k), (k, m)).copy_from(&a.transpose());
        kkt.view_mut((k, 0), (m, k)).copy_from(&a);
        let step = kkt
            .lu()
            .solve(&(-&r))
            .ok_or(Error::Singular {
                what: "primal KKT matrix",
                condition: f64::INFINITY,
            })?;
        let ds = step.rows(0, k).into_owned();
        let dnu = step.rows(k, m).into_owned();
        let mut t = 1.0;
        let norm0 = r.norm();
        let mut next = None;
        for _ in 0..100 {
            let s_try = &s + &ds * t;
            let nu_try = &nu + &dnu * t;
            if let Some(r_try) = residual(&s_try, &nu_try) {
                if r_try.norm() <= (1.0 - 0.01 * t) * norm0 || r_try.norm() <= 1e-13 * scale {
                    next = Some((s_try, nu_try, r_try));
                    break;
                }
            }
            t *= 0.5;
        }
        match next {
            Some((s_new, nu_new, r_new)) => {
                s = s_new;
                nu = nu_new;
                r = r_new;
            }
            None => {
                return Err(Error::Estimation(format!(
                    "primal line search failed (residual {:.3e})",
                    r.norm()
                )))
            }
        }
    }
    let value = (0..k)
        .map(|i| divergence.phi(s[i] / delta[i]) * delta[i])
        .sum();
    let mut full = vec![0.0; n - 1];
    for (j, &i) in keep.iter().enumerate() {
        full[i] = s[j];
    }
    Ok(PrimalSolution {
        value,
        spacings: full,
        xi: -nu,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualsolve::empirical_constraint_moments;

    #[test]
    fn identity_deformation_at_the_sample_target() {
        let s = SortedSample::new(vec![0.0, 0.4, 1.1, 1.1, 3.0]).unwrap();
        let basis = PolyBasis::legendre(&[2, 3]).unwrap();
        let f = empirical_constraint_moments(&s, &basis);
        let p = primal_bruteforce(&s, &basis, &f, Divergence::Klm).unwrap();
        assert!(p.value.abs() < 1e-20);
        for (a, b) in p.spacings.iter().zip(s.spacings()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rank_deficiency_is_infeasible() {
        // two distinct points give one node, too few for two constraints
        let s = SortedSample::new(vec![0.0, 0.0, 1.0]).unwrap();
        let basis = PolyBasis::legendre(&[2, 3]).unwrap();
        let f = DVector::from_vec(vec![-0.5, 0.0]);
        assert!(matches!(
            primal_bruteforce(&s, &basis, &f, Divergence::Chi2),
            Err(Error::Infeasible(_))
        ));
    }
}
