//! Plug-in asymptotic covariance of `(θ̂, ξ̂)` and the `S_n` statistic.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::distribution::{SmoothedEmpirical, UnivariateDistribution};
use crate::error::{Error, Result};
use crate::linalg::{condition_number, spd_inverse, sym_pinv, symmetrize};
use crate::lmoments::{constraint_covariance, omega_population, CovarianceQuad, SortedSample};
use crate::models::{Law, SplqModel};

/// Which cdf stands in for the unknown `F` in `Ω` and `Σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plugin {
    /// The fitted member of the model's parametric family.
    #[default]
    Parametric,
    /// The piecewise-linear smoothed empirical cdf.
    Empirical,
}

/// The matrices of the limit theorem for `(θ̂, ξ̂)`.
#[derive(Debug, Clone)]
pub struct Asymptotics {
    /// Covariance of `sqrt(n)(m_n - m)`.
    pub sigma: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    /// Jacobian of `f = -λ` at `θ̂`.
    pub j0: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

impl Asymptotics {
    /// `H Σ Hᵀ`, the limit covariance of `sqrt(n)(θ̂ - θ_0)`.
    pub fn theta_covariance(&self) -> DMatrix<f64> {
        symmetrize(&(&self.h * &self.sigma * self.h.transpose()))
    }

    /// `P Σ Pᵀ`, the limit covariance of `sqrt(n) ξ̂`.
    pub fn xi_covariance(&self) -> DMatrix<f64> {
        symmetrize(&(&self.p * &self.sigma * self.p.transpose()))
    }
}

/// Builds `Ω`, `Σ`, `J_0`, `M`, `H`, `P` at `θ` with `F` replaced by `plugin`.
pub fn asymptotic_covariance(
    theta: &[f64],
    model: &SplqModel,
    plugin: &dyn UnivariateDistribution,
    quad: &CovarianceQuad,
) -> Result<Asymptotics> {
    let basis = model.basis();
    let omega = symmetrize(&omega_population(plugin, basis.integrated_rows(), quad)?);
    let sigma = symmetrize(&constraint_covariance(plugin, basis.rows(), quad)?);
    let j0 = model.jacobian(theta)?;
    assemble(omega, sigma, j0)
}

/// The algebra shared by every plug-in: `M = (J_0ᵀΩ^{-1}J_0)^{-1}`,
/// `H = M J_0ᵀ Ω^{-1}`, `P = Ω^{-1} - Ω^{-1} J_0 M J_0ᵀ Ω^{-1}`.
pub fn assemble(omega: DMatrix<f64>, sigma: DMatrix<f64>, j0: DMatrix<f64>) -> Result<Asymptotics> {
    let omega_inv = spd_inverse(&omega, "Ω")?;
    let info = symmetrize(&(j0.transpose() * &omega_inv * &j0));
    let m = spd_inverse(&info, "J_0ᵀ Ω^{-1} J_0").map_err(|_| Error::Singular {
        what: "J_0 (rank deficient)",
        condition: condition_number(&j0),
    })?;
    let h = &m * j0.transpose() * &omega_inv;
    let p = symmetrize(&(&omega_inv - &omega_inv * &j0 * &m * j0.transpose() * &omega_inv));
    Ok(Asymptotics {
        sigma,
        omega,
        j0,
        m,
        h,
        p,
    })
}

/// The plug-in law for a fitted model.
pub fn plugin_law(
    model: &SplqModel,
    theta: &[f64],
    sample: &SortedSample,
    plugin: Plugin,
) -> Result<Box<dyn UnivariateDistribution>> {
    match (plugin, model.law(theta)) {
        (Plugin::Parametric, Some(law)) => {
            check_finite_variance(&law)?;
            Ok(Box::new(law))
        }
        _ => Ok(Box::new(SmoothedEmpirical::new(sample.values()))),
    }
}

/// `Σ` involves `int int F(x ∧ y) - F(x)F(y)`, which diverges without a second moment.
fn check_finite_variance(law: &Law) -> Result<()> {
    if let Law::Gpd(g) = law {
        if g.nu() >= 0.5 {
            return Err(Error::Undefined(format!(
                "asymptotic covariance needs a finite variance; fitted GPD shape ν = {} >= 1/2",
                g.nu()
            )));
        }
    }
    Ok(())
}

/// `S_n = n ξ̂ᵀ (P Σ Pᵀ)^{-1} ξ̂` with its χ² p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceStat {
    pub s_n: f64,
    pub df: usize,
    /// Numerical rank of `P Σ Pᵀ`.
    pub rank: usize,
    pub p_value: f64,
    /// `P Σ Pᵀ` was singular and a pseudo-inverse was used, with `df = rank`.
    pub pseudo_inverse: bool,
}

/// Relative eigenvalue cutoff used to decide the rank of `P Σ Pᵀ`.
pub const RANK_TOL: f64 = 1e-8;

pub fn confidence_stat(xi: &DVector<f64>, p: &DMatrix<f64>, sigma: &DMatrix<f64>, n: usize) -> ConfidenceStat {
    let middle = symmetrize(&(p * sigma * p.transpose()));
    let (inv, rank) = sym_pinv(&middle, RANK_TOL);
    let full = middle.nrows();
    let pseudo_inverse = rank < full;
    let df = if pseudo_inverse { rank } else { full };
    let s_n = n as f64 * (xi.transpose() * &inv * xi)[(0, 0)];
    let p_value = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64)
            .map(|c| c.sf(s_n.max(0.0)))
            .unwrap_or(f64::NAN)
            .clamp(0.0, 1.0)
    };
    ConfidenceStat {
        s_n,
        df,
        rank,
        p_value,
        pseudo_inverse,
    }
}
