use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, gamma};

use crate::error::{Error, Result};
use crate::lmoments::{sample_lmoments_v, SortedSample};
use crate::models::family::{Family, Law};
use crate::poly::{PolyBasis, Polynomial};

/// `(λ_2, λ_3, λ_4)` of GPD(σ, ν).
pub fn gpd_lmoment_map(sigma: f64, nu: f64) -> Result<[f64; 3]> {
    check_scale(sigma)?;
    if !(nu < 1.0) {
        return Err(Error::Undefined(format!(
            "GPD L-moments require ν < 1 (got {nu})"
        )));
    }
    let l2 = sigma / ((1.0 - nu) * (2.0 - nu));
    let t3 = (1.0 + nu) / (3.0 - nu);
    let t4 = (1.0 + nu) * (2.0 + nu) / ((3.0 - nu) * (4.0 - nu));
    Ok([l2, l2 * t3, l2 * t4])
}

fn gpd_jacobian(sigma: f64, nu: f64) -> DMatrix<f64> {
    let g = 1.0 / ((1.0 - nu) * (2.0 - nu));
    let dg = (3.0 - 2.0 * nu) * g * g;
    let t3 = (1.0 + nu) / (3.0 - nu);
    let dt3 = 4.0 / ((3.0 - nu) * (3.0 - nu));
    let num = (1.0 + nu) * (2.0 + nu);
    let den = (3.0 - nu) * (4.0 - nu);
    let t4 = num / den;
    let dt4 = ((2.0 * nu + 3.0) * den - num * (2.0 * nu - 7.0)) / (den * den);
    let l2 = sigma * g;
    let dl2 = sigma * dg;
    DMatrix::from_row_slice(
        3,
        2,
        &[g, dl2, g * t3, dl2 * t3 + l2 * dt3, g * t4, dl2 * t4 + l2 * dt4],
    )
}

/// Ratio terms of the Weibull L-moments as functions of `a = 1/ν`:
/// `λ_2 = σ c(a)`, `λ_3 = λ_2 h_3(a)`, `λ_4 = λ_2 h_4(a)`, and their derivatives.
struct WeibullTerms {
    c: f64,
    dc: f64,
    h3: f64,
    dh3: f64,
    h4: f64,
    dh4: f64,
}

fn weibull_terms(a: f64) -> WeibullTerms {
    let (ln2, ln3, ln4) = (2f64.ln(), 3f64.ln(), 4f64.ln());
    let p2 = (-a * ln2).exp();
    let p3 = (-a * ln3).exp();
    let p4 = (-a * ln4).exp();
    let d = -(-a * ln2).exp_m1();
    let dd = p2 * ln2;
    let n3 = -(-a * ln3).exp_m1();
    let dn3 = p3 * ln3;
    let n4 = -5.0 * (-a * ln4).exp_m1() + 10.0 * (-a * ln3).exp_m1();
    let dn4 = 5.0 * p4 * ln4 - 10.0 * p3 * ln3;
    let g = gamma(1.0 + a);
    WeibullTerms {
        c: d * g,
        dc: dd * g + d * g * digamma(1.0 + a),
        h3: 3.0 - 2.0 * n3 / d,
        dh3: -2.0 * (dn3 * d - n3 * dd) / (d * d),
        h4: 6.0 + n4 / d,
        dh4: (dn4 * d - n4 * dd) / (d * d),
    }
}

/// `(λ_2, λ_3, λ_4)` of Weibull(σ, ν).
pub fn weibull_lmoment_map(sigma: f64, nu: f64) -> Result<[f64; 3]> {
    check_scale(sigma)?;
    check_positive_shape(nu)?;
    let w = weibull_terms(1.0 / nu);
    let l2 = sigma * w.c;
    Ok([l2, l2 * w.h3, l2 * w.h4])
}

fn weibull_jacobian(sigma: f64, nu: f64) -> DMatrix<f64> {
    let a = 1.0 / nu;
    let da = -a * a;
    let w = weibull_terms(a);
    let l2 = sigma * w.c;
    let dl2 = sigma * w.dc * da;
    DMatrix::from_row_slice(
        3,
        2,
        &[
            w.c,
            dl2,
            w.c * w.h3,
            dl2 * w.h3 + l2 * w.dh3 * da,
            w.c * w.h4,
            dl2 * w.h4 + l2 * w.dh4 * da,
        ],
    )
}

fn check_scale(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            value: sigma,
            domain: "scale σ > 0",
        })
    }
}

fn check_positive_shape(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            value: nu,
            domain: "shape ν > 0",
        })
    }
}

/// `P_{j:3}(u)`, the density of the j-th order statistic of three uniforms.
fn order_stat_kernel(j: usize) -> Polynomial {
    match j {
        1 => Polynomial::new(vec![3.0, -6.0, 3.0]),
        2 => Polynomial::new(vec![0.0, 6.0, -6.0]),
        3 => Polynomial::new(vec![0.0, 0.0, 3.0]),
        _ => unreachable!("order statistic index out of range"),
    }
}

/// Plug-in estimate of `E[X_{2:3}]`, equal to `l_1 - l_3`.
pub fn order_stat_location(sample: &SortedSample) -> Result<f64> {
    let l = sample_lmoments_v(sample, 3)?;
    Ok(l.order(1) - l.order(3))
}

/// The built-in models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// GPD(σ, ν) through λ_2, λ_3, λ_4.
    #[serde(rename = "gpd-l234")]
    GpdL234,
    /// Weibull(σ, ν) through λ_2, λ_3, λ_4.
    #[serde(rename = "weibull-l234")]
    WeibullL234,
    /// Equal expected gaps ν between the order statistics of a 3-sample.
    #[serde(rename = "orderstat3")]
    OrderStat3,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::GpdL234 => "gpd-l234",
            ModelKind::WeibullL234 => "weibull-l234",
            ModelKind::OrderStat3 => "orderstat3",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gpd-l234" => Ok(ModelKind::GpdL234),
            "weibull-l234" => Ok(ModelKind::WeibullL234),
            "orderstat3" => Ok(ModelKind::OrderStat3),
            other => Err(Error::InvalidInput(format!(
                "unknown model '{other}' (expected gpd-l234, weibull-l234 or orderstat3)"
            ))),
        }
    }
}

/// A semiparametric linear quantile model: all laws whose quantile function
/// satisfies `int p_j(u) Q(u) du = λ_j(θ)` for the basis rows `p_j`.
#[derive(Debug, Clone)]
pub struct SplqModel {
    kind: ModelKind,
    basis: PolyBasis,
    bounds: Vec<(f64, f64)>,
}

impl SplqModel {
    pub fn new(kind: ModelKind) -> Self {
        let (basis, bounds) = match kind {
            ModelKind::GpdL234 => (
                PolyBasis::legendre(&[2, 3, 4]).expect("orders within limits"),
                vec![(1e-3, 1e3), (-5.0, 0.99)],
            ),
            ModelKind::WeibullL234 => (
                PolyBasis::legendre(&[2, 3, 4]).expect("orders within limits"),
                vec![(1e-3, 1e3), (0.05, 20.0)],
            ),
            ModelKind::OrderStat3 => {
                let rows = vec![
                    order_stat_kernel(2).sub(&order_stat_kernel(1)),
                    order_stat_kernel(3).sub(&order_stat_kernel(2)),
                ];
                (
                    PolyBasis::from_rows(rows).expect("differences integrate to zero"),
                    vec![(1e-9, 1e9)],
                )
            }
        };
        Self {
            kind,
            basis,
            bounds,
        }
    }

    pub fn gpd_l234() -> Self {
        Self::new(ModelKind::GpdL234)
    }

    pub fn weibull_l234() -> Self {
        Self::new(ModelKind::WeibullL234)
    }

    pub fn order_stat3() -> Self {
        Self::new(ModelKind::OrderStat3)
    }

    /// Replaces the parameter box; each interval must be nonempty and finite.
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.dim()
            || bounds
                .iter()
                .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
        {
            return Err(Error::InvalidInput(format!(
                "parameter box for {} needs {} finite nonempty intervals",
                self.kind,
                self.dim()
            )));
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self.kind {
            ModelKind::GpdL234 | ModelKind::WeibullL234 => &["sigma", "nu"],
            ModelKind::OrderStat3 => &["nu"],
        }
    }

    pub fn dim(&self) -> usize {
        self.param_names().len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn basis(&self) -> &PolyBasis {
        &self.basis
    }

    /// Number of constraints, `l - 1`.
    pub fn n_constraints(&self) -> usize {
        self.basis.len()
    }

    fn check_dim(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "{} expects {} parameters, got {}",
                self.kind,
                self.dim(),
                theta.len()
            )));
        }
        Ok(())
    }

    /// `λ(θ)`: the values of `int p_j Q` prescribed by the model.
    pub fn lmoment_map(&self, theta: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(theta)?;
        Ok(match self.kind {
            ModelKind::GpdL234 => DVector::from_row_slice(&gpd_lmoment_map(theta[0], theta[1])?),
            ModelKind::WeibullL234 => {
                DVector::from_row_slice(&weibull_lmoment_map(theta[0], theta[1])?)
            }
            ModelKind::OrderStat3 => {
                check_positive_shape(theta[0])?;
                DVector::from_element(2, theta[0])
            }
        })
    }

    /// `f(θ) = -λ(θ)`, the right-hand side seen by the dual problem.
    pub fn target(&self, theta: &[f64]) -> Result<DVector<f64>> {
        Ok(-self.lmoment_map(theta)?)
    }

    /// Analytic Jacobian of [`target`](Self::target).
    pub fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.lmoment_map(theta)?;
        Ok(-match self.kind {
            ModelKind::GpdL234 => gpd_jacobian(theta[0], theta[1]),
            ModelKind::WeibullL234 => weibull_jacobian(theta[0], theta[1]),
            ModelKind::OrderStat3 => DMatrix::from_element(2, 1, 1.0),
        })
    }

    /// Central differences of the target with step `1e-6 (1 + |θ_j|)`,
    /// falling back to one-sided steps at the box edges. The flag reports
    /// whether any one-sided step was taken.
    pub fn fd_jacobian(&self, theta: &[f64]) -> Result<(DMatrix<f64>, bool)> {
        self.check_dim(theta)?;
        let m = self.n_constraints();
        let mut jac = DMatrix::zeros(m, self.dim());
        let mut one_sided = false;
        for j in 0..self.dim() {
            let h = 1e-6 * (1.0 + theta[j].abs());
            let (lo, hi) = self.bounds[j];
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            if theta[j] + h > hi || theta[j] - h < lo {
                one_sided = true;
            }
            plus[j] = (theta[j] + h).min(hi);
            minus[j] = (theta[j] - h).max(lo);
            let span = plus[j] - minus[j];
            let col = (self.target(&plus)? - self.target(&minus)?) / span;
            jac.set_column(j, &col);
        }
        Ok((jac, one_sided))
    }

    /// The parametric law indexed by `θ`, when the model is a parametric family.
    pub fn law(&self, theta: &[f64]) -> Option<Law> {
        match self.kind {
            ModelKind::GpdL234 => Family::Gpd.law(theta[0], theta[1]).ok(),
            ModelKind::WeibullL234 => Family::Weibull.law(theta[0], theta[1]).ok(),
            ModelKind::OrderStat3 => None,
        }
    }

    /// Method-of-L-moments starting value, clamped into the box; `None` when
    /// the sample ratios fall outside the invertible range.
    pub fn lmoment_start(&self, sample: &SortedSample) -> Option<Vec<f64>> {
        let theta = match self.kind {
            ModelKind::GpdL234 => {
                let (s, v) = crate::estimator::fit_lmoment_method_gpd(sample).ok()?;
                vec![s, v]
            }
            ModelKind::WeibullL234 => {
                let l = sample_lmoments_v(sample, 3).ok()?;
                let (l2, t3) = (l.order(2), l.order(3) / l.order(2));
                if !(l2 > 0.0 && t3.is_finite()) {
                    return None;
                }
                let nu = weibull_shape_from_tau3(t3, self.bounds[1])?;
                vec![l2 / weibull_terms(1.0 / nu).c, nu]
            }
            ModelKind::OrderStat3 => {
                let m = crate::dualsolve::empirical_constraint_moments(sample, &self.basis);
                let nu = -0.5 * (m[0] + m[1]);
                if !(nu > 0.0) {
                    return None;
                }
                vec![nu]
            }
        };
        if theta.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(self.clamp(&theta))
    }

    /// Projects `θ` onto the parameter box.
    pub fn clamp(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    pub fn box_center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Whether a coordinate of `θ` sits within a relative `tol` of its bound.
    pub fn on_boundary(&self, theta: &[f64], tol: f64) -> Vec<bool> {
        theta
            .iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| {
                let w = tol * (hi - lo);
                *v - lo <= w || hi - *v <= w
            })
            .collect()
    }
}

/// Inverts the (decreasing) Weibull `τ_3(ν)` by bisection within `range`.
fn weibull_shape_from_tau3(t3: f64, range: (f64, f64)) -> Option<f64> {
    let tau = |nu: f64| weibull_terms(1.0 / nu).h3;
    let (mut lo, mut hi) = range;
    if t3 >= tau(lo) {
        return Some(lo);
    }
    if t3 <= tau(hi) {
        return Some(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tau(mid) > t3 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::UnivariateDistribution;
    use crate::lmoments::{population_lmoments_split, QuadConfig};

    fn quad_lmoments(law: &Law) -> Vec<f64> {
        let l = population_lmoments_split(
            |u, v| if u < 0.5 { law.quantile(u) } else { law.upper_quantile(v) },
            4,
            &QuadConfig::default(),
        )
        .unwrap();
        (2..=4).map(|r| l.order(r)).collect()
    }

    #[test]
    fn gpd_map_examples() {
        let [l2, l3, l4] = gpd_lmoment_map(3.0, 0.7).unwrap();
        assert!((l2 - 7.69231).abs() < 1e-5);
        assert!((l3 / l2 - 0.73913).abs() < 1e-5);
        assert!((l4 / l2 - 0.60474).abs() < 1e-5);
        assert_eq!(gpd_lmoment_map(4.0, 0.0).unwrap()[0], 2.0);
        assert!(gpd_lmoment_map(1.0, 1.0).is_err());
        let a = gpd_lmoment_map(2.5, 0.3).unwrap();
        let b = gpd_lmoment_map(5.0, 0.3).unwrap();
        for k in 0..3 {
            assert!((b[k] - 2.0 * a[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for (s, v) in [(3.0, 0.7), (3.0, 0.1), (2.0, 0.0), (1.0, -0.5), (3.0, 0.45)] {
            let want = gpd_lmoment_map(s, v).unwrap();
            let got = quad_lmoments(&Family::Gpd.law(s, v).unwrap());
            for k in 0..3 {
                assert!((want[k] - got[k]).abs() < 1e-6, "GPD({s},{v}) λ{}", k + 2);
            }
        }
        for (s, v) in [(3.0, 0.4), (2.0, 1.0), (1.0, 3.0), (3.0, 0.8)] {
            let want = weibull_lmoment_map(s, v).unwrap();
            let got = quad_lmoments(&Family::Weibull.law(s, v).unwrap());
            for k in 0..3 {
                assert!((want[k] - got[k]).abs() < 1e-6, "Weibull({s},{v}) λ{}", k + 2);
            }
        }
        assert!((weibull_lmoment_map(5.0, 1.0).unwrap()[0] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        let cases: Vec<(SplqModel, Vec<Vec<f64>>)> = vec![
            (
                SplqModel::gpd_l234(),
                vec![vec![3.0, 0.7], vec![1.0, -1.5], vec![20.0, 0.2], vec![3.0, 0.0]],
            ),
            (
                SplqModel::weibull_l234(),
                vec![vec![3.0, 0.4], vec![1.0, 1.0], vec![7.0, 4.0], vec![0.5, 0.1]],
            ),
            (SplqModel::order_stat3(), vec![vec![0.25], vec![3.0]]),
        ];
        for (model, thetas) in cases {
            for theta in thetas {
                let a = model.jacobian(&theta).unwrap();
                let (fd, one_sided) = model.fd_jacobian(&theta).unwrap();
                assert!(!one_sided);
                for (x, y) in a.iter().zip(fd.iter()) {
                    assert!((x - y).abs() <= 1e-5 * x.abs().max(1e-3), "{model:?} {theta:?}");
                }
            }
        }
        let j = SplqModel::gpd_l234().jacobian(&[3.0, 0.5]).unwrap();
        assert!((j[(0, 0)] + 1.0 / (0.5 * 1.5)).abs() < 1e-15);
    }

    #[test]
    fn one_sided_differences_at_the_box_edge() {
        let model = SplqModel::gpd_l234();
        let (_, flag) = model.fd_jacobian(&[1e-3, 0.3]).unwrap();
        assert!(flag);
    }

    #[test]
    fn target_is_negated_map() {
        let m = SplqModel::weibull_l234();
        let theta = [2.0, 1.7];
        assert_eq!(m.target(&theta).unwrap(), -m.lmoment_map(&theta).unwrap());
    }

    #[test]
    fn order_stat_kernels() {
        for j in 1..=3 {
            assert!((order_stat_kernel(j).integral01() - 1.0).abs() < 1e-15);
        }
        // uniform(0,1): E X_{1:3} = 1/4, E X_{2:3} = 1/2, E X_{3:3} = 3/4
        let model = SplqModel::order_stat3();
        let got: Vec<f64> = model
            .basis()
            .rows()
            .iter()
            // int p(u) u du, the expected gap for the uniform quantile Q(u) = u
            .map(|p| p.coeffs().iter().enumerate().map(|(k, a)| a / (k + 2) as f64).sum::<f64>())
            .collect();
        assert!((got[0] - 0.25).abs() < 1e-15 && (got[1] - 0.25).abs() < 1e-15);
        for k in model.basis().integrated_rows() {
            assert!(k.eval(1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn weibull_start_inverts_tau3() {
        for nu in [0.3, 0.4, 1.0, 2.5, 9.0] {
            let [l2, l3, _] = weibull_lmoment_map(1.0, nu).unwrap();
            let back = weibull_shape_from_tau3(l3 / l2, (0.05, 20.0)).unwrap();
            assert!((back - nu).abs() < 1e-8 * nu, "{nu} -> {back}");
        }
    }

    #[test]
    fn names_roundtrip() {
        for k in [ModelKind::GpdL234, ModelKind::WeibullL234, ModelKind::OrderStat3] {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("gev".parse::<ModelKind>().is_err());
    }
}
