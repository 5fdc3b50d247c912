//! Outer minimization over `θ`, asymptotic covariance and the comparison
//! estimators.

mod asymptotics;
mod classical;
pub mod optimize;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::divergence::Divergence;
use crate::dualsolve::{wasserstein_fit_inner, DualOptions, DualProblem, DualStatus};
use crate::error::{Error, Result};
use crate::lmoments::{CovarianceQuad, SortedSample};
use crate::models::{order_stat_location, ModelKind, SplqModel};
use optimize::{nelder_mead, Minimum, NelderMeadOptions};

pub use asymptotics::{
    assemble, asymptotic_covariance, confidence_stat, plugin_law, Asymptotics, ConfidenceStat, Plugin,
    RANK_TOL,
};
pub use classical::{
    fit_lmoment_method_gpd, fit_mle_gpd, fit_mle_gpd_fixed_shape, fit_moment_method_gpd, gpd_from_l2_tau4,
    gpd_from_var_skew, gpd_loglik, gpd_skewness, MleFit, MLE_BOUNDS,
};

/// Settings for [`fit_divergence`] and [`fit_wasserstein`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub dual: DualOptions,
    pub outer: NelderMeadOptions,
}

/// Counters gathered while fitting.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Criterion evaluations by the outer search.
    pub outer_evals: usize,
    /// Inner solves that ended without converging (iteration cap or stalled ascent).
    pub inner_failures: usize,
    /// Inner solves that reported an unreachable target.
    pub infeasible_evals: usize,
    pub outer_converged: bool,
    /// Per-parameter flag: the estimate is pinned to its box edge.
    pub boundary: Vec<bool>,
    /// Status of the final inner solve, when an inner problem was solved.
    pub inner_status: Option<DualStatus>,
    /// Starting points tried by the outer search.
    pub starts: Vec<Vec<f64>>,
    /// Degenerate optimum of a classical estimator or non-monotone transport projection.
    pub degenerate: bool,
}

/// Covariance blocks scaled by `1/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub plugin: Plugin,
    pub cov_theta: Vec<Vec<f64>>,
    pub cov_xi: Vec<Vec<f64>>,
}

/// Outcome of one estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub method: String,
    pub n: usize,
    pub param_names: Vec<String>,
    pub theta: Vec<f64>,
    /// Model-implied `λ(θ̂)` (orders of the model basis).
    pub lmoments: Vec<f64>,
    pub xi: Option<Vec<f64>>,
    pub criterion: Option<f64>,
    /// Plug-in estimate of `E[X_{2:3}]` for the order-statistics model.
    pub location: Option<f64>,
    pub diagnostics: Diagnostics,
    pub covariance: Option<CovarianceReport>,
    pub test: Option<ConfidenceStat>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn check_size(sample: &SortedSample, model: &SplqModel) -> Result<()> {
    let l = model.n_constraints() + 1;
    if sample.len() < l {
        return Err(Error::InvalidInput(format!(
            "{} needs at least {l} observations, got {}",
            model.name(),
            sample.len()
        )));
    }
    Ok(())
}

fn starts(sample: &SortedSample, model: &SplqModel) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if let Some(s) = model.lmoment_start(sample) {
        out.push(s);
    }
    let center = model.box_center();
    if !out.contains(&center) {
        out.push(center);
    }
    out
}

/// Best of several bounded Nelder–Mead runs.
fn multistart<F>(f: F, starts: &[Vec<f64>], model: &SplqModel, opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let mut best: Option<Minimum> = None;
    let mut evals = 0;
    for s in starts {
        let m = nelder_mead(&f, s, model.bounds(), opts);
        evals += m.evals;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let mut best = best.expect("at least one start");
    best.evals = evals;
    best
}

/// The criterion `D(θ)`: the inner dual optimum, with the χ² case in closed form.
struct Criterion {
    problem: DualProblem,
    chi2: Option<Cholesky<f64, Dyn>>,
    dual: DualOptions,
    inner_failures: AtomicUsize,
    infeasible: AtomicUsize,
}

impl Criterion {
    fn new(sample: &SortedSample, model: &SplqModel, divergence: Divergence, dual: DualOptions) -> Self {
        let problem = DualProblem::new(sample, model.basis(), divergence);
        let chi2 = match divergence {
            Divergence::Chi2 => problem.omega().clone().cholesky(),
            _ => None,
        };
        Self {
            problem,
            chi2,
            dual,
            inner_failures: AtomicUsize::new(0),
            infeasible: AtomicUsize::new(0),
        }
    }

    /// `(D(θ), ξ*(θ), status)`; `D = +∞` when `θ` is invalid or unreachable.
    fn solve(&self, model: &SplqModel, theta: &[f64]) -> (f64, Option<DVector<f64>>, Option<DualStatus>) {
        let f = match model.target(theta) {
            Ok(f) => f,
            Err(_) => return (f64::INFINITY, None, None),
        };
        if let Some(ch) = &self.chi2 {
            let r = &f - self.problem.m_n();
            let xi = ch.solve(&r);
            return (0.5 * r.dot(&xi), Some(xi), None);
        }
        match self.problem.solve(&f, &self.dual) {
            Ok(sol) => {
                match sol.status {
                    DualStatus::Converged => {}
                    DualStatus::InfeasibleDirection => {
                        self.infeasible.fetch_add(1, Ordering::Relaxed);
                    }
                    DualStatus::MaxIter | DualStatus::Stalled => {
                        self.inner_failures.fetch_add(1, Ordering::Relaxed);
                    }
                }
                (sol.value, Some(sol.xi), Some(sol.status))
            }
            Err(_) => {
                self.inner_failures.fetch_add(1, Ordering::Relaxed);
                (f64::INFINITY, None, None)
            }
        }
    }
}

/// Minimum-divergence estimate `θ̂ = argmin_Θ D_φ(θ)`, where `D_φ(θ)` is the
/// divergence from the empirical quantile measure to the model slice at `θ`,
/// evaluated through its dual.
pub fn fit_divergence(
    sample: &SortedSample,
    model: &SplqModel,
    divergence: Divergence,
    opts: &FitOptions,
) -> Result<FitReport> {
    check_size(sample, model)?;
    let crit = Criterion::new(sample, model, divergence, opts.dual);
    let starts = starts(sample, model);
    let best = multistart(|t| crit.solve(model, t).0, &starts, model, &opts.outer);
    if !best.value.is_finite() {
        return Err(Error::Estimation(format!(
            "{divergence} criterion is infinite at every start: the model cannot reach this sample"
        )));
    }
    let (value, xi, status) = crit.solve(model, &best.x);
    let diagnostics = Diagnostics {
        outer_evals: best.evals,
        inner_failures: crit.inner_failures.load(Ordering::Relaxed),
        infeasible_evals: crit.infeasible.load(Ordering::Relaxed),
        outer_converged: best.converged,
        boundary: model.on_boundary(&best.x, 1e-6),
        inner_status: status,
        starts,
        degenerate: false,
    };
    report(
        sample,
        model,
        format!("divergence:{divergence}"),
        best.x,
        xi.map(|x| x.iter().copied().collect()),
        Some(value),
        diagnostics,
    )
}

/// Minimum squared 2-Wasserstein projection onto the model (quadratic-cost transport).
pub fn fit_wasserstein(sample: &SortedSample, model: &SplqModel, opts: &FitOptions) -> Result<FitReport> {
    check_size(sample, model)?;
    let cost = |t: &[f64]| match model.target(t) {
        Ok(f) => wasserstein_fit_inner(sample, model.basis(), &f)
            .map(|w| w.cost)
            .unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    };
    let starts = starts(sample, model);
    let best = multistart(cost, &starts, model, &opts.outer);
    if !best.value.is_finite() {
        return Err(Error::Estimation("transport cost is infinite at every start".into()));
    }
    let fit = wasserstein_fit_inner(sample, model.basis(), &model.target(&best.x)?)?;
    let diagnostics = Diagnostics {
        outer_evals: best.evals,
        outer_converged: best.converged,
        boundary: model.on_boundary(&best.x, 1e-6),
        starts,
        degenerate: !fit.monotone,
        ..Diagnostics::default()
    };
    report(
        sample,
        model,
        "wasserstein".into(),
        best.x,
        Some(fit.multipliers.iter().copied().collect()),
        Some(fit.cost),
        diagnostics,
    )
}

fn report(
    sample: &SortedSample,
    model: &SplqModel,
    method: String,
    theta: Vec<f64>,
    xi: Option<Vec<f64>>,
    criterion: Option<f64>,
    diagnostics: Diagnostics,
) -> Result<FitReport> {
    let lmoments = model.lmoment_map(&theta)?.iter().copied().collect();
    let location = match model.kind() {
        ModelKind::OrderStat3 => Some(order_stat_location(sample)?),
        _ => None,
    };
    Ok(FitReport {
        model: model.name().into(),
        method,
        n: sample.len(),
        param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
        theta,
        lmoments,
        xi,
        criterion,
        location,
        diagnostics,
        covariance: None,
        test: None,
    })
}

/// Adds the covariance blocks `HΣHᵀ/n`, `PΣPᵀ/n` and the `S_n` statistic to a
/// divergence fit, with `F` replaced by the chosen plug-in.
pub fn attach_asymptotics(
    report: &mut FitReport,
    sample: &SortedSample,
    model: &SplqModel,
    plugin: Plugin,
    quad: &CovarianceQuad,
) -> Result<Asymptotics> {
    let xi = report
        .xi
        .clone()
        .ok_or_else(|| Error::InvalidInput("asymptotics need a divergence fit with multipliers".into()))?;
    let law = plugin_law(model, &report.theta, sample, plugin)?;
    let a = asymptotic_covariance(&report.theta, model, law.as_ref(), quad)?;
    let n = sample.len();
    report.covariance = Some(CovarianceReport {
        plugin,
        cov_theta: matrix_rows(&(a.theta_covariance() / n as f64)),
        cov_xi: matrix_rows(&(a.xi_covariance() / n as f64)),
    });
    report.test = Some(confidence_stat(&DVector::from_vec(xi), &a.p, &a.sigma, n));
    Ok(a)
}

/// The comparison estimators for the GPD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicalMethod {
    Lmom,
    Moment,
    Mle,
}

impl fmt::Display for ClassicalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassicalMethod::Lmom => "lmom",
            ClassicalMethod::Moment => "moment",
            ClassicalMethod::Mle => "mle",
        })
    }
}

impl FromStr for ClassicalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lmom" => Ok(ClassicalMethod::Lmom),
            "moment" => Ok(ClassicalMethod::Moment),
            "mle" => Ok(ClassicalMethod::Mle),
            other => Err(Error::InvalidInput(format!(
                "unknown method '{other}' (expected lmom, moment or mle)"
            ))),
        }
    }
}

/// Runs a classical GPD estimator and wraps it as a report for the `gpd-l234` model.
pub fn fit_classical(sample: &SortedSample, method: ClassicalMethod) -> Result<FitReport> {
    let (theta, degenerate) = match method {
        ClassicalMethod::Lmom => {
            let (s, v) = fit_lmoment_method_gpd(sample)?;
            (vec![s, v], false)
        }
        ClassicalMethod::Moment => {
            let (s, v) = fit_moment_method_gpd(sample)?;
            (vec![s, v], false)
        }
        ClassicalMethod::Mle => {
            let m = fit_mle_gpd(sample)?;
            (vec![m.sigma, m.nu], m.degenerate)
        }
    };
    let model = SplqModel::gpd_l234();
    // L-moments of the fitted law exist only for ν < 1
    let lmoments = model
        .lmoment_map(&theta)
        .map(|v| v.iter().copied().collect())
        .unwrap_or_default();
    Ok(FitReport {
        model: model.name().into(),
        method: method.to_string(),
        n: sample.len(),
        param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
        theta,
        lmoments,
        xi: None,
        criterion: None,
        location: None,
        diagnostics: Diagnostics {
            degenerate,
            ..Diagnostics::default()
        },
        covariance: None,
        test: None,
    })
}
