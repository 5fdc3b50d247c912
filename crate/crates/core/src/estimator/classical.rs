//! Classical GPD estimators used as comparisons: method of L-moments,
//! method of moments and maximum likelihood (location fixed at 0).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::optimize::{nelder_mead, NelderMeadOptions};
use crate::lmoments::{sample_lmoments_v, SortedSample};
use crate::models::Gpd;

/// Inverts `τ_4(ν) = (1+ν)(2+ν)/((3-ν)(4-ν))` and `λ_2 = σ/((1-ν)(2-ν))`.
pub fn gpd_from_l2_tau4(l2: f64, t4: f64) -> Result<(f64, f64)> {
    let disc = t4 * t4 + 98.0 * t4 + 1.0;
    if !(l2 > 0.0) || !(t4 < 1.0) || !(disc >= 0.0) {
        return Err(Error::Undefined(format!(
            "L-moment inversion needs l_2 > 0 and τ_4 in the GPD range; got l_2 = {l2}, τ_4 = {t4}"
        )));
    }
    let nu = (7.0 * t4 + 3.0 - disc.sqrt()) / (2.0 * (t4 - 1.0));
    Ok((l2 * (1.0 - nu) * (2.0 - nu), nu))
}

/// Method of L-moments from the plug-in `l_2` and `τ_4`.
pub fn fit_lmoment_method_gpd(sample: &SortedSample) -> Result<(f64, f64)> {
    let l = sample_lmoments_v(sample, 4)?;
    let l2 = l.order(2);
    gpd_from_l2_tau4(l2, l.order(4) / l2)
}

/// GPD skewness `2(1+ν)√(1-2ν)/(1-3ν)` for `ν < 1/3`.
pub fn gpd_skewness(nu: f64) -> f64 {
    2.0 * (1.0 + nu) * (1.0 - 2.0 * nu).sqrt() / (1.0 - 3.0 * nu)
}

const MOMENT_NU_RANGE: (f64, f64) = (-5.0, 1.0 / 3.0 - 1e-6);

/// Inverts the GPD variance and skewness by bisection on `ν`.
pub fn gpd_from_var_skew(var: f64, skew: f64) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = MOMENT_NU_RANGE;
    let (slo, shi) = (gpd_skewness(lo), gpd_skewness(hi));
    if !(var > 0.0) || !(skew >= slo && skew <= shi) {
        return Err(Error::Undefined(format!(
            "moment inversion needs variance > 0 and skewness in [{slo:.4}, {shi:.4e}]; got {var}, {skew}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gpd_skewness(mid) < skew {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    let nu = 0.5 * (lo + hi);
    Ok(((var * (1.0 - nu).powi(2) * (1.0 - 2.0 * nu)).sqrt(), nu))
}

/// Method of moments from the plug-in variance and skewness.
pub fn fit_moment_method_gpd(sample: &SortedSample) -> Result<(f64, f64)> {
    let x = sample.values();
    let n = x.len() as f64;
    let mean = sample.mean();
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    gpd_from_var_skew(m2, m3 / m2.powf(1.5))
}

/// GPD log-likelihood, `-∞` when an observation falls outside the support.
pub fn gpd_loglik(x: &[f64], sigma: f64, nu: f64) -> f64 {
    match Gpd::new(sigma, nu) {
        Ok(g) => x.iter().map(|&v| g.ln_density(v)).sum(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Box for the likelihood search. The shape range is wider than the
/// divergence box because the MLE has no `ν < 1` requirement and drifts far
/// above it under contamination; below `ν = -1` the likelihood is unbounded.
pub const MLE_BOUNDS: [(f64, f64); 2] = [(1e-3, 1e3), (-1.0, 10.0)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub sigma: f64,
    pub nu: f64,
    pub loglik: f64,
    /// The optimum sits on the box or on the `ν < 0` support boundary.
    pub degenerate: bool,
}

fn check_nonnegative(sample: &SortedSample) -> Result<()> {
    let min = sample.values()[0];
    if min < 0.0 {
        return Err(Error::InvalidInput(format!(
            "GPD likelihood has location 0; observation {min} is negative"
        )));
    }
    Ok(())
}

/// Maximum likelihood over [`MLE_BOUNDS`] by Nelder–Mead, started from the
/// moment and L-moment estimates (and an exponential fit as a fallback).
pub fn fit_mle_gpd(sample: &SortedSample) -> Result<MleFit> {
    check_nonnegative(sample)?;
    let x = sample.values();
    let max = x[x.len() - 1];
    let clamp = |(s, v): (f64, f64)| {
        let v = v.clamp(MLE_BOUNDS[1].0, MLE_BOUNDS[1].1);
        // move infeasible bounded-support starts just outside the largest point
        let s = if v < 0.0 { s.max(-v * max * 1.05) } else { s };
        vec![s.clamp(MLE_BOUNDS[0].0, MLE_BOUNDS[0].1), v]
    };
    let mut starts = Vec::new();
    if let Ok(p) = fit_moment_method_gpd(sample) {
        starts.push(clamp(p));
    }
    if let Ok(p) = fit_lmoment_method_gpd(sample) {
        starts.push(clamp(p));
    }
    if starts.is_empty() {
        starts.push(clamp((sample.mean().max(1e-3), 0.0)));
    }
    let nll = |t: &[f64]| -gpd_loglik(x, t[0], t[1]);
    let opts = NelderMeadOptions::default();
    let best = starts
        .iter()
        .map(|s| nelder_mead(nll, s, &MLE_BOUNDS, &opts))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    if !best.value.is_finite() {
        return Err(Error::Estimation("GPD likelihood is -∞ at every start".into()));
    }
    let (sigma, nu) = (best.x[0], best.x[1]);
    let on_box = MLE_BOUNDS
        .iter()
        .zip(&best.x)
        .any(|((lo, hi), v)| (v - lo).abs() <= 1e-6 * (hi - lo) || (hi - v).abs() <= 1e-6 * (hi - lo));
    let on_support = nu < 0.0 && (-sigma / nu - max) <= 1e-6 * max.max(1.0);
    Ok(MleFit {
        sigma,
        nu,
        loglik: -best.value,
        degenerate: on_box || on_support,
    })
}

/// Maximum likelihood in `σ` with the shape held at `nu`.
pub fn fit_mle_gpd_fixed_shape(sample: &SortedSample, nu: f64) -> Result<f64> {
    check_nonnegative(sample)?;
    let x = sample.values();
    let start = sample.mean().max(1e-3);
    let max = x[x.len() - 1];
    let lo = if nu < 0.0 { -nu * max } else { 1e-12 };
    let bounds = [(lo, 1e3 * start.max(max))];
    let m = nelder_mead(
        |t: &[f64]| -gpd_loglik(x, t[0], nu),
        &[start.max(lo * 1.5)],
        &bounds,
        &NelderMeadOptions::default(),
    );
    if !m.value.is_finite() {
        return Err(Error::Estimation("profile likelihood is -∞".into()));
    }
    Ok(m.x[0])
}
