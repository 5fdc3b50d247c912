//! Sample and population L-moments.
//!
//! The canonical sample path integrates the empirical quantile function
//! exactly against `L_{r-1}` through differences of `K_r`, so no quadrature
//! ever touches data.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distribution::UnivariateDistribution;
use crate::error::{Error, Result};
use crate::poly::{self, Polynomial, MAX_ORDER};
use crate::quadrature::{PanelRule, TanhSinh};

/// Ordered observations `x_{1:n} <= ... <= x_{n:n}` and their spacings.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
    spacings: Vec<f64>,
}

impl SortedSample {
    /// Sorts `raw` (stable) and checks that every value is finite and `n >= 2`.
    pub fn new(mut raw: Vec<f64>) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 observations, got {}",
                raw.len()
            )));
        }
        if let Some(bad) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "observation {bad} is not finite ({})",
                raw[bad]
            )));
        }
        raw.sort_by(|a, b| a.total_cmp(b));
        let spacings = spacings(&raw);
        Ok(Self {
            values: raw,
            spacings,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `x_{i+1:n} - x_{i:n}` for `i = 1..n-1`; the mass of the empirical
    /// quantile measure at `i/n`.
    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Empirical quantile `F_n^{-1}(u) = x_{i:n}` for `(i-1)/n < u <= i/n`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.len();
        let i = (u * n as f64).ceil() as usize;
        self.values[i.clamp(1, n) - 1]
    }

    pub fn shifted(&self, a: f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|v| v + a).collect();
        let spacings = spacings(&values);
        Self { values, spacings }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmomentKind {
    Population,
    VStatistic,
    UStatistic,
}

/// `λ_1..λ_m` (or `l_1..l_m`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmomentVector {
    pub values: Vec<f64>,
    pub kind: LmomentKind,
}

impl LmomentVector {
    /// The L-moment of order `r` (1-based).
    pub fn order(&self, r: usize) -> f64 {
        self.values[r - 1]
    }

    pub fn max_order(&self) -> usize {
        self.values.len()
    }
}

fn check_order(max_order: usize) -> Result<()> {
    if max_order == 0 {
        return Err(Error::UnsupportedOrder {
            order: 0,
            reason: "orders start at 1",
        });
    }
    if max_order > MAX_ORDER + 1 {
        return Err(Error::UnsupportedOrder {
            order: max_order,
            reason: "orders above 21 need Legendre polynomials beyond degree 20",
        });
    }
    Ok(())
}

/// `K_1(t) = t`, `K_r` for `r >= 2`.
fn antiderivatives(max_order: usize) -> Result<Vec<Polynomial>> {
    (1..=max_order)
        .map(|r| Ok(poly::shifted_legendre(r - 1)?.antiderivative()))
        .collect()
}

/// Weights `w_i^(r) = K_r(c_i) - K_r(c_{i-1})` for cumulative probabilities `c`.
fn weights_from_cumulative(cum: &[f64], max_order: usize) -> Result<Vec<Vec<f64>>> {
    let ks = antiderivatives(max_order)?;
    Ok(ks
        .iter()
        .map(|k| {
            let mut prev = 0.0;
            cum.iter()
                .map(|&c| {
                    let cur = k.eval(c);
                    let w = cur - prev;
                    prev = cur;
                    w
                })
                .collect()
        })
        .collect())
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let n = weights.len();
    weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            acc += w;
            if i + 1 == n {
                1.0
            } else {
                acc
            }
        })
        .collect()
}

/// `l_1 = sum_i π_i x_i`; for `r >= 2` the summation-by-parts form
/// `l_r = -sum_{i<n} K_r(c_i) (x_{i+1} - x_i)`, which depends on the support
/// only through its spacings and is therefore exactly location invariant.
fn discrete_core(support: &[f64], spacings: &[f64], weights: &[f64], cum: &[f64], max_order: usize) -> Result<Vec<f64>> {
    let ks = antiderivatives(max_order)?;
    let mut out = Vec::with_capacity(max_order);
    out.push(weights.iter().zip(support).map(|(w, x)| w * x).sum());
    for k in &ks[1..] {
        out.push(-cum.iter().zip(spacings).map(|(&c, d)| k.eval(c) * d).sum::<f64>());
    }
    Ok(out)
}

/// Plug-in (V-statistic) sample L-moments `l_1..l_max_order`.
pub fn sample_lmoments_v(sample: &SortedSample, max_order: usize) -> Result<LmomentVector> {
    check_order(max_order)?;
    let n = sample.len();
    let uniform = vec![1.0 / n as f64; n];
    let grid: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    Ok(LmomentVector {
        values: discrete_core(sample.values(), sample.spacings(), &uniform, &grid, max_order)?,
        kind: LmomentKind::VStatistic,
    })
}

/// Unbiased (U-statistic) sample L-moments via probability weighted moments
/// `b_k = n^{-1} sum_i C(i-1, k) / C(n-1, k) x_{i:n}`.
pub fn sample_lmoments_u(sample: &SortedSample, max_order: usize) -> Result<LmomentVector> {
    check_order(max_order)?;
    let n = sample.len();
    if n < max_order {
        return Err(Error::Undefined(format!(
            "U-statistic of order {max_order} needs at least {max_order} observations, got {n}"
        )));
    }
    let x = sample.values();
    let mut b = vec![0.0; max_order];
    for (idx, &xi) in x.iter().enumerate() {
        // ratio C(i-1, k) / C(n-1, k) with i = idx + 1
        let mut ratio = 1.0;
        for (k, bk) in b.iter_mut().enumerate() {
            if k > 0 {
                let num = idx as f64 - (k - 1) as f64;
                if num <= 0.0 {
                    break;
                }
                ratio *= num / (n - k) as f64;
            }
            *bk += ratio * xi;
        }
    }
    for bk in &mut b {
        *bk /= n as f64;
    }
    let values = (1..=max_order)
        .map(|r| {
            let coeffs = poly::shifted_legendre_coeffs(r - 1)?;
            Ok(coeffs.iter().zip(&b).map(|(&c, &bk)| c as f64 * bk).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LmomentVector {
        values,
        kind: LmomentKind::UStatistic,
    })
}

/// Quadrature used for population L-moments.
#[derive(Debug, Clone)]
pub enum QuadConfig {
    /// Adaptive tanh-sinh on `(0, 1)`; robust to heavy-tailed quantiles.
    TanhSinh(TanhSinh),
    /// Gauss–Legendre panels between the given breakpoints of `[0, 1]`.
    Panels { breaks: Vec<f64>, points: usize },
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig::TanhSinh(TanhSinh::default())
    }
}

/// `λ_r = int_0^1 F^{-1}(t) L_{r-1}(t) dt` for `r = 1..max_order`.
pub fn population_lmoments<Q>(quantile: Q, max_order: usize, quad: &QuadConfig) -> Result<LmomentVector>
where
    Q: Fn(f64) -> f64,
{
    population_lmoments_split(|u, _| quantile(u), max_order, quad)
}

/// As [`population_lmoments`], with the quantile receiving `(u, 1 - u)` so
/// that upper tails can be evaluated without cancellation.
pub fn population_lmoments_split<Q>(
    quantile: Q,
    max_order: usize,
    quad: &QuadConfig,
) -> Result<LmomentVector>
where
    Q: Fn(f64, f64) -> f64,
{
    check_order(max_order)?;
    let legendre = (0..max_order)
        .map(poly::shifted_legendre)
        .collect::<Result<Vec<_>>>()?;
    let values = match quad {
        QuadConfig::TanhSinh(ts) => legendre
            .iter()
            .map(|l| ts.integrate_with_distances(0.0, 1.0, |u, _du, dv| quantile(u, dv) * l.eval(u)))
            .collect::<Result<Vec<f64>>>()?,
        QuadConfig::Panels { breaks, points } => {
            let rule = PanelRule::new(breaks, *points);
            legendre
                .iter()
                .map(|l| rule.integrate(|u| quantile(u, 1.0 - u) * l.eval(u)))
                .collect()
        }
    };
    Ok(LmomentVector {
        values,
        kind: LmomentKind::Population,
    })
}

/// Ratios derived from an L-moment vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmomentRatios {
    /// `(r, τ_r = λ_r / λ_2)` for `r >= 3`.
    pub tau: Vec<(usize, f64)>,
    /// `λ_2 / λ_1`, when `λ_1 != 0`.
    pub gini: Option<f64>,
}

impl LmomentRatios {
    pub fn tau(&self, r: usize) -> Option<f64> {
        self.tau.iter().find(|(o, _)| *o == r).map(|(_, v)| *v)
    }
}

pub fn lmoment_ratios(lm: &LmomentVector) -> Result<LmomentRatios> {
    if lm.max_order() < 2 {
        return Err(Error::Undefined("ratios need λ_2".into()));
    }
    let l2 = lm.order(2);
    if l2 == 0.0 {
        return Err(Error::Undefined("λ_2 = 0, L-moment ratios are undefined".into()));
    }
    let tau = (3..=lm.max_order()).map(|r| (r, lm.order(r) / l2)).collect();
    let l1 = lm.order(1);
    Ok(LmomentRatios {
        tau,
        gini: (l1 != 0.0).then(|| l2 / l1),
    })
}

fn check_probability_vector(support: &[f64], weights: &[f64]) -> Result<()> {
    if support.len() != weights.len() || support.is_empty() {
        return Err(Error::InvalidInput(
            "support and weights must be nonempty and of equal length".into(),
        ));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidInput("weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
    }
    if support.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("support must be nondecreasing".into()));
    }
    Ok(())
}

fn spacings(support: &[f64]) -> Vec<f64> {
    support.windows(2).map(|w| w[1] - w[0]).collect()
}

/// L-moments of the discrete law `sum_i π_i δ_{x_i}`.
pub fn discrete_lmoments(support: &[f64], weights: &[f64], max_order: usize) -> Result<LmomentVector> {
    check_order(max_order)?;
    check_probability_vector(support, weights)?;
    Ok(LmomentVector {
        values: discrete_core(support, &spacings(support), weights, &cumulative(weights), max_order)?,
        kind: LmomentKind::Population,
    })
}

/// The weight profile `w_i^(r)`, indexed `[r - 1][i]`, such that `λ_r = sum_i w_i^(r) x_i`.
pub fn discrete_lmoment_weights(weights: &[f64], max_order: usize) -> Result<Vec<Vec<f64>>> {
    check_order(max_order)?;
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || (total - 1.0).abs() > 1e-12 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidInput("weights must form a probability vector".into()));
    }
    weights_from_cumulative(&cumulative(weights), max_order)
}

/// Tuning for the two-dimensional covariance quadrature.
#[derive(Debug, Clone)]
pub struct CovarianceQuad {
    /// Gauss points per panel.
    pub points: usize,
    /// Truncate the support where `F(x)(1 - F(x))` drops below this value.
    pub truncation: f64,
    /// Relative Frobenius difference tolerated between two panel resolutions.
    pub rel_tol: f64,
}

impl Default for CovarianceQuad {
    fn default() -> Self {
        Self {
            points: 24,
            truncation: 1e-20,
            rel_tol: 1e-5,
        }
    }
}

/// Panel breakpoints at quantiles of a probability ladder that refines
/// geometrically toward both truncated ends.
pub(crate) fn quantile_breaks(dist: &dyn UnivariateDistribution, truncation: f64) -> Vec<f64> {
    if let Some(knots) = dist.knots() {
        // piecewise-linear cdf: Gauss rules are exact between knots
        let mut k = knots.to_vec();
        k.dedup();
        return k;
    }
    let mut lower = Vec::new();
    let mut p = truncation;
    while p < 0.05 {
        lower.push(p);
        p *= 10.0;
    }
    let mut probs: Vec<(f64, bool)> = lower.iter().map(|&p| (p, false)).collect();
    for k in 1..20 {
        probs.push((k as f64 * 0.05, false));
    }
    for &q in lower.iter().rev() {
        probs.push((q, true));
    }
    let mut breaks: Vec<f64> = probs
        .into_iter()
        .map(|(p, upper)| {
            if upper {
                dist.upper_quantile(p)
            } else {
                dist.quantile(p)
            }
        })
        .filter(|x| x.is_finite())
        .collect();
    let (lo, hi) = dist.support();
    if lo.is_finite() {
        breaks.insert(0, lo);
    }
    if hi.is_finite() {
        breaks.push(hi);
    }
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1.0));
    breaks.retain(|x| x.is_finite());
    breaks.sort_by(f64::total_cmp);
    breaks
}

/// `Ω = int K(F(x)) K(F(x))^T dx` for arbitrary integrated rows.
pub fn omega_population(
    dist: &dyn UnivariateDistribution,
    integrated_rows: &[Polynomial],
    quad: &CovarianceQuad,
) -> Result<DMatrix<f64>> {
    let breaks = quantile_breaks(dist, quad.truncation);
    let m = integrated_rows.len();
    let compute = |points: usize| {
        let rule = PanelRule::new(&breaks, points);
        let mut out = DMatrix::zeros(m, m);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let u = dist.cdf(x);
            let k: Vec<f64> = integrated_rows.iter().map(|p| p.eval(u)).collect();
            for a in 0..m {
                for b in 0..m {
                    out[(a, b)] += w * k[a] * k[b];
                }
            }
        }
        out
    };
    let fine = compute(quad.points);
    let coarse = compute((quad.points * 2 / 3).max(4));
    check_resolution(&fine, &coarse, quad.rel_tol)?;
    Ok(fine)
}

fn check_resolution(fine: &DMatrix<f64>, coarse: &DMatrix<f64>, rel_tol: f64) -> Result<()> {
    let diff = (fine - coarse).norm();
    let scale = fine.norm().max(f64::MIN_POSITIVE);
    if !fine.iter().all(|v| v.is_finite()) || diff > rel_tol * scale {
        return Err(Error::Quadrature {
            estimate: fine.norm(),
            error: diff,
        });
    }
    Ok(())
}

/// Asymptotic covariance of `sqrt(n) (int p_r(F_n) dF_n^{-1} ...)`:
/// `Λ_rs = ∬ [F(min(x,y)) - F(x)F(y)] p_r(F(x)) p_s(F(y)) dx dy` for rows `p`.
pub fn constraint_covariance(
    dist: &dyn UnivariateDistribution,
    rows: &[Polynomial],
    quad: &CovarianceQuad,
) -> Result<DMatrix<f64>> {
    let breaks = quantile_breaks(dist, quad.truncation);
    let fine = covariance_on_panels(dist, rows, &breaks, quad.points);
    let coarse = covariance_on_panels(dist, rows, &breaks, (quad.points * 2 / 3).max(4));
    check_resolution(&fine, &coarse, quad.rel_tol)?;
    Ok(fine)
}

fn covariance_on_panels(
    dist: &dyn UnivariateDistribution,
    rows: &[Polynomial],
    breaks: &[f64],
    points: usize,
) -> DMatrix<f64> {
    let m = rows.len();
    let rule = PanelRule::new(breaks, points);
    let eval = |x: f64| {
        let u = dist.cdf(x);
        let s = dist.sf(x);
        let g: Vec<f64> = rows.iter().map(|p| p.eval(u)).collect();
        (u, s, g)
    };
    let cache: Vec<(f64, f64, Vec<f64>)> = rule.nodes.iter().map(|&x| eval(x)).collect();
    // Integrate over the triangle x < y; the integrand
    // [g_r(x) g_s(y) + g_r(y) g_s(x)] F(x) S(y) is smooth there.
    let mut acc = DMatrix::<f64>::zeros(m, m);
    let mut add = |w: f64, fx: f64, gx: &[f64], sy: f64, gy: &[f64]| {
        let c = w * fx * sy;
        for a in 0..m {
            for b in 0..m {
                acc[(a, b)] += c * (gx[a] * gy[b] + gy[a] * gx[b]);
            }
        }
    };
    let gl = crate::quadrature::GaussLegendre::new(points);
    // prefix[a] = sum over nodes x in earlier panels of w_x F(x) g_a(x)
    let mut prefix = vec![0.0; m];
    let mut absorbed = 0;
    for (j, (&y, &wy)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let (_, sy, gy) = &cache[j];
        let pj = rule.panel[j];
        while rule.panel[absorbed] < pj {
            let (fx, _, gx) = &cache[absorbed];
            for a in 0..m {
                prefix[a] += rule.weights[absorbed] * fx * gx[a];
            }
            absorbed += 1;
        }
        add(wy, 1.0, &prefix, *sy, gy);
        // same panel: inner integral over [panel start, y]
        let a = breaks_start(&rule, pj);
        for (x, wx) in gl.mapped(a, y) {
            let (fx, _, gx) = eval(x);
            add(wx * wy, fx, &gx, *sy, gy);
        }
    }
    acc
}

fn breaks_start(rule: &PanelRule, panel: usize) -> f64 {
    // panels skip empty intervals, so locate the start through the nodes' panel ids
    let mut nonempty = 0;
    for w in rule.breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        if nonempty == panel {
            return w[0];
        }
        nonempty += 1;
    }
    unreachable!("panel index out of range")
}

/// `Λ` for L-moment orders `1..=max_order`.
pub fn lambda_covariance(
    dist: &dyn UnivariateDistribution,
    max_order: usize,
    quad: &CovarianceQuad,
) -> Result<DMatrix<f64>> {
    check_order(max_order)?;
    let rows = (0..max_order)
        .map(poly::shifted_legendre)
        .collect::<Result<Vec<_>>>()?;
    constraint_covariance(dist, &rows, quad)
}
