//! Monte Carlo engine for the GPD robustness and misspecification scenarios.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{draw, UnivariateDistribution};
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::estimator::{fit_classical, fit_divergence, ClassicalMethod, FitOptions};
use crate::lmoments::SortedSample;
use crate::models::{Family, Gpd, Law, SplqModel};

/// A data-generating scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub id: u8,
    /// Law of the clean observations.
    pub truth: Law,
    /// The GPD `f_{σ,ν}` at the scenario's nominal `(σ, ν)`; the reference
    /// density of the L₁ criterion. Equal to `truth` except in scenario 4.
    pub nominal: Gpd,
    /// Value of the outlier atom holding the last `⌊n/10⌋` observations.
    pub outlier: Option<f64>,
}

impl Scenario {
    /// Scenarios 1–4: GPD(3, 0.7); GPD(3, 0.7) with 10% at 300; GPD(3, 0.1)
    /// with 10% at 30; Weibull(σ = 3, ν = 0.4).
    pub fn builtin(id: u8) -> Result<Self> {
        let gpd = |nu| Law::Gpd(Gpd::new(3.0, nu).expect("valid parameters"));
        let (truth, outlier) = match id {
            1 => (gpd(0.7), None),
            2 => (gpd(0.7), Some(300.0)),
            3 => (gpd(0.1), Some(30.0)),
            4 => (Family::Weibull.law(3.0, 0.4)?, None),
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown scenario {other} (expected 1-4)"
                )))
            }
        };
        let (sigma, nu) = truth.params();
        let nominal = Gpd::new(sigma, nu)?;
        Ok(Self {
            id,
            truth,
            nominal,
            outlier,
        })
    }

    /// Number of draws from the true law in a sample of size `n`.
    pub fn clean_count(&self, n: usize) -> usize {
        match self.outlier {
            Some(_) => n - n / 10,
            None => n,
        }
    }

    pub fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let clean = self.clean_count(n);
        let mut x = draw(&self.truth, clean, rng);
        if let Some(atom) = self.outlier {
            x.resize(n, atom);
        }
        x
    }
}

/// An estimator run in the simulation, named as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorSpec {
    Divergence(Divergence),
    Classical(ClassicalMethod),
}

impl EstimatorSpec {
    /// Fits `(σ, ν)` of the GPD to the sample.
    pub fn fit(&self, sample: &SortedSample, opts: &FitOptions) -> Result<(f64, f64)> {
        let r = match self {
            EstimatorSpec::Divergence(d) => fit_divergence(sample, &SplqModel::gpd_l234(), *d, opts)?,
            EstimatorSpec::Classical(m) => fit_classical(sample, *m)?,
        };
        Ok((r.theta[0], r.theta[1]))
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Divergence(d) => write!(f, "{d}"),
            EstimatorSpec::Classical(m) => write!(f, "{m}"),
        }
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(m) = s.parse::<ClassicalMethod>() {
            return Ok(EstimatorSpec::Classical(m));
        }
        s.parse::<Divergence>()
            .map(EstimatorSpec::Divergence)
            .map_err(|_| {
                Error::InvalidInput(format!(
                    "unknown estimator '{s}' (expected chi2, kl, klm, power:<gamma>, lmom, moment or mle)"
                ))
            })
    }
}

impl TryFrom<String> for EstimatorSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorSpec> for String {
    fn from(e: EstimatorSpec) -> String {
        e.to_string()
    }
}

/// The estimators compared in the tables.
pub fn default_estimators() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::Divergence(Divergence::Chi2),
        EstimatorSpec::Divergence(Divergence::Klm),
        EstimatorSpec::Classical(ClassicalMethod::Lmom),
        EstimatorSpec::Classical(ClassicalMethod::Moment),
        EstimatorSpec::Classical(ClassicalMethod::Mle),
    ]
}

/// One simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: u8,
    pub n: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorSpec>,
}

fn default_replicates() -> usize {
    500
}

impl ScenarioConfig {
    pub fn new(scenario: u8, n: usize, replicates: usize, seed: u64) -> Self {
        Self {
            scenario,
            n,
            replicates,
            seed,
            estimators: default_estimators(),
        }
    }

    pub fn validate(&self) -> Result<Scenario> {
        let s = Scenario::builtin(self.scenario)?;
        if s.clean_count(self.n) < 5 {
            return Err(Error::InvalidInput(format!(
                "sample size {} too small for four L-moments",
                self.n
            )));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidInput("no estimators configured".into()));
        }
        Ok(s)
    }
}

/// Estimates from one replicate and estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub estimator: String,
    pub sigma: Option<f64>,
    pub nu: Option<f64>,
    /// L₁ distance from the fitted GPD to the nominal GPD density.
    pub l1: Option<f64>,
    /// L₁ distance from the fitted GPD to the density of the clean observations.
    pub l1_truth: Option<f64>,
    pub error: Option<String>,
}

/// Mean, lower median and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub count: usize,
    /// Fewer than two values: the standard deviation is reported as 0.
    pub degenerate: bool,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot summarize an empty list".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[(n - 1) / 2];
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary {
        mean,
        median,
        std,
        count: n,
        degenerate: n < 2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub estimator: String,
    pub parameter: String,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub estimator: String,
    /// Against the nominal GPD density.
    pub l1: Summary,
    /// Against the density of the clean observations.
    pub l1_truth: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub scenario: u8,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    /// One row per estimator and parameter (σ first, then ν), over non-failed replicates.
    pub parameters: Vec<ParameterRow>,
    pub distances: Vec<DistanceRow>,
    /// Failed replicates per estimator.
    pub failures: Vec<(String, usize)>,
}

impl SimSummary {
    pub fn parameter(&self, estimator: &str, parameter: &str) -> Option<&Summary> {
        self.parameters
            .iter()
            .find(|r| r.estimator == estimator && r.parameter == parameter)
            .map(|r| &r.summary)
    }

    pub fn distance(&self, estimator: &str) -> Option<&DistanceRow> {
        self.distances.iter().find(|r| r.estimator == estimator)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub records: Vec<ReplicateRecord>,
    pub summary: SimSummary,
}

/// The generator for replicate `k`: stream `k` of the master seed.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Runs every replicate (in parallel on the current rayon pool) and aggregates.
pub fn run_scenario(config: &ScenarioConfig, opts: &FitOptions) -> Result<SimOutput> {
    let scenario = config.validate()?;
    let per_rep: Vec<Vec<ReplicateRecord>> = (0..config.replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(config.seed, k);
            let sample = SortedSample::new(scenario.draw(config.n, &mut rng));
            config
                .estimators
                .iter()
                .map(|est| {
                    let fitted = sample
                        .as_ref()
                        .map_err(Clone::clone)
                        .and_then(|s| est.fit(s, opts))
                        .and_then(|(s, v)| {
                            let fitted = Law::Gpd(Gpd::new(s, v)?);
                            let l1 = l1_density_distance(&fitted, &Law::Gpd(scenario.nominal))?;
                            let l1_truth = if scenario.truth == Law::Gpd(scenario.nominal) {
                                l1
                            } else {
                                l1_density_distance(&fitted, &scenario.truth)?
                            };
                            Ok((s, v, l1, l1_truth))
                        });
                    match fitted {
                        Ok((s, v, l1, l1_truth)) => ReplicateRecord {
                            replicate: k,
                            estimator: est.to_string(),
                            sigma: Some(s),
                            nu: Some(v),
                            l1: Some(l1),
                            l1_truth: Some(l1_truth),
                            error: None,
                        },
                        Err(e) => ReplicateRecord {
                            replicate: k,
                            estimator: est.to_string(),
                            sigma: None,
                            nu: None,
                            l1: None,
                            l1_truth: None,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect()
        })
        .collect();
    let records: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    let summary = aggregate(config, &records);
    Ok(SimOutput { records, summary })
}

/// Summaries from per-replicate records (order independent).
pub fn aggregate(config: &ScenarioConfig, records: &[ReplicateRecord]) -> SimSummary {
    let mut parameters = Vec::new();
    let mut distances = Vec::new();
    let mut failures = Vec::new();
    for est in &config.estimators {
        let name = est.to_string();
        let mine: Vec<&ReplicateRecord> = records.iter().filter(|r| r.estimator == name).collect();
        let ok: Vec<&&ReplicateRecord> = mine.iter().filter(|r| r.error.is_none()).collect();
        failures.push((name.clone(), mine.len() - ok.len()));
        let sigmas: Vec<f64> = ok.iter().filter_map(|r| r.sigma).collect();
        let nus: Vec<f64> = ok.iter().filter_map(|r| r.nu).collect();
        let l1s: Vec<f64> = ok.iter().filter_map(|r| r.l1).collect();
        let l1_truths: Vec<f64> = ok.iter().filter_map(|r| r.l1_truth).collect();
        for (param, vals) in [("sigma", &sigmas), ("nu", &nus)] {
            if let Ok(summary) = summarize(vals) {
                parameters.push(ParameterRow {
                    estimator: name.clone(),
                    parameter: param.into(),
                    summary,
                });
            }
        }
        if let (Ok(l1), Ok(l1_truth)) = (summarize(&l1s), summarize(&l1_truths)) {
            distances.push(DistanceRow {
                estimator: name.clone(),
                l1,
                l1_truth,
            });
        }
    }
    SimSummary {
        scenario: config.scenario,
        n: config.n,
        replicates: config.replicates,
        seed: config.seed,
        parameters,
        distances,
        failures,
    }
}

/// Density curves for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    /// Log-spaced grid over `[Q(0.001), Q(0.999)]` of the true law.
    pub x: Vec<f64>,
    pub truth: Vec<f64>,
    pub curves: Vec<PlotCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotCurve {
    pub estimator: String,
    /// Median estimates across replicates.
    pub sigma: f64,
    pub nu: f64,
    pub density: Vec<f64>,
}

pub fn plot_data(scenario: &Scenario, summary: &SimSummary, points: usize) -> PlotData {
    let lo = scenario.truth.quantile(0.001);
    let hi = scenario.truth.quantile(0.999);
    let points = points.max(2);
    let x: Vec<f64> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        })
        .collect();
    let truth = x.iter().map(|&v| scenario.truth.density(v)).collect();
    let mut curves = Vec::new();
    let mut names: Vec<&str> = summary.parameters.iter().map(|r| r.estimator.as_str()).collect();
    names.dedup();
    for name in names {
        if let (Some(s), Some(v)) = (summary.parameter(name, "sigma"), summary.parameter(name, "nu")) {
            if let Ok(g) = Gpd::new(s.median, v.median) {
                curves.push(PlotCurve {
                    estimator: name.into(),
                    sigma: s.median,
                    nu: v.median,
                    density: x.iter().map(|&t| g.density(t)).collect(),
                });
            }
        }
    }
    PlotData { x, truth, curves }
}

/// Probability levels at which both laws are probed for density crossings.
fn probe_points(law: &Law) -> Vec<f64> {
    let mut u = Vec::new();
    for k in 0..=120 {
        // 1e-12 .. 0.5 geometrically, mirrored into the upper tail
        let p = 10f64.powf(-12.0 + 12.0 * k as f64 / 120.0) * 0.5;
        u.push(law.quantile(p));
        u.push(law.upper_quantile(p));
    }
    for k in 1..400 {
        u.push(law.quantile(k as f64 / 400.0));
    }
    u
}

/// `int_{x >= 0} |f_a(x) - f_b(x)| dx`, computed exactly from the cdfs on the
/// intervals between density crossings (located by bracketing on a dense
/// quantile grid of both laws, then bisection).
pub fn l1_density_distance(a: &Law, b: &Law) -> Result<f64> {
    let diff = |x: f64| a.density(x) - b.density(x);
    let mut grid: Vec<f64> = probe_points(a).into_iter().chain(probe_points(b)).collect();
    for law in [a, b] {
        let (lo, hi) = law.support();
        grid.push(lo);
        if hi.is_finite() {
            grid.push(hi);
        }
    }
    grid.retain(|x| x.is_finite() && *x >= 0.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut breaks = vec![0.0];
    // the density at 0 may be infinite; probe just inside each interval instead
    let probe = |l: f64, r: f64| l + 1e-9 * (r - l);
    for w in grid.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r <= l {
            continue;
        }
        let (dl, dr) = (diff(probe(l, r)), diff(r));
        if dl.is_nan() || dr.is_nan() {
            return Err(Error::Quadrature {
                estimate: f64::NAN,
                error: f64::INFINITY,
            });
        }
        if dl.signum() != dr.signum() && dl != 0.0 && dr != 0.0 {
            let (mut lo, mut hi) = (probe(l, r), r);
            let s_lo = dl.signum();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if diff(mid).signum() == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            breaks.push(0.5 * (lo + hi));
        }
    }
    for law in [a, b] {
        let hi = law.support().1;
        if hi.is_finite() {
            breaks.push(hi);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    // mass of (l, r] under each law, through whichever tail is more accurate
    let mass = |law: &Law, l: f64, r: f64| {
        if law.cdf(l) < 0.5 {
            law.cdf(r) - law.cdf(l)
        } else {
            law.sf(l) - law.sf(r)
        }
    };
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += (mass(a, w[0], w[1]) - mass(b, w[0], w[1])).abs();
    }
    let last = *breaks.last().expect("nonempty");
    total += (a.sf(last) - b.sf(last)).abs();
    Ok(total.min(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summarize_examples() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.median, s.std), (2.0, 2.0, 1.0));
        let s = summarize(&[5.0]).unwrap();
        assert_eq!((s.mean, s.median, s.std), (5.0, 5.0, 0.0));
        assert!(s.degenerate);
        assert_eq!(summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap().median, 2.0);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn contamination_counts() {
        let s = Scenario::builtin(2).unwrap();
        assert_eq!(s.clean_count(30), 27);
        assert_eq!(s.clean_count(100), 90);
        let mut rng = replicate_rng(1, 0);
        let x = s.draw(30, &mut rng);
        assert_eq!(x.iter().filter(|v| **v == 300.0).count(), 3);
        assert_eq!(Scenario::builtin(1).unwrap().clean_count(30), 30);
        assert!(Scenario::builtin(5).is_err());
    }

    #[test]
    fn estimator_names_roundtrip() {
        for e in default_estimators() {
            assert_eq!(e.to_string().parse::<EstimatorSpec>().unwrap(), e);
        }
        assert!("nope".parse::<EstimatorSpec>().is_err());
    }

    /// Midpoint rule with 10^6 cells on x = s t/(1-t).
    fn riemann_l1(a: &Law, b: &Law, s: f64) -> f64 {
        let n = 1_000_000;
        let h = 1.0 / n as f64;
        (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                let x = s * t / (1.0 - t);
                (a.density(x) - b.density(x)).abs() * s / ((1.0 - t) * (1.0 - t)) * h
            })
            .sum()
    }

    #[test]
    fn l1_matches_riemann_oracle() {
        let a = Law::Gpd(Gpd::new(3.0, 0.7).unwrap());
        let b = Law::Gpd(Gpd::new(3.8, 0.55).unwrap());
        let got = l1_density_distance(&a, &b).unwrap();
        let want = riemann_l1(&a, &b, 3.0);
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        let w = Family::Weibull.law(3.0, 0.8).unwrap();
        let got = l1_density_distance(&a, &w).unwrap();
        let want = riemann_l1(&a, &w, 3.0);
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        assert_eq!(l1_density_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn l1_bounded_support_and_range() {
        let a = Law::Gpd(Gpd::new(2.0, -0.5).unwrap());
        let b = Law::Gpd(Gpd::new(3.0, 0.4).unwrap());
        let d = l1_density_distance(&a, &b).unwrap();
        assert!(d > 0.0 && d <= 2.0);
        let far = Law::Gpd(Gpd::new(1e-3, -1.0).unwrap());
        let d = l1_density_distance(&far, &Law::Gpd(Gpd::new(900.0, 0.0).unwrap())).unwrap();
        assert!(d > 1.99 && d <= 2.0);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = ScenarioConfig::new(1, 30, 6, 42);
        let a = run_scenario(&cfg, &FitOptions::default()).unwrap();
        let b = run_scenario(&cfg, &FitOptions::default()).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.records.len(), 6 * 5);
        let empty = run_scenario(&ScenarioConfig::new(1, 30, 0, 1), &FitOptions::default()).unwrap();
        assert!(empty.summary.parameters.is_empty());
    }
}
