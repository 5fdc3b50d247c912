//! Generalized Pareto and Weibull laws (location fixed at 0).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::UnivariateDistribution;
use crate::error::{Error, Result};

/// Below this |ν| the GPD is evaluated through its exponential limit.
const GPD_EXP_EPS: f64 = 1e-12;

/// Generalized Pareto law with `F(x) = 1 - (1 + νx/σ)^(-1/ν)`; heavy tailed for `ν > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gpd {
    sigma: f64,
    nu: f64,
}

impl Gpd {
    pub fn new(sigma: f64, nu: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain {
                value: sigma,
                domain: "GPD scale σ > 0",
            });
        }
        if !nu.is_finite() {
            return Err(Error::Domain {
                value: nu,
                domain: "GPD shape ν finite",
            });
        }
        Ok(Self { sigma, nu })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    fn is_exponential(&self) -> bool {
        self.nu.abs() < GPD_EXP_EPS
    }

    /// `log(1 + νx/σ) / ν`, the cumulative hazard.
    fn hazard(&self, x: f64) -> f64 {
        if self.is_exponential() {
            x / self.sigma
        } else {
            (self.nu * x / self.sigma).ln_1p() / self.nu
        }
    }

    /// Log-density at `x`, `-∞` off the support.
    pub fn ln_density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi || (x == hi && self.nu < 0.0) {
            return f64::NEG_INFINITY;
        }
        if self.is_exponential() {
            return -self.sigma.ln() - x / self.sigma;
        }
        -self.sigma.ln() - (1.0 / self.nu + 1.0) * (self.nu * x / self.sigma).ln_1p()
    }
}

impl UnivariateDistribution for Gpd {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.support().1 {
            return 1.0;
        }
        -(-self.hazard(x)).exp_m1()
    }

    fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if x >= self.support().1 {
            return 0.0;
        }
        (-self.hazard(x)).exp()
    }

    fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }

    fn quantile(&self, u: f64) -> f64 {
        let l = (-u.clamp(0.0, 1.0)).ln_1p();
        if self.is_exponential() {
            -self.sigma * l
        } else {
            self.sigma * (-self.nu * l).exp_m1() / self.nu
        }
    }

    fn upper_quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        if self.is_exponential() {
            -self.sigma * q.ln()
        } else {
            self.sigma * (-self.nu * q.ln()).exp_m1() / self.nu
        }
    }

    fn support(&self) -> (f64, f64) {
        if self.nu < 0.0 && !self.is_exponential() {
            (0.0, -self.sigma / self.nu)
        } else {
            (0.0, f64::INFINITY)
        }
    }
}

/// Weibull law with `F(x) = 1 - exp(-(x/σ)^ν)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weibull {
    sigma: f64,
    nu: f64,
}

impl Weibull {
    pub fn new(sigma: f64, nu: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain {
                value: sigma,
                domain: "Weibull scale σ > 0",
            });
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Domain {
                value: nu,
                domain: "Weibull shape ν > 0",
            });
        }
        Ok(Self { sigma, nu })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

impl UnivariateDistribution for Weibull {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        -(-(x / self.sigma).powf(self.nu)).exp_m1()
    }

    fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        (-(x / self.sigma).powf(self.nu)).exp()
    }

    fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let z = x / self.sigma;
        (self.nu / self.sigma) * z.powf(self.nu - 1.0) * (-z.powf(self.nu)).exp()
    }

    fn quantile(&self, u: f64) -> f64 {
        self.sigma * (-(-u.clamp(0.0, 1.0)).ln_1p()).powf(1.0 / self.nu)
    }

    fn upper_quantile(&self, q: f64) -> f64 {
        self.sigma * (-q.clamp(0.0, 1.0).ln()).powf(1.0 / self.nu)
    }

    fn support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

/// Name of a two-parameter `(σ, ν)` family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gpd,
    Weibull,
}

impl Family {
    pub fn law(&self, sigma: f64, nu: f64) -> Result<Law> {
        Ok(match self {
            Family::Gpd => Law::Gpd(Gpd::new(sigma, nu)?),
            Family::Weibull => Law::Weibull(Weibull::new(sigma, nu)?),
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Gpd => "gpd",
            Family::Weibull => "weibull",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gpd" => Ok(Family::Gpd),
            "weibull" => Ok(Family::Weibull),
            other => Err(Error::InvalidInput(format!(
                "unknown family '{other}' (expected gpd or weibull)"
            ))),
        }
    }
}

/// A concrete member of one of the families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    Gpd(Gpd),
    Weibull(Weibull),
}

impl Law {
    pub fn family(&self) -> Family {
        match self {
            Law::Gpd(_) => Family::Gpd,
            Law::Weibull(_) => Family::Weibull,
        }
    }

    pub fn params(&self) -> (f64, f64) {
        match self {
            Law::Gpd(g) => (g.sigma, g.nu),
            Law::Weibull(w) => (w.sigma, w.nu),
        }
    }

    fn inner(&self) -> &dyn UnivariateDistribution {
        match self {
            Law::Gpd(g) => g,
            Law::Weibull(w) => w,
        }
    }
}

impl UnivariateDistribution for Law {
    fn cdf(&self, x: f64) -> f64 {
        self.inner().cdf(x)
    }

    fn sf(&self, x: f64) -> f64 {
        self.inner().sf(x)
    }

    fn density(&self, x: f64) -> f64 {
        self.inner().density(x)
    }

    fn quantile(&self, u: f64) -> f64 {
        self.inner().quantile(u)
    }

    fn upper_quantile(&self, q: f64) -> f64 {
        self.inner().upper_quantile(q)
    }

    fn support(&self) -> (f64, f64) {
        self.inner().support()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::draw;
    use crate::quadrature::TanhSinh;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn laws() -> Vec<Law> {
        vec![
            Law::Gpd(Gpd::new(3.0, 0.7).unwrap()),
            Law::Gpd(Gpd::new(3.0, 0.1).unwrap()),
            Law::Gpd(Gpd::new(2.0, 0.0).unwrap()),
            Law::Gpd(Gpd::new(2.0, -0.4).unwrap()),
            Law::Weibull(Weibull::new(3.0, 0.4).unwrap()),
            Law::Weibull(Weibull::new(1.5, 2.5).unwrap()),
        ]
    }

    #[test]
    fn quantile_inverts_cdf() {
        for law in laws() {
            for i in 1..200 {
                let u = i as f64 / 200.0;
                let x = law.quantile(u);
                assert!((law.cdf(x) - u).abs() < 1e-12, "{law:?} u={u}");
                let back = law.quantile(law.cdf(x));
                assert!((back - x).abs() <= 1e-9 * (1.0 + x.abs()), "{law:?} x={x}");
            }
            let x = law.upper_quantile(1e-9);
            assert!((law.sf(x) / 1e-9 - 1.0).abs() < 1e-9, "{law:?}");
        }
    }

    #[test]
    fn support_conventions() {
        let g = Gpd::new(3.0, 0.7).unwrap();
        assert_eq!(g.quantile(0.0), 0.0);
        let b = Gpd::new(2.0, -0.4).unwrap();
        assert_eq!(b.support(), (0.0, 5.0));
        assert_eq!(b.cdf(5.0), 1.0);
        assert_eq!(b.density(6.0), 0.0);
        assert_eq!(b.cdf(-1.0), 0.0);
        assert!(Gpd::new(-1.0, 0.2).is_err());
        assert!(Weibull::new(1.0, 0.0).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        let ts = TanhSinh::default();
        for law in laws() {
            let (lo, hi) = law.support();
            let total = if hi.is_finite() {
                ts.integrate(lo, hi, |x| law.density(x)).unwrap()
            } else {
                // split at the median and map the tail through x = m + t/(1-t)
                let m = law.quantile(0.5);
                let a = ts.integrate(lo, m, |x| law.density(x)).unwrap();
                let b = ts
                    .integrate(0.0, 1.0, |t| {
                        let x = m + t / (1.0 - t);
                        let jac = (1.0 - t) * (1.0 - t);
                        if jac == 0.0 {
                            0.0
                        } else {
                            law.density(x) / jac
                        }
                    })
                    .unwrap();
                a + b
            };
            assert!((total - 1.0).abs() < 1e-6, "{law:?}: {total}");
        }
    }

    #[test]
    fn density_is_cdf_derivative() {
        for law in laws() {
            for u in [0.1, 0.4, 0.8, 0.97] {
                let x = law.quantile(u);
                let h = 1e-6 * (1.0 + x);
                let fd = (law.cdf(x + h) - law.cdf(x - h)) / (2.0 * h);
                assert!((fd - law.density(x)).abs() < 1e-6 * (1.0 + law.density(x)), "{law:?}");
            }
        }
    }

    #[test]
    fn sampler_passes_kolmogorov_smirnov() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for law in laws() {
            let mut xs = draw(&law, 100_000, &mut rng);
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let d = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = law.cdf(x);
                    (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
                })
                .fold(0.0, f64::max);
            // 1.628 / sqrt(n) is the 1% critical value
            assert!(d < 0.006, "{law:?}: D = {d}");
        }
    }
}
