//! Power divergences `φ_γ` and their Fenchel conjugates `ψ`.
//!
//! `φ_γ(x) = (x^γ - γx + γ - 1) / (γ(γ - 1))`, with the Kullback–Leibler
//! (`γ = 1`) and modified Kullback–Leibler (`γ = 0`) limits handled as
//! dedicated branches. `φ` is extended-real valued (`+∞` off its domain);
//! `ψ` and its derivatives return a domain error off `dom ψ`, which the dual
//! solver uses to backtrack.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LIMIT_EPS: f64 = 1e-6;

/// A member of the power divergence family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Divergence {
    /// `φ(x) = (x - 1)^2 / 2` on the whole real line.
    Chi2,
    /// `φ(x) = x log x - x + 1`, `x > 0`.
    Kl,
    /// `φ(x) = -log x + x - 1`, `x > 0`.
    Klm,
    /// General `γ`, `x > 0`.
    Power(f64),
}

impl Divergence {
    /// Dispatches `power:γ` near the removable singularities to the closed forms.
    pub fn power(gamma: f64) -> Self {
        if gamma.abs() < LIMIT_EPS {
            Divergence::Klm
        } else if (gamma - 1.0).abs() < LIMIT_EPS {
            Divergence::Kl
        } else {
            Divergence::Power(gamma)
        }
    }

    /// Endpoints `(a_φ, b_φ)` of `dom φ`.
    pub fn phi_domain(&self) -> (f64, f64) {
        match self {
            Divergence::Chi2 => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Open interval `dom ψ`.
    pub fn psi_domain(&self) -> (f64, f64) {
        match *self {
            Divergence::Chi2 | Divergence::Kl => (f64::NEG_INFINITY, f64::INFINITY),
            Divergence::Klm => (f64::NEG_INFINITY, 1.0),
            Divergence::Power(g) => {
                // 1 + (γ - 1) t > 0
                if g > 1.0 {
                    (-1.0 / (g - 1.0), f64::INFINITY)
                } else {
                    (f64::NEG_INFINITY, 1.0 / (1.0 - g))
                }
            }
        }
    }

    pub fn in_psi_domain(&self, t: f64) -> bool {
        let (lo, hi) = self.psi_domain();
        t > lo && t < hi
    }

    /// `φ(x)`, `+∞` outside the domain.
    pub fn phi(&self, x: f64) -> f64 {
        match *self {
            Divergence::Chi2 => 0.5 * (x - 1.0) * (x - 1.0),
            _ if !(x > 0.0) => f64::INFINITY,
            Divergence::Kl => x * x.ln() - x + 1.0,
            Divergence::Klm => -x.ln() + x - 1.0,
            Divergence::Power(g) => (x.powf(g) - g * x + g - 1.0) / (g * (g - 1.0)),
        }
    }

    pub fn phi_prime(&self, x: f64) -> f64 {
        match *self {
            Divergence::Chi2 => x - 1.0,
            _ if !(x > 0.0) => f64::NAN,
            Divergence::Kl => x.ln(),
            Divergence::Klm => 1.0 - 1.0 / x,
            Divergence::Power(g) => (x.powf(g - 1.0) - 1.0) / (g - 1.0),
        }
    }

    pub fn phi_second(&self, x: f64) -> f64 {
        match *self {
            Divergence::Chi2 => 1.0,
            _ if !(x > 0.0) => f64::NAN,
            Divergence::Kl => 1.0 / x,
            Divergence::Klm => 1.0 / (x * x),
            Divergence::Power(g) => x.powf(g - 2.0),
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        if self.in_psi_domain(t) {
            Ok(())
        } else {
            Err(Error::Domain {
                value: t,
                domain: "dom ψ",
            })
        }
    }

    /// `ψ(t) = sup_x {tx - φ(x)}`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(match *self {
            Divergence::Chi2 => 0.5 * t * t + t,
            Divergence::Kl => t.exp_m1(),
            Divergence::Klm => -(-t).ln_1p(),
            Divergence::Power(g) => {
                let base = 1.0 + (g - 1.0) * t;
                (base.powf(g / (g - 1.0)) - 1.0) / g
            }
        })
    }

    /// `ψ'(t)`, the maximizer `x` in the conjugate.
    pub fn psi_prime(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(match *self {
            Divergence::Chi2 => t + 1.0,
            Divergence::Kl => t.exp(),
            Divergence::Klm => 1.0 / (1.0 - t),
            Divergence::Power(g) => (1.0 + (g - 1.0) * t).powf(1.0 / (g - 1.0)),
        })
    }

    pub fn psi_second(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(match *self {
            Divergence::Chi2 => 1.0,
            Divergence::Kl => t.exp(),
            Divergence::Klm => 1.0 / ((1.0 - t) * (1.0 - t)),
            Divergence::Power(g) => (1.0 + (g - 1.0) * t).powf((2.0 - g) / (g - 1.0)),
        })
    }

    /// `(ψ, ψ', ψ'')` in one domain check.
    pub fn psi_all(&self, t: f64) -> Result<(f64, f64, f64)> {
        self.check(t)?;
        Ok(match *self {
            Divergence::Chi2 => (0.5 * t * t + t, t + 1.0, 1.0),
            Divergence::Kl => {
                let e = t.exp();
                (t.exp_m1(), e, e)
            }
            Divergence::Klm => {
                let inv = 1.0 / (1.0 - t);
                (-(-t).ln_1p(), inv, inv * inv)
            }
            Divergence::Power(g) => {
                let base = 1.0 + (g - 1.0) * t;
                let d1 = base.powf(1.0 / (g - 1.0));
                ((base * d1 - 1.0) / g, d1, d1 / base)
            }
        })
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Chi2 => write!(f, "chi2"),
            Divergence::Kl => write!(f, "kl"),
            Divergence::Klm => write!(f, "klm"),
            Divergence::Power(g) => write!(f, "power:{g}"),
        }
    }
}

impl FromStr for Divergence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "chi2" => Ok(Divergence::Chi2),
            "kl" => Ok(Divergence::Kl),
            "klm" => Ok(Divergence::Klm),
            other => {
                let g = other
                    .strip_prefix("power:")
                    .and_then(|g| g.parse::<f64>().ok())
                    .filter(|g| g.is_finite())
                    .ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "unknown divergence '{other}' (expected chi2, kl, klm or power:<gamma>)"
                        ))
                    })?;
                Ok(Divergence::power(g))
            }
        }
    }
}

impl TryFrom<String> for Divergence {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Divergence> for String {
    fn from(d: Divergence) -> String {
        d.to_string()
    }
}
