//! Numerical integration rules: Gauss–Legendre, adaptive tanh-sinh, and
//! panelled Gauss rules for integrands spread over several scales.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Adaptive tanh-sinh (double exponential) quadrature on a finite interval.
///
/// Nodes never touch the endpoints, so integrable endpoint singularities
/// (heavy-tailed quantile functions near 1) are handled.
#[derive(Debug, Clone, Copy)]
pub struct TanhSinh {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_level: usize,
}

impl Default for TanhSinh {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_level: 12,
        }
    }
}

impl TanhSinh {
    /// Integrates `f` over `(a, b)`. The integrand is evaluated at `(x, a_dist, b_dist)`
    /// where `a_dist = x - a` and `b_dist = b - x` are computed without cancellation.
    pub fn integrate_with_distances<F>(&self, a: f64, b: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(f64, f64, f64) -> f64,
    {
        let half = 0.5 * (b - a);
        let pi_2 = std::f64::consts::FRAC_PI_2;
        let tmax = 6.5;
        let mut h = 1.0;
        let mut eval = |t: f64| -> f64 {
            let s = pi_2 * t.sinh();
            let c = s.cosh();
            // 1 - tanh(s) and 1 + tanh(s) without cancellation
            let e = (-2.0 * s.abs()).exp();
            let small = 2.0 * e / (1.0 + e);
            let (dist_a, dist_b) = if s >= 0.0 {
                (half * (2.0 - small), half * small)
            } else {
                (half * small, half * (2.0 - small))
            };
            if dist_a <= 0.0 || dist_b <= 0.0 {
                return 0.0;
            }
            let w = pi_2 * t.cosh() / (c * c);
            let x = if dist_a < dist_b { a + dist_a } else { b - dist_b };
            let v = f(x, dist_a, dist_b);
            if v.is_finite() {
                half * w * v
            } else {
                f64::NAN
            }
        };
        let mut sum = eval(0.0);
        let mut k = 1usize;
        loop {
            let t = k as f64 * h;
            if t > tmax {
                break;
            }
            sum += eval(t) + eval(-t);
            k += 1;
        }
        let mut estimate = h * sum;
        let mut err = f64::INFINITY;
        for _level in 1..=self.max_level {
            h *= 0.5;
            let mut k = 1usize;
            loop {
                let t = k as f64 * h;
                if t > tmax {
                    break;
                }
                sum += eval(t) + eval(-t);
                k += 2;
            }
            let new_estimate = h * sum;
            if new_estimate.is_nan() {
                return Err(Error::Quadrature {
                    estimate: new_estimate,
                    error: f64::INFINITY,
                });
            }
            err = (new_estimate - estimate).abs();
            estimate = new_estimate;
            if err <= self.abs_tol.max(self.rel_tol * estimate.abs()) {
                return Ok(estimate);
            }
        }
        // Double-exponential convergence: the last difference overestimates the error.
        if err <= 1e3 * self.abs_tol.max(self.rel_tol * estimate.abs()) {
            Ok(estimate)
        } else {
            Err(Error::Quadrature { estimate, error: err })
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> Result<f64> {
        self.integrate_with_distances(a, b, |x, _, _| f(x))
    }
}

/// A composite rule: Gauss–Legendre panels between consecutive breakpoints.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Panel index of each node.
    pub panel: Vec<usize>,
    pub breaks: Vec<f64>,
}

impl PanelRule {
    pub fn new(breaks: &[f64], points_per_panel: usize) -> Self {
        let gl = GaussLegendre::new(points_per_panel);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut panel = Vec::new();
        for (p, w) in breaks.windows(2).enumerate() {
            if w[1] <= w[0] {
                continue;
            }
            for (x, wt) in gl.mapped(w[0], w[1]) {
                nodes.push(x);
                weights.push(wt);
                panel.push(p);
            }
        }
        Self {
            nodes,
            weights,
            panel,
            breaks: breaks.to_vec(),
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exactness() {
        let gl = GaussLegendre::new(5);
        let w: f64 = gl.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        // degree 9 exact
        let v = gl.integrate(0.0, 1.0, |x| x.powi(9));
        assert!((v - 0.1).abs() < 1e-15);
        let big = GaussLegendre::new(256);
        let v = big.integrate(0.0, std::f64::consts::PI, f64::sin);
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_endpoint_singularities() {
        let ts = TanhSinh::default();
        // int_0^1 (1-t)^{-0.7} dt = 1/0.3
        let v = ts
            .integrate_with_distances(0.0, 1.0, |_, _, db| db.powf(-0.7))
            .unwrap();
        assert!((v - 1.0 / 0.3).abs() < 1e-9, "{v}");
        let v = ts.integrate(0.0, 1.0, |t| -t.ln()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn panel_rule_integrates_polynomials() {
        let rule = PanelRule::new(&[0.0, 0.3, 1.0, 4.0], 8);
        let v = rule.integrate(|x| x * x);
        assert!((v - 64.0 / 3.0).abs() < 1e-12);
    }
}
