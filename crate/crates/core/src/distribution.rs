//! Continuous univariate laws used as plug-ins for population quantities.

use rand::Rng;

/// A continuous distribution with closed-form (or tabulated) cdf and quantile.
pub trait UnivariateDistribution: Send + Sync {
    fn cdf(&self, x: f64) -> f64;

    /// Survival function `1 - F(x)`; override when it can be computed without cancellation.
    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    fn density(&self, x: f64) -> f64;

    /// Left-continuous inverse of the cdf on `[0, 1)`.
    fn quantile(&self, u: f64) -> f64;

    /// `quantile(1 - q)`, accurate for small `q`.
    fn upper_quantile(&self, q: f64) -> f64 {
        self.quantile(1.0 - q)
    }

    /// Closed hull of the support.
    fn support(&self) -> (f64, f64);

    /// Breakpoints of a piecewise-linear cdf, if it is one.
    fn knots(&self) -> Option<&[f64]> {
        None
    }
}

/// `n` independent draws by inversion of uniforms.
pub fn draw<D, R>(dist: &D, n: usize, rng: &mut R) -> Vec<f64>
where
    D: UnivariateDistribution + ?Sized,
    R: Rng + ?Sized,
{
    (0..n).map(|_| dist.quantile(rng.random::<f64>())).collect()
}

/// Uniform law on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    pub lo: f64,
    pub hi: f64,
}

impl UnivariateDistribution for Uniform {
    fn cdf(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn sf(&self, x: f64) -> f64 {
        ((self.hi - x) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn density(&self, x: f64) -> f64 {
        if (self.lo..=self.hi).contains(&x) {
            1.0 / (self.hi - self.lo)
        } else {
            0.0
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }

    fn upper_quantile(&self, q: f64) -> f64 {
        self.hi - q * (self.hi - self.lo)
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// Piecewise-linear interpolation of the empirical cdf through the points
/// `(x_{i:n}, (i - 1/2)/n)`, extended linearly to `0` and `1` over half a
/// spacing beyond the extremes.
#[derive(Debug, Clone)]
pub struct SmoothedEmpirical {
    knots: Vec<f64>,
    probs: Vec<f64>,
}

impl SmoothedEmpirical {
    /// `sorted` must be nondecreasing with at least two distinct values.
    pub fn new(sorted: &[f64]) -> Self {
        let n = sorted.len();
        let mut knots = Vec::with_capacity(n + 2);
        let mut probs = Vec::with_capacity(n + 2);
        let first_gap = sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .find(|g| *g > 0.0)
            .unwrap_or(1.0);
        let last_gap = sorted
            .windows(2)
            .rev()
            .map(|w| w[1] - w[0])
            .find(|g| *g > 0.0)
            .unwrap_or(1.0);
        knots.push(sorted[0] - 0.5 * first_gap);
        probs.push(0.0);
        // ties collapse onto one knot carrying the mid-rank of the tie block
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            knots.push(sorted[i]);
            probs.push((0.5 * (i + j) as f64 + 0.5) / n as f64);
            i = j + 1;
        }
        knots.push(sorted[n - 1] + 0.5 * last_gap);
        probs.push(1.0);
        Self { knots, probs }
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let k = xs.partition_point(|&v| v <= x);
    let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

impl UnivariateDistribution for SmoothedEmpirical {
    fn cdf(&self, x: f64) -> f64 {
        interp(&self.knots, &self.probs, x)
    }

    fn density(&self, x: f64) -> f64 {
        if x < self.knots[0] || x >= self.knots[self.knots.len() - 1] {
            return 0.0;
        }
        let k = self.knots.partition_point(|&v| v <= x);
        (self.probs[k] - self.probs[k - 1]) / (self.knots[k] - self.knots[k - 1])
    }

    fn quantile(&self, u: f64) -> f64 {
        interp(&self.probs, &self.knots, u)
    }

    fn support(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn knots(&self) -> Option<&[f64]> {
        Some(&self.knots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothed_empirical_is_monotone_inverse() {
        let d = SmoothedEmpirical::new(&[1.0, 2.0, 2.0, 4.0, 7.0]);
        let mut prev = -1.0;
        for i in 0..=100 {
            let x = i as f64 * 0.1;
            let c = d.cdf(x);
            assert!(c >= prev);
            prev = c;
        }
        for u in [0.05, 0.3, 0.5, 0.77, 0.95] {
            assert!((d.cdf(d.quantile(u)) - u).abs() < 1e-12);
        }
        assert_eq!(d.cdf(-10.0), 0.0);
        assert_eq!(d.cdf(100.0), 1.0);
    }
}
