//! Derivative-free minimization inside a box.

use serde::{Deserialize, Serialize};

/// Nelder–Mead settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the simplex fits in a box of this size relative to `1 + |x|`.
    pub x_tol: f64,
    /// ... and the function values agree to this, relative to `1 + |f|`.
    pub f_tol: f64,
    /// Initial step relative to `|x_j|` (or to the box width when `x_j = 0`).
    pub initial_step: f64,
    /// Number of restarts from the best vertex after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            x_tol: 1e-9,
            f_tol: 1e-13,
            initial_step: 0.1,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

fn clamp(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

fn order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // NaN and +∞ sort last
    idx.sort_by(|&a, &b| {
        let (x, y) = (values[a], values[b]);
        match (x.is_nan(), y.is_nan()) {
            (true, true) => std::cmp::Ordering::Equal,
            (true, false) => std::cmp::Ordering::Greater,
            (false, true) => std::cmp::Ordering::Less,
            _ => x.total_cmp(&y),
        }
    });
    idx
}

fn nelder_mead_once<F>(
    f: &mut F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &NelderMeadOptions,
    evals: &mut usize,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    clamp(&mut simplex[0], bounds);
    for j in 0..d {
        let mut v = simplex[0].clone();
        let (lo, hi) = bounds[j];
        let mut h = if v[j] != 0.0 {
            opts.initial_step * v[j].abs()
        } else {
            opts.initial_step * (hi - lo).min(1.0)
        };
        h = h.min(0.5 * (hi - lo));
        v[j] = if v[j] + h <= hi { v[j] + h } else { v[j] - h };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, evals)).collect();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while *evals < opts.max_evals {
        let idx = order(&values);
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();
        let best = values[0];
        let worst = values[d];
        let scale_x = simplex
            .iter()
            .skip(1)
            .map(|x| {
                x.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if best.is_finite()
            && worst.is_finite()
            && (worst - best).abs() <= opts.f_tol * (1.0 + best.abs())
            && scale_x <= opts.x_tol
        {
            converged = true;
            break;
        }
        if scale_x <= 1e-3 * opts.x_tol {
            // collapsed simplex with disagreeing values (e.g. an infinite vertex)
            break;
        }
        let mut centroid = vec![0.0; d];
        for x in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / d as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[d])
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clamp(&mut p, bounds);
            p
        };
        let xr = along(alpha);
        let fr = eval(&xr, evals);
        if fr < values[0] {
            let xe = along(gamma);
            let fe = eval(&xe, evals);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        // outside contraction when the reflection helped at all, inside otherwise
        let xc = if fr < values[d] { along(rho) } else { along(-rho) };
        let fc = eval(&xc, evals);
        if fc < values[d].min(fr) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        // shrink toward the best vertex
        let x0 = simplex[0].clone();
        for k in 1..=d {
            let mut p: Vec<f64> = x0
                .iter()
                .zip(&simplex[k])
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            clamp(&mut p, bounds);
            values[k] = eval(&p, evals);
            simplex[k] = p;
        }
    }
    let idx = order(&values);
    Minimum {
        x: simplex[idx[0]].clone(),
        value: values[idx[0]],
        evals: *evals,
        converged,
    }
}

/// Minimizes `f` over the box by Nelder–Mead, projecting every trial point
/// onto the box, with `opts.restarts` fresh simplices built around the best point.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], bounds: &[(f64, f64)], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut evals = 0;
    let mut best = nelder_mead_once(&mut f, x0, bounds, opts, &mut evals);
    for _ in 0..opts.restarts {
        if evals >= opts.max_evals || !best.value.is_finite() {
            break;
        }
        let next = nelder_mead_once(&mut f, &best.x.clone(), bounds, opts, &mut evals);
        if next.value <= best.value {
            best = next;
        } else {
            best.evals = evals;
        }
    }
    best.evals = evals;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], &[(-5.0, 5.0), (-5.0, 5.0)], &NelderMeadOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn respects_the_box() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2);
        let m = nelder_mead(f, &[0.5, 0.5], &[(0.0, 1.0), (0.0, 1.0)], &NelderMeadOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-8 && m.x[1].abs() < 1e-8, "{m:?}");
    }

    #[test]
    fn avoids_infinite_regions() {
        let f = |x: &[f64]| if x[0] < 0.2 { f64::INFINITY } else { (x[0] - 0.1).powi(2) };
        let m = nelder_mead(f, &[2.0], &[(-1.0, 5.0)], &NelderMeadOptions::default());
        assert!((m.x[0] - 0.2).abs() < 1e-6, "{m:?}");
    }
}
