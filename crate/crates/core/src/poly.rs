//! Shifted Legendre polynomials on `[0, 1]` and their antiderivatives.
//!
//! `L_r(t) = sum_k (-1)^(r-k) C(r,k) C(r+k,k) t^k` and `K_r(t) = int_0^t L_{r-1}`.
//! Every constraint row used by the estimators is a polynomial `p` on `[0, 1]`
//! with zero integral, paired with its antiderivative `K` (so `K(0) = K(1) = 0`).

use crate::error::{Error, Result};

/// Largest supported polynomial order. Coefficients of `L_r` grow like
/// `C(2r, r)` and cancellation destroys double precision past this point.
pub const MAX_ORDER: usize = 20;

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain { value: t, domain: "[0, 1]" })
    }
}

/// A polynomial in the monomial basis, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(&self) -> Polynomial {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(0.0);
        for (k, &c) in self.coeffs.iter().enumerate() {
            out.push(c / (k + 1) as f64);
        }
        Polynomial::new(out)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::new(vec![0.0]);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// `int_0^1 p(t) dt`.
    pub fn integral01(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c / (k + 1) as f64)
            .sum()
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new(
            (0..len)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(0.0)
                        - other.coeffs.get(k).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }
}

/// Exact integer coefficients of `L_r`, lowest degree first.
pub fn shifted_legendre_coeffs(r: usize) -> Result<Vec<i128>> {
    if r > MAX_ORDER {
        return Err(Error::UnsupportedOrder {
            order: r,
            reason: "orders above 20 lose double precision",
        });
    }
    let r64 = r as u64;
    Ok((0..=r64)
        .map(|k| {
            let mag = (binomial(r64, k) * binomial(r64 + k, k)) as i128;
            if (r64 - k).is_multiple_of(2) {
                mag
            } else {
                -mag
            }
        })
        .collect())
}

/// `L_r` as a [`Polynomial`].
pub fn shifted_legendre(r: usize) -> Result<Polynomial> {
    Ok(Polynomial::new(
        shifted_legendre_coeffs(r)?.into_iter().map(|c| c as f64).collect(),
    ))
}

/// `K_r` as a [`Polynomial`], `r >= 2`.
pub fn integrated_legendre(r: usize) -> Result<Polynomial> {
    if r < 2 {
        return Err(Error::UnsupportedOrder {
            order: r,
            reason: "K_1 is not shift invariant",
        });
    }
    Ok(shifted_legendre(r - 1)?.antiderivative())
}

/// `(L_{r-1}(t), L_r(t))` by the three-term recurrence, stable at every order.
fn legendre_pair(r: usize, t: f64) -> (f64, f64) {
    let x = 2.0 * t - 1.0;
    let (mut prev, mut cur) = (1.0, x);
    if r == 0 {
        return (0.0, 1.0);
    }
    for k in 1..r {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

/// Evaluates `L_r(t)` for `t` in `[0, 1]`.
pub fn shifted_legendre_eval(r: usize, t: f64) -> Result<f64> {
    check_unit(t)?;
    check_max(r)?;
    Ok(legendre_pair(r, t).1)
}

/// Evaluates `K_r(t) = int_0^t L_{r-1}(u) du` for `r >= 2`, `t` in `[0, 1]`,
/// as `(L_r - L_{r-2}) / (2(2r - 1))`, which vanishes exactly at both ends.
pub fn integrated_legendre_eval(r: usize, t: f64) -> Result<f64> {
    check_unit(t)?;
    check_max(r)?;
    if r < 2 {
        return Err(Error::UnsupportedOrder {
            order: r,
            reason: "K_1 is not shift invariant",
        });
    }
    let lower = legendre_pair(r - 1, t).0;
    let upper = legendre_pair(r, t).1;
    Ok((upper - lower) / (2.0 * (2 * r - 1) as f64))
}

fn check_max(r: usize) -> Result<()> {
    if r > MAX_ORDER {
        return Err(Error::UnsupportedOrder {
            order: r,
            reason: "orders above 20 lose double precision",
        });
    }
    Ok(())
}

/// The constraint rows of a shift-invariant model.
///
/// Row `j` is a polynomial `p_j` with `int_0^1 p_j = 0` (for Legendre rows,
/// `p_j = L_{r_j - 1}`) together with its antiderivative `K_j`. The model
/// constrains `int_0^1 p_j(u) F^{-1}(u) du`, which equals `-int K_j dF^{-1}`.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    orders: Option<Vec<usize>>,
    rows: Vec<Polynomial>,
    integrated: Vec<Polynomial>,
}

impl PolyBasis {
    /// Legendre rows for the given L-moment orders (each in `2..=20`).
    pub fn legendre(orders: &[usize]) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::InvalidInput("empty order list".into()));
        }
        let mut rows = Vec::with_capacity(orders.len());
        let mut integrated = Vec::with_capacity(orders.len());
        for &r in orders {
            integrated.push(integrated_legendre(r)?);
            rows.push(shifted_legendre(r - 1)?);
        }
        Ok(Self {
            orders: Some(orders.to_vec()),
            rows,
            integrated,
        })
    }

    /// Arbitrary polynomial rows; each must integrate to zero over `[0, 1]`.
    pub fn from_rows(rows: Vec<Polynomial>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("empty row list".into()));
        }
        for (j, p) in rows.iter().enumerate() {
            let scale = p.coeffs().iter().map(|c| c.abs()).sum::<f64>().max(1.0);
            if p.integral01().abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!(
                    "row {j} does not integrate to zero; the model would not be shift invariant"
                )));
            }
        }
        let integrated = rows.iter().map(Polynomial::antiderivative).collect();
        Ok(Self {
            orders: None,
            rows,
            integrated,
        })
    }

    pub fn orders(&self) -> Option<&[usize]> {
        self.orders.as_deref()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The derivative rows `p_j` (Legendre `L_{r-1}`).
    pub fn rows(&self) -> &[Polynomial] {
        &self.rows
    }

    pub fn integrated_rows(&self) -> &[Polynomial] {
        &self.integrated
    }

    /// `(K_j(t))_j`.
    pub fn constraint_vector(&self, t: f64) -> Result<Vec<f64>> {
        check_unit(t)?;
        Ok(self.integrated.iter().map(|k| k.eval(t)).collect())
    }

    /// `(p_j(t))_j` without domain checks.
    pub fn row_values(&self, t: f64) -> Vec<f64> {
        self.rows.iter().map(|p| p.eval(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    #[test]
    fn legendre_examples() {
        assert_eq!(shifted_legendre_eval(0, 0.37).unwrap(), 1.0);
        assert_eq!(shifted_legendre_eval(1, 0.5).unwrap(), 0.0);
        assert_eq!(shifted_legendre_eval(2, 0.0).unwrap(), 1.0);
        assert_eq!(shifted_legendre_eval(2, 1.0).unwrap(), 1.0);
        assert_eq!(shifted_legendre_coeffs(2).unwrap(), vec![1, -6, 6]);
        assert_eq!(shifted_legendre_coeffs(3).unwrap(), vec![-1, 12, -30, 20]);
    }

    #[test]
    fn integrated_examples() {
        for (t, want) in [(0.0, 0.0), (0.25, -0.1875), (1.0, 0.0)] {
            assert!((integrated_legendre_eval(2, t).unwrap() - want).abs() < 1e-15);
        }
        assert!(integrated_legendre_eval(3, 0.5).unwrap().abs() < 1e-15);
        assert!(integrated_legendre_eval(4, 1.0).unwrap().abs() < 1e-12);
        // K_3(t) = 2t^3 - 3t^2 + t
        let k3 = integrated_legendre(3).unwrap();
        assert_eq!(k3.coeffs(), &[0.0, 1.0, -3.0, 2.0]);
    }

    #[test]
    fn domain_and_order_errors() {
        assert!(shifted_legendre_eval(2, 1.5).is_err());
        assert!(shifted_legendre_eval(2, -0.1).is_err());
        assert!(integrated_legendre_eval(1, 0.5).is_err());
        assert!(matches!(
            shifted_legendre_eval(21, 0.5),
            Err(Error::UnsupportedOrder { order: 21, .. })
        ));
        assert!(shifted_legendre_eval(20, 0.5).is_ok());
    }

    #[test]
    fn constraint_vector_examples() {
        let b = PolyBasis::legendre(&[2, 3, 4]).unwrap();
        assert_eq!(b.constraint_vector(0.0).unwrap(), vec![0.0, 0.0, 0.0]);
        let b2 = PolyBasis::legendre(&[2]).unwrap();
        assert_eq!(b2.constraint_vector(0.5).unwrap(), vec![-0.25]);
        let b23 = PolyBasis::legendre(&[2, 3]).unwrap();
        for v in b23.constraint_vector(1.0).unwrap() {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_zeros_all_orders() {
        for r in 2..=MAX_ORDER {
            assert!(integrated_legendre_eval(r, 0.0).unwrap().abs() < 1e-12);
            assert!(integrated_legendre_eval(r, 1.0).unwrap().abs() < 1e-12, "r={r}");
        }
    }

    #[test]
    fn orthogonality() {
        let gl = GaussLegendre::new(20);
        for r in 0..=8 {
            let lr = shifted_legendre(r).unwrap();
            for s in 0..=8 {
                let ls = shifted_legendre(s).unwrap();
                let ip = gl.integrate(0.0, 1.0, |t| lr.eval(t) * ls.eval(t));
                let want = if r == s { 1.0 / (2 * r + 1) as f64 } else { 0.0 };
                assert!((ip - want).abs() < 1e-12, "r={r} s={s} ip={ip}");
            }
        }
    }

    #[test]
    fn antiderivative_matches_lower_order() {
        for r in 2..=10 {
            let k = integrated_legendre(r).unwrap();
            let l = shifted_legendre(r - 1).unwrap();
            let dk = k.derivative();
            for i in 0..=100 {
                let t = i as f64 / 100.0;
                assert!((dk.eval(t) - l.eval(t)).abs() < 1e-9 * (1.0 + l.eval(t).abs()));
            }
            let h = 1e-5;
            for i in 1..100 {
                let t = i as f64 / 100.0;
                let fd = (k.eval(t + h) - k.eval(t - h)) / (2.0 * h);
                assert!((fd - l.eval(t)).abs() < 1e-6 * (1.0 + l.eval(t).abs()), "r={r} t={t}");
            }
        }
    }

    #[test]
    fn bounded_by_t_one_minus_t() {
        // K_r(t) = -t(1-t) J^{(1,1)}_{r-2}(2t-1) / (r-1) and |J^{(1,1)}_{r-2}| <= r-1 on [-1, 1].
        for r in 2..=12 {
            let k = integrated_legendre(r).unwrap();
            let c = 1.0;
            for i in 1..1000 {
                let t = i as f64 / 1000.0;
                assert!(k.eval(t).abs() <= c * t * (1.0 - t) + 1e-12, "r={r} t={t}");
            }
        }
    }

    #[test]
    fn from_rows_rejects_nonzero_integral() {
        assert!(PolyBasis::from_rows(vec![Polynomial::new(vec![1.0])]).is_err());
        assert!(PolyBasis::from_rows(vec![Polynomial::new(vec![-1.0, 2.0])]).is_ok());
    }
}
