//! Dense univariate polynomials, coefficients lowest-degree first.

use std::fmt;

#[derive(Clone, PartialEq)]
pub struct Poly {
    /// Coefficients `c0 + c1*u + c2*u^2 + ...`. Never empty.
    coeffs: Vec<f64>,
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly{:?}", self.coeffs)
    }
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly::new(vec![0.0])
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// `c0 + c1*u`
    pub fn linear(c0: f64, c1: f64) -> Self {
        Poly::new(vec![c0, c1])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree after ignoring trailing coefficients below `tol` in magnitude.
    pub fn degree(&self, tol: f64) -> usize {
        let mut d = self.coeffs.len() - 1;
        while d > 0 && self.coeffs[d].abs() <= tol {
            d -= 1;
        }
        d
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.abs() <= tol)
    }

    pub fn is_constant(&self, tol: f64) -> bool {
        self.degree(tol) == 0
    }

    pub fn eval(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| c * (i as f64 + 1.0))
                .collect(),
        )
    }

    /// Antiderivative with constant term `c0`.
    pub fn antiderivative(&self, c0: f64) -> Poly {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(c0);
        for (i, &c) in self.coeffs.iter().enumerate() {
            out.push(c / (i as f64 + 1.0));
        }
        Poly::new(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Poly::new(out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn add_constant(&self, k: f64) -> Poly {
        let mut out = self.coeffs.clone();
        out[0] += k;
        Poly::new(out)
    }

    /// Re-express the polynomial around a shifted origin: returns `q` with
    /// `q(u) = p(u + delta)`.
    pub fn shift_origin(&self, delta: f64) -> Poly {
        // Horner-style synthetic expansion of p(u + delta).
        let mut out = vec![0.0; self.coeffs.len()];
        for &c in self.coeffs.iter().rev() {
            for i in (1..out.len()).rev() {
                out[i] = out[i] * delta + out[i - 1];
            }
            out[0] = out[0] * delta + c;
        }
        Poly::new(out)
    }

    /// Composition `self(inner(u))`.
    pub fn compose(&self, inner: &Poly) -> Poly {
        let mut acc = Poly::constant(0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc.mul(inner).add_constant(c);
        }
        acc
    }

    /// Rescale the argument: returns `q` with `q(u) = p(k * u)`.
    pub fn scale_arg(&self, k: f64) -> Poly {
        let mut out = self.coeffs.clone();
        let mut pow = 1.0;
        for c in out.iter_mut() {
            *c *= pow;
            pow *= k;
        }
        Poly::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_derivative() {
        let p = Poly::new(vec![1.0, 2.0, 3.0]); // 1 + 2u + 3u^2
        assert_eq!(p.eval(2.0), 17.0);
        assert_eq!(p.derivative().coeffs(), &[2.0, 6.0]);
    }

    #[test]
    fn shift_origin_matches_eval() {
        let p = Poly::new(vec![1.0, -2.0, 0.5, 3.0]);
        let q = p.shift_origin(1.5);
        for u in [-2.0, -0.3, 0.0, 0.7, 4.0] {
            assert!((q.eval(u) - p.eval(u + 1.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn compose_matches_eval() {
        let p = Poly::new(vec![0.0, 1.0, 1.0]);
        let q = Poly::new(vec![2.0, 3.0]);
        let c = p.compose(&q);
        for u in [0.0, 0.5, 2.0] {
            assert!((c.eval(u) - p.eval(q.eval(u))).abs() < 1e-9);
        }
    }

    #[test]
    fn antiderivative_roundtrip() {
        let p = Poly::new(vec![5.0, 1.0, -2.0]);
        let a = p.antiderivative(7.0);
        assert_eq!(a.eval(0.0), 7.0);
        assert_eq!(a.derivative().coeffs(), p.coeffs());
    }
}
