//! Dense univariate polynomials with real coefficients.
//!
//! Used both for the saturation pieces (polynomials in `r`) and for the
//! `λ`-dependence of the derivative bounds (polynomials in `1/λ`).

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul};

use crate::float::{abs, powi};

/// `c[0] + c[1] x + … + c[d] x^d`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

const BISECTION_STEPS: usize = 200;

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `c · x^k`.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of `x^k` (zero beyond the stored degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Degree ignoring exactly-zero leading coefficients; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|&c| c != 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Value of the `m`-th derivative at `x`, without materializing it.
    pub fn eval_derivative(&self, x: f64, m: usize) -> f64 {
        if m == 0 {
            return self.eval(x);
        }
        let mut acc = 0.0;
        for k in (m..self.coeffs.len()).rev() {
            let falling = ((k - m + 1)..=k).fold(1.0, |f, i| f * i as f64);
            acc = acc * x + self.coeffs[k] * falling;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        self.nth_derivative(1)
    }

    pub fn nth_derivative(&self, m: usize) -> Self {
        if m >= self.coeffs.len() {
            return Self::zero();
        }
        let coeffs = (m..self.coeffs.len())
            .map(|k| {
                let falling = ((k - m + 1)..=k).fold(1.0, |f, i| f * i as f64);
                self.coeffs[k] * falling
            })
            .collect();
        Self { coeffs }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `x ↦ p(s·x + c)`.
    pub fn compose_affine(&self, s: f64, c: f64) -> Self {
        let lin = Polynomial::new(vec![c, s]);
        self.coeffs
            .iter()
            .rev()
            .fold(Self::zero(), |acc, &k| &(&acc * &lin) + &Self::constant(k))
    }

    /// Largest absolute coefficient; a cheap magnitude scale.
    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, &c| m.max(abs(c)))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// All real roots in the closed interval `[a, b]`, sorted.
    ///
    /// Roots are isolated recursively: between consecutive roots of `p'`
    /// the polynomial is monotone, so each sign change brackets exactly one
    /// root, which is refined by bisection. Roots of even multiplicity are
    /// caught as critical points where `p` vanishes.
    pub fn real_roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        let mut roots = Vec::new();
        let Some(deg) = self.degree() else {
            return roots;
        };
        if deg == 0 || a > b {
            return roots;
        }
        if deg == 1 {
            let r = -self.coeffs[0] / self.coeffs[1];
            if r >= a && r <= b {
                roots.push(r);
            }
            return roots;
        }
        let scale = self.norm_inf() * powi(1.0 + abs(a).max(abs(b)), deg as i32);
        let zero_tol = 64.0 * f64::EPSILON * scale;

        let mut points = Vec::with_capacity(deg + 1);
        points.push(a);
        for c in self.derivative().real_roots_in(a, b) {
            if c > a && c < b {
                points.push(c);
            }
        }
        points.push(b);

        for w in points.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let flo = self.eval(lo);
            let fhi = self.eval(hi);
            if abs(flo) <= zero_tol {
                push_unique(&mut roots, lo);
                continue;
            }
            if abs(fhi) <= zero_tol {
                continue;
            }
            if (flo < 0.0) != (fhi < 0.0) {
                push_unique(&mut roots, self.bisect(lo, hi, flo));
            }
        }
        if abs(self.eval(b)) <= zero_tol {
            push_unique(&mut roots, b);
        }
        roots
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, flo: f64) -> f64 {
        let lo_negative = flo < 0.0;
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = self.eval(mid);
            if fm == 0.0 {
                return mid;
            }
            if (fm < 0.0) == lo_negative {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `(min, max)` of the polynomial over `[a, b]`, attained at an
    /// endpoint or at a real root of the derivative.
    pub fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        let mut lo = self.eval(a).min(self.eval(b));
        let mut hi = self.eval(a).max(self.eval(b));
        for c in self.derivative().real_roots_in(a, b) {
            let v = self.eval(c);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// `max |p|` over `[a, b]`.
    pub fn abs_max_on(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.range_on(a, b);
        abs(lo).max(abs(hi))
    }
}

fn push_unique(roots: &mut Vec<f64>, r: f64) {
    if roots.last().is_none_or(|&last| abs(last - r) > 1e-12 * (1.0 + abs(r))) {
        roots.push(r);
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial {
            coeffs: (0..len).map(|k| self.coeff(k) + rhs.coeff(k)).collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return Polynomial::zero();
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial { coeffs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_derivatives() {
        // 1 + 2x + 3x²
        let p = Polynomial::new(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.eval(2.0), 17.0);
        assert_eq!(p.eval_derivative(2.0, 1), 14.0);
        assert_eq!(p.eval_derivative(2.0, 2), 6.0);
        assert_eq!(p.eval_derivative(2.0, 3), 0.0);
        assert_eq!(p.nth_derivative(2).coeffs(), &[6.0]);
    }

    #[test]
    fn roots_of_cubic_with_three_real_roots() {
        // (x − 1)(x − 2)(x − 3) = x³ − 6x² + 11x − 6
        let p = Polynomial::new(vec![-6.0, 11.0, -6.0, 1.0]);
        let roots = p.real_roots_in(0.0, 4.0);
        assert_eq!(roots.len(), 3);
        for (r, want) in roots.iter().zip([1.0, 2.0, 3.0]) {
            assert!((r - want).abs() < 1e-12, "{r} vs {want}");
        }
        assert_eq!(p.real_roots_in(1.5, 2.5).len(), 1);
    }

    #[test]
    fn double_root_is_found() {
        // (x − 1)²
        let p = Polynomial::new(vec![1.0, -2.0, 1.0]);
        let roots = p.real_roots_in(0.0, 3.0);
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_composition() {
        let p = Polynomial::new(vec![0.0, 0.0, 1.0]);
        // (2x + 1)² = 4x² + 4x + 1
        assert_eq!(p.compose_affine(2.0, 1.0).coeffs(), &[1.0, 4.0, 4.0]);
    }

    #[test]
    fn range_of_quadratic() {
        let p = Polynomial::new(vec![0.0, -2.0, 1.0]);
        let (lo, hi) = p.range_on(0.0, 3.0);
        assert!((lo + 1.0).abs() < 1e-14);
        assert_eq!(hi, 3.0);
    }
}
