//! Univariate complex polynomials and a simultaneous-iteration root finder.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `Σ coeffs[i] z^i`, lowest degree first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CPoly {
    pub coeffs: Vec<Complex64>,
}

impl CPoly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Monic polynomial `Π (z − r)`.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut p = Self::new(vec![ONE]);
        for &r in roots {
            p = p.mul(&Self::new(vec![-r, ONE]));
        }
        p
    }

    /// Index of the highest nonzero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| *c != ZERO)
    }

    pub fn leading(&self) -> Complex64 {
        self.degree().map_or(ZERO, |d| self.coeffs[d])
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
    }

    /// `Σ |c_i| |z|^i`, the natural scale for a residual at `z`.
    pub fn eval_abs(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::new(vec![ZERO]);
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, f: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * f).collect())
    }

    /// Drops trailing coefficients with modulus `<= tol · max|c|`.
    pub fn trimmed(&self, tol: f64) -> Self {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let keep = self
            .coeffs
            .iter()
            .rposition(|c| c.norm() > tol * scale)
            .map_or(1, |d| d + 1);
        Self::new(self.coeffs[..keep].to_vec())
    }

    /// Coefficients of `q(t) = p(a + t)`.
    pub fn taylor_shift(&self, a: Complex64) -> Self {
        // Repeated synthetic division by (z - a).
        let mut work = self.coeffs.clone();
        let n = work.len();
        for k in 0..n {
            for i in (k..n - 1).rev() {
                let hi = work[i + 1];
                work[i] += a * hi;
            }
        }
        Self::new(work)
    }

    /// Quotient and remainder of division by `(z − a)`.
    pub fn deflate(&self, a: Complex64) -> (Self, Complex64) {
        let n = self.coeffs.len();
        if n == 1 {
            return (Self::new(vec![ZERO]), self.coeffs[0]);
        }
        let mut q = vec![ZERO; n - 1];
        let mut carry = ZERO;
        for i in (0..n).rev() {
            let c = self.coeffs[i] + carry * a;
            if i == 0 {
                return (Self::new(q), c);
            }
            q[i - 1] = c;
            carry = c;
        }
        unreachable!()
    }

    /// All roots by Aberth–Ehrlich iteration.
    ///
    /// Converged roots satisfy `|p(r)| <= 1e-10 · (1 + Σ|p_i||r|^i)`. On failure
    /// the best iterate is returned inside the error.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        poly_roots(self)
    }
}

const MAX_ITER: usize = 500;

pub fn poly_roots(p: &CPoly) -> Result<Vec<Complex64>> {
    let deg = p.degree().ok_or(Error::ZeroPolynomial).and_then(|d| {
        if d == 0 {
            Err(Error::InvalidInput(
                "constant polynomial has no roots".into(),
            ))
        } else {
            Ok(d)
        }
    })?;
    let lead = p.coeffs[deg];
    let monic = CPoly::new(p.coeffs[..=deg].iter().map(|c| c / lead).collect());
    if deg == 1 {
        return Ok(vec![-monic.coeffs[0]]);
    }
    let dp = monic.derivative();

    // Initial guesses on a circle of the Fujiwara-style radius.
    let radius = (0..deg)
        .map(|i| monic.coeffs[i].norm().powf(1.0 / (deg - i) as f64))
        .fold(0.0, f64::max)
        .max(1e-3);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect();

    let converged = |z: &[Complex64]| {
        z.iter()
            .all(|&r| monic.eval(r).norm() <= 1e-10 * (1.0 + monic.eval_abs(r)))
    };

    for _ in 0..MAX_ITER {
        let mut max_step = 0.0f64;
        for i in 0..deg {
            let pz = monic.eval(z[i]);
            if pz == ZERO {
                continue;
            }
            let ratio = pz / dp.eval(z[i]);
            let repulsion: Complex64 = (0..deg)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d == ZERO {
                        ZERO
                    } else {
                        ONE / d
                    }
                })
                .sum();
            let denom = ONE - ratio * repulsion;
            let step = if denom.norm() > 0.0 && denom.is_finite() {
                ratio / denom
            } else {
                ratio
            };
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step < 1e-15 && converged(&z) {
            break;
        }
    }

    if converged(&z) {
        Ok(z)
    } else {
        Err(Error::NonConvergence {
            iterations: MAX_ITER,
            best: z,
        })
    }
}

/// Groups roots closer than `tol · (1 + |r|)`; returns `(centroid, multiplicity)`.
pub fn cluster_roots(roots: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let mut used = vec![false; roots.len()];
    let mut clusters = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![roots[i]];
        used[i] = true;
        let mut grew = true;
        while grew {
            grew = false;
            for j in 0..roots.len() {
                if used[j] {
                    continue;
                }
                if members
                    .iter()
                    .any(|m| (m - roots[j]).norm() <= tol * (1.0 + m.norm()))
                {
                    members.push(roots[j]);
                    used[j] = true;
                    grew = true;
                }
            }
        }
        let centroid = members.iter().sum::<Complex64>() / members.len() as f64;
        clusters.push((centroid, members.len()));
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn linear_root() {
        let a = c(0.3, -0.7);
        let r = CPoly::new(vec![-a, ONE]).roots().unwrap();
        assert!((r[0] - a).norm() < 1e-15);
    }

    #[test]
    fn plus_minus_one() {
        let r = sorted(CPoly::from_real(&[-1.0, 0.0, 1.0]).roots().unwrap());
        assert!((r[0] + 1.0).norm() < 1e-12 && (r[1] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn vieta_quadratic() {
        let (a1, a2) = (c(0.2, 0.5), c(-0.4, 0.1));
        let p = CPoly::new(vec![a1 * a2, -(a1 + a2), ONE]);
        let r = sorted(p.roots().unwrap());
        let want = sorted(vec![a1, a2]);
        for (g, w) in r.iter().zip(&want) {
            assert!((g - w).norm() < 1e-12);
        }
    }

    #[test]
    fn higher_degree_residuals() {
        let roots = [
            c(0.9, 0.0),
            c(-0.5, 0.5),
            c(-0.5, -0.5),
            c(0.1, 0.0),
            c(0.0, 0.8),
        ];
        let p = CPoly::from_roots(&roots);
        let found = p.roots().unwrap();
        for r in &found {
            assert!(p.eval(*r).norm() <= 1e-10 * (1.0 + p.eval_abs(*r)));
        }
        for want in roots {
            assert!(found.iter().any(|g| (g - want).norm() < 1e-10));
        }
    }

    #[test]
    fn double_root_clusters() {
        let p = CPoly::from_real(&[0.0, 0.0, 1.0]);
        let r = p.roots().unwrap();
        let cl = cluster_roots(&r, 1e-6);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].1, 2);
        assert!(cl[0].0.norm() < 1e-6);
    }

    #[test]
    fn zero_polynomial_is_rejected() {
        assert_eq!(
            CPoly::from_real(&[0.0, 0.0]).roots(),
            Err(Error::ZeroPolynomial)
        );
        assert!(CPoly::from_real(&[2.0]).roots().is_err());
    }

    #[test]
    fn taylor_shift_and_deflate() {
        let p = CPoly::from_real(&[1.0, 2.0, 3.0]);
        let a = c(0.5, -1.0);
        let q = p.taylor_shift(a);
        for t in [c(0.0, 0.0), c(0.3, 0.2), c(-1.0, 2.0)] {
            assert!((q.eval(t) - p.eval(a + t)).norm() < 1e-13);
        }
        let (quot, rem) = p.deflate(a);
        assert!((rem - p.eval(a)).norm() < 1e-13);
        let back = quot.mul(&CPoly::new(vec![-a, ONE]));
        assert!((back.coeffs[0] + rem - p.coeffs[0]).norm() < 1e-13);
        assert!((back.coeffs[2] - p.coeffs[2]).norm() < 1e-13);
    }
}
