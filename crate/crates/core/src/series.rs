//! Truncated power series in one variable `u` or two variables `(u, v)`.
//!
//! Both variables stand for inverse powers (`u = 1/z`, `v = 1/w̄`), which is
//! how moment generating functions at infinity are stored. Two-variable series
//! use box truncation: every coefficient `u^k v^l` with `k, l <= order` is kept
//! and nothing else.
//!
//! `exp` and `log` are evaluated with the derivative recurrence
//! `u ∂E/∂u = (u ∂A/∂u) E`, which produces every coefficient of `exp(A)` on
//! the box exactly (up to rounding) in `O(order^4)` operations.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Univariate series `Σ_{k=0}^{order} c_k u^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncSeries1 {
    coeffs: Vec<Complex64>,
}

impl TruncSeries1 {
    pub fn zero(order: usize) -> Self {
        Self {
            coeffs: vec![ZERO; order + 1],
        }
    }

    pub fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = ONE;
        s
    }

    /// Builds a series from its coefficients; the order is `coeffs.len() - 1`.
    ///
    /// Panics on an empty coefficient vector.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least one coefficient");
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::from_coeffs(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, k: usize) -> Result<Complex64> {
        self.coeffs
            .get(k)
            .copied()
            .ok_or(Error::IndexOutOfRange(k, 0, self.order()))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Cauchy product truncated to the common order.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_order(self.order(), other.order())?;
        let m = self.order();
        let mut out = Self::zero(m);
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in other.coeffs[..=m - i].iter().enumerate() {
                out.coeffs[i + j] += a * b;
            }
        }
        Ok(out)
    }

    pub fn exp(&self) -> Result<Self> {
        if self.coeffs[0] != ZERO {
            return Err(Error::NonzeroConstant(self.coeffs[0]));
        }
        Ok(Self {
            coeffs: exp_coeffs(&self.coeffs),
        })
    }

    pub fn log(&self) -> Result<Self> {
        if self.coeffs[0] != ONE {
            return Err(Error::ConstantNotOne(self.coeffs[0]));
        }
        Ok(Self {
            coeffs: log_coeffs(&self.coeffs),
        })
    }
}

/// `exp` of a univariate coefficient vector with zero constant term.
fn exp_coeffs(a: &[Complex64]) -> Vec<Complex64> {
    let mut e = vec![ZERO; a.len()];
    e[0] = ONE;
    for n in 1..a.len() {
        let mut acc = ZERO;
        for k in 1..=n {
            acc += a[k] * e[n - k] * k as f64;
        }
        e[n] = acc / n as f64;
    }
    e
}

/// `log` of a univariate coefficient vector with constant term one.
fn log_coeffs(e: &[Complex64]) -> Vec<Complex64> {
    let mut a = vec![ZERO; e.len()];
    for n in 1..e.len() {
        let mut acc = ZERO;
        for k in 1..n {
            acc += a[k] * e[n - k] * k as f64;
        }
        a[n] = e[n] - acc / n as f64;
    }
    a
}

/// Bivariate series `Σ c_{kl} u^k v^l` on the box `0 <= k, l <= order`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncSeries2 {
    order: usize,
    /// Row-major, `coeffs[k * (order + 1) + l]`.
    coeffs: Vec<Complex64>,
}

impl TruncSeries2 {
    pub fn zero(order: usize) -> Self {
        Self {
            order,
            coeffs: vec![ZERO; (order + 1) * (order + 1)],
        }
    }

    pub fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = ONE;
        s
    }

    /// Builds a series from a square coefficient matrix `rows[k][l]`.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty coefficient matrix".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::MismatchedOrder(n - 1, bad.len().saturating_sub(1)));
        }
        Ok(Self {
            order: n - 1,
            coeffs: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    fn idx(&self, k: usize, l: usize) -> usize {
        k * (self.order + 1) + l
    }

    pub fn get(&self, k: usize, l: usize) -> Result<Complex64> {
        if k > self.order || l > self.order {
            return Err(Error::IndexOutOfRange(k, l, self.order));
        }
        Ok(self.coeffs[self.idx(k, l)])
    }

    pub fn set(&mut self, k: usize, l: usize, value: Complex64) -> Result<()> {
        if k > self.order || l > self.order {
            return Err(Error::IndexOutOfRange(k, l, self.order));
        }
        let i = self.idx(k, l);
        self.coeffs[i] = value;
        Ok(())
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.coeffs
            .chunks(self.order + 1)
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Coefficientwise Cauchy product, discarding terms outside the box.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_order(self.order, other.order)?;
        let m = self.order;
        let mut out = Self::zero(m);
        for i in 0..=m {
            for j in 0..=m {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..=m - i {
                    for l in 0..=m - j {
                        out[(i + k, j + l)] += a * other[(k, l)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Truncated `exp(self)`; requires a zero constant coefficient.
    pub fn exp(&self) -> Result<Self> {
        let c0 = self.coeffs[0];
        if c0 != ZERO {
            return Err(Error::NonzeroConstant(c0));
        }
        let m = self.order;
        let mut e = Self::zero(m);
        // k = 0 row is a univariate problem in v.
        let row0 = exp_coeffs(&self.coeffs[..=m]);
        e.coeffs[..=m].copy_from_slice(&row0);
        for k in 1..=m {
            for l in 0..=m {
                let mut acc = ZERO;
                for i in 1..=k {
                    let w = i as f64;
                    for j in 0..=l {
                        let a = self[(i, j)];
                        if a != ZERO {
                            acc += a * e[(k - i, l - j)] * w;
                        }
                    }
                }
                e[(k, l)] = acc / k as f64;
            }
        }
        Ok(e)
    }

    /// Truncated `log(self)`; requires constant coefficient exactly one.
    pub fn log(&self) -> Result<Self> {
        let c0 = self.coeffs[0];
        if c0 != ONE {
            return Err(Error::ConstantNotOne(c0));
        }
        let m = self.order;
        let mut a = Self::zero(m);
        let row0 = log_coeffs(&self.coeffs[..=m]);
        a.coeffs[..=m].copy_from_slice(&row0);
        for k in 1..=m {
            for l in 0..=m {
                let mut acc = ZERO;
                for i in 1..=k {
                    let w = i as f64;
                    for j in 0..=l {
                        if i == k && j == l {
                            continue;
                        }
                        acc += a[(i, j)] * self[(k - i, l - j)] * w;
                    }
                }
                a[(k, l)] = self[(k, l)] - acc / k as f64;
            }
        }
        Ok(a)
    }
}

fn check_order(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::MismatchedOrder(a, b))
    }
}

impl Index<(usize, usize)> for TruncSeries2 {
    type Output = Complex64;

    fn index(&self, (k, l): (usize, usize)) -> &Complex64 {
        assert!(
            k <= self.order && l <= self.order,
            "index outside truncation box"
        );
        &self.coeffs[self.idx(k, l)]
    }
}

impl IndexMut<(usize, usize)> for TruncSeries2 {
    fn index_mut(&mut self, (k, l): (usize, usize)) -> &mut Complex64 {
        assert!(
            k <= self.order && l <= self.order,
            "index outside truncation box"
        );
        let i = self.idx(k, l);
        &mut self.coeffs[i]
    }
}

impl Index<usize> for TruncSeries1 {
    type Output = Complex64;

    fn index(&self, k: usize) -> &Complex64 {
        &self.coeffs[k]
    }
}

impl IndexMut<usize> for TruncSeries1 {
    fn index_mut(&mut self, k: usize) -> &mut Complex64 {
        &mut self.coeffs[k]
    }
}

macro_rules! impl_linear_ops {
    ($ty:ident) => {
        impl Add for &$ty {
            type Output = $ty;

            fn add(self, rhs: &$ty) -> $ty {
                assert_eq!(self.order(), rhs.order(), "truncation orders differ");
                let mut out = self.clone();
                out.coeffs
                    .iter_mut()
                    .zip(&rhs.coeffs)
                    .for_each(|(a, b)| *a += b);
                out
            }
        }

        impl Sub for &$ty {
            type Output = $ty;

            fn sub(self, rhs: &$ty) -> $ty {
                assert_eq!(self.order(), rhs.order(), "truncation orders differ");
                let mut out = self.clone();
                out.coeffs
                    .iter_mut()
                    .zip(&rhs.coeffs)
                    .for_each(|(a, b)| *a -= b);
                out
            }
        }

        impl Neg for &$ty {
            type Output = $ty;

            fn neg(self) -> $ty {
                self.scale(Complex64::new(-1.0, 0.0))
            }
        }

        impl Mul for &$ty {
            type Output = $ty;

            /// Panicking form of `mul`; use the method for a `Result`.
            fn mul(self, rhs: &$ty) -> $ty {
                $ty::mul(self, rhs).expect("truncation orders differ")
            }
        }
    };
}

impl_linear_ops!(TruncSeries1);
impl_linear_ops!(TruncSeries2);
