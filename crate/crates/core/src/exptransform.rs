//! The exponential transform.
//!
//! Coefficient maps: in the plane
//!
//! ```text
//! exp(−(1/π) Σ s_{kl} u^{k+1} v^{l+1}) = 1 − Σ b_{kl} u^{k+1} v^{l+1},   u = 1/z, v = 1/w̄
//! ```
//!
//! and on the line `exp(−Σ s_k u^{k+1}) = 1 − Σ t_k u^{k+1}` (no `1/π`).
//! Both maps are triangular: `b_{kl}` only depends on `s_{k'l'}` with
//! `k' <= k`, `l' <= l`.
//!
//! Pointwise, `E_g(z, w̄) = exp(−(1/π) ∫ g(ζ) dA(ζ) / ((ζ − z)(ζ̄ − w̄)))` is
//! evaluated with the midpoint rule on the grid of the shade function.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{MomentTable1D, MomentTable2D, Provenance, ShadeFunction};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::poly::CPoly;
use crate::reconstruct::HermitianBivarPoly;
use crate::series::{TruncSeries1, TruncSeries2};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Exponent above which `exp(−I)` is returned as exactly zero.
pub const EXPONENT_CLAMP: f64 = 700.0;

/// Relative Hermitian-symmetry tolerance for moment and coefficient tables.
const HERMITIAN_TOL: f64 = 1e-9;

/// Planar exponential-transform coefficients `b_{kl}`, `0 <= k, l <= d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpCoeffTable {
    pub d: usize,
    pub b: Vec<Vec<Complex64>>,
}

impl ExpCoeffTable {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            b: vec![vec![ZERO; d + 1]; d + 1],
        }
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.b[k][l]
    }

    pub fn validate(&self) -> Result<()> {
        if self.b.len() != self.d + 1 || self.b.iter().any(|r| r.len() != self.d + 1) {
            return Err(Error::InvalidInput(format!(
                "coefficient table must be {0}×{0}",
                self.d + 1
            )));
        }
        Ok(())
    }

    /// The Hermitian matrix `X = [b_{kl}]`.
    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.d + 1, |k, l| self.b[k][l])
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.matrix().hermitian_defect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.b
            .iter()
            .flatten()
            .zip(other.b.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Truncated Laurent series `1 − Σ b_{kl} z^{−k−1} w̄^{−l−1}`.
    pub fn eval_series(&self, z: Complex64, w: Complex64) -> Complex64 {
        let (zi, wi) = (z.inv(), w.conj().inv());
        let mut acc = ZERO;
        let mut zp = zi;
        for row in &self.b {
            let mut wp = wi;
            for b in row {
                acc += b * zp * wp;
                wp *= wi;
            }
            zp *= zi;
        }
        Complex64::new(1.0, 0.0) - acc
    }
}

/// One-dimensional coefficients `t_k`, `0 <= k <= m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TCoeffTable {
    pub m: usize,
    pub t: Vec<f64>,
}

fn check_hermitian(defect: f64, scale: f64) -> Result<()> {
    if defect > HERMITIAN_TOL * scale.max(1.0) {
        Err(Error::NotHermitian(defect))
    } else {
        Ok(())
    }
}

/// Moments to exponential-transform coefficients.
pub fn s_to_b(s: &MomentTable2D) -> Result<ExpCoeffTable> {
    s.validate()?;
    check_hermitian(s.hermitian_defect(), s.max_abs())?;
    let d = s.d;
    let mut a = TruncSeries2::zero(d + 1);
    for k in 0..=d {
        for l in 0..=d {
            a[(k + 1, l + 1)] = -s.s[k][l] / PI;
        }
    }
    let e = a.exp()?;
    let mut out = ExpCoeffTable::zeros(d);
    for k in 0..=d {
        for l in 0..=d {
            out.b[k][l] = -e[(k + 1, l + 1)];
        }
    }
    Ok(out)
}

/// Inverse of [`s_to_b`] on the same index box.
pub fn b_to_s(b: &ExpCoeffTable) -> Result<MomentTable2D> {
    b.validate()?;
    let d = b.d;
    let mut e = TruncSeries2::one(d + 1);
    for k in 0..=d {
        for l in 0..=d {
            e[(k + 1, l + 1)] = -b.b[k][l];
        }
    }
    let a = e.log()?;
    let mut out = MomentTable2D::zeros(d, Provenance::ClosedForm);
    for k in 0..=d {
        for l in 0..=d {
            out.s[k][l] = -a[(k + 1, l + 1)] * PI;
        }
    }
    Ok(out)
}

/// Line moments to `t_k`: `exp(−Σ s_k u^{k+1}) = 1 − Σ t_k u^{k+1}`.
pub fn s_to_t(s: &MomentTable1D) -> Result<TCoeffTable> {
    let m = s.m;
    let mut a = vec![ZERO; m + 2];
    for (k, v) in s.s.iter().enumerate() {
        a[k + 1] = Complex64::new(-v, 0.0);
    }
    let e = TruncSeries1::from_coeffs(a).exp()?;
    Ok(TCoeffTable {
        m,
        t: (0..=m).map(|k| -e[k + 1].re).collect(),
    })
}

/// Inverse of [`s_to_t`].
pub fn t_to_s(t: &TCoeffTable) -> Result<MomentTable1D> {
    let m = t.m;
    let mut e = vec![ZERO; m + 2];
    e[0] = Complex64::new(1.0, 0.0);
    for (k, v) in t.t.iter().enumerate() {
        e[k + 1] = Complex64::new(-v, 0.0);
    }
    let a = TruncSeries1::from_coeffs(e).log()?;
    MomentTable1D::new((0..=m).map(|k| -a[k + 1].re).collect())
}

fn check_distance(g: &ShadeFunction, z: Complex64) -> Result<()> {
    let min = 2.0 * g.hx().max(g.hy());
    let dist = g.dist_to_support(z);
    if dist < min {
        Err(Error::TooCloseToSupport { dist, min })
    } else {
        Ok(())
    }
}

/// `(1/π) ∫ g(ζ) dA / ((ζ − z) conj(ζ − w))` by the midpoint rule.
pub fn polarized_exponent(g: &ShadeFunction, z: Complex64, w: Complex64) -> Complex64 {
    let n = g.n;
    let rows: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut acc = ZERO;
            for i in 0..n {
                let v = g.value(i, j);
                if v != 0.0 {
                    let zeta = g.center(i, j);
                    acc += v / ((zeta - z) * (zeta - w).conj());
                }
            }
            acc
        })
        .collect();
    rows.iter().fold(ZERO, |acc, r| acc + r) * (g.cell_area() / PI)
}

/// `E_g(z, w̄)` for `z`, `w` away from the support of `g`.
pub fn eval_polarized(g: &ShadeFunction, z: Complex64, w: Complex64) -> Result<Complex64> {
    check_distance(g, z)?;
    check_distance(g, w)?;
    let i = polarized_exponent(g, z, w);
    if i.re > EXPONENT_CLAMP {
        return Ok(ZERO);
    }
    Ok((-i).exp())
}

/// `E_g(z, z̄)`, a value in `(0, 1]` outside the support.
pub fn eval_diagonal(g: &ShadeFunction, z: Complex64) -> Result<f64> {
    check_distance(g, z)?;
    let i = polarized_exponent(g, z, z).re;
    if i > EXPONENT_CLAMP {
        return Ok(0.0);
    }
    Ok((-i).exp())
}

/// `Q(z, w̄) / (P(z) conj(P(w)))`.
pub fn rational_e(
    q: &HermitianBivarPoly,
    p: &CPoly,
    z: Complex64,
    w: Complex64,
) -> Result<Complex64> {
    let pz = p.eval(z);
    let pw = p.eval(w);
    let tiny = 1e-300_f64.max(1e-14 * p.eval_abs(z).max(p.eval_abs(w)));
    if pz.norm() <= tiny || pw.norm() <= tiny {
        return Err(Error::Pole);
    }
    Ok(q.eval(z, w) / (pz * pw.conj()))
}
