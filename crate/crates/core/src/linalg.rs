//! Dense complex matrices and a cyclic Jacobi eigensolver for Hermitian
//! matrices. Sizes here are tiny (at most 64), so everything is row-major
//! `Vec` storage without blocking.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix is not square".into()));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.data
            .chunks(self.n.max(1))
            .map(|r| r.to_vec())
            .collect()
    }

    /// Leading principal `k × k` block.
    pub fn leading_block(&self, k: usize) -> Self {
        assert!(k <= self.n);
        Self::from_fn(k, |i, j| self[(i, j)])
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self::from_fn(self.n, |i, j| {
            (0..self.n).map(|k| self[(i, k)] * other[(k, j)]).sum()
        })
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`.
    pub vectors: Vec<Vec<Complex64>>,
    pub sweeps: usize,
}

impl HermitianEigen {
    pub fn smallest(&self) -> (f64, &[Complex64]) {
        (self.values[0], &self.vectors[0])
    }

    pub fn largest_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi iteration for a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot entry, then applies the
/// classical real rotation to the resulting real symmetric 2×2 block. Sweeps
/// stop once the off-diagonal Frobenius norm drops below `1e-13 · ‖H‖`.
pub fn hermitian_eigen(h: &CMatrix) -> Result<HermitianEigen> {
    let n = h.size();
    let norm = h.frobenius_norm();
    let defect = h.hermitian_defect();
    if defect > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian(defect));
    }
    let mut a = h.clone();
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
    }
    let mut v = CMatrix::identity(n);
    let target = 1e-13 * norm;
    let mut sweeps = 0;

    while sweeps < MAX_SWEEPS && a.off_diagonal_norm() > target {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let m = apq.norm();
                if m <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / m;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * m);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U = diag(1, conj(phase)) · [[c, s], [-s, c]]
                let u00 = Complex64::new(c, 0.0);
                let u01 = Complex64::new(s, 0.0);
                let u10 = -phase.conj() * s;
                let u11 = phase.conj() * c;
                rotate(&mut a, &mut v, p, q, [u00, u01, u10, u11]);
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = Complex64::new(app - t * m, 0.0);
                a[(q, q)] = Complex64::new(aqq + t * m, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = order.iter().map(|&i| v.column(i)).collect();
    Ok(HermitianEigen {
        values,
        vectors,
        sweeps,
    })
}

/// `A ← Uᴴ A U` and `V ← V U` for a rotation acting on indices `p`, `q`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize, u: [Complex64; 4]) {
    let n = a.size();
    let [u00, u01, u10, u11] = u;
    for i in 0..n {
        let (aip, aiq) = (a[(i, p)], a[(i, q)]);
        a[(i, p)] = aip * u00 + aiq * u10;
        a[(i, q)] = aip * u01 + aiq * u11;
    }
    for j in 0..n {
        let (apj, aqj) = (a[(p, j)], a[(q, j)]);
        a[(p, j)] = u00.conj() * apj + u10.conj() * aqj;
        a[(q, j)] = u01.conj() * apj + u11.conj() * aqj;
    }
    for i in 0..n {
        let (vip, viq) = (v[(i, p)], v[(i, q)]);
        v[(i, p)] = vip * u00 + viq * u10;
        v[(i, q)] = vip * u01 + viq * u11;
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &CMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = a.size();
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].norm().total_cmp(&m[(j, col)].norm()))
            .unwrap();
        if m[(piv, col)].norm() <= 1e-15 * scale {
            return Err(Error::IllConditioned(format!(
                "pivot {:e} in column {col}",
                m[(piv, col)].norm()
            )));
        }
        if piv != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            x.swap(col, piv);
        }
        for i in col + 1..n {
            let f = m[(i, col)] / m[(col, col)];
            if f == ZERO {
                continue;
            }
            for j in col..n {
                let t = m[(col, j)];
                m[(i, j)] -= f * t;
            }
            let t = x[col];
            x[i] -= f * t;
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= m[(i, j)] * x[j];
        }
        x[i] = acc / m[(i, i)];
    }
    Ok(x)
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
