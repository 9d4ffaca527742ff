//! Interval unions from their moments.
//!
//! For `g = χ_{[a_1,b_1] ∪ … ∪ [a_d,b_d]}`,
//! `exp(−Σ s_k z^{−k−1}) = Π (z − b_i)/(z − a_i) = Q(z)/P(z)`, so the Hankel
//! matrix `[t_{j+l}]` has rank `d` and a Padé step recovers `P` and `Q`.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domains::MomentTable1D;
use crate::error::{Error, Result};
use crate::exptransform::{s_to_t, TCoeffTable};
use crate::linalg::{hermitian_eigen, solve, CMatrix};
use crate::poly::CPoly;

/// Default relative eigenvalue threshold for the rank test.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Intervals closer than this are merged.
pub const MERGE_GAP: f64 = 1e-8;

/// `H_{jl} = t_{j+l}`, `0 <= j, l <= m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HankelMatrix {
    pub m: usize,
    pub h: Vec<Vec<f64>>,
}

impl HankelMatrix {
    /// Needs `t_0 … t_{2m}`.
    pub fn new(t: &[f64], m: usize) -> Result<Self> {
        if t.len() < 2 * m + 1 {
            return Err(Error::InvalidInput(format!(
                "a {0}×{0} Hankel block needs {1} coefficients, got {2}",
                m + 1,
                2 * m + 1,
                t.len()
            )));
        }
        Ok(Self {
            m,
            h: (0..=m).map(|j| t[j..=j + m].to_vec()).collect(),
        })
    }

    pub fn to_cmatrix(&self) -> CMatrix {
        CMatrix::from_fn(self.m + 1, |j, l| Complex64::new(self.h[j][l], 0.0))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eigen(&self.to_cmatrix())?.values)
    }
}

/// `E(z) = Q(z)/P(z)` with real monic `Q`, `P` of equal degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalE1D {
    /// Numerator coefficients, lowest degree first.
    pub q: Vec<f64>,
    /// Denominator coefficients, lowest degree first.
    pub p: Vec<f64>,
}

impl RationalE1D {
    pub fn degree(&self) -> usize {
        self.p.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let p = CPoly::from_real(&self.p).eval(z);
        if p.norm() == 0.0 {
            return Err(Error::Pole);
        }
        Ok(CPoly::from_real(&self.q).eval(z) / p)
    }
}

/// Result of the Hankel rank scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HankelRank {
    pub d_min: Option<usize>,
    /// Ascending spectrum of the last block examined.
    pub spectrum: Vec<f64>,
}

/// Smallest `d` whose `(d+1)×(d+1)` Hankel block has `λ_min <= tol · λ_max`.
pub fn hankel_rank(t: &TCoeffTable, tol: f64) -> Result<HankelRank> {
    let top = t.t.len().saturating_sub(1) / 2;
    let mut spectrum = Vec::new();
    for d in 0..=top {
        spectrum = HankelMatrix::new(&t.t, d)?.eigenvalues()?;
        let hi = spectrum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if spectrum[0] <= tol * hi {
            return Ok(HankelRank {
                d_min: Some(d),
                spectrum,
            });
        }
    }
    Ok(HankelRank {
        d_min: None,
        spectrum,
    })
}

/// `P` from `Σ_i p_i t_{i+m} = 0` (`m < d`, `p_d = 1`) and `Q` as the
/// polynomial part of `P(z)(1 − Σ t_k z^{−k−1})`.
pub fn pade_recover(t: &TCoeffTable, d: usize) -> Result<RationalE1D> {
    if t.t.len() < 2 * d {
        return Err(Error::InvalidInput(format!(
            "degree {d} recovery needs {} coefficients, got {}",
            2 * d,
            t.t.len()
        )));
    }
    let tt = &t.t;
    let mut p = if d == 0 {
        vec![]
    } else {
        let a = CMatrix::from_fn(d, |m, i| Complex64::new(tt[i + m], 0.0));
        let rhs: Vec<Complex64> = (0..d).map(|m| Complex64::new(-tt[d + m], 0.0)).collect();
        let sol = solve(&a, &rhs)
            .map_err(|_| Error::IllConditioned(format!("Hankel block of order {d} is singular")))?;
        sol.iter().map(|c| c.re).collect::<Vec<f64>>()
    };
    p.push(1.0);
    let q: Vec<f64> = (0..=d)
        .map(|m| p[m] - (0..d - m.min(d)).map(|k| p[m + k + 1] * tt[k]).sum::<f64>())
        .collect();
    if (q[d] - 1.0).abs() > 1e-12 {
        return Err(Error::IllConditioned(format!(
            "numerator is not monic: {}",
            q[d]
        )));
    }
    Ok(RationalE1D { q, p })
}

fn real_roots(coeffs: &[f64], what: &str) -> Result<Vec<f64>> {
    if coeffs.len() <= 1 {
        return Ok(vec![]);
    }
    let roots = CPoly::from_real(coeffs).roots()?;
    let mut out = Vec::with_capacity(roots.len());
    for r in roots {
        if r.im.abs() > 1e-6 * (1.0 + r.re.abs()) {
            return Err(Error::NonRealRoots(format!("{what} has root {r}")));
        }
        out.push(r.re);
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Pairs sorted roots of `P` (left ends) and `Q` (right ends).
pub fn endpoints(rat: &RationalE1D) -> Result<Vec<[f64; 2]>> {
    let mut left = real_roots(&rat.p, "denominator")?;
    let mut right = real_roots(&rat.q, "numerator")?;
    // Common roots cancel.
    left.retain(|a| {
        if let Some(k) = right.iter().position(|b| (a - b).abs() < MERGE_GAP) {
            right.remove(k);
            false
        } else {
            true
        }
    });
    if left.len() != right.len() {
        return Err(Error::NotInterlacing(format!(
            "{} left and {} right endpoints",
            left.len(),
            right.len()
        )));
    }
    let mut intervals: Vec<[f64; 2]> = Vec::with_capacity(left.len());
    for (i, (&a, &b)) in left.iter().zip(&right).enumerate() {
        let next = left.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if !(a < b && b <= next + MERGE_GAP) {
            return Err(Error::NotInterlacing(format!(
                "left {left:?}, right {right:?}"
            )));
        }
        match intervals.last_mut() {
            Some(last) if a - last[1] < MERGE_GAP => last[1] = b,
            _ => intervals.push([a, b]),
        }
    }
    if intervals
        .iter()
        .any(|&[a, b]| a < -1.0 - 1e-9 || b > 1.0 + 1e-9)
    {
        warn!("recovered intervals leave [-1, 1]: {intervals:?}");
    }
    Ok(intervals)
}

/// Newton refinement of the endpoints against the first `2d` moments.
pub fn polish_endpoints(intervals: &[[f64; 2]], s: &MomentTable1D) -> Vec<[f64; 2]> {
    let d = intervals.len();
    if d == 0 || s.s.len() < 2 * d {
        return intervals.to_vec();
    }
    let n = 2 * d;
    let mut x: Vec<f64> = intervals.iter().flat_map(|&[a, b]| [a, b]).collect();
    let residual = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let e = (k + 1) as i32;
                let sum: f64 = x
                    .chunks(2)
                    .map(|ab| (ab[1].powi(e) - ab[0].powi(e)) / e as f64)
                    .sum();
                sum - s.s[k]
            })
            .collect()
    };
    let norm = |v: &[f64]| v.iter().map(|r| r * r).sum::<f64>().sqrt();
    let mut r = residual(&x);
    for _ in 0..8 {
        let jac = CMatrix::from_fn(n, |k, i| {
            let v = x[i].powi(k as i32);
            Complex64::new(if i % 2 == 0 { -v } else { v }, 0.0)
        });
        let rhs: Vec<Complex64> = r.iter().map(|&v| Complex64::new(-v, 0.0)).collect();
        let Ok(step) = solve(&jac, &rhs) else { break };
        let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + s.re).collect();
        let rt = residual(&trial);
        if norm(&rt) >= norm(&r) {
            break;
        }
        x = trial;
        r = rt;
    }
    x.chunks(2).map(|ab| [ab[0], ab[1]]).collect()
}

/// Full 1D pipeline output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Markov1DReport {
    pub t: Vec<f64>,
    pub d_min: Option<usize>,
    pub spectrum: Vec<f64>,
    pub rational: Option<RationalE1D>,
    pub intervals: Vec<[f64; 2]>,
}

/// Moments → `t` → rank → Padé → endpoints, refined by Newton on the moments.
pub fn recover_intervals(s: &MomentTable1D, tol: f64) -> Result<Markov1DReport> {
    let t = s_to_t(s)?;
    let rank = hankel_rank(&t, tol)?;
    let Some(d) = rank.d_min else {
        return Ok(Markov1DReport {
            t: t.t,
            d_min: None,
            spectrum: rank.spectrum,
            rational: None,
            intervals: vec![],
        });
    };
    let rational = pade_recover(&t, d)?;
    let raw = endpoints(&rational)?;
    let intervals = polish_endpoints(&raw, s);
    Ok(Markov1DReport {
        t: t.t,
        d_min: Some(d),
        spectrum: rank.spectrum,
        rational: Some(rational),
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::interval_moments;

    fn t_of(intervals: &[[f64; 2]], m: usize) -> TCoeffTable {
        s_to_t(&interval_moments(intervals, m).unwrap()).unwrap()
    }

    #[test]
    fn hankel_structure() {
        let h = HankelMatrix::new(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        assert_eq!(
            h.h,
            vec![
                vec![1.0, 2.0, 3.0],
                vec![2.0, 3.0, 4.0],
                vec![3.0, 4.0, 5.0]
            ]
        );
        assert!(HankelMatrix::new(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn ranks() {
        assert_eq!(
            hankel_rank(&t_of(&[[0.0, 1.0]], 9), DEFAULT_TOL)
                .unwrap()
                .d_min,
            Some(1)
        );
        assert_eq!(
            hankel_rank(&t_of(&[[-0.7, 0.2]], 9), DEFAULT_TOL)
                .unwrap()
                .d_min,
            Some(1)
        );
        let two = t_of(&[[-1.0, -0.5], [0.5, 1.0]], 9);
        assert_eq!(hankel_rank(&two, DEFAULT_TOL).unwrap().d_min, Some(2));
    }

    #[test]
    fn hankel_is_psd_for_interval_data() {
        let t = t_of(&[[-0.9, -0.6], [-0.2, 0.1], [0.4, 0.8]], 11);
        let ev = HankelMatrix::new(&t.t, 5).unwrap().eigenvalues().unwrap();
        assert!(ev[0] >= -1e-10);
    }

    #[test]
    fn unit_interval() {
        let r = pade_recover(&t_of(&[[0.0, 1.0]], 5), 1).unwrap();
        assert!((r.q[0] + 1.0).abs() < 1e-14 && r.q[1] == 1.0);
        assert!(r.p[0].abs() < 1e-14);
        let iv = endpoints(&r).unwrap();
        assert!((iv[0][0]).abs() < 1e-12 && (iv[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_interval() {
        let (a, b) = (-0.3, 0.45);
        let r = pade_recover(&t_of(&[[a, b]], 5), 1).unwrap();
        assert!((r.p[0] + a).abs() < 1e-14);
        assert!((r.q[0] + b).abs() < 1e-14);
    }

    #[test]
    fn symmetric_pair_matches_product_formula() {
        let t = t_of(&[[-1.0, -0.5], [0.5, 1.0]], 9);
        let r = pade_recover(&t, 2).unwrap();
        for z in [Complex64::new(2.0, 0.5), Complex64::new(-0.1, 3.0)] {
            let want = (z + 0.5) * (z - 1.0) / ((z + 1.0) * (z - 0.5));
            assert!((r.eval(z).unwrap() - want).norm() < 1e-12);
        }
        let iv = endpoints(&r).unwrap();
        let want = [[-1.0, -0.5], [0.5, 1.0]];
        for (g, w) in iv.iter().zip(&want) {
            assert!((g[0] - w[0]).abs() < 1e-10 && (g[1] - w[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn equal_numerator_and_denominator_is_empty() {
        let r = RationalE1D {
            q: vec![-0.2, 1.0],
            p: vec![-0.2, 1.0],
        };
        assert!(endpoints(&r).unwrap().is_empty());
    }

    #[test]
    fn complex_roots_are_rejected() {
        let r = RationalE1D {
            q: vec![1.0, 0.0, 1.0],
            p: vec![0.0, 0.0, 1.0],
        };
        assert!(matches!(endpoints(&r), Err(Error::NonRealRoots(_))));
        let r = RationalE1D {
            q: vec![0.0, 1.0],
            p: vec![-0.5, 1.0],
        };
        assert!(matches!(endpoints(&r), Err(Error::NotInterlacing(_))));
    }

    #[test]
    fn touching_intervals_merge() {
        let r = RationalE1D {
            q: CPoly::from_roots(&[Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)])
                .coeffs
                .iter()
                .map(|c| c.re)
                .collect(),
            p: CPoly::from_roots(&[Complex64::new(-0.5, 0.0), Complex64::new(1e-10, 0.0)])
                .coeffs
                .iter()
                .map(|c| c.re)
                .collect(),
        };
        let iv = endpoints(&r).unwrap();
        assert_eq!(iv.len(), 1);
        assert!((iv[0][0] + 0.5).abs() < 1e-12 && (iv[0][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pipeline_recovers_three_intervals() {
        let want = [[-0.8, -0.55], [-0.1, 0.3], [0.62, 0.95]];
        let rep = recover_intervals(&interval_moments(&want, 9).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(rep.d_min, Some(3));
        for (g, w) in rep.intervals.iter().zip(&want) {
            assert!((g[0] - w[0]).abs() < 1e-12 && (g[1] - w[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_union() {
        let rep =
            recover_intervals(&MomentTable1D::new(vec![0.0; 6]).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(rep.d_min, Some(0));
        assert!(rep.intervals.is_empty());
    }
}
