//! Shape from exponential-transform coefficients.
//!
//! For a quadrature domain with `d` nodes the Hermitian matrix
//! `X = [b_{kl}]_{k,l<=d}` is singular while its `d×d` leading block is not.
//! The null vector gives the node polynomial `P_d`; the nonnegative part of
//! `P_d(z) conj(P_d(w)) (1 − Σ b_{kl} z^{−k−1} w̄^{−l−1})` is the defining
//! polynomial `Q(z, w̄) = |P_d(z)|² − Σ_{j<d} |P_j(z)|²`, and the domain is
//! `{Q(z, z̄) < 0}`.

use std::f64::consts::PI;

use log::{debug, warn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domains::BBox;
use crate::error::{Error, Result};
use crate::exptransform::ExpCoeffTable;
pub use crate::linalg::hermitian_eigen;
use crate::linalg::{solve, CMatrix};
pub use crate::poly::poly_roots;
use crate::poly::{cluster_roots, CPoly};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Default relative eigenvalue threshold for degeneracy detection.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Root clustering radius used to detect multiple nodes.
pub const CLUSTER_TOL: f64 = 1e-6;

/// `Q(z, w̄) = Σ q_{mn} z^m w̄^n` with `q_{mn} = conj(q_{nm})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianBivarPoly {
    pub d: usize,
    pub q: Vec<Vec<Complex64>>,
}

impl HermitianBivarPoly {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            q: vec![vec![ZERO; d + 1]; d + 1],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(
                "coefficient matrix must be square and nonempty".into(),
            ));
        }
        Ok(Self { d: n - 1, q: rows })
    }

    /// `(z w̄)^d`.
    pub fn monomial(d: usize) -> Self {
        let mut q = Self::zeros(d);
        q.q[d][d] = ONE;
        q
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.d + 1, |m, n| self.q[m][n])
    }

    pub fn eval(&self, z: Complex64, w: Complex64) -> Complex64 {
        let wc = w.conj();
        self.q.iter().rev().fold(ZERO, |acc, row| {
            acc * z + row.iter().rev().fold(ZERO, |a, c| a * wc + c)
        })
    }

    /// `Q(z, z̄)`, real for Hermitian coefficients.
    pub fn eval_diagonal(&self, z: Complex64) -> f64 {
        self.eval(z, z).re
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.matrix().hermitian_defect()
    }

    pub fn max_abs(&self) -> f64 {
        self.q
            .iter()
            .flatten()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Difference, padded to the larger order.
    pub fn sub(&self, other: &Self) -> Self {
        let d = self.d.max(other.d);
        let at = |p: &Self, m: usize, n: usize| {
            if m <= p.d && n <= p.d {
                p.q[m][n]
            } else {
                ZERO
            }
        };
        let mut out = Self::zeros(d);
        for m in 0..=d {
            for n in 0..=d {
                out.q[m][n] = at(self, m, n) - at(other, m, n);
            }
        }
        out
    }

    /// Largest `(m, n)` degrees carrying a coefficient above `tol`; `None` for zero.
    pub fn bidegree(&self, tol: f64) -> Option<(usize, usize)> {
        let mut out: Option<(usize, usize)> = None;
        for (m, row) in self.q.iter().enumerate() {
            for (n, c) in row.iter().enumerate() {
                if c.norm() > tol {
                    let (a, b) = out.unwrap_or((0, 0));
                    out = Some((a.max(m), b.max(n)));
                }
            }
        }
        out
    }
}

/// Result of the degeneracy scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    /// Smallest degenerate order, `None` if every block is nonsingular.
    pub d_min: Option<usize>,
    /// Order at which the scan stopped.
    pub d: usize,
    /// Ascending spectrum of the `(d+1)×(d+1)` leading block.
    pub spectrum: Vec<f64>,
}

/// Smallest `d` whose leading `(d+1)×(d+1)` block of `X` has
/// `λ_min <= tol · λ_max`, scanning up to `max_degree` (default: the table order).
pub fn degeneracy_degree(
    b: &ExpCoeffTable,
    tol: f64,
    max_degree: Option<usize>,
) -> Result<Degeneracy> {
    b.validate()?;
    let x = b.matrix();
    let top = max_degree.map_or(b.d, |m| m.min(b.d));
    let mut spectrum = Vec::new();
    for d in 0..=top {
        let eig = hermitian_eigen(&x.leading_block(d + 1))?;
        let (lo, hi) = (eig.values[0], eig.largest_abs());
        spectrum = eig.values;
        debug!("degeneracy scan d={d}: λmin={lo:e} λmax={hi:e}");
        if lo <= tol * hi {
            return Ok(Degeneracy {
                d_min: Some(d),
                d,
                spectrum,
            });
        }
    }
    Ok(Degeneracy {
        d_min: None,
        d: top,
        spectrum,
    })
}

/// How the node polynomial is read off `X`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeMode {
    /// Solve `uX = 0` with `u_d = 1` through the leading `d×d` block.
    Null,
    /// Eigenvector of the smallest eigenvalue.
    Lowest,
}

impl std::str::FromStr for NodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" => Ok(Self::Null),
            "lowest" => Ok(Self::Lowest),
            other => Err(Error::InvalidInput(format!("unknown node mode {other:?}"))),
        }
    }
}

/// Monic node polynomial with eigen diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodePolynomial {
    pub poly: CPoly,
    pub lowest_eigenvalue: f64,
    /// `λ_1 − λ_0`; near zero signals an ambiguous choice of eigenvector.
    pub eigen_gap: f64,
    /// `‖u X‖ / ‖X‖` for the normalized coefficient row `u`.
    pub residual: f64,
}

/// Node polynomial `P_d(z) = p_0 + … + z^d` from the row vector `u = (p_0, …, 1)`
/// with `u X ≈ 0`.
///
/// `X v = 0` for the eigenvector `v` means `conj(v) X = 0`, so `u` is the
/// conjugated eigenvector scaled to end in 1.
pub fn node_polynomial(x: &CMatrix, mode: NodeMode) -> Result<NodePolynomial> {
    let n = x.size();
    let d = n - 1;
    let eig = hermitian_eigen(x)?;
    let gap = if n > 1 {
        eig.values[1] - eig.values[0]
    } else {
        f64::INFINITY
    };
    if n > 1 && gap <= 1e-10 * eig.largest_abs().max(f64::MIN_POSITIVE) {
        warn!(
            "lowest eigenvalue of X is not isolated (gap {gap:e}); node polynomial is not unique"
        );
    }
    let (lambda, v) = eig.smallest();
    let u: Vec<Complex64> = match mode {
        NodeMode::Lowest => {
            let last = v[d];
            if last.norm() < 1e-10 {
                return Err(Error::CannotNormalize {
                    modulus: last.norm(),
                    eigenvector: v.to_vec(),
                });
            }
            v.iter().map(|c| c.conj() / last.conj()).collect()
        }
        NodeMode::Null => {
            if d == 0 {
                vec![ONE]
            } else {
                // Σ_{k<d} u_k X_{kl} = −X_{dl} for l < d.
                let a = CMatrix::from_fn(d, |l, k| x[(k, l)]);
                let rhs: Vec<Complex64> = (0..d).map(|l| -x[(d, l)]).collect();
                let mut u = solve(&a, &rhs).map_err(|_| Error::CannotNormalize {
                    modulus: v[d].norm(),
                    eigenvector: v.to_vec(),
                })?;
                u.push(ONE);
                u
            }
        }
    };
    let norm = x.frobenius_norm();
    let ux: Vec<Complex64> = (0..n)
        .map(|l| (0..n).map(|k| u[k] * x[(k, l)]).sum())
        .collect();
    let residual = if norm > 0.0 {
        crate::linalg::vec_norm(&ux) / norm
    } else {
        0.0
    };
    Ok(NodePolynomial {
        poly: CPoly::new(u),
        lowest_eigenvalue: lambda,
        eigen_gap: gap,
        residual,
    })
}

fn monic(p: &CPoly) -> Result<(CPoly, usize)> {
    let d = p.degree().ok_or(Error::ZeroPolynomial)?;
    let lead = p.coeffs[d];
    Ok((
        CPoly::new(p.coeffs[..=d].iter().map(|c| c / lead).collect()),
        d,
    ))
}

/// Nonnegative-power part of `P(z) conj(P(w)) (1 − Σ b_{kl} z^{−k−1} w̄^{−l−1})`.
///
/// `P` is made monic first, so `q_{dd} = 1`. Only `b_{kl}` with `k, l < d`
/// contribute.
pub fn extract_q(b: &ExpCoeffTable, p: &CPoly) -> Result<HermitianBivarPoly> {
    let (p, d) = monic(p)?;
    if d > b.d + 1 {
        return Err(Error::MismatchedOrder(d, b.d));
    }
    let pc = &p.coeffs;
    let mut q = HermitianBivarPoly::zeros(d);
    for m in 0..=d {
        for n in 0..=d {
            let mut acc = pc[m] * pc[n].conj();
            for k in 0..d - m {
                for l in 0..d - n {
                    acc -= pc[m + k + 1] * pc[n + l + 1].conj() * b.b[k][l];
                }
            }
            q.q[m][n] = acc;
        }
    }
    let defect = q.hermitian_defect();
    if defect > 1e-9 * q.max_abs().max(1.0) {
        warn!("defining polynomial deviates from Hermitian symmetry by {defect:e}");
    }
    for m in 0..=d {
        for n in m..=d {
            let avg = 0.5 * (q.q[m][n] + q.q[n][m].conj());
            q.q[m][n] = avg;
            q.q[n][m] = avg.conj();
        }
    }
    Ok(q)
}

/// Decomposition of `|P_d|² − Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub d: usize,
    /// `P_d(z) = Σ conj(q_{dn}) z^n`.
    pub p_d: CPoly,
    /// Coefficient matrix of `|P_d|² − Q`.
    pub difference: Vec<Vec<Complex64>>,
    /// Ascending spectrum of the difference matrix.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    /// Largest entry in row/column `d` of the difference.
    pub top_residual: f64,
    /// `lower[j] = P_j`, degree `j`, positive leading coefficient.
    pub lower: Vec<CPoly>,
    /// Leading coefficient of `P_{d−1}`.
    pub gamma: f64,
    pub passed: bool,
}

/// Checks that `Q = |P_d|² − Σ_{j<d} |P_j|²` with `deg P_j = j`.
pub fn structure_check(q: &HermitianBivarPoly) -> Result<StructureReport> {
    structure_check_tol(q, DEFAULT_TOL)
}

pub fn structure_check_tol(q: &HermitianBivarPoly, tol: f64) -> Result<StructureReport> {
    let d = q.d;
    let lead = q.q[d][d].re;
    if lead.abs() < 1e-300 {
        return Err(Error::InvalidInput(
            "defining polynomial has zero leading term".into(),
        ));
    }
    let q = HermitianBivarPoly {
        d,
        q: q.q
            .iter()
            .map(|r| r.iter().map(|c| c / lead).collect())
            .collect(),
    };
    let p_d = CPoly::new((0..=d).map(|n| q.q[d][n].conj()).collect());
    let m = CMatrix::from_fn(d + 1, |i, j| {
        p_d.coeffs[i] * p_d.coeffs[j].conj() - q.q[i][j]
    });
    let eig = hermitian_eigen(&m)?;
    let scale = q.max_abs().max(1.0);
    let rank = eig.values.iter().filter(|&&v| v > tol * scale).count();
    let top_residual = (0..=d).map(|i| m[(i, d)].norm()).fold(0.0, f64::max);

    let mut work = m.clone();
    let mut lower = vec![CPoly::new(vec![ZERO]); d];
    for j in (0..d).rev() {
        let pivot = work[(j, j)].re;
        if pivot <= tol * scale {
            continue;
        }
        let g = pivot.sqrt();
        let col: Vec<Complex64> = (0..=j).map(|i| work[(i, j)] / g).collect();
        for a in 0..=j {
            for b in 0..=j {
                work[(a, b)] -= col[a] * col[b].conj();
            }
        }
        lower[j] = CPoly::new(col);
    }
    let gamma = if d > 0 {
        m[(d - 1, d - 1)].re.max(0.0).sqrt()
    } else {
        0.0
    };
    let passed = eig.values[0] >= -tol * scale && top_residual <= tol * scale && rank <= d;
    Ok(StructureReport {
        d,
        p_d,
        difference: m.rows(),
        eigenvalues: eig.values,
        rank,
        top_residual,
        lower,
        gamma,
        passed,
    })
}

/// Nodes and weights: `∫_Ω f dA = Σ_j Σ_m c_{j,m} f^{(m)}(a_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureData {
    pub d: usize,
    pub nodes: Vec<Complex64>,
    pub multiplicities: Vec<usize>,
    /// `c_{j,0}`, the point-evaluation weights.
    pub weights: Vec<f64>,
    /// `c_{j,m}` for `1 <= m < multiplicity`; empty for simple nodes.
    pub derivative_weights: Vec<Vec<Complex64>>,
    pub gamma: f64,
    /// `|γ² − b_00|`.
    pub gamma_residual: f64,
    /// `|Σ c_{j,0} − π b_00|`.
    pub weight_sum_residual: f64,
}

impl QuadratureData {
    pub fn is_simple(&self) -> bool {
        self.multiplicities.iter().all(|&m| m == 1)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Applies the quadrature rule to a polynomial.
    pub fn apply(&self, f: &CPoly) -> Complex64 {
        let mut acc = ZERO;
        for (j, &a) in self.nodes.iter().enumerate() {
            acc += f.eval(a) * self.weights[j];
            let mut df = f.clone();
            for c in &self.derivative_weights[j] {
                df = df.derivative();
                acc += c * df.eval(a);
            }
        }
        acc
    }

    /// `Σ c_{j,m} m! / (z − a_j)^{m+1}`, which equals `∫_Ω dA(ζ)/(z − ζ)`.
    pub fn cauchy_transform(&self, z: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for (j, &a) in self.nodes.iter().enumerate() {
            let t = ONE / (z - a);
            acc += t * self.weights[j];
            let mut tp = t;
            let mut fact = 1.0;
            for (m, c) in self.derivative_weights[j].iter().enumerate() {
                tp *= t;
                fact *= (m + 1) as f64;
                acc += c * fact * tp;
            }
        }
        acc
    }
}

/// Power-series quotient `num / den` up to `t^{order−1}`.
fn series_div(num: &[Complex64], den: &[Complex64], order: usize) -> Vec<Complex64> {
    let at = |v: &[Complex64], i: usize| v.get(i).copied().unwrap_or(ZERO);
    let mut out = vec![ZERO; order];
    for i in 0..order {
        let mut acc = at(num, i);
        for k in 1..=i {
            acc -= at(den, k) * out[i - k];
        }
        out[i] = acc / den[0];
    }
    out
}

/// Nodes from the roots of `P_d`; weights from the partial fractions of
/// `γ P_{d−1} / P_d = Σ b_{k0} z^{−k−1}`.
///
/// Roots closer than [`CLUSTER_TOL`] are merged into one node of higher
/// multiplicity, whose rule also involves derivatives.
pub fn extract_quadrature_data(
    structure: &StructureReport,
    b: &ExpCoeffTable,
) -> Result<QuadratureData> {
    let d = structure.d;
    if d == 0 {
        return Ok(QuadratureData {
            d,
            nodes: vec![],
            multiplicities: vec![],
            weights: vec![],
            derivative_weights: vec![],
            gamma: 0.0,
            gamma_residual: b.b[0][0].norm(),
            weight_sum_residual: PI * b.b[0][0].norm(),
        });
    }
    if !structure.passed {
        return Err(Error::InconsistentWeights(
            "defining polynomial failed the structure check".into(),
        ));
    }
    let roots = structure.p_d.roots()?;
    let clusters = cluster_roots(&roots, CLUSTER_TOL);
    if clusters.len() < roots.len() {
        let mult: Vec<usize> = clusters.iter().map(|c| c.1).collect();
        debug!("node polynomial has repeated roots, multiplicities {mult:?}");
    }
    let numer = CPoly::new((0..d).map(|i| structure.difference[i][d - 1]).collect());

    let mut nodes = Vec::new();
    let mut mults = Vec::new();
    let mut lead = Vec::new();
    let mut higher = Vec::new();
    for (idx, &(a, mu)) in clusters.iter().enumerate() {
        let others: Vec<Complex64> = clusters
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .flat_map(|(_, &(r, m))| std::iter::repeat(r).take(m))
            .collect();
        let rest = CPoly::from_roots(&others);
        let g = series_div(
            &numer.taylor_shift(a).coeffs,
            &rest.taylor_shift(a).coeffs,
            mu,
        );
        // Coefficient of (z − a)^{−(m+1)} is g_{μ−1−m}; c_{j,m} = π L_{j,m} / m!.
        let mut fact = 1.0;
        let mut c = Vec::with_capacity(mu);
        for m in 0..mu {
            if m > 0 {
                fact *= m as f64;
            }
            c.push(g[mu - 1 - m] * (PI / fact));
        }
        nodes.push(a);
        mults.push(mu);
        lead.push(c[0]);
        higher.push(c[1..].to_vec());
    }

    let scale = lead.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let imag = lead.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if imag > 1e-6 * scale.max(1e-300) {
        return Err(Error::InconsistentWeights(format!(
            "point weights are not real (imaginary part {imag:e})"
        )));
    }
    let mut weights: Vec<f64> = lead.iter().map(|c| c.re).collect();
    if weights.iter().all(|&w| w < 0.0) {
        warn!("all weights negative; flipping the global sign");
        weights.iter_mut().for_each(|w| *w = -*w);
        higher.iter_mut().flatten().for_each(|c| *c = -*c);
    }
    if weights.iter().any(|&w| w <= 0.0) {
        return Err(Error::InconsistentWeights(format!(
            "weights of mixed sign: {weights:?}"
        )));
    }
    let b00 = b.b[0][0].re;
    let gamma = structure.gamma;
    let total: f64 = weights.iter().sum();
    Ok(QuadratureData {
        d,
        nodes,
        multiplicities: mults,
        weights,
        derivative_weights: higher,
        gamma,
        gamma_residual: (gamma * gamma - b00).abs(),
        weight_sum_residual: (total - PI * b00).abs(),
    })
}

/// Knobs of [`reconstruct`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructOptions {
    pub tol: f64,
    pub max_degree: Option<usize>,
    pub mode: NodeMode,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_degree: None,
            mode: NodeMode::Null,
        }
    }
}

/// Everything the pipeline produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub d: usize,
    pub spectrum: Vec<f64>,
    /// True when `d` is the smallest degenerate order.
    pub minimal: bool,
    pub p_d: CPoly,
    pub node_residual: f64,
    pub eigen_gap: f64,
    pub q: HermitianBivarPoly,
    pub structure: StructureReport,
    pub quadrature: Option<QuadratureData>,
    pub notes: Vec<String>,
}

/// `b → d_min → P_d → Q → structure → nodes and weights`.
///
/// When no block degenerates, the largest block is used with the lowest
/// eigenvector and `minimal` is false.
pub fn reconstruct(b: &ExpCoeffTable, opts: &ReconstructOptions) -> Result<ReconstructionReport> {
    let deg = degeneracy_degree(b, opts.tol, opts.max_degree)?;
    let mut notes = Vec::new();
    let (d, mode) = match deg.d_min {
        Some(d) => (d, opts.mode),
        None => {
            notes.push(format!(
                "no degenerate block up to order {}; using lowest eigenvector",
                deg.d
            ));
            (deg.d, NodeMode::Lowest)
        }
    };
    let node = node_polynomial(&b.matrix().leading_block(d + 1), mode)?;
    let q = extract_q(b, &node.poly)?;
    let structure = structure_check_tol(&q, opts.tol.max(DEFAULT_TOL))?;
    if !structure.passed {
        notes.push("defining polynomial is not of the form |P_d|² − Σ|P_j|²".into());
    }
    let quadrature = match extract_quadrature_data(&structure, b) {
        Ok(qd) => {
            if !qd.is_simple() {
                notes.push(format!(
                    "repeated nodes, multiplicities {:?}",
                    qd.multiplicities
                ));
            }
            Some(qd)
        }
        Err(e) => {
            notes.push(format!("quadrature data unavailable: {e}"));
            None
        }
    };
    Ok(ReconstructionReport {
        d,
        spectrum: deg.spectrum,
        minimal: deg.d_min.is_some(),
        p_d: node.poly,
        node_residual: node.residual,
        eigen_gap: node.eigen_gap,
        q,
        structure,
        quadrature,
        notes,
    })
}

/// Points of `{Q(z, z̄) = 0}` found by linear interpolation along the edges of
/// an `n×n` lattice over `bbox`, row by row.
pub fn boundary_samples(q: &HermitianBivarPoly, bbox: BBox, n: usize) -> Vec<Complex64> {
    let n = n.max(2);
    let hx = (bbox.x1 - bbox.x0) / (n - 1) as f64;
    let hy = (bbox.y1 - bbox.y0) / (n - 1) as f64;
    let at = |i: usize, j: usize| Complex64::new(bbox.x0 + i as f64 * hx, bbox.y0 + j as f64 * hy);
    let vals: Vec<f64> = (0..n * n)
        .map(|k| q.eval_diagonal(at(k % n, k / n)))
        .collect();
    let mut out = Vec::new();
    let mut push = |z0: Complex64, z1: Complex64, v0: f64, v1: f64| {
        if v0 == 0.0 {
            out.push(z0);
        } else if (v0 < 0.0) != (v1 < 0.0) && v1 != 0.0 {
            let t = v0 / (v0 - v1);
            out.push(z0 + (z1 - z0) * t);
        }
    };
    for j in 0..n {
        for i in 0..n {
            let v = vals[j * n + i];
            if i + 1 < n {
                push(at(i, j), at(i + 1, j), v, vals[j * n + i + 1]);
            }
            if j + 1 < n {
                push(at(i, j), at(i, j + 1), v, vals[(j + 1) * n + i]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{conformal_moments, disk_moments};
    use crate::exptransform::s_to_b;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn disk_b(a: Complex64, r: f64, d: usize) -> ExpCoeffTable {
        s_to_b(&disk_moments(a, r, d).unwrap()).unwrap()
    }

    #[test]
    fn disk_degeneracy_is_one() {
        for a in [ZERO, c(0.2, 0.1)] {
            let deg = degeneracy_degree(&disk_b(a, 0.5, 3), DEFAULT_TOL, None).unwrap();
            assert_eq!(deg.d_min, Some(1));
            assert_eq!(deg.spectrum.len(), 2);
            assert!(deg.spectrum[0].abs() < 1e-14);
        }
    }

    #[test]
    fn zero_table_degenerates_immediately() {
        let deg = degeneracy_degree(&ExpCoeffTable::zeros(3), DEFAULT_TOL, None).unwrap();
        assert_eq!(deg.d_min, Some(0));
    }

    #[test]
    fn conformal_image_degeneracy_is_two() {
        let phi = [ZERO, ONE, c(0.3, 0.0)];
        let b = s_to_b(&conformal_moments(&phi, 4).unwrap()).unwrap();
        let deg = degeneracy_degree(&b, DEFAULT_TOL, None).unwrap();
        assert_eq!(deg.d_min, Some(2));
        let sp = &deg.spectrum;
        assert!(sp[0] < 1e-12 * sp[2] && sp[1] > 1e-4 * sp[2]);
    }

    #[test]
    fn positive_definite_table_is_not_degenerate() {
        let mut b = ExpCoeffTable::zeros(3);
        for k in 0..=3 {
            for l in 0..=3 {
                b.b[k][l] = if k == l {
                    c(2.0, 0.0)
                } else {
                    c(0.1, 0.05 * (l as f64 - k as f64))
                };
            }
        }
        let deg = degeneracy_degree(&b, DEFAULT_TOL, None).unwrap();
        assert_eq!(deg.d_min, None);
        assert_eq!(deg.d, 3);
        assert_eq!(deg.spectrum.len(), 4);
        assert!(deg.spectrum.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn node_polynomial_of_disks() {
        let r2 = 0.25;
        let x = CMatrix::from_rows(&[vec![c(r2, 0.0), ZERO], vec![ZERO, ZERO]]).unwrap();
        for mode in [NodeMode::Null, NodeMode::Lowest] {
            let p = node_polynomial(&x, mode).unwrap().poly;
            assert!((p.coeffs[0]).norm() < 1e-14 && (p.coeffs[1] - ONE).norm() < 1e-14);
        }
        let a = c(0.2, 0.1);
        let x = disk_b(a, 0.5, 3).matrix().leading_block(2);
        for mode in [NodeMode::Null, NodeMode::Lowest] {
            let node = node_polynomial(&x, mode).unwrap();
            assert!((node.poly.coeffs[0] + a).norm() < 1e-12, "{mode:?}");
            assert!(node.residual < 1e-14);
        }
    }

    #[test]
    fn identity_reports_a_tie() {
        let node = node_polynomial(&CMatrix::identity(3), NodeMode::Lowest);
        match node {
            Ok(n) => assert_eq!(n.eigen_gap, 0.0),
            Err(Error::CannotNormalize { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn unnormalizable_eigenvector_is_reported() {
        // The null vector is e_0, whose last entry vanishes.
        let x = CMatrix::diag(&[0.0, 1.0]);
        match node_polynomial(&x, NodeMode::Lowest) {
            Err(Error::CannotNormalize {
                modulus,
                eigenvector,
            }) => {
                assert!(modulus < 1e-10);
                assert_eq!(eigenvector.len(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extract_q_of_disks() {
        let r = 0.5;
        for a in [ZERO, c(0.2, 0.1), c(-0.3, 0.4)] {
            let b = disk_b(a, r, 3);
            let q = extract_q(&b, &CPoly::new(vec![-a, ONE])).unwrap();
            // (z − a)(w̄ − ā) − r²
            assert!((q.q[1][1] - ONE).norm() < 1e-14);
            assert!((q.q[1][0] + a.conj()).norm() < 1e-14);
            assert!((q.q[0][1] + a).norm() < 1e-14);
            assert!((q.q[0][0] - (a.norm_sqr() - r * r)).norm() < 1e-14);
        }
    }

    #[test]
    fn extract_q_of_empty_shape() {
        let q = extract_q(
            &ExpCoeffTable::zeros(3),
            &CPoly::from_real(&[0.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        assert_eq!(q, HermitianBivarPoly::monomial(3));
        let s = structure_check(&q).unwrap();
        assert_eq!(s.rank, 0);
        assert!(s.passed);
    }

    #[test]
    fn structure_of_disk() {
        let r = 0.5;
        let q = extract_q(&disk_b(ZERO, r, 2), &CPoly::from_real(&[0.0, 1.0])).unwrap();
        let s = structure_check(&q).unwrap();
        assert!(s.passed);
        assert_eq!(s.rank, 1);
        assert!((s.eigenvalues[1] - r * r).abs() < 1e-14);
        assert!((s.lower[0].coeffs[0] - r).norm() < 1e-14);
        assert!((s.gamma - r).abs() < 1e-14);
    }

    #[test]
    fn disk_quadrature_data() {
        let (a, r) = (c(0.2, 0.1), 0.5);
        let rep = reconstruct(&disk_b(a, r, 3), &ReconstructOptions::default()).unwrap();
        let qd = rep.quadrature.unwrap();
        assert!(rep.minimal);
        assert!((qd.nodes[0] - a).norm() < 1e-10);
        assert!((qd.weights[0] - PI * r * r).abs() < 1e-10);
        assert!(qd.gamma_residual < 1e-14 && qd.weight_sum_residual < 1e-12);
    }

    #[test]
    fn two_disjoint_nodes() {
        // Two separated disks form a quadrature domain with two simple nodes.
        let (a1, a2, r1, r2) = (c(-0.5, 0.0), c(0.4, 0.2), 0.3, 0.2);
        let mut s = disk_moments(a1, r1, 5).unwrap();
        let s2 = disk_moments(a2, r2, 5).unwrap();
        for k in 0..=5 {
            for l in 0..=5 {
                s.s[k][l] += s2.s[k][l];
            }
        }
        let b = s_to_b(&s).unwrap();
        let rep = reconstruct(&b, &ReconstructOptions::default()).unwrap();
        assert_eq!(rep.d, 2);
        let qd = rep.quadrature.unwrap();
        assert!(qd.is_simple());
        for (want, w) in [(a1, PI * r1 * r1), (a2, PI * r2 * r2)] {
            let j = qd
                .nodes
                .iter()
                .position(|n| (n - want).norm() < 1e-8)
                .unwrap();
            assert!((qd.weights[j] - w).abs() < 1e-8);
        }
        assert!(rep.structure.passed && rep.structure.rank == 2);
    }

    #[test]
    fn double_node_of_quadratic_image() {
        let cc = 0.3;
        let phi = [ZERO, ONE, c(cc, 0.0)];
        let s = conformal_moments(&phi, 4).unwrap();
        let rep = reconstruct(&s_to_b(&s).unwrap(), &ReconstructOptions::default()).unwrap();
        assert_eq!(rep.d, 2);
        let st = &rep.structure;
        assert!(st.passed && st.rank <= 2 && st.eigenvalues[0] >= -1e-8);
        let qd = rep.quadrature.unwrap();
        assert_eq!(qd.multiplicities, vec![2]);
        assert!(qd.nodes[0].norm() < 1e-6);
        // ∫ f = π(1 + 2c²) f(0) + π c f'(0)
        assert!((qd.weights[0] - PI * (1.0 + 2.0 * cc * cc)).abs() < 1e-8);
        assert!((qd.derivative_weights[0][0] - PI * cc).norm() < 1e-6);
        for m in 0..=4 {
            let mut mono = vec![ZERO; m + 1];
            mono[m] = ONE;
            let got = qd.apply(&CPoly::new(mono));
            assert!((got - s.s[m][0]).norm() < 1e-6, "m={m}");
        }
    }

    #[test]
    fn weights_follow_cauchy_transform() {
        let (a, r) = (c(0.1, -0.2), 0.3);
        let b = disk_b(a, r, 3);
        let qd = reconstruct(&b, &ReconstructOptions::default())
            .unwrap()
            .quadrature
            .unwrap();
        let z = c(1.5, 0.7);
        let series: Complex64 = (0..=3).map(|k| b.b[k][0] * z.powi(-(k as i32) - 1)).sum();
        let closed = qd.cauchy_transform(z) / PI;
        assert!((closed - (r * r) / (z - a)).norm() < 1e-12);
        assert!((closed - series).norm() < 1e-3);
    }

    #[test]
    fn level_set_matches_disk() {
        let (a, r) = (c(0.2, 0.1), 0.5);
        let rep = reconstruct(&disk_b(a, r, 3), &ReconstructOptions::default()).unwrap();
        let n = 101;
        let band = 2.0 / n as f64;
        let mut wrong = 0;
        for j in 0..n {
            for i in 0..n {
                let z = c(
                    -1.0 + 2.0 * i as f64 / (n - 1) as f64,
                    -1.0 + 2.0 * j as f64 / (n - 1) as f64,
                );
                let dist = (z - a).norm() - r;
                if dist.abs() < band {
                    continue;
                }
                if (rep.q.eval_diagonal(z) < 0.0) != (dist < 0.0) {
                    wrong += 1;
                }
            }
        }
        assert_eq!(wrong, 0);
        let pts = boundary_samples(&rep.q, BBox::square(1.0), 101);
        assert!(pts.len() > 100);
        for p in pts {
            assert!(((p - a).norm() - r).abs() < 2e-3);
        }
    }

    #[test]
    fn hermitian_polynomial_helpers() {
        let q1 = HermitianBivarPoly::from_rows(vec![vec![c(-0.16, 0.0), ZERO], vec![ZERO, ONE]])
            .unwrap();
        let q2 = HermitianBivarPoly::from_rows(vec![vec![c(-0.25, 0.0), ZERO], vec![ZERO, ONE]])
            .unwrap();
        let diff = q1.sub(&q2);
        assert_eq!(diff.bidegree(1e-12), Some((0, 0)));
        assert_eq!(q1.sub(&q1).bidegree(1e-12), None);
        let z = c(0.3, 0.4);
        assert!((q1.eval_diagonal(z) - (0.25 - 0.16)).abs() < 1e-15);
        assert!(HermitianBivarPoly::from_rows(vec![vec![ONE, ONE]]).is_err());
    }

    #[test]
    fn node_mode_parses() {
        assert_eq!("null".parse::<NodeMode>().unwrap(), NodeMode::Null);
        assert_eq!("lowest".parse::<NodeMode>().unwrap(), NodeMode::Lowest);
        assert!("other".parse::<NodeMode>().is_err());
    }
}
