//! Test shapes, sampled shade functions and forward moment computation.
//!
//! Moments are the measurement side of the inverse problem:
//! `s_{kl}(g) = ∫ z^k z̄^l g dA` in the plane and `s_k(g) = ∫ t^k g dt` on the
//! line. Closed forms are used whenever the shape allows it; sampled shade
//! functions are integrated cell by cell.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::CPoly;
use crate::volume::RealPoly;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Number of boundary vertices used to polygonize a conformal image.
const BOUNDARY_VERTICES: usize = 4096;
/// Vertices used by the self-intersection test.
const INJECTIVITY_VERTICES: usize = 1024;

/// Analytic description of a test shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainSpec {
    Disk {
        center: Complex64,
        radius: f64,
    },
    /// Image of the closed unit disk under the polynomial `φ(ζ) = Σ phi[n] ζ^n`.
    Conformal {
        phi: Vec<Complex64>,
    },
    /// Sorted disjoint intervals inside `[-1, 1]`.
    Intervals {
        intervals: Vec<[f64; 2]>,
    },
    /// `{p >= 0} ∩ [-1, 1]^n`.
    Sublevel {
        poly: RealPoly,
    },
}

impl DomainSpec {
    pub fn disk(center: Complex64, radius: f64) -> Self {
        Self::Disk { center, radius }
    }

    pub fn conformal(phi: Vec<Complex64>) -> Self {
        Self::Conformal { phi }
    }

    pub fn intervals(intervals: Vec<[f64; 2]>) -> Self {
        Self::Intervals { intervals }
    }

    pub fn sublevel(poly: RealPoly) -> Self {
        Self::Sublevel { poly }
    }

    /// Checks the invariants of the variant. Containment of a disk in the unit
    /// disk is only warned about.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Disk { center, radius } => {
                if !(*radius > 0.0) || !center.is_finite() {
                    return Err(Error::InvalidDomain(format!(
                        "disk radius must be positive, got {radius}"
                    )));
                }
                if center.norm() + radius > 1.0 {
                    log::warn!("disk D({center}, {radius}) is not contained in the unit disk");
                }
                Ok(())
            }
            Self::Conformal { phi } => check_injective(phi),
            Self::Intervals { intervals } => validate_intervals(intervals),
            Self::Sublevel { poly } => poly.validate(),
        }
    }

    /// Exact area (2D shapes) or length (interval unions) when available.
    pub fn measure(&self) -> Option<f64> {
        match self {
            Self::Disk { radius, .. } => Some(PI * radius * radius),
            Self::Conformal { phi } => Some(conformal_area(phi, 1.0)),
            Self::Intervals { intervals } => Some(intervals.iter().map(|[a, b]| b - a).sum()),
            Self::Sublevel { .. } => None,
        }
    }

    /// Bounding box used by default when sampling the shape.
    pub fn default_bbox(&self) -> BBox {
        match self {
            Self::Conformal { phi } => {
                let pts = boundary_polygon(phi, BOUNDARY_VERTICES);
                let mut b = BBox {
                    x0: f64::INFINITY,
                    x1: f64::NEG_INFINITY,
                    y0: f64::INFINITY,
                    y1: f64::NEG_INFINITY,
                };
                for p in pts {
                    b.x0 = b.x0.min(p.re);
                    b.x1 = b.x1.max(p.re);
                    b.y0 = b.y0.min(p.im);
                    b.y1 = b.y1.max(p.im);
                }
                let half = 0.5 * (b.x1 - b.x0).max(b.y1 - b.y0) * 1.05;
                let (cx, cy) = (0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1));
                let r = half.max(1.0).max(cx.abs() + half).max(cy.abs() + half);
                BBox::square(r)
            }
            Self::Disk { center, radius } => {
                BBox::square((center.re.abs().max(center.im.abs()) + radius).max(1.0))
            }
            _ => BBox::square(1.0),
        }
    }
}

fn validate_intervals(intervals: &[[f64; 2]]) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for &[a, b] in intervals {
        if !(a < b) {
            return Err(Error::InvalidDomain(format!("empty interval [{a}, {b}]")));
        }
        if a < -1.0 || b > 1.0 {
            return Err(Error::InvalidDomain(format!("[{a}, {b}] leaves [-1, 1]")));
        }
        if a <= prev {
            return Err(Error::InvalidDomain(
                "intervals must be sorted and disjoint".into(),
            ));
        }
        prev = b;
    }
    Ok(())
}

/// `φ(e^{iθ})` at `count` equally spaced angles.
pub fn boundary_polygon(phi: &[Complex64], count: usize) -> Vec<Complex64> {
    let p = CPoly::new(phi.to_vec());
    (0..count)
        .map(|k| {
            p.eval(Complex64::from_polar(
                1.0,
                2.0 * PI * k as f64 / count as f64,
            ))
        })
        .collect()
}

/// Area of `φ(D(0, ρ))` for a polynomial `φ` univalent on that disk.
pub fn conformal_area(phi: &[Complex64], rho: f64) -> f64 {
    phi.iter()
        .enumerate()
        .skip(1)
        .map(|(n, a)| PI * n as f64 * a.norm_sqr() * rho.powi(2 * n as i32))
        .sum()
}

fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let cross = |o: Complex64, a: Complex64, b: Complex64| {
        (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
    };
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0)
}

/// A polynomial is univalent on the closed disk iff its boundary curve is a
/// simple closed curve; the curve is polygonized and tested for crossings.
fn check_injective(phi: &[Complex64]) -> Result<()> {
    let p = CPoly::new(phi.to_vec());
    match p.degree() {
        None | Some(0) => {
            return Err(Error::NonInjective("φ is constant".into()));
        }
        _ => {}
    }
    if phi.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidDomain("non-finite coefficient".into()));
    }
    let dp = p.derivative();
    let n = INJECTIVITY_VERTICES;
    let pts = boundary_polygon(phi, n);
    let scale: f64 = phi.iter().map(|c| c.norm()).sum();
    for k in 0..n {
        let z = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
        if dp.eval(z).norm() < 1e-9 * scale {
            return Err(Error::NonInjective(format!("φ' vanishes near {z}")));
        }
    }
    for i in 0..n {
        let (a1, a2) = (pts[i], pts[(i + 1) % n]);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(a1, a2, pts[j], pts[(j + 1) % n]) {
                return Err(Error::NonInjective(format!(
                    "boundary curve self-intersects near {a1}"
                )));
            }
        }
    }
    Ok(())
}

/// Axis-aligned sampling box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl BBox {
    pub fn square(half_width: f64) -> Self {
        Self {
            x0: -half_width,
            x1: half_width,
            y0: -half_width,
            y1: half_width,
        }
    }
}

/// Gray-scale density `g ∈ [0, 1]` sampled on an `n × n` grid of cells.
///
/// `values[j * n + i]` is the value on the cell in column `i` (x) and row `j`
/// (y); the function is treated as constant on each cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadeFunction {
    pub n: usize,
    pub bbox: BBox,
    pub values: Vec<f64>,
}

impl ShadeFunction {
    pub fn new(n: usize, bbox: BBox, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("grid resolution {n} < 2")));
        }
        if values.len() != n * n {
            return Err(Error::InvalidInput(
                "value count does not match grid".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "shade value {v} outside [0, 1]"
            )));
        }
        Ok(Self { n, bbox, values })
    }

    pub fn zeros(n: usize, bbox: BBox) -> Self {
        Self {
            n,
            bbox,
            values: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, bbox: BBox, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        let hx = (bbox.x1 - bbox.x0) / n as f64;
        let hy = (bbox.y1 - bbox.y0) / n as f64;
        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|j| {
                let y = bbox.y0 + (j as f64 + 0.5) * hy;
                let f = &f;
                (0..n).map(move |i| f(bbox.x0 + (i as f64 + 0.5) * hx, y))
            })
            .collect();
        Self::new(n, bbox, values)
    }

    pub fn hx(&self) -> f64 {
        (self.bbox.x1 - self.bbox.x0) / self.n as f64
    }

    pub fn hy(&self) -> f64 {
        (self.bbox.y1 - self.bbox.y0) / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn center(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(
            self.bbox.x0 + (i as f64 + 0.5) * self.hx(),
            self.bbox.y0 + (j as f64 + 0.5) * self.hy(),
        )
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.n,
            self.bbox,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// `∫ g dA`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.bbox != other.bbox {
            return Err(Error::InvalidInput(
                "shade functions live on different grids".into(),
            ));
        }
        Ok(())
    }

    /// `‖self − other‖₁` on the common grid.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.cell_area())
    }

    pub fn pointwise_max(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            n: self.n,
            bbox: self.bbox,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.max(*b))
                .collect(),
        })
    }

    /// Distance from `z` to the union of closed cells where `g > 0`;
    /// `f64::INFINITY` for an identically zero function.
    pub fn dist_to_support(&self, z: Complex64) -> f64 {
        let (hx, hy) = (self.hx(), self.hy());
        let mut best = f64::INFINITY;
        for j in 0..self.n {
            let ylo = self.bbox.y0 + j as f64 * hy;
            let dy = (ylo - z.im).max(z.im - (ylo + hy)).max(0.0);
            if dy >= best {
                continue;
            }
            for i in 0..self.n {
                if self.value(i, j) <= 0.0 {
                    continue;
                }
                let xlo = self.bbox.x0 + i as f64 * hx;
                let dx = (xlo - z.re).max(z.re - (xlo + hx)).max(0.0);
                best = best.min(dx.hypot(dy));
            }
        }
        best
    }
}

/// Where a moment table came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    BoundaryIntegral,
    GridQuadrature,
}

/// Complex moments `s_{kl}`, `0 <= k, l <= d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTable2D {
    pub d: usize,
    pub s: Vec<Vec<Complex64>>,
    pub provenance: Provenance,
}

impl MomentTable2D {
    pub fn zeros(d: usize, provenance: Provenance) -> Self {
        Self {
            d,
            s: vec![vec![ZERO; d + 1]; d + 1],
            provenance,
        }
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.s[k][l]
    }

    /// Largest `|s_{kl} − conj(s_{lk})|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..=self.d {
            for l in 0..=self.d {
                worst = worst.max((self.s[k][l] - self.s[l][k].conj()).norm());
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        if self.s.len() != self.d + 1 || self.s.iter().any(|r| r.len() != self.d + 1) {
            return Err(Error::InvalidInput(format!(
                "moment table must be {0}×{0}",
                self.d + 1
            )));
        }
        Ok(())
    }

    /// Leading `(d' + 1) × (d' + 1)` section.
    pub fn truncate(&self, d: usize) -> Self {
        let d = d.min(self.d);
        Self {
            d,
            s: self.s[..=d].iter().map(|r| r[..=d].to_vec()).collect(),
            provenance: self.provenance,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.s
            .iter()
            .flatten()
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.s
            .iter()
            .flatten()
            .zip(other.s.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Real moments `s_k`, `0 <= k <= m`, on the line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTable1D {
    pub m: usize,
    pub s: Vec<f64>,
}

impl MomentTable1D {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidInput("empty moment sequence".into()));
        }
        Ok(Self { m: s.len() - 1, s })
    }
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n - k + 1) as f64 / k as f64;
    }
    row
}

/// Closed-form moments of the disk `D(a, r)`.
pub fn disk_moments(a: Complex64, r: f64, d: usize) -> Result<MomentTable2D> {
    if !(r > 0.0) {
        return Err(Error::InvalidDomain(format!("radius {r} is not positive")));
    }
    let binom: Vec<Vec<f64>> = (0..=d).map(binomial_row).collect();
    // Centered moments: ∫_{D(0,r)} |ζ|^{2i} dA = π r^{2i+2} / (i + 1).
    let centered: Vec<f64> = (0..=d)
        .map(|i| PI * r.powi(2 * i as i32 + 2) / (i + 1) as f64)
        .collect();
    let apow: Vec<Complex64> = (0..=d).map(|k| a.powu(k as u32)).collect();
    let mut table = MomentTable2D::zeros(d, Provenance::ClosedForm);
    for k in 0..=d {
        for l in 0..=d {
            let mut acc = ZERO;
            for i in 0..=k.min(l) {
                acc += apow[k - i] * apow[l - i].conj() * (binom[k][i] * binom[l][i] * centered[i]);
            }
            table.s[k][l] = acc;
        }
    }
    Ok(table)
}

/// Exact moments of the image of the unit disk under a univalent polynomial.
///
/// With `F_k = φ^k φ'`, `s_{kl} = ∫_𝔻 F_k conj(F_l) dA = Σ_i f_{k,i} conj(f_{l,i}) π / (i + 1)`.
pub fn conformal_moments(phi: &[Complex64], d: usize) -> Result<MomentTable2D> {
    check_injective(phi)?;
    let p = CPoly::new(phi.to_vec());
    let dp = p.derivative();
    let mut f = Vec::with_capacity(d + 1);
    let mut power = CPoly::new(vec![Complex64::new(1.0, 0.0)]);
    for _ in 0..=d {
        f.push(power.mul(&dp).coeffs);
        power = power.mul(&p);
    }
    let mut table = MomentTable2D::zeros(d, Provenance::ClosedForm);
    for k in 0..=d {
        for l in 0..=d {
            let mut acc = ZERO;
            for i in 0..f[k].len().min(f[l].len()) {
                acc += f[k][i] * f[l][i].conj() * (PI / (i + 1) as f64);
            }
            table.s[k][l] = acc;
        }
    }
    Ok(table)
}

/// Moments of the piecewise-constant density defined by the samples.
///
/// Each cell contributes `g_ij ∫_cell z^k z̄^l dA`, integrated exactly through
/// the real moments `∫ x^a y^b`. The result is deterministic and independent of
/// the number of worker threads.
pub fn grid_moments(g: &ShadeFunction, d: usize) -> MomentTable2D {
    let n = g.n;
    let top = 2 * d;
    let (hx, hy) = (g.hx(), g.hy());
    if (0..n).any(|j| (0..n).any(|i| g.value(i, j) > 0.0 && g.center(i, j).norm() > 1.0)) {
        log::warn!("shade function has support outside the unit disk");
    }
    // X_a(i) = ∫_{cell i} x^a dx
    let cell_powers = |lo: f64, h: f64| -> Vec<f64> {
        let hi = lo + h;
        (0..=top)
            .map(|a| {
                let e = a as i32 + 1;
                (hi.powi(e) - lo.powi(e)) / e as f64
            })
            .collect()
    };
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|i| cell_powers(g.bbox.x0 + i as f64 * hx, hx))
        .collect();

    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let ys = cell_powers(g.bbox.y0 + j as f64 * hy, hy);
            let mut row_x = vec![0.0; top + 1];
            for (i, x) in xs.iter().enumerate() {
                let v = g.value(i, j);
                if v != 0.0 {
                    for a in 0..=top {
                        row_x[a] += v * x[a];
                    }
                }
            }
            let mut m = vec![0.0; (top + 1) * (top + 1)];
            for a in 0..=top {
                for b in 0..=top - a {
                    m[a * (top + 1) + b] = row_x[a] * ys[b];
                }
            }
            m
        })
        .collect();
    let mut real = vec![0.0; (top + 1) * (top + 1)];
    for p in &partials {
        for (acc, v) in real.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let rm = |a: usize, b: usize| real[a * (top + 1) + b];

    // z^k z̄^l = Σ_{i,j} C(k,i) C(l,j) x^{k-i+l-j} y^{i+j} · i^{i+j} (−1)^j
    let binom: Vec<Vec<f64>> = (0..=d).map(binomial_row).collect();
    let ipow = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    let mut table = MomentTable2D::zeros(d, Provenance::GridQuadrature);
    for k in 0..=d {
        for l in 0..=d {
            let mut acc = ZERO;
            for i in 0..=k {
                for j in 0..=l {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let w = binom[k][i] * binom[l][j] * sign * rm(k - i + l - j, i + j);
                    acc += ipow[(i + j) % 4] * w;
                }
            }
            table.s[k][l] = acc;
        }
    }
    table
}

/// `s_k = Σ_i (b_i^{k+1} − a_i^{k+1}) / (k + 1)`.
pub fn interval_moments(intervals: &[[f64; 2]], m: usize) -> Result<MomentTable1D> {
    validate_intervals(intervals)?;
    let s = (0..=m)
        .map(|k| {
            let e = k as i32 + 1;
            intervals
                .iter()
                .map(|&[a, b]| (b.powi(e) - a.powi(e)) / e as f64)
                .sum()
        })
        .collect();
    MomentTable1D::new(s)
}

/// Perturbations applied when sampling a shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    None,
    /// Disk: radius `r + eps`. Conformal: image of `D(0, 1 + eps)`.
    /// Sublevel: `{p >= -eps}`.
    Dilation {
        eps: f64,
    },
    Translation {
        dx: f64,
        dy: f64,
    },
    /// Multiplies the indicator by `1 − kappa` on an axis-aligned rectangle.
    Smudge {
        kappa: f64,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    },
    /// `count` square smudges of side `size` at random positions.
    RandomSmudges {
        count: usize,
        kappa: f64,
        size: f64,
        seed: u64,
    },
}

/// Samples the (possibly perturbed) indicator of `spec` at cell centers.
pub fn sample_shade(
    spec: &DomainSpec,
    perturbation: &Perturbation,
    n: usize,
    bbox: BBox,
) -> Result<ShadeFunction> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("grid resolution {n} < 2")));
    }
    spec.validate()?;
    let (tx, ty) = match perturbation {
        Perturbation::Translation { dx, dy } => (*dx, *dy),
        _ => (0.0, 0.0),
    };
    let dilation = match perturbation {
        Perturbation::Dilation { eps } => *eps,
        _ => 0.0,
    };
    let mut shade = match spec {
        DomainSpec::Disk { center, radius } => {
            let r = radius + dilation;
            let c = *center + Complex64::new(tx, ty);
            ShadeFunction::from_fn(n, bbox, |x, y| {
                if (Complex64::new(x, y) - c).norm() <= r {
                    1.0
                } else {
                    0.0
                }
            })?
        }
        DomainSpec::Conformal { phi } => {
            let scale = 1.0 + dilation;
            let scaled: Vec<Complex64> = phi
                .iter()
                .enumerate()
                .map(|(k, a)| a * scale.powi(k as i32))
                .collect();
            let mut pts = boundary_polygon(&scaled, BOUNDARY_VERTICES);
            for p in &mut pts {
                *p += Complex64::new(tx, ty);
            }
            scanline_fill(&pts, n, bbox)
        }
        DomainSpec::Sublevel { poly } => {
            if poly.n != 2 {
                return Err(Error::InvalidDomain(format!(
                    "planar sampling needs a bivariate polynomial, got n = {}",
                    poly.n
                )));
            }
            ShadeFunction::from_fn(n, bbox, |x, y| {
                let inside = x.abs() <= 1.0 && y.abs() <= 1.0;
                if inside && poly.eval(&[x - tx, y - ty]) >= -dilation {
                    1.0
                } else {
                    0.0
                }
            })?
        }
        DomainSpec::Intervals { .. } => {
            return Err(Error::InvalidDomain(
                "interval unions are one-dimensional; use interval_moments".into(),
            ))
        }
    };
    match perturbation {
        Perturbation::Smudge {
            kappa,
            x0,
            x1,
            y0,
            y1,
        } => smudge(&mut shade, *kappa, [*x0, *x1, *y0, *y1])?,
        Perturbation::RandomSmudges {
            count,
            kappa,
            size,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for _ in 0..*count {
                let cx = rng.gen_range(bbox.x0..bbox.x1);
                let cy = rng.gen_range(bbox.y0..bbox.y1);
                let h = 0.5 * size;
                smudge(&mut shade, *kappa, [cx - h, cx + h, cy - h, cy + h])?;
            }
        }
        _ => {}
    }
    Ok(shade)
}

fn smudge(shade: &mut ShadeFunction, kappa: f64, rect: [f64; 4]) -> Result<()> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::InvalidInput(format!(
            "smudge strength {kappa} outside [0, 1]"
        )));
    }
    let n = shade.n;
    for j in 0..n {
        for i in 0..n {
            let c = shade.center(i, j);
            if c.re >= rect[0] && c.re < rect[1] && c.im >= rect[2] && c.im < rect[3] {
                shade.values[j * n + i] *= 1.0 - kappa;
            }
        }
    }
    Ok(())
}

/// Even-odd fill of a closed polygon at cell centers, one scanline per row.
fn scanline_fill(pts: &[Complex64], n: usize, bbox: BBox) -> ShadeFunction {
    let hx = (bbox.x1 - bbox.x0) / n as f64;
    let hy = (bbox.y1 - bbox.y0) / n as f64;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|j| {
            let y = bbox.y0 + (j as f64 + 0.5) * hy;
            let mut xs = Vec::new();
            for k in 0..pts.len() {
                let (p, q) = (pts[k], pts[(k + 1) % pts.len()]);
                if (p.im <= y) != (q.im <= y) {
                    let t = (y - p.im) / (q.im - p.im);
                    xs.push(p.re + t * (q.re - p.re));
                }
            }
            xs.sort_by(f64::total_cmp);
            (0..n).map(move |i| {
                let x = bbox.x0 + (i as f64 + 0.5) * hx;
                let crossings = xs.iter().take_while(|&&c| c < x).count();
                if crossings % 2 == 1 {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .collect();
    ShadeFunction { n, bbox, values }
}

/// Closed-form `‖χ − g‖₁` for the perturbation families that admit one.
pub fn perturbation_l1(spec: &DomainSpec, perturbation: &Perturbation) -> Option<f64> {
    match (spec, perturbation) {
        (_, Perturbation::None) => Some(0.0),
        (DomainSpec::Disk { radius, .. }, Perturbation::Dilation { eps }) => {
            let r2 = (radius + eps).max(0.0);
            Some(PI * (r2 * r2 - radius * radius).abs())
        }
        (DomainSpec::Disk { radius, .. }, Perturbation::Translation { dx, dy }) => {
            let t = dx.hypot(*dy);
            let r = *radius;
            if t >= 2.0 * r {
                return Some(2.0 * PI * r * r);
            }
            let lens =
                2.0 * r * r * (t / (2.0 * r)).acos() - 0.5 * t * (4.0 * r * r - t * t).sqrt();
            Some(2.0 * (PI * r * r - lens))
        }
        (DomainSpec::Conformal { phi }, Perturbation::Dilation { eps }) => {
            Some((conformal_area(phi, 1.0 + eps) - conformal_area(phi, 1.0)).abs())
        }
        _ => None,
    }
}

/// Random gray-scale shade built from a few soft disks inside `D(0, max_radius)`.
pub fn random_shade(n: usize, bbox: BBox, max_radius: f64, seed: u64) -> ShadeFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<(Complex64, f64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            let r = rng.gen_range(0.05..0.4) * max_radius;
            let rho = rng.gen_range(0.0..(max_radius - r));
            let theta = rng.gen_range(0.0..2.0 * PI);
            (
                Complex64::from_polar(rho, theta),
                r,
                rng.gen_range(0.1..1.0),
            )
        })
        .collect();
    ShadeFunction::from_fn(n, bbox, |x, y| {
        let z = Complex64::new(x, y);
        blobs
            .iter()
            .map(|(c, r, h)| if (z - c).norm() <= *r { *h } else { 0.0 })
            .sum::<f64>()
            .min(1.0)
    })
    .expect("blob values stay in [0, 1]")
}
