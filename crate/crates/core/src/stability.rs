//! Numerical experiments on the stability inequalities.
//!
//! * Hölder ratios `‖χ − g‖₁^{|α|+1} / |∫ p (χ − g)|` for designed perturbations
//!   of `χ = 1{p >= 0}` on the square `[-1, 1]²`.
//! * The bathtub functional `Λ_f(ε)` and its Fenchel lower bound.
//! * Perturbation bounds on `E_f(z, z̄)` and on the coefficients `b_{kl}`.
//! * Defining-polynomial gaps between two quadrature domains.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{
    conformal_moments, disk_moments, grid_moments, random_shade, sample_shade, BBox, DomainSpec,
    MomentTable2D, Perturbation, ShadeFunction,
};
use crate::error::{Error, Result};
use crate::exptransform::{eval_diagonal, s_to_b};
use crate::poly::CPoly;
use crate::quad::integrate;
use crate::reconstruct::{reconstruct, HermitianBivarPoly, ReconstructOptions};
use crate::volume::{find_admissible, RealPoly};

/// Smallest distance from the support accepted by [`check_diagonal_bound`].
pub const MIN_DIST: f64 = 0.1;

/// Bathtub value `inf { ∫ f g : 0 <= g <= 1, ∫ g >= ε }` for `f` sampled on
/// cells of volume `cell`.
pub fn lambda_f(values: &[f64], cell: f64, eps: f64) -> Result<f64> {
    if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "bathtub needs a finite nonnegative function".into(),
        ));
    }
    let total = values.len() as f64 * cell;
    if eps > total * (1.0 + 1e-12) {
        return Err(Error::MassExceedsVolume { eps, total });
    }
    if eps <= 0.0 {
        return Ok(0.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut mass = 0.0;
    let mut acc = 0.0;
    for v in sorted {
        let take = cell.min(eps - mass);
        if take <= 0.0 {
            break;
        }
        acc += v * take;
        mass += take;
    }
    Ok(acc)
}

/// `|p|` at the cell centers of a uniform grid on `[-1, 1]^n`, with the cell volume.
pub fn sample_abs(p: &RealPoly, grid_n: usize) -> Result<(Vec<f64>, f64)> {
    p.validate()?;
    let n = p.n;
    let h = 2.0 / grid_n as f64;
    let count = grid_n
        .checked_pow(n as u32)
        .filter(|&c| c <= 1 << 26)
        .ok_or_else(|| Error::InvalidInput(format!("grid {grid_n}^{n} is too large")))?;
    let values = (0..count)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![0.0; n];
            for xi in x.iter_mut() {
                *xi = -1.0 + (idx % grid_n) as f64 * h + 0.5 * h;
                idx /= grid_n;
            }
            p.eval(&x).abs()
        })
        .collect();
    Ok((values, h.powi(n as i32)))
}

/// One `(ε, s)` evaluation of `Λ(ε) >= s ε − ∫ (s − |p|)₊`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FenchelRecord {
    pub eps: f64,
    pub s: f64,
    pub lambda: f64,
    pub lower: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FenchelReport {
    pub records: Vec<FenchelRecord>,
    pub min_margin: f64,
    /// `(s, ∫ (s − |p|)₊)` over the s-grid.
    pub positive_part: Vec<(f64, f64)>,
    /// Least-squares slope of `log ∫ (s − |p|)₊` against `log s`.
    pub slope: Option<f64>,
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Evaluates the Fenchel inequality for `f = |p|` on `[-1, 1]^n`.
pub fn fenchel_check(
    p: &RealPoly,
    eps_grid: &[f64],
    s_grid: &[f64],
    grid_n: usize,
) -> Result<FenchelReport> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let (values, cell) = sample_abs(p, grid_n)?;
    let positive_part: Vec<(f64, f64)> = s_grid
        .iter()
        .map(|&s| {
            (
                s,
                values.iter().map(|&f| (s - f).max(0.0)).sum::<f64>() * cell,
            )
        })
        .collect();
    let mut records = Vec::with_capacity(eps_grid.len() * s_grid.len());
    for &eps in eps_grid {
        let lambda = lambda_f(&values, cell, eps)?;
        for &(s, pp) in &positive_part {
            let lower = s * eps - pp;
            records.push(FenchelRecord {
                eps,
                s,
                lambda,
                lower,
                margin: lambda - lower,
            });
        }
    }
    let min_margin = records
        .iter()
        .map(|r| r.margin)
        .fold(f64::INFINITY, f64::min);
    let slope = loglog_slope(&positive_part);
    Ok(FenchelReport {
        records,
        min_margin,
        positive_part,
        slope,
    })
}

/// Perturbation families for the Hölder experiment, indexed by `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HolderFamily {
    /// `g = 1{p >= −ε}`.
    Dilation,
    /// `g(x, y) = χ(x − ε, y)`.
    Translation,
    /// `g = χ · (1 − κ)` on the square `[x0, x0 + ε] × [y0, y0 + ε]`.
    Smudge { kappa: f64, x0: f64, y0: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderConfig {
    pub poly: RealPoly,
    /// Defaults to the first admissible index of `poly`.
    #[serde(default)]
    pub alpha: Option<Vec<u32>>,
    #[serde(flatten)]
    pub family: HolderFamily,
    pub eps_grid: Vec<f64>,
    /// Validity-ball radius is `ball_constant · |p_α|^{1/|α|} / (4d)`.
    #[serde(default = "default_ball_constant")]
    pub ball_constant: f64,
}

fn default_ball_constant() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderRecord {
    pub eps: f64,
    pub l1: f64,
    pub gap: f64,
    /// `None` when the gap vanishes.
    pub ratio: Option<f64>,
    pub in_ball: bool,
    pub method: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderExperiment {
    pub poly: RealPoly,
    pub alpha: Vec<u32>,
    pub order: u32,
    pub family: HolderFamily,
    pub ball_radius: f64,
    pub records: Vec<HolderRecord>,
    /// Twice the ratio at the largest in-ball `ε`.
    pub empirical_bound: Option<f64>,
    pub bounded: bool,
    /// Log-log slope of the gap against `‖χ − g‖₁` over in-ball records.
    pub slope: Option<f64>,
}

fn trim(mut c: Vec<f64>) -> Vec<f64> {
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    while c.len() > 1 && c.last().map_or(false, |v| v.abs() <= 1e-14 * scale) {
        c.pop();
    }
    c
}

/// Real roots in `(-1, 1)` of `Σ c_i y^i`.
fn roots_in_unit(c: &[f64], out: &mut Vec<f64>) {
    let c = trim(c.to_vec());
    let mut push = |r: f64| {
        if r > -1.0 && r < 1.0 {
            out.push(r);
        }
    };
    match c.len() {
        0 | 1 => {}
        2 => push(-c[0] / c[1]),
        3 => {
            let (a, b, cc) = (c[2], c[1], c[0]);
            let disc = b * b - 4.0 * a * cc;
            if disc >= 0.0 {
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                if q != 0.0 {
                    push(q / a);
                    push(cc / q);
                } else {
                    push(0.0);
                }
            }
        }
        _ => {
            let roots = CPoly::from_real(&c)
                .roots()
                .or_else(|e| match e {
                    Error::NonConvergence { best, .. } => Ok(best),
                    other => Err(other),
                })
                .unwrap_or_default();
            for r in roots {
                if r.im.abs() <= 1e-9 * (1.0 + r.re.abs()) {
                    push(r.re);
                }
            }
        }
    }
}

fn antiderivative_at(c: &[f64], y: f64) -> f64 {
    c.iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (i, &ci)| acc * y + ci / (i + 1) as f64)
        * y
}

/// `(∫|χ − g|, ∫ p (χ − g))` over `[-1, 1]²`, integrating exactly in `y`
/// between the slice roots and adaptively in `x`.
fn pair_integrals(p: &RealPoly, family: &HolderFamily, eps: f64) -> (f64, f64) {
    let chi = |x: f64, y: f64| if p.eval(&[x, y]) >= 0.0 { 1.0 } else { 0.0 };
    let g = |x: f64, y: f64| -> f64 {
        match family {
            HolderFamily::Dilation => {
                if p.eval(&[x, y]) >= -eps {
                    1.0
                } else {
                    0.0
                }
            }
            HolderFamily::Translation => chi(x - eps, y),
            HolderFamily::Smudge { kappa, x0, y0 } => {
                let inside = x >= *x0 && x < x0 + eps && y >= *y0 && y < y0 + eps;
                chi(x, y) * if inside { 1.0 - kappa } else { 1.0 }
            }
        }
    };
    let densities = |x: f64| -> (f64, f64) {
        let slice = p.slice_in_y(x);
        let mut ys = vec![-1.0, 1.0];
        roots_in_unit(&slice, &mut ys);
        match family {
            HolderFamily::Dilation => {
                let mut shifted = slice.clone();
                shifted[0] += eps;
                roots_in_unit(&shifted, &mut ys);
            }
            HolderFamily::Translation => roots_in_unit(&p.slice_in_y(x - eps), &mut ys),
            HolderFamily::Smudge { x0, y0, .. } => {
                if x >= *x0 && x < x0 + eps {
                    ys.extend([*y0, y0 + eps].iter().filter(|y| y.abs() < 1.0));
                }
            }
        }
        ys.sort_by(f64::total_cmp);
        let (mut l1, mut gap) = (0.0, 0.0);
        for w in ys.windows(2) {
            let (y0, y1) = (w[0], w[1]);
            if y1 <= y0 {
                continue;
            }
            let ym = 0.5 * (y0 + y1);
            let h = chi(x, ym) - g(x, ym);
            if h != 0.0 {
                l1 += h.abs() * (y1 - y0);
                gap += h * (antiderivative_at(&slice, y1) - antiderivative_at(&slice, y0));
            }
        }
        (l1, gap)
    };
    let mut xs = vec![-1.0, 0.0, 1.0];
    match family {
        HolderFamily::Translation => xs.extend([eps, eps - 1.0, eps + 1.0]),
        HolderFamily::Smudge { x0, .. } => xs.extend([*x0, x0 + eps]),
        HolderFamily::Dilation => {}
    }
    xs.retain(|x| (-1.0..=1.0).contains(x));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let (mut l1, mut gap) = (0.0, 0.0);
    for w in xs.windows(2) {
        l1 += integrate(|x| densities(x).0, w[0], w[1], 1e-15, 1e-11, 4000).value;
        gap += integrate(|x| densities(x).1, w[0], w[1], 1e-16, 1e-11, 4000).value;
    }
    (l1, gap.abs())
}

/// Runs the Hölder experiment over a strictly decreasing ε-grid.
pub fn run_holder_experiment(cfg: &HolderConfig) -> Result<HolderExperiment> {
    let p = &cfg.poly;
    if p.n != 2 {
        return Err(Error::InvalidInput(format!(
            "Hölder experiments run on the square; got dimension {}",
            p.n
        )));
    }
    let adm = find_admissible(p)?;
    let alpha = match &cfg.alpha {
        Some(a) => adm
            .iter()
            .find(|x| &x.alpha == a)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("{a:?} is not admissible")))?,
        None => adm[0].clone(),
    };
    if alpha.order == 0 {
        return Err(Error::InvalidInput("constant polynomial".into()));
    }
    if cfg.eps_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidInput(
            "ε-grid must be finite and nonnegative".into(),
        ));
    }
    let mut eps_grid = cfg.eps_grid.clone();
    eps_grid.sort_by(|a, b| b.total_cmp(a));
    if eps_grid.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("ε-grid has repeated values".into()));
    }
    if let HolderFamily::Smudge { kappa, .. } = cfg.family {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::InvalidInput(format!(
                "smudge strength {kappa} outside [0, 1]"
            )));
        }
    }
    let d = p.degree() as f64;
    let ball_radius =
        cfg.ball_constant * alpha.coeff.abs().powf(1.0 / alpha.order as f64) / (4.0 * d);
    let exponent = alpha.order as i32 + 1;
    let records: Vec<HolderRecord> = eps_grid
        .par_iter()
        .map(|&eps| {
            let (l1, gap) = if eps == 0.0 {
                (0.0, 0.0)
            } else {
                pair_integrals(p, &cfg.family, eps)
            };
            HolderRecord {
                eps,
                l1,
                gap,
                ratio: (gap > 0.0).then(|| l1.powi(exponent) / gap),
                in_ball: l1 <= ball_radius,
                method: "semi-analytic".into(),
            }
        })
        .collect();
    let usable: Vec<&HolderRecord> = records
        .iter()
        .filter(|r| r.in_ball && r.ratio.is_some())
        .collect();
    let empirical_bound = usable.first().and_then(|r| r.ratio).map(|r| 2.0 * r);
    let bounded = match empirical_bound {
        Some(b) => usable.iter().all(|r| r.ratio.unwrap() <= b),
        None => true,
    };
    let slope = loglog_slope(&usable.iter().map(|r| (r.l1, r.gap)).collect::<Vec<_>>());
    Ok(HolderExperiment {
        poly: p.clone(),
        alpha: alpha.alpha,
        order: alpha.order,
        family: cfg.family.clone(),
        ball_radius,
        records,
        empirical_bound,
        bounded,
        slope,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub z: Complex64,
    pub dist: f64,
    pub left: f64,
    pub right: f64,
    pub margin: f64,
}

/// `|E_f − E_g|` against `2 ‖f − g‖₁ / (π dist(z, K)²)` at each point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbBoundRecord {
    pub l1: f64,
    pub points: Vec<BoundPoint>,
    pub min_margin: f64,
}

impl PerturbBoundRecord {
    pub fn violations(&self, tol: f64) -> usize {
        self.points.iter().filter(|p| p.margin < -tol).count()
    }
}

pub fn check_diagonal_bound(
    f: &ShadeFunction,
    g: &ShadeFunction,
    zs: &[Complex64],
) -> Result<PerturbBoundRecord> {
    let l1 = f.l1_distance(g)?;
    let mut points = Vec::with_capacity(zs.len());
    for &z in zs {
        let dist = f.dist_to_support(z).min(g.dist_to_support(z));
        if dist < MIN_DIST {
            return Err(Error::TooCloseToSupport {
                dist,
                min: MIN_DIST,
            });
        }
        let left = (eval_diagonal(f, z)? - eval_diagonal(g, z)?).abs();
        let right = if dist.is_finite() {
            2.0 * l1 / (PI * dist * dist)
        } else {
            0.0
        };
        points.push(BoundPoint {
            z,
            dist,
            left,
            right,
            margin: right - left,
        });
    }
    let min_margin = points
        .iter()
        .map(|p| p.margin)
        .fold(f64::INFINITY, f64::min);
    Ok(PerturbBoundRecord {
        l1,
        points,
        min_margin,
    })
}

/// `2/(π(R−1)²) · exp(4/(π(R−1)²))`.
pub fn c3(r: f64) -> f64 {
    let k = 1.0 / (PI * (r - 1.0).powi(2));
    2.0 * k * (4.0 * k).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BGapEntry {
    pub k: usize,
    pub l: usize,
    pub left: f64,
    pub right: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BGapRecord {
    pub r: f64,
    pub c3: f64,
    pub l1: f64,
    pub entries: Vec<BGapEntry>,
    pub min_margin: f64,
}

impl BGapRecord {
    pub fn violations(&self, tol: f64) -> usize {
        self.entries.iter().filter(|e| e.margin < -tol).count()
    }
}

/// `|b_{kl}(f) − b_{kl}(g)|` against `C₃(R) R^{k+l} ‖f − g‖₁` for `k, l <= d`.
pub fn check_bgap_bound(
    f: &ShadeFunction,
    g: &ShadeFunction,
    r: f64,
    d: usize,
) -> Result<BGapRecord> {
    if !(r > 1.0) {
        return Err(Error::InvalidInput(format!("radius {r} must exceed 1")));
    }
    let l1 = f.l1_distance(g)?;
    let bf = s_to_b(&grid_moments(f, d))?;
    let bg = s_to_b(&grid_moments(g, d))?;
    bgap_from_tables(&bf.b, &bg.b, r, l1)
}

fn bgap_from_tables(
    bf: &[Vec<Complex64>],
    bg: &[Vec<Complex64>],
    r: f64,
    l1: f64,
) -> Result<BGapRecord> {
    let c = c3(r);
    let mut entries = Vec::new();
    for (k, (rf, rg)) in bf.iter().zip(bg).enumerate() {
        for (l, (a, b)) in rf.iter().zip(rg).enumerate() {
            let left = (a - b).norm();
            let right = c * r.powi((k + l) as i32) * l1;
            entries.push(BGapEntry {
                k,
                l,
                left,
                right,
                margin: right - left,
            });
        }
    }
    let min_margin = entries
        .iter()
        .map(|e| e.margin)
        .fold(f64::INFINITY, f64::min);
    Ok(BGapRecord {
        r,
        c3: c,
        l1,
        entries,
        min_margin,
    })
}

/// Aggregate of many random perturbation-bound trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomBoundSummary {
    pub pairs: usize,
    pub checks: usize,
    pub violations: usize,
    pub min_margin: f64,
    pub tol: f64,
}

fn exterior_points(count: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..count)
        .map(|_| Complex64::from_polar(rng.gen_range(1.0..3.0), rng.gen_range(0.0..2.0 * PI)))
        .collect()
}

/// Random shade pairs supported in `D(0, 0.9)`, compared at points with `1 <= |z| < 3`.
pub fn random_diagonal_check(
    pairs: usize,
    points: usize,
    grid_n: usize,
    seed: u64,
    tol: f64,
) -> Result<RandomBoundSummary> {
    let bbox = BBox::square(1.0);
    let records: Vec<PerturbBoundRecord> = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let base = seed.wrapping_add(2 * k as u64);
            let f = random_shade(grid_n, bbox, 0.9, base);
            let g = random_shade(grid_n, bbox, 0.9, base + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(base);
            rng.set_stream(1);
            check_diagonal_bound(&f, &g, &exterior_points(points, &mut rng))
        })
        .collect::<Result<_>>()?;
    Ok(RandomBoundSummary {
        pairs,
        checks: records.iter().map(|r| r.points.len()).sum(),
        violations: records.iter().map(|r| r.violations(tol)).sum(),
        min_margin: records
            .iter()
            .map(|r| r.min_margin)
            .fold(f64::INFINITY, f64::min),
        tol,
    })
}

/// Random shade pairs in `D(0, 0.9)`; coefficient gaps for `k, l <= d`.
pub fn random_bgap_check(
    pairs: usize,
    grid_n: usize,
    r: f64,
    d: usize,
    seed: u64,
    tol: f64,
) -> Result<RandomBoundSummary> {
    let bbox = BBox::square(1.0);
    let records: Vec<BGapRecord> = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let base = seed.wrapping_add(2 * k as u64);
            let f = random_shade(grid_n, bbox, 0.9, base);
            let g = random_shade(grid_n, bbox, 0.9, base + 1);
            check_bgap_bound(&f, &g, r, d)
        })
        .collect::<Result<_>>()?;
    Ok(RandomBoundSummary {
        pairs,
        checks: records.iter().map(|r| r.entries.len()).sum(),
        violations: records.iter().map(|r| r.violations(tol)).sum(),
        min_margin: records
            .iter()
            .map(|r| r.min_margin)
            .fold(f64::INFINITY, f64::min),
        tol,
    })
}

/// Both sides of the defining-polynomial comparison for two quadrature domains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoDomainsReport {
    pub d: usize,
    pub q1: HermitianBivarPoly,
    pub q2: HermitianBivarPoly,
    /// `sup_{|z|<2} |Q₁(z, z̄) − Q₂(z, z̄)|` on a polar grid.
    pub left: f64,
    /// `∫ Q₁(u, ū)(χ₁ − χ₂) dA` from exact moments.
    pub integral: f64,
    /// The same integral by the midpoint rule on the shade grid.
    pub integral_grid: f64,
    /// `|integral|^{1/(2d+1)}`.
    pub right: f64,
    /// `left / right`; `None` when both sides vanish.
    pub implied_constant: Option<f64>,
    /// `4 · C · 3^{2d}` at `C = 2`.
    pub bound_constant: f64,
    pub consistent: bool,
    /// Bidegree of `Q₁ − Q₂`, `None` if they agree.
    pub difference_bidegree: Option<(usize, usize)>,
    pub node_mismatch: f64,
    pub same_weights: bool,
}

fn exact_moments(spec: &DomainSpec, order: usize) -> Result<MomentTable2D> {
    match spec {
        DomainSpec::Disk { center, radius } => disk_moments(*center, *radius, order),
        DomainSpec::Conformal { phi } => conformal_moments(phi, order),
        other => Err(Error::InvalidDomain(format!(
            "expected a disk or a conformal image, got {other:?}"
        ))),
    }
}

/// Compares two quadrature domains with the same nodes.
pub fn two_domains_experiment(
    a: &DomainSpec,
    b: &DomainSpec,
    grid_n: usize,
) -> Result<TwoDomainsReport> {
    const ORDER: usize = 6;
    let (s1, s2) = (exact_moments(a, ORDER)?, exact_moments(b, ORDER)?);
    let opts = ReconstructOptions::default();
    let r1 = reconstruct(&s_to_b(&s1)?, &opts)?;
    let r2 = reconstruct(&s_to_b(&s2)?, &opts)?;
    if r1.d != r2.d {
        return Err(Error::NodeMismatch(f64::INFINITY));
    }
    let d = r1.d;
    let node_mismatch = r1
        .p_d
        .coeffs
        .iter()
        .zip(&r2.p_d.coeffs)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    if node_mismatch > 1e-8 {
        return Err(Error::NodeMismatch(node_mismatch));
    }
    let (q1, q2) = (r1.q, r2.q);
    let diff = q1.sub(&q2);

    let mut left = 0.0f64;
    for i in 0..=200 {
        let rho = 2.0 * i as f64 / 200.0;
        for j in 0..360 {
            let z = Complex64::from_polar(rho, 2.0 * PI * j as f64 / 360.0);
            left = left.max(diff.eval_diagonal(z).abs());
        }
    }

    let mut integral = Complex64::new(0.0, 0.0);
    for m in 0..=d {
        for n in 0..=d {
            integral += q1.q[m][n] * (s1.s[m][n] - s2.s[m][n]);
        }
    }
    let bbox = BBox::square(1.0);
    let g1 = sample_shade(a, &Perturbation::None, grid_n, bbox)?;
    let g2 = sample_shade(b, &Perturbation::None, grid_n, bbox)?;
    let mut integral_grid = 0.0;
    for j in 0..grid_n {
        for i in 0..grid_n {
            let h = g1.value(i, j) - g2.value(i, j);
            if h != 0.0 {
                integral_grid += q1.eval_diagonal(g1.center(i, j)) * h;
            }
        }
    }
    integral_grid *= g1.cell_area();

    let right = integral.norm().powf(1.0 / (2 * d + 1) as f64);
    let implied_constant = (right > 0.0).then(|| left / right);
    let bound_constant = 4.0 * 2.0 * 9f64.powi(d as i32);
    let consistent = match implied_constant {
        Some(c) => c <= bound_constant,
        None => left <= 1e-12,
    };
    let same_weights = match (&r1.quadrature, &r2.quadrature) {
        (Some(x), Some(y)) => {
            x.weights.len() == y.weights.len()
                && x.weights
                    .iter()
                    .zip(&y.weights)
                    .all(|(u, v)| (u - v).abs() < 1e-8)
        }
        _ => false,
    };
    Ok(TwoDomainsReport {
        d,
        difference_bidegree: diff.bidegree(1e-10),
        q1,
        q2,
        left,
        integral: integral.re,
        integral_grid,
        right,
        implied_constant,
        bound_constant,
        consistent,
        node_mismatch,
        same_weights,
    })
}

/// A stability job, tagged by `kind` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StabilityConfig {
    Holder(HolderConfig),
    Fenchel {
        poly: RealPoly,
        eps_grid: Vec<f64>,
        s_grid: Vec<f64>,
        #[serde(default = "default_grid")]
        grid_n: usize,
    },
    Diagonal {
        f: DomainSpec,
        g: DomainSpec,
        #[serde(default)]
        g_perturbation: Option<Perturbation>,
        points: Vec<Complex64>,
        #[serde(default = "default_grid")]
        grid_n: usize,
    },
    Bgap {
        f: DomainSpec,
        g: DomainSpec,
        #[serde(default)]
        g_perturbation: Option<Perturbation>,
        r: f64,
        d: usize,
        #[serde(default = "default_grid")]
        grid_n: usize,
    },
    RandomDiagonal {
        pairs: usize,
        points: usize,
        #[serde(default = "default_random_grid")]
        grid_n: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    RandomBgap {
        pairs: usize,
        r: f64,
        d: usize,
        #[serde(default = "default_random_grid")]
        grid_n: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    TwoDomains {
        a: DomainSpec,
        b: DomainSpec,
        #[serde(default = "default_grid")]
        grid_n: usize,
    },
}

fn default_grid() -> usize {
    512
}

fn default_random_grid() -> usize {
    128
}

/// Tolerance used for the randomized bound checks.
pub const BOUND_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StabilityOutcome {
    Holder(HolderExperiment),
    Fenchel(FenchelReport),
    Diagonal(PerturbBoundRecord),
    Bgap(BGapRecord),
    RandomDiagonal(RandomBoundSummary),
    RandomBgap(RandomBoundSummary),
    TwoDomains(TwoDomainsReport),
}

fn shade_pair(
    f: &DomainSpec,
    g: &DomainSpec,
    pert: &Option<Perturbation>,
    grid_n: usize,
) -> Result<(ShadeFunction, ShadeFunction)> {
    let bbox = f.default_bbox();
    let sf = sample_shade(f, &Perturbation::None, grid_n, bbox)?;
    let sg = sample_shade(
        g,
        pert.as_ref().unwrap_or(&Perturbation::None),
        grid_n,
        bbox,
    )?;
    Ok((sf, sg))
}

/// Runs one job; `seed` fills in jobs that leave theirs unset.
pub fn run_stability(cfg: &StabilityConfig, seed: u64) -> Result<StabilityOutcome> {
    Ok(match cfg {
        StabilityConfig::Holder(h) => StabilityOutcome::Holder(run_holder_experiment(h)?),
        StabilityConfig::Fenchel {
            poly,
            eps_grid,
            s_grid,
            grid_n,
        } => StabilityOutcome::Fenchel(fenchel_check(poly, eps_grid, s_grid, *grid_n)?),
        StabilityConfig::Diagonal {
            f,
            g,
            g_perturbation,
            points,
            grid_n,
        } => {
            let (sf, sg) = shade_pair(f, g, g_perturbation, *grid_n)?;
            StabilityOutcome::Diagonal(check_diagonal_bound(&sf, &sg, points)?)
        }
        StabilityConfig::Bgap {
            f,
            g,
            g_perturbation,
            r,
            d,
            grid_n,
        } => {
            let (sf, sg) = shade_pair(f, g, g_perturbation, *grid_n)?;
            StabilityOutcome::Bgap(check_bgap_bound(&sf, &sg, *r, *d)?)
        }
        StabilityConfig::RandomDiagonal {
            pairs,
            points,
            grid_n,
            seed: s,
        } => StabilityOutcome::RandomDiagonal(random_diagonal_check(
            *pairs,
            *points,
            *grid_n,
            s.unwrap_or(seed),
            BOUND_TOL,
        )?),
        StabilityConfig::RandomBgap {
            pairs,
            r,
            d,
            grid_n,
            seed: s,
        } => StabilityOutcome::RandomBgap(random_bgap_check(
            *pairs,
            *grid_n,
            *r,
            *d,
            s.unwrap_or(seed),
            BOUND_TOL,
        )?),
        StabilityConfig::TwoDomains { a, b, grid_n } => {
            StabilityOutcome::TwoDomains(two_domains_experiment(a, b, *grid_n)?)
        }
    })
}

/// Runs independent jobs concurrently; job `i` defaults to seed `seed + i`.
pub fn run_jobs(cfgs: &[StabilityConfig], seed: u64) -> Vec<Result<StabilityOutcome>> {
    cfgs.par_iter()
        .enumerate()
        .map(|(i, c)| run_stability(c, seed.wrapping_add(i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> RealPoly {
        RealPoly::new(2, vec![(vec![1, 1], 1.0)]).unwrap()
    }

    fn circle() -> RealPoly {
        RealPoly::new(
            2,
            vec![(vec![2, 0], 1.0), (vec![0, 2], 1.0), (vec![0, 0], -0.25)],
        )
        .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn bathtub_examples() {
        let n = 2000;
        let h = 2.0 / n as f64;
        let abs_x: Vec<f64> = (0..n)
            .map(|i| (-1.0 + (i as f64 + 0.5) * h).abs())
            .collect();
        assert!((lambda_f(&abs_x, h, 1.0).unwrap() - 0.25).abs() < 1e-9);
        let total: f64 = abs_x.iter().sum::<f64>() * h;
        assert!((lambda_f(&abs_x, h, 2.0).unwrap() - total).abs() < 1e-12);
        let constant = vec![0.7; 100];
        assert!((lambda_f(&constant, 0.02, 1.3).unwrap() - 0.7 * 1.3).abs() < 1e-12);
        assert!(matches!(
            lambda_f(&constant, 0.02, 2.5),
            Err(Error::MassExceedsVolume { .. })
        ));
        assert!(lambda_f(&[-1.0], 1.0, 0.5).is_err());
    }

    #[test]
    fn fenchel_on_a_line() {
        let p = RealPoly::new(1, vec![(vec![1], 1.0)]).unwrap();
        let s_grid: Vec<f64> = (0..8).map(|i| 0.01 * 1.5f64.powi(i)).collect();
        let rep = fenchel_check(&p, &[0.01, 0.1, 0.5, 1.0, 2.0], &s_grid, 20_000).unwrap();
        assert!(rep.min_margin >= -1e-12);
        for &(s, pp) in &rep.positive_part {
            assert!(rel(pp, s * s) < 1e-3, "s={s}");
        }
        assert!((rep.slope.unwrap() - 2.0).abs() < 0.05);
        let zero_s = fenchel_check(&p, &[0.3], &[0.0], 100).unwrap();
        assert!(zero_s.records[0].lower == 0.0 && zero_s.records[0].lambda >= 0.0);
    }

    #[test]
    fn fenchel_in_the_plane() {
        let rep = fenchel_check(&xy(), &[0.05, 0.5, 2.0], &[0.01, 0.1, 0.3, 1.0], 256).unwrap();
        assert!(rep.min_margin >= -1e-12);
    }

    #[test]
    fn hyperbola_dilation_matches_closed_form() {
        for eps in [1e-3, 1e-2, 1e-1] {
            let (l1, gap) = pair_integrals(&xy(), &HolderFamily::Dilation, eps);
            let l = (1.0 / eps).ln();
            assert!(rel(l1, 2.0 * eps * (1.0 + l)) < 1e-8, "eps={eps} l1={l1}");
            assert!(
                rel(gap, eps * eps * (0.5 + l)) < 1e-8,
                "eps={eps} gap={gap}"
            );
        }
    }

    #[test]
    fn hyperbola_translation_matches_closed_form() {
        for eps in [1e-3, 3e-2] {
            let (l1, gap) = pair_integrals(&xy(), &HolderFamily::Translation, eps);
            assert!(rel(l1, 2.0 * eps) < 1e-9);
            assert!(rel(gap, eps * eps / 2.0) < 1e-9);
        }
    }

    #[test]
    fn circle_dilation_matches_closed_form() {
        for eps in [1e-3, 1e-2, 1e-1] {
            let (l1, gap) = pair_integrals(&circle(), &HolderFamily::Dilation, eps);
            assert!(rel(l1, PI * eps) < 1e-8);
            assert!(rel(gap, PI * eps * eps / 2.0) < 1e-8);
        }
    }

    #[test]
    fn smudge_on_the_corner() {
        let fam = HolderFamily::Smudge {
            kappa: 0.5,
            x0: 0.0,
            y0: 0.0,
        };
        let eps = 0.1;
        let (l1, gap) = pair_integrals(&xy(), &fam, eps);
        assert!(rel(l1, 0.5 * eps * eps) < 1e-9);
        assert!(rel(gap, 0.5 * eps.powi(4) / 4.0) < 1e-9);
    }

    #[test]
    fn holder_ratios_stay_bounded() {
        let grid: Vec<f64> = vec![0.1, 0.05, 0.02, 0.01, 5e-3, 2e-3, 1e-3, 0.0];
        for (p, fam) in [
            (xy(), HolderFamily::Dilation),
            (xy(), HolderFamily::Translation),
            (circle(), HolderFamily::Dilation),
        ] {
            let exp = run_holder_experiment(&HolderConfig {
                poly: p,
                alpha: None,
                family: fam,
                eps_grid: grid.clone(),
                ball_constant: 2.0,
            })
            .unwrap();
            assert!(exp.bounded);
            let last = exp.records.last().unwrap();
            assert_eq!(
                (last.eps, last.l1, last.gap, last.ratio),
                (0.0, 0.0, 0.0, None)
            );
            assert!(exp.records.windows(2).all(|w| w[0].eps > w[1].eps));
            assert!(exp.records.iter().all(|r| r.l1 >= 0.0 && r.gap >= 0.0));
        }
    }

    #[test]
    fn circle_gap_slope_is_two() {
        let exp = run_holder_experiment(&HolderConfig {
            poly: circle(),
            alpha: Some(vec![2, 0]),
            family: HolderFamily::Dilation,
            eps_grid: vec![0.05, 0.02, 0.01, 5e-3, 2e-3, 1e-3],
            ball_constant: 2.0,
        })
        .unwrap();
        let slope = exp.slope.unwrap();
        assert!((slope - 2.0).abs() < 0.05 && slope <= 3.0);
    }

    #[test]
    fn ball_flags_large_perturbations() {
        let exp = run_holder_experiment(&HolderConfig {
            poly: xy(),
            alpha: None,
            family: HolderFamily::Dilation,
            eps_grid: vec![0.1, 1e-3],
            ball_constant: 2.0,
        })
        .unwrap();
        assert!((exp.ball_radius - 0.25).abs() < 1e-15);
        assert!(!exp.records[0].in_ball && exp.records[1].in_ball);
    }

    #[test]
    fn holder_rejects_bad_input() {
        let base = HolderConfig {
            poly: xy(),
            alpha: Some(vec![2, 0]),
            family: HolderFamily::Dilation,
            eps_grid: vec![0.1],
            ball_constant: 2.0,
        };
        assert!(run_holder_experiment(&base).is_err());
        let dup = HolderConfig {
            alpha: None,
            eps_grid: vec![0.1, 0.1],
            ..base
        };
        assert!(run_holder_experiment(&dup).is_err());
    }

    #[test]
    fn concentric_disk_diagonal_bound() {
        let bbox = BBox::square(1.0);
        let f = sample_shade(
            &DomainSpec::disk(Complex64::new(0.0, 0.0), 0.4),
            &Perturbation::None,
            512,
            bbox,
        )
        .unwrap();
        let g = sample_shade(
            &DomainSpec::disk(Complex64::new(0.0, 0.0), 0.5),
            &Perturbation::None,
            512,
            bbox,
        )
        .unwrap();
        let rec = check_diagonal_bound(&f, &g, &[Complex64::new(2.0, 0.0)]).unwrap();
        let p = &rec.points[0];
        assert!((p.left - 0.0225).abs() < 5e-4, "{}", p.left);
        assert!((p.right - 0.08).abs() < 2e-3, "{}", p.right);
        assert!(p.margin > 0.0);
        let same = check_diagonal_bound(&f, &f, &[Complex64::new(0.0, 1.5)]).unwrap();
        assert_eq!(same.points[0].left, 0.0);
        assert!(check_diagonal_bound(&f, &g, &[Complex64::new(0.55, 0.0)]).is_err());
    }

    #[test]
    fn c3_at_two() {
        assert!((c3(2.0) - 2.0 / PI * (4.0 / PI).exp()).abs() < 1e-15);
        assert!((c3(2.0) - 2.2743).abs() < 1e-4);
    }

    #[test]
    fn bgap_for_disks() {
        let zero = Complex64::new(0.0, 0.0);
        let b1 = s_to_b(&disk_moments(zero, 0.4, 4).unwrap()).unwrap();
        let b2 = s_to_b(&disk_moments(zero, 0.5, 4).unwrap()).unwrap();
        let rec = bgap_from_tables(&b1.b, &b2.b, 2.0, PI * 0.09).unwrap();
        assert_eq!(rec.violations(0.0), 0);
        assert!(rec.min_margin > 0.0);
        let same = bgap_from_tables(&b1.b, &b1.b, 2.0, 0.3).unwrap();
        assert!(same.entries.iter().all(|e| e.margin == e.right));
        let bbox = BBox::square(1.0);
        let f = sample_shade(&DomainSpec::disk(zero, 0.4), &Perturbation::None, 256, bbox).unwrap();
        let g = sample_shade(&DomainSpec::disk(zero, 0.5), &Perturbation::None, 256, bbox).unwrap();
        assert_eq!(check_bgap_bound(&f, &g, 2.0, 4).unwrap().violations(0.0), 0);
        assert!(check_bgap_bound(&f, &g, 1.0, 4).is_err());
    }

    #[test]
    fn random_pairs_respect_the_bounds() {
        let diag = random_diagonal_check(4, 20, 64, 7, BOUND_TOL).unwrap();
        assert_eq!(diag.checks, 80);
        assert_eq!(diag.violations, 0);
        let bgap = random_bgap_check(4, 64, 2.0, 3, 7, BOUND_TOL).unwrap();
        assert_eq!(bgap.checks, 4 * 16);
        assert_eq!(bgap.violations, 0);
    }

    #[test]
    fn concentric_two_domains() {
        let zero = Complex64::new(0.0, 0.0);
        let rep = two_domains_experiment(
            &DomainSpec::disk(zero, 0.4),
            &DomainSpec::disk(zero, 0.5),
            256,
        )
        .unwrap();
        assert_eq!(rep.d, 1);
        assert!((rep.left - 0.09).abs() < 1e-12);
        assert!((rep.integral.abs() - PI * 0.09 * 0.09 / 2.0).abs() < 1e-12);
        assert!((rep.integral_grid - rep.integral).abs() < 1e-3);
        let c = rep.implied_constant.unwrap();
        assert!((c - 0.09 / (PI * 0.0081 / 2.0).cbrt()).abs() < 1e-9);
        assert!(rep.consistent && rep.bound_constant == 72.0);
        assert_eq!(rep.difference_bidegree, Some((0, 0)));
        let same = two_domains_experiment(
            &DomainSpec::disk(zero, 0.4),
            &DomainSpec::disk(zero, 0.4),
            64,
        )
        .unwrap();
        assert_eq!(
            (same.left, same.right, same.implied_constant),
            (0.0, 0.0, None)
        );
        assert!(same.consistent && same.same_weights);
        let moved = two_domains_experiment(
            &DomainSpec::disk(zero, 0.4),
            &DomainSpec::disk(Complex64::new(0.1, 0.0), 0.4),
            64,
        );
        assert!(matches!(moved, Err(Error::NodeMismatch(_))));
    }

    #[test]
    fn config_json_is_tagged() {
        let cfg = StabilityConfig::Holder(HolderConfig {
            poly: xy(),
            alpha: None,
            family: HolderFamily::Smudge {
                kappa: 0.5,
                x0: 0.0,
                y0: 0.0,
            },
            eps_grid: vec![0.1],
            ball_constant: 2.0,
        });
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"kind\":\"holder\"") && json.contains("\"family\":\"smudge\""));
        assert_eq!(serde_json::from_str::<StabilityConfig>(&json).unwrap(), cfg);
        let parsed: StabilityConfig = serde_json::from_str(
            r#"{"kind":"two_domains","a":{"type":"disk","center":[0,0],"radius":0.4},"b":{"type":"disk","center":[0,0],"radius":0.5}}"#,
        )
        .unwrap();
        assert!(matches!(
            parsed,
            StabilityConfig::TwoDomains { grid_n: 512, .. }
        ));
    }

    #[test]
    fn jobs_are_deterministic() {
        let cfgs = vec![
            StabilityConfig::RandomDiagonal {
                pairs: 2,
                points: 5,
                grid_n: 32,
                seed: None,
            },
            StabilityConfig::RandomBgap {
                pairs: 2,
                r: 2.0,
                d: 2,
                grid_n: 32,
                seed: Some(3),
            },
        ];
        let a = run_jobs(&cfgs, 42);
        let b = run_jobs(&cfgs, 42);
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.is_ok()));
    }
}
