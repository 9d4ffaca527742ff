//! Admissible multi-indices and Monte Carlo volumes of polynomial sublevel
//! sets `V_δ(p) = {|p| < δ}` inside the cube `[-r, r]^n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension for which the permutation search is run.
pub const MAX_ADMISSIBLE_DIM: usize = 6;

/// Samples per deterministic random substream.
const MC_CHUNK: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub alpha: Vec<u32>,
    pub coeff: f64,
}

/// Real polynomial `Σ p_α x^α` in `n` variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealPoly {
    pub n: usize,
    pub terms: Vec<Term>,
}

impl RealPoly {
    pub fn new(n: usize, terms: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        let p = Self {
            n,
            terms: terms
                .into_iter()
                .map(|(alpha, coeff)| Term { alpha, coeff })
                .collect(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput(
                "polynomial needs at least one variable".into(),
            ));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if t.alpha.len() != self.n {
                return Err(Error::InvalidInput(format!(
                    "multi-index {:?} has length {} (expected {})",
                    t.alpha,
                    t.alpha.len(),
                    self.n
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "coefficient of {:?} is not finite",
                    t.alpha
                )));
            }
            if self.terms[..i].iter().any(|u| u.alpha == t.alpha) {
                return Err(Error::InvalidInput(format!(
                    "duplicate multi-index {:?}",
                    t.alpha
                )));
            }
        }
        Ok(())
    }

    /// Support: terms with nonzero coefficient.
    pub fn support(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter().filter(|t| t.coeff != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.support().next().is_none()
    }

    pub fn degree(&self) -> u32 {
        self.support()
            .map(|t| t.alpha.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn coeff(&self, alpha: &[u32]) -> f64 {
        self.terms
            .iter()
            .find(|t| t.alpha == alpha)
            .map_or(0.0, |t| t.coeff)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.alpha
                        .iter()
                        .zip(x)
                        .map(|(&a, &xi)| xi.powi(a as i32))
                        .product::<f64>()
            })
            .sum()
    }

    /// Coefficients of `y ↦ p(x, y)` for a bivariate polynomial, lowest first.
    pub fn slice_in_y(&self, x: f64) -> Vec<f64> {
        assert_eq!(self.n, 2);
        let deg = self.support().map(|t| t.alpha[1]).max().unwrap_or(0) as usize;
        let mut c = vec![0.0; deg + 1];
        for t in self.support() {
            c[t.alpha[1] as usize] += t.coeff * x.powi(t.alpha[0] as i32);
        }
        c
    }
}

/// An admissible multi-index together with the coordinate order witnessing it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleIndex {
    pub alpha: Vec<u32>,
    /// Zero-based permutation of the coordinates.
    pub sigma: Vec<usize>,
    pub coeff: f64,
    pub order: u32,
}

/// `α` beats `β` in the lexicographic order of the permuted coordinates.
fn dominates(alpha: &[u32], beta: &[u32], sigma: &[usize]) -> bool {
    for &k in sigma {
        match alpha[k].cmp(&beta[k]) {
            std::cmp::Ordering::Greater => return true,
            std::cmp::Ordering::Less => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Every `(α, σ)` such that `α` strictly dominates every other support index
/// under the coordinate order `σ`. The index itself is excluded from the
/// comparison.
pub fn find_admissible(p: &RealPoly) -> Result<Vec<AdmissibleIndex>> {
    p.validate()?;
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if p.n > MAX_ADMISSIBLE_DIM {
        return Err(Error::InvalidInput(format!(
            "admissible search supports n <= {MAX_ADMISSIBLE_DIM}, got {}",
            p.n
        )));
    }
    let support: Vec<&Term> = p.support().collect();
    let mut found = Vec::new();
    for sigma in permutations(p.n) {
        for t in &support {
            let ok = support
                .iter()
                .filter(|u| u.alpha != t.alpha)
                .all(|u| dominates(&t.alpha, &u.alpha, &sigma));
            if ok {
                found.push(AdmissibleIndex {
                    alpha: t.alpha.clone(),
                    sigma: sigma.clone(),
                    coeff: t.coeff,
                    order: t.alpha.iter().sum(),
                });
            }
        }
    }
    Ok(found)
}

/// Distinct admissible multi-indices (first witness kept).
pub fn distinct_admissible(p: &RealPoly) -> Result<Vec<AdmissibleIndex>> {
    let mut out: Vec<AdmissibleIndex> = Vec::new();
    for a in find_admissible(p)? {
        if !out.iter().any(|b| b.alpha == a.alpha) {
            out.push(a);
        }
    }
    Ok(out)
}

/// Monte Carlo estimate and binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub stderr: f64,
}

/// Estimates `vol({|p| < δ} ∩ [-r, r]^n)` for each `δ`, sharing one sample set.
///
/// Samples are drawn in chunks; chunk `c` uses stream `c` of a ChaCha8
/// generator seeded with `seed`, so the result does not depend on how chunks
/// are scheduled across threads.
pub fn mc_sublevel_volumes(
    p: &RealPoly,
    deltas: &[f64],
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<VolumeEstimate>> {
    p.validate()?;
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!(
            "cube half-width {r} must be positive"
        )));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::InvalidInput(format!("delta {d} must be positive")));
    }
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut x = vec![0.0; p.n];
            let mut hits = vec![0u64; deltas.len()];
            for _ in 0..len {
                for xi in &mut x {
                    *xi = rng.gen_range(-r..r);
                }
                let v = p.eval(&x).abs();
                for (h, d) in hits.iter_mut().zip(deltas) {
                    if v < *d {
                        *h += 1;
                    }
                }
            }
            hits
        })
        .collect();
    let total = (2.0 * r).powi(p.n as i32);
    Ok((0..deltas.len())
        .map(|k| {
            let hits: u64 = counts.iter().map(|c| c[k]).sum();
            let frac = hits as f64 / samples as f64;
            VolumeEstimate {
                volume: total * frac,
                stderr: total * (frac * (1.0 - frac) / samples as f64).sqrt(),
            }
        })
        .collect())
}

pub fn mc_sublevel_volume(
    p: &RealPoly,
    delta: f64,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    Ok(mc_sublevel_volumes(p, &[delta], r, samples, seed)?[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolRatioRow {
    pub delta: f64,
    pub volume: f64,
    pub stderr: f64,
    /// `vol / δ^{1/|α|}`.
    pub ratio: f64,
    pub ratio_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolRatioTable {
    pub alpha: Vec<u32>,
    pub threshold: f64,
    pub rows: Vec<VolRatioRow>,
    /// Twice the (4σ upper) ratio at the largest δ.
    pub empirical_bound: f64,
    /// Every ratio is within 4σ of staying below `empirical_bound`.
    pub bounded: bool,
}

/// `|p_α| / (4d)^{|α|}`: the δ below which the volume ratio is controlled.
pub fn delta_threshold(p: &RealPoly, alpha: &AdmissibleIndex) -> f64 {
    let d = p.degree() as f64;
    alpha.coeff.abs() / (4.0 * d).powi(alpha.order as i32)
}

/// Tabulates `vol(V_δ(p) ∩ [-1,1]^n) / δ^{1/|α|}` over a δ-grid.
pub fn check_vol_ratio(
    p: &RealPoly,
    alpha: &AdmissibleIndex,
    deltas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<VolRatioTable> {
    if alpha.order == 0 {
        return Err(Error::InvalidInput(
            "admissible index of order 0 (constant polynomial)".into(),
        ));
    }
    let threshold = delta_threshold(p, alpha);
    if let Some(&d) = deltas.iter().find(|&&d| d >= threshold) {
        return Err(Error::DeltaAboveThreshold {
            delta: d,
            threshold,
        });
    }
    let est = mc_sublevel_volumes(p, deltas, 1.0, samples, seed)?;
    let gamma = 1.0 / alpha.order as f64;
    let rows: Vec<VolRatioRow> = deltas
        .iter()
        .zip(&est)
        .map(|(&delta, e)| {
            let scale = delta.powf(gamma);
            VolRatioRow {
                delta,
                volume: e.volume,
                stderr: e.stderr,
                ratio: e.volume / scale,
                ratio_stderr: e.stderr / scale,
            }
        })
        .collect();
    let anchor = rows
        .iter()
        .max_by(|a, b| a.delta.total_cmp(&b.delta))
        .map_or(0.0, |r| r.ratio + 4.0 * r.ratio_stderr);
    let empirical_bound = 2.0 * anchor;
    let bounded = rows
        .iter()
        .all(|r| r.ratio.is_finite() && r.ratio - 4.0 * r.ratio_stderr <= empirical_bound);
    Ok(VolRatioTable {
        alpha: alpha.alpha.clone(),
        threshold,
        rows,
        empirical_bound,
        bounded,
    })
}
