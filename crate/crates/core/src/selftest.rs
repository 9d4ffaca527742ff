//! End-to-end disk checks with a fixed, timing-free text report.

use std::f64::consts::PI;
use std::fmt::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domains::{
    disk_moments, interval_moments, sample_shade, BBox, DomainSpec, Perturbation,
};
use crate::error::Result;
use crate::exptransform::{b_to_s, eval_diagonal, s_to_b, s_to_t};
use crate::reconstruct::{reconstruct, ReconstructOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestRow {
    pub name: String,
    pub error: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub rows: Vec<SelftestRow>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {}  err={:.3e}  tol={:.1e}",
                r.name,
                if r.pass { "PASS" } else { "FAIL" },
                r.error,
                r.tol,
            );
        }
        let failed = self.rows.iter().filter(|r| !r.pass).count();
        let _ = writeln!(out, "{} checks, {} failed", self.rows.len(), failed);
        out
    }
}

fn row(rows: &mut Vec<SelftestRow>, name: String, error: f64, tol: f64) {
    rows.push(SelftestRow {
        name,
        pass: error.is_finite() && error <= tol,
        error,
        tol,
    });
}

/// Runs the disk pipeline for `D(0, 0.5)` and `D(0.2 + 0.1i, 0.5)`, a grid
/// evaluation of `E`, and the unit-interval transform. `grid_n` sets the
/// resolution of the sampled disk.
pub fn run_selftest(grid_n: usize) -> Result<SelftestReport> {
    let r = 0.5;
    let mut rows = Vec::new();
    for (label, a) in [
        ("D(0,0.5)", Complex64::new(0.0, 0.0)),
        ("D(0.2+0.1i,0.5)", Complex64::new(0.2, 0.1)),
    ] {
        let s = disk_moments(a, r, 3)?;
        let b = s_to_b(&s)?;
        let mut err: f64 = 0.0;
        for k in 0..=3 {
            for l in 0..=3 {
                let want = a.powu(k as u32) * a.conj().powu(l as u32) * (r * r);
                err = err.max((b.b[k][l] - want).norm());
            }
        }
        row(
            &mut rows,
            format!("{label} b = r^2 a^k conj(a)^l"),
            err,
            1e-12,
        );
        row(
            &mut rows,
            format!("{label} b_to_s roundtrip"),
            b_to_s(&b)?.max_abs_diff(&s),
            1e-12,
        );

        let rep = reconstruct(&b, &ReconstructOptions::default())?;
        row(
            &mut rows,
            format!("{label} degeneracy degree 1"),
            (rep.d as f64 - 1.0).abs(),
            0.0,
        );
        let p = &rep.p_d.coeffs;
        let p_err = (p[0] + a).norm().max((p[1] - 1.0).norm());
        row(&mut rows, format!("{label} P_1 = z - a"), p_err, 1e-10);
        let q = &rep.q.q;
        let q_err = [
            (q[1][1] - 1.0).norm(),
            (q[1][0] + a.conj()).norm(),
            (q[0][1] + a).norm(),
            (q[0][0] - (a.norm_sqr() - r * r)).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        row(
            &mut rows,
            format!("{label} Q = |z-a|^2 - r^2"),
            q_err,
            1e-10,
        );
        let (node_err, weight_err) = match &rep.quadrature {
            Some(qd) if qd.nodes.len() == 1 => {
                ((qd.nodes[0] - a).norm(), (qd.weights[0] - PI * r * r).abs())
            }
            _ => (f64::INFINITY, f64::INFINITY),
        };
        row(&mut rows, format!("{label} node a"), node_err, 1e-8);
        row(
            &mut rows,
            format!("{label} weight pi r^2"),
            weight_err,
            1e-8,
        );
    }

    let g = sample_shade(
        &DomainSpec::disk(Complex64::new(0.0, 0.0), r),
        &Perturbation::None,
        grid_n,
        BBox::square(1.0),
    )?;
    let e = eval_diagonal(&g, Complex64::new(1.0, 0.0))?;
    row(
        &mut rows,
        format!("grid E(1,1) = 3/4 (N={grid_n})"),
        (e - 0.75).abs(),
        1e-3,
    );

    let t = s_to_t(&interval_moments(&[[0.0, 1.0]], 8)?)?;
    let t_err =
        t.t.iter()
            .enumerate()
            .map(|(k, v)| (v - if k == 0 { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
    row(
        &mut rows,
        "unit interval t = (1,0,0,...)".into(),
        t_err,
        1e-12,
    );
    Ok(SelftestReport { rows })
}
