use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde::Serialize;
use serde_json::{json, Value};

use momentshape::domains::{
    conformal_moments, disk_moments, grid_moments, interval_moments, sample_shade, BBox,
};
use momentshape::exptransform::{b_to_s, s_to_b, s_to_t, t_to_s};
use momentshape::markov1d::{self, recover_intervals};
use momentshape::reconstruct::{boundary_samples, reconstruct, NodeMode, ReconstructOptions};
use momentshape::selftest::run_selftest;
use momentshape::stability::{run_jobs, StabilityConfig, StabilityOutcome, BOUND_TOL};
use momentshape::volume::{check_vol_ratio, find_admissible};
use momentshape::{
    DomainSpec, ExpCoeffTable, MomentTable1D, MomentTable2D, Perturbation, RealPoly, TCoeffTable,
};

use crate::io::{csv_bytes, emit, read_json, read_text, to_json, write_atomic};
use crate::{Cli, Command, Failure, ModeArg};

type CmdResult = Result<(), Failure>;

const DEFAULT_GRID: usize = 512;

pub fn run(cli: &Cli) -> CmdResult {
    let grid_n = cli.grid_n.unwrap_or(DEFAULT_GRID);
    match &cli.command {
        Command::Moments {
            spec,
            d,
            perturbation,
            out,
        } => moments(spec, *d, perturbation.as_deref(), grid_n, out.as_deref()),
        Command::Exptransform { input, out } => exptransform(input, out.as_deref()),
        Command::Reconstruct {
            input,
            max_degree,
            mode,
            boundary_csv,
            boundary_n,
            out,
        } => {
            let opts = ReconstructOptions {
                tol: cli.tol.unwrap_or(momentshape::reconstruct::DEFAULT_TOL),
                max_degree: *max_degree,
                mode: match mode {
                    ModeArg::Null => NodeMode::Null,
                    ModeArg::Lowest => NodeMode::Lowest,
                },
            };
            reconstruct_cmd(
                input,
                &opts,
                boundary_csv.as_deref(),
                *boundary_n,
                out.as_deref(),
            )
        }
        Command::Markov1d { input, m, out } => markov(
            input,
            *m,
            cli.tol.unwrap_or(markov1d::DEFAULT_TOL),
            out.as_deref(),
        ),
        Command::Volume {
            poly,
            delta_grid,
            samples,
            alpha,
            out,
        } => volume(
            poly,
            delta_grid,
            *samples,
            alpha.as_deref(),
            cli.seed,
            out.as_deref(),
        ),
        Command::Stability { config, out_dir } => stability(config, cli.seed, out_dir.as_deref()),
        Command::Selftest => {
            let report = run_selftest(grid_n)?;
            emit(None, report.render().as_bytes())?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Validation(anyhow!("selftest checks failed")))
            }
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> CmdResult {
    emit(out, &to_json(value)?)?;
    Ok(())
}

fn moments(
    spec_path: &Path,
    d: usize,
    pert: Option<&Path>,
    grid_n: usize,
    out: Option<&Path>,
) -> CmdResult {
    let spec: DomainSpec = read_json(spec_path)?;
    spec.validate()?;
    let pert: Perturbation = match pert {
        Some(p) => read_json(p)?,
        None => Perturbation::None,
    };
    if let DomainSpec::Intervals { intervals } = &spec {
        if pert != Perturbation::None {
            return Err(anyhow!("perturbations apply to planar shapes only").into());
        }
        return emit_json(out, &interval_moments(intervals, d)?);
    }
    let table = match (&spec, &pert) {
        (DomainSpec::Disk { center, radius }, Perturbation::None) => {
            disk_moments(*center, *radius, d)?
        }
        (DomainSpec::Conformal { phi }, Perturbation::None) => conformal_moments(phi, d)?,
        _ => {
            let g = sample_shade(&spec, &pert, grid_n, spec.default_bbox())?;
            grid_moments(&g, d)
        }
    };
    emit_json(out, &table)
}

fn object_keys(v: &Value) -> anyhow::Result<&serde_json::Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| anyhow!("expected a JSON object"))
}

fn is_planar_s(v: &Value) -> bool {
    v.get("s")
        .and_then(|s| s.as_array())
        .and_then(|a| a.first())
        .is_some_and(|x| x.is_array())
}

/// Values under `key`, checked against an optional `m`.
fn line_values(obj: &serde_json::Map<String, Value>, key: &str) -> anyhow::Result<Vec<f64>> {
    let values: Vec<f64> =
        serde_json::from_value(obj[key].clone()).with_context(|| format!("reading \"{key}\""))?;
    if let Some(m) = obj.get("m") {
        let m = m
            .as_u64()
            .ok_or_else(|| anyhow!("\"m\" must be a non-negative integer"))?;
        if m as usize + 1 != values.len() {
            bail!("\"m\" is {m} but \"{key}\" has {} entries", values.len());
        }
    }
    Ok(values)
}

fn exptransform(input: &Path, out: Option<&Path>) -> CmdResult {
    let text = read_text(input)?;
    let v: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", input.display()))?;
    let obj = object_keys(&v)?;
    let parse_err = |e| anyhow::Error::from(e).context(format!("reading {}", input.display()));
    if obj.contains_key("b") {
        let b: ExpCoeffTable = serde_json::from_value(v).map_err(parse_err)?;
        emit_json(out, &b_to_s(&b)?)
    } else if obj.contains_key("t") {
        let t = line_values(obj, "t")?;
        emit_json(
            out,
            &t_to_s(&TCoeffTable {
                m: t.len().saturating_sub(1),
                t,
            })?,
        )
    } else if is_planar_s(&v) {
        let s: MomentTable2D = serde_json::from_value(v).map_err(parse_err)?;
        emit_json(out, &s_to_b(&s)?)
    } else if obj.contains_key("s") {
        emit_json(out, &s_to_t(&MomentTable1D::new(line_values(obj, "s")?)?)?)
    } else {
        Err(anyhow!(
            "{}: expected a table with key \"s\", \"b\" or \"t\"",
            input.display()
        )
        .into())
    }
}

fn reconstruct_cmd(
    input: &Path,
    opts: &ReconstructOptions,
    boundary_csv: Option<&Path>,
    boundary_n: usize,
    out: Option<&Path>,
) -> CmdResult {
    let v: Value = read_json(input)?;
    let obj = object_keys(&v)?;
    let b: ExpCoeffTable = if obj.contains_key("b") {
        serde_json::from_value(v).context("reading coefficient table")?
    } else if is_planar_s(&v) {
        let s: MomentTable2D = serde_json::from_value(v).context("reading moment table")?;
        s_to_b(&s)?
    } else {
        return Err(anyhow!(
            "{}: expected a coefficient or planar moment table",
            input.display()
        )
        .into());
    };
    let report = reconstruct(&b, opts)?;
    if let Some(path) = boundary_csv {
        let pts = boundary_samples(&report.q, BBox::square(1.0), boundary_n);
        let rows = pts.iter().map(|z| vec![z.re.to_string(), z.im.to_string()]);
        write_atomic(path, &csv_bytes(&["x", "y"], rows)?)?;
    }
    emit_json(out, &report)
}

fn markov(input: &Path, m: Option<usize>, tol: f64, out: Option<&Path>) -> CmdResult {
    let v: Value = read_json(input)?;
    let obj = object_keys(&v)?;
    let s = if let Some(iv) = obj.get("intervals") {
        let intervals: Vec<[f64; 2]> =
            serde_json::from_value(iv.clone()).context("reading intervals")?;
        DomainSpec::intervals(intervals.clone()).validate()?;
        let m = m.unwrap_or((2 * intervals.len() + 1).max(9));
        interval_moments(&intervals, m)?
    } else if obj.contains_key("s") {
        MomentTable1D::new(line_values(obj, "s")?)?
    } else {
        return Err(anyhow!("{}: expected \"intervals\" or \"s\"", input.display()).into());
    };
    emit_json(out, &recover_intervals(&s, tol)?)
}

fn volume(
    poly_path: &Path,
    deltas: &[f64],
    samples: usize,
    alpha: Option<&[u32]>,
    seed: u64,
    out: Option<&Path>,
) -> CmdResult {
    let v: Value = read_json(poly_path)?;
    // Either a bare polynomial or {"poly": ...}.
    let p: RealPoly = serde_json::from_value(v.get("poly").cloned().unwrap_or(v))
        .context("reading polynomial")?;
    p.validate()?;
    let adm = find_admissible(&p)?;
    let chosen = match alpha {
        Some(a) => adm
            .into_iter()
            .find(|x| x.alpha == a)
            .ok_or_else(|| Failure::Usage(anyhow!("{a:?} is not an admissible index")))?,
        None => adm.into_iter().next().expect("nonempty"),
    };
    let table = check_vol_ratio(&p, &chosen, deltas, samples, seed)?;
    let rows = table.rows.iter().map(|r| {
        vec![
            r.delta.to_string(),
            r.volume.to_string(),
            r.stderr.to_string(),
            r.ratio.to_string(),
        ]
    });
    emit(out, &csv_bytes(&["delta", "vol", "stderr", "ratio"], rows)?)?;
    eprintln!(
        "alpha={:?} threshold={} empirical_bound={} bounded={}",
        table.alpha, table.threshold, table.empirical_bound, table.bounded
    );
    if table.bounded {
        Ok(())
    } else {
        Err(Failure::Validation(anyhow!(
            "volume ratios are not bounded"
        )))
    }
}

fn kind_name(o: &StabilityOutcome) -> &'static str {
    match o {
        StabilityOutcome::Holder(_) => "holder",
        StabilityOutcome::Fenchel(_) => "fenchel",
        StabilityOutcome::Diagonal(_) => "diagonal",
        StabilityOutcome::Bgap(_) => "bgap",
        StabilityOutcome::RandomDiagonal(_) => "random_diagonal",
        StabilityOutcome::RandomBgap(_) => "random_bgap",
        StabilityOutcome::TwoDomains(_) => "two_domains",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV records, a JSON summary and whether the checks held.
fn tabulate(o: &StabilityOutcome) -> anyhow::Result<(Vec<u8>, Value, bool)> {
    Ok(match o {
        StabilityOutcome::Holder(h) => {
            let rows = h.records.iter().map(|r| {
                vec![
                    r.eps.to_string(),
                    r.l1.to_string(),
                    r.gap.to_string(),
                    opt(r.ratio),
                    r.in_ball.to_string(),
                    r.method.clone(),
                ]
            });
            let csv = csv_bytes(&["eps", "l1", "gap", "ratio", "in_ball", "method"], rows)?;
            let summary = json!({
                "alpha": h.alpha, "ball_radius": h.ball_radius,
                "empirical_bound": h.empirical_bound, "bounded": h.bounded, "slope": h.slope,
            });
            (csv, summary, h.bounded)
        }
        StabilityOutcome::Fenchel(f) => {
            let rows = f.records.iter().map(|r| {
                vec![
                    r.eps.to_string(),
                    r.s.to_string(),
                    r.lambda.to_string(),
                    r.lower.to_string(),
                    r.margin.to_string(),
                ]
            });
            let csv = csv_bytes(&["eps", "s", "lambda", "lower", "margin"], rows)?;
            let ok = f.min_margin >= -1e-9;
            (
                csv,
                json!({"min_margin": f.min_margin, "slope": f.slope}),
                ok,
            )
        }
        StabilityOutcome::Diagonal(d) => {
            let rows = d.points.iter().map(|p| {
                vec![
                    p.z.re.to_string(),
                    p.z.im.to_string(),
                    p.dist.to_string(),
                    p.left.to_string(),
                    p.right.to_string(),
                    p.margin.to_string(),
                ]
            });
            let csv = csv_bytes(&["z_re", "z_im", "dist", "left", "right", "margin"], rows)?;
            let v = d.violations(BOUND_TOL);
            (
                csv,
                json!({"l1": d.l1, "min_margin": d.min_margin, "violations": v}),
                v == 0,
            )
        }
        StabilityOutcome::Bgap(b) => {
            let rows = b.entries.iter().map(|e| {
                vec![
                    e.k.to_string(),
                    e.l.to_string(),
                    e.left.to_string(),
                    e.right.to_string(),
                    e.margin.to_string(),
                ]
            });
            let csv = csv_bytes(&["k", "l", "left", "right", "margin"], rows)?;
            let v = b.violations(BOUND_TOL);
            let summary = json!({"r": b.r, "c3": b.c3, "l1": b.l1, "min_margin": b.min_margin, "violations": v});
            (csv, summary, v == 0)
        }
        StabilityOutcome::RandomDiagonal(s) | StabilityOutcome::RandomBgap(s) => {
            let row = vec![
                s.pairs.to_string(),
                s.checks.to_string(),
                s.violations.to_string(),
                s.min_margin.to_string(),
                s.tol.to_string(),
            ];
            let csv = csv_bytes(
                &["pairs", "checks", "violations", "min_margin", "tol"],
                [row],
            )?;
            (csv, serde_json::to_value(s)?, s.violations == 0)
        }
        StabilityOutcome::TwoDomains(t) => {
            let row = vec![
                t.d.to_string(),
                t.left.to_string(),
                t.integral.to_string(),
                t.integral_grid.to_string(),
                t.right.to_string(),
                opt(t.implied_constant),
                t.bound_constant.to_string(),
                t.consistent.to_string(),
            ];
            let header = [
                "d",
                "left",
                "integral",
                "integral_grid",
                "right",
                "implied_constant",
                "bound_constant",
                "consistent",
            ];
            let csv = csv_bytes(&header, [row])?;
            let summary = json!({
                "d": t.d, "left": t.left, "right": t.right, "implied_constant": t.implied_constant,
                "bound_constant": t.bound_constant, "consistent": t.consistent,
                "difference_bidegree": t.difference_bidegree, "same_weights": t.same_weights,
            });
            (csv, summary, t.consistent)
        }
    })
}

fn stability(config: &Path, seed: u64, out_dir: Option<&Path>) -> CmdResult {
    let v: Value = read_json(config)?;
    let cfgs: Vec<StabilityConfig> = if v.is_array() {
        serde_json::from_value(v)
    } else {
        serde_json::from_value(v).map(|c| vec![c])
    }
    .with_context(|| format!("reading stability config {}", config.display()))?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut summary = Vec::with_capacity(cfgs.len());
    let mut all_ok = true;
    for (i, outcome) in run_jobs(&cfgs, seed).into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                let kind = kind_name(&o);
                let (csv, mut s, ok) = tabulate(&o)?;
                if let Some(dir) = out_dir {
                    write_atomic(&dir.join(format!("job{i}_{kind}.csv")), &csv)?;
                }
                if let Value::Object(m) = &mut s {
                    m.insert("job".into(), json!(i));
                    m.insert("kind".into(), json!(kind));
                    m.insert("ok".into(), json!(ok));
                }
                all_ok &= ok;
                summary.push(s);
            }
            Err(e) => {
                all_ok = false;
                summary.push(json!({"job": i, "ok": false, "error": e.to_string()}));
            }
        }
    }
    let bytes = to_json(&summary)?;
    match out_dir {
        Some(dir) => write_atomic(&dir.join("summary.json"), &bytes)?,
        None => emit(None, &bytes)?,
    }
    if all_ok {
        Ok(())
    } else {
        Err(Failure::Validation(anyhow!(
            "one or more stability checks failed"
        )))
    }
}
