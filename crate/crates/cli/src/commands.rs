//! One function per subcommand. Each builds a `Report`, writes it and
//! returns whether every check passed.

use std::path::Path;

use calderon_core::calderon::{boundary_ode_split, p_plus_residue, split_on_grid, TraceConvention};
use calderon_core::disc::case_study::case_study_limit;
use calderon_core::disc::galerkin::Realization;
use calderon_core::disc::model::{calderon_modes, chi_plus_model, dirichlet_neumann_projector, dtn_mode};
use calderon_core::disc::subspace::{aps_cut, dirichlet_subspace, realized_index, robin_subspace};
use calderon_core::disc::FourierModel;
use calderon_core::json::{c64_value, cmat_value};
use calderon_core::linalg::{self, CMat};
use calderon_core::lopatinskii::{regularity_for, regularity_verdict, ProjectorSpec};
use calderon_core::opfile::read_operator;
use calderon_core::pairing::{adjoint_condition_symbol, adjoint_duality_check, GreenMatrices};
use calderon_core::report::{Check, ConventionFlags, Report, Tolerances};
use calderon_core::suite::{run_suite, SuiteConfig};
use calderon_core::symbol::{parse_grid_spec, CollarOperator, CosphereGrid};
use calderon_core::weyl::{
    asymptotic_fit, counting_ratio, model_eigenvalues, singular_value_fit, weyl_constant, Bc, Manifold, WeylInput,
};
use calderon_core::{Error, Result};
use serde_json::{json, Value};

use crate::Output;

fn dt_jet() -> ConventionFlags {
    ConventionFlags::new(TraceConvention::DtJet, TraceConvention::DtJet)
}

/// Prefixes schema paths with the file name so diagnostics point at both.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Schema { path: p, message } => Error::Schema {
            path: format!("{}: {p}", path.display()),
            message,
        },
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn load_op(path: &Path) -> Result<CollarOperator> {
    in_file(path, read_operator(path))
}

fn load_proj(path: &Path) -> Result<ProjectorSpec> {
    in_file(path, ProjectorSpec::read(path))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(format!("{}: {e}", path.display())));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn emit(report: &Report, out: &Output) -> Result<bool> {
    match &out.out {
        Some(p) => report.write(p)?,
        None => print!("{}", report.to_json()),
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
    }
    Ok(report.pass)
}

/// Entries of a complex matrix as CSV cells: one row per (i, j).
fn matrix_rows(prefix: &[String], m: &CMat) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let mut r = prefix.to_vec();
            r.extend([i.to_string(), j.to_string(), m[(i, j)].re.to_string(), m[(i, j)].im.to_string()]);
            out.push(r);
        }
    }
    out
}

fn grid(spec: &str) -> Result<CosphereGrid> {
    parse_grid_spec(spec)
}

pub fn symbol(op_path: &Path, grid_spec: &str, method: &str, tol: &Tolerances, out: &Output) -> Result<bool> {
    let (use_split, use_residue) = match method {
        "split" => (true, false),
        "residue" => (false, true),
        "both" => (true, true),
        other => return Err(Error::InvalidInput(format!("--method must be split, residue or both, got `{other}`"))),
    };
    let op = load_op(op_path)?;
    let g = grid(grid_spec)?;
    let t = tol.get("cross_method");
    let mut report = Report::new("symbol", dt_jet(), tol);
    let mut points = Vec::new();
    let mut csv_rows = Vec::new();
    let (mut worst_cross, mut worst_idem) = (0.0f64, 0.0f64);
    for (i, p) in g.points.iter().enumerate() {
        let split = boundary_ode_split(&op, p)?;
        let mut entry = json!({
            "index": i, "base": p.base, "covector": p.covector,
            "roots": split.roots.iter().map(|z| c64_value(*z)).collect::<Vec<_>>(),
            "margin": split.margin, "dim_plus": split.dim_plus(),
        });
        let mut cross = Value::Null;
        if use_split {
            entry["p_plus_split"] = cmat_value(&split.p_plus);
            worst_idem = worst_idem.max(linalg::idempotence_residual(&split.p_plus));
        }
        if use_residue {
            let r = p_plus_residue(&op, p)?;
            entry["p_plus_residue"] = cmat_value(&r.matrix);
            entry["residue_nodes"] = json!(r.nodes);
            worst_idem = worst_idem.max(linalg::idempotence_residual(&r.matrix));
            if use_split {
                let d = linalg::max_abs_diff(&r.matrix, &split.p_plus);
                worst_cross = worst_cross.max(d);
                cross = json!(d);
                entry["cross_residual"] = cross.clone();
            }
        }
        csv_rows.push(vec![
            i.to_string(),
            format!("{:?}", p.base),
            format!("{:?}", p.covector),
            split.dim_plus().to_string(),
            split.margin.to_string(),
            cross.as_f64().map(|x| x.to_string()).unwrap_or_default(),
        ]);
        points.push(entry);
    }
    report.push(Check::at_most("idempotence of p_+", worst_idem, t));
    if use_split && use_residue {
        report.push(Check::at_most("residue vs companion split", worst_cross, t));
    }
    report.results = json!({
        "geometry": op.geometry.name(), "order": op.m, "rank": op.rank(),
        "grid": grid_spec, "method": method, "points": points,
    });
    if let Some(p) = &out.csv {
        write_csv(p, &["index", "base", "covector", "dim_plus", "root_margin", "cross_residual"], csv_rows)?;
    }
    emit(&report, out)
}

pub fn sl_check(op_path: &Path, proj_path: &Path, grid_spec: &str, tol: &Tolerances, out: &Output) -> Result<bool> {
    let op = load_op(op_path)?;
    let spec = load_proj(proj_path)?;
    let g = grid(grid_spec)?;
    let t = tol.get("sl");
    let r = regularity_for(&op, &spec, &g, t)?;
    let mut report = Report::new("sl-check", dt_jet(), tol);
    // the verdict itself is the output; the check is that both methods agree
    report.push(Check::holds("symbol and half-line verdicts agree", r.symbol.pointwise == r.ode.pointwise));
    let verdict = if r.sl_elliptic { "elliptic" } else { "not_elliptic" };
    report.results = json!({
        "projector": spec.name(),
        "verdict": verdict,
        "regularity": if r.regular { "regular" } else { "neither" },
        "fredholm": r.fredholm,
        "symbol_level_only": r.symbol_level_only,
        "relative_margin": r.symbol.relative_margin,
        "min_singular_value": r.symbol.min_singular_value,
        "tolerance": t,
        "witness": r.symbol.witness,
        "failing_points": r.symbol.pointwise.iter().filter(|b| !**b).count(),
        "symbol": r.symbol,
        "ode": r.ode,
    });
    if let Some(p) = &out.csv {
        let rows = g.points.iter().enumerate().map(|(i, pt)| {
            vec![
                i.to_string(),
                format!("{:?}", pt.base),
                format!("{:?}", pt.covector),
                r.symbol.pointwise[i].to_string(),
                r.ode.pointwise[i].to_string(),
            ]
        });
        write_csv(p, &["index", "base", "covector", "symbol_elliptic", "ode_elliptic"], rows.collect::<Vec<_>>())?;
    }
    eprintln!("verdict: {verdict}");
    emit(&report, out)
}

pub fn adjoint_bc(op_path: &Path, proj_path: &Path, grid_spec: &str, tol: &Tolerances, out: &Output) -> Result<bool> {
    let op = load_op(op_path)?;
    let spec = load_proj(proj_path)?;
    let g = grid(grid_spec)?;
    let (t, tsl) = (tol.get("duality"), tol.get("sl"));
    let splits = split_on_grid(&op, &g)?;
    let field = spec.field(&op, &g, &splits)?;
    let green = GreenMatrices::new(&op)?;
    let opd = op.formal_adjoint()?;
    let green_d = GreenMatrices::new(&opd)?;
    let pd = adjoint_condition_symbol(&green, &field, &green_d, &g)?;

    let mut report = Report::new("adjoint-bc", dt_jet(), tol);
    let duality = adjoint_duality_check(&op, &opd, &green_d, &g, t)?;
    report.push(Check::at_most("a^* + a_dagger", duality.green_residual, t));
    report.push(Check::at_most("p_+ duality between D and D^dagger", duality.calderon_residual, t));
    report.push(Check::at_most("idempotence of P_dagger", pd.max_idempotence_residual(), t));

    let n = field.values[0].nrows();
    let one = linalg::identity(n);
    let (mut pairing, mut dims_ok) = (0.0f64, true);
    let mut points = Vec::new();
    let mut csv_rows = Vec::new();
    for (i, pt) in g.points.iter().enumerate() {
        let a = green.a.eval(pt, 1.0)?;
        let (p, q) = (&field.values[i], &pd.values[i]);
        // B = ran(1 - P) and B^* = ran(1 - P_dagger) must annihilate each other
        let res = ((&one - q).adjoint() * &a * (&one - p)).norm() / a.norm().max(1.0);
        pairing = pairing.max(res);
        let (rb, rbs) = (linalg::rank(&(&one - p), 1e-8), linalg::rank(&(&one - q), 1e-8));
        dims_ok &= rb + rbs == n;
        points.push(json!({ "index": i, "covector": pt.covector, "p_dagger": cmat_value(q),
            "pairing_residual": res, "dim_b": rb, "dim_b_star": rbs }));
        csv_rows.push(vec![i.to_string(), format!("{:?}", pt.covector), res.to_string(), rb.to_string(), rbs.to_string()]);
    }
    report.push(Check::at_most("pairing (1 - P_dagger)^* a (1 - P)", pairing, t));
    report.push(Check::holds("dim B + dim B^* = trace dimension", dims_ok));

    let forward = regularity_for(&op, &spec, &g, tsl)?;
    let splits_d = split_on_grid(&opd, &g)?;
    let backward = regularity_verdict(&g, &splits_d, &pd, tsl)?;
    report.push(Check::holds(
        "B_P and its adjoint condition have the same SL verdict",
        forward.sl_elliptic == backward.sl_elliptic,
    ));
    report.results = json!({
        "projector": spec.name(),
        "verdict": if forward.sl_elliptic { "elliptic" } else { "not_elliptic" },
        "adjoint_verdict": if backward.sl_elliptic { "elliptic" } else { "not_elliptic" },
        "adjoint_margin": backward.symbol.relative_margin,
        "duality": duality,
        "points": points,
    });
    if let Some(p) = &out.csv {
        write_csv(p, &["index", "covector", "pairing_residual", "dim_b", "dim_b_star"], csv_rows)?;
    }
    emit(&report, out)
}

pub fn disc(model: &str, alpha: &str, shift: f64, trunc: usize, tol: &Tolerances, out: &Output) -> Result<bool> {
    if trunc == 0 {
        return Err(Error::InvalidInput("--trunc must be positive".into()));
    }
    let m = FourierModel::parse(model, Some(alpha), shift)?;
    let conv = ConventionFlags::new(TraceConvention::DtJet, TraceConvention::OutwardNormal);
    let mut report = Report::new("disc", conv, tol);
    let pc = calderon_modes(&m, trunc)?;
    let mut csv_rows = Vec::new();
    for p in &pc {
        csv_rows.extend(matrix_rows(&[p.n.to_string(), "calderon".into()], &p.p));
    }
    let mut results = json!({ "model": m, "name": m.name(), "truncation": trunc, "model_conventions": m.conventions() });
    match &m {
        FourierModel::DiscLaplace { .. } => {
            // P_C(n) and [[1, 0], [Lambda(n), 0]] share their range, the Cauchy data line
            let mut worst: f64 = 0.0;
            let mut dtn = Vec::new();
            for p in &pc {
                let lam = dtn_mode(&m, p.n)?;
                let q = dirichlet_neumann_projector(lam);
                worst = worst.max(linalg::max_abs_diff(&(&q * &p.p), &p.p)).max(linalg::max_abs_diff(&(&p.p * &q), &q));
                dtn.push(json!([p.n, lam]));
            }
            report.push(Check::at_most("ran P_C(n) = ran [[1, 0], [Lambda(n), 0]]", worst, tol.get("chi_plus")));
            results["dirichlet_to_neumann"] = json!(dtn);
        }
        _ => {
            let chi = chi_plus_model(&m, trunc)?;
            let tchi = tol.get("chi_plus");
            let (mut worst, mut mode_zero_rank) = (0.0f64, 0usize);
            for (p, (n, x)) in pc.iter().zip(&chi) {
                csv_rows.extend(matrix_rows(&[n.to_string(), "chi_plus".into()], x));
                if *n == 0 {
                    mode_zero_rank = linalg::rank(&(&p.p - x), 1e-10);
                } else {
                    worst = worst.max(linalg::max_abs_diff(&p.p, x));
                }
            }
            results["mode_zero_rank_of_difference"] = json!(mode_zero_rank);
            results["max_difference_nonzero_modes"] = json!(worst);
            if let FourierModel::DiscD0 = m {
                report.push(Check::at_most("|P_C(n) - chi^+(A)(n)|, n != 0", worst, tchi));
            }
            if let FourierModel::DiscDAlpha { alpha } = &m {
                let cs = case_study_limit(alpha, trunc as i64)?;
                let (trel, tflat) = (tol.get("case_study_relative"), tol.get("case_study_flat"));
                let flat_profile = alpha.derivative_at_one().norm() == 0.0;
                if flat_profile {
                    report.push(Check::at_most(format!("|n| (chi^+ - P_C)(n) at n = {trunc}"), cs.raw_at_max, tflat));
                } else {
                    report.push(Check::at_most(
                        format!("relative error of |n| (chi^+ - P_C)(n) at n = {trunc}"),
                        cs.raw_relative_error,
                        trel,
                    ));
                    let leak = cs.samples.iter().map(|s| s.other).fold(0.0, f64::max);
                    report.push(Check::at_most("entries outside (1,2)/(2,1)", leak, trel));
                }
                results["case_study"] = serde_json::to_value(&cs)?;
            }
        }
    }
    report.results = results;
    if let Some(p) = &out.csv {
        write_csv(p, &["n", "matrix", "i", "j", "re", "im"], csv_rows)?;
    }
    emit(&report, out)
}

pub fn index(
    model: &str,
    aps: Option<i64>,
    bc: Option<&str>,
    shift: f64,
    trunc: usize,
    tol: &Tolerances,
    out: &Output,
) -> Result<bool> {
    if trunc < 4 {
        return Err(Error::InvalidInput("--trunc must be at least 4".into()));
    }
    let m = FourierModel::parse(model, None, shift)?;
    let (b, expected, label) = match (&m, aps, bc) {
        (FourierModel::DiscD0, k, None) => {
            let k = k.unwrap_or(0);
            (aps_cut(trunc, k), k, format!("aps_cut({k})"))
        }
        (FourierModel::DiscLaplace { .. }, None, b) => {
            let b = b.unwrap_or("dirichlet");
            let sub = if b == "dirichlet" {
                dirichlet_subspace(trunc)
            } else if let Some(a) = b.strip_prefix("robin:") {
                let a: f64 = a.parse().map_err(|_| Error::InvalidInput(format!("bad Robin coefficient in `{b}`")))?;
                robin_subspace(trunc, a)
            } else {
                return Err(Error::InvalidInput(format!("--bc must be dirichlet or robin:a, got `{b}`")));
            };
            // self-adjoint realizations
            (sub, 0, b.to_string())
        }
        _ => {
            return Err(Error::InvalidInput(
                "index supports --model d0 with --aps-cut K, or --model laplace with --bc".into(),
            ))
        }
    };
    let r = realized_index(&m, &b)?;
    let mut report = Report::new("index", ConventionFlags::new(TraceConvention::DtJet, TraceConvention::DtJet), tol);
    report.push(Check::equal("realized index", r.index as f64, expected as f64));
    report.push(Check::holds("stabilized over N/2, 3N/4, N", r.pair.stabilized));
    report.push(Check::holds("kernel count agrees", r.consistent));
    report.results = json!({ "model": m.name(), "boundary_condition": label, "truncation": trunc,
        "expected_index": expected, "index": r });
    if let Some(p) = &out.csv {
        let rows = r.pair.stabilization.iter().map(|(t, i)| vec![t.to_string(), i.to_string()]);
        write_csv(p, &["truncation", "pair_index"], rows.collect::<Vec<_>>())?;
    }
    emit(&report, out)
}

pub fn weyl(
    manifold: &str,
    bc: &str,
    count: usize,
    resolution: usize,
    sv: Option<&str>,
    tol: &Tolerances,
    out: &Output,
) -> Result<bool> {
    let man = Manifold::parse(manifold)?;
    let bc = Bc::parse(bc)?;
    let dim = man.dimension();
    let w = weyl_constant(&WeylInput::scalar(man, 2, 1.0), resolution)?;
    let eigs = model_eigenvalues(man, bc, count)?;
    let fit = asymptotic_fit(&eigs, 2, dim)?;
    let rel = (fit.c_hat - w.c_d).abs() / w.c_d;
    let mut report = Report::new("weyl", ConventionFlags::new(TraceConvention::DtJet, TraceConvention::DtJet), tol);
    report.push(Check::at_most("quadrature refinement change", w.refinement_change, tol.get("weyl_quadrature")));
    let key = if dim == 1 { "weyl_interval" } else { "weyl_median" };
    report.push(Check::at_most("|c_hat - c_D| / c_D", rel, tol.get(key)));
    let mut results = json!({
        "manifold": manifold, "bc": bc.name(), "count": count,
        "c_d": w.c_d, "quadrature": w, "c_hat": fit.c_hat, "drift": fit.drift, "fit": fit,
        "counting_ratio": counting_ratio(&eigs, w.c_d, 2, dim),
    });
    if let Some(spec) = sv {
        let parts: Vec<&str> = spec.split(':').collect();
        let [model, real, trunc] = parts[..] else {
            return Err(Error::InvalidInput(format!("--singular-values expects model:realization:trunc, got `{spec}`")));
        };
        let trunc: usize = trunc.parse().map_err(|_| Error::InvalidInput(format!("bad truncation `{trunc}`")))?;
        let f = singular_value_fit(&FourierModel::parse(model, None, 0.0)?, Realization::parse(real)?, trunc)?;
        report.push(Check::at_most("singular value fit vs sqrt(c_{D^dagger D})", f.relative_error, tol.get("singular_value_fit")));
        results["singular_values"] = serde_json::to_value(&f)?;
    }
    report.results = results;
    if let Some(p) = &out.csv {
        let e = 2.0 / dim as f64;
        let rows = eigs.iter().enumerate().map(|(i, l)| {
            vec![(i + 1).to_string(), l.to_string(), (l / ((i + 1) as f64).powf(e)).to_string()]
        });
        write_csv(p, &["k", "lambda", "lambda_over_k_power"], rows.collect::<Vec<_>>())?;
    }
    emit(&report, out)
}

pub fn suite(seed: u64, tol: &Tolerances, out: &Output) -> Result<bool> {
    let cfg = SuiteConfig { seed, tolerances: tol.clone() };
    let (criteria, report) = run_suite(&cfg);
    for c in &criteria {
        // keep stdout clean for the JSON when no --out is given
        if out.out.is_some() {
            println!("{}", c.line());
        } else {
            eprintln!("{}", c.line());
        }
    }
    if let Some(p) = &out.csv {
        let rows = criteria.iter().flat_map(|c| {
            c.checks.iter().map(move |k| {
                vec![
                    c.id.to_string(),
                    k.name.clone(),
                    k.value.to_string(),
                    k.tolerance.to_string(),
                    format!("{:?}", k.relation),
                    k.pass.to_string(),
                ]
            })
        });
        write_csv(p, &["criterion", "check", "value", "tolerance", "relation", "pass"], rows.collect::<Vec<_>>())?;
    }
    emit(&report, out)
}
