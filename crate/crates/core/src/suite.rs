//! The end-to-end acceptance suite: one entry per criterion, each carrying
//! its checks (value, tolerance, outcome) and a JSON detail block.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::calderon::{boundary_ode_split, p_plus_at_scale, p_plus_residue, TraceConvention};
use crate::disc::case_study::{case_study_limit, compactness_windows};
use crate::disc::galerkin::{max_kernel_growth, poincare_constant};
use crate::disc::model::{calderon_modes, chi_plus_model, dirichlet_neumann_projector, dtn_mode, modes};
use crate::disc::subspace::{
    aps_cut, dirichlet_subspace, graphical_decomposition, realized_index, robin_subspace, TruncatedSubspace,
};
use crate::disc::{AlphaProfile, FourierModel};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::linalg::{self, C64};
use crate::lopatinskii::{regularity_for, ProjectorSpec, Regularity};
use crate::pairing::{adjoint_duality_check, GreenMatrices};
use crate::report::{Check, ConventionFlags, Report, Tolerances};
use crate::special::{radial_zeros, RadialCondition};
use crate::symbol::{build_cosphere_grid, CosphereGrid, CospherePoint, Geometry};
use crate::weyl::{asymptotic_fit, model_eigenvalues, weyl_constant, Bc, Manifold, WeylInput};

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// reported alongside, not part of the verdict
    pub informational: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_limit_seconds: Option<f64>,
    pub detail: Value,
    #[serde(skip)]
    pub seconds: f64,
}

impl Criterion {
    fn new(id: u8, title: &'static str) -> Self {
        Criterion {
            id,
            title,
            pass: true,
            checks: Vec::new(),
            informational: Vec::new(),
            runtime_limit_seconds: None,
            detail: Value::Null,
            seconds: 0.0,
        }
    }

    fn push(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    /// One-line summary: PASS/FAIL, id, title and the worst failing check.
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!("{verdict} criterion {:>2}: {}", self.id, self.title);
        if let Some(c) = self.checks.iter().find(|c| !c.pass) {
            s += &format!(" [{}: {:e} vs {:e}]", c.name, c.value, c.tolerance);
        } else if let Some(limit) = self.runtime_limit_seconds {
            if self.seconds > limit {
                s += &format!(" [runtime {:.1} s over {limit} s]", self.seconds);
            }
        }
        s
    }
}

pub struct SuiteConfig {
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        SuiteConfig {
            seed,
            tolerances: Tolerances::default(),
        }
    }
}

pub const TITLES: [&str; 12] = [
    "Calderon symbol cross-method",
    "closed-form matrix regression",
    "duality identity",
    "SL/regularity verdicts",
    "unit-disc case study",
    "compactness failure",
    "index formula",
    "graphical decomposition",
    "Weyl law",
    "infinite-kernel growth",
    "Poincare/well-posedness",
    "determinism",
];

fn timed(id: u8, limit: Option<f64>, f: impl FnOnce(&mut Criterion) -> Result<()>) -> Criterion {
    let mut c = Criterion::new(id, TITLES[id as usize - 1]);
    c.runtime_limit_seconds = limit;
    let t0 = Instant::now();
    if let Err(e) = f(&mut c) {
        c.push(Check::holds("completed without error", false));
        c.detail = json!({ "error": e.to_string() });
    }
    c.seconds = t0.elapsed().as_secs_f64();
    if let Some(limit) = limit {
        c.pass &= c.seconds <= limit;
    }
    c
}

fn circle_grid() -> Result<CosphereGrid> {
    // 64 base points x 2 covector directions = 128 cosphere points
    build_cosphere_grid(Geometry::Circle, 64)
}

fn grid_for(g: Geometry) -> Result<CosphereGrid> {
    match g {
        Geometry::Circle => circle_grid(),
        _ => build_cosphere_grid(g, 4),
    }
}

pub fn criterion_1(cfg: &SuiteConfig) -> Criterion {
    let tol = cfg.tolerances.get("cross_method");
    timed(1, Some(10.0), |c| {
        let grid = circle_grid()?;
        let mut rows = Vec::new();
        for (name, op) in fixtures::circle_fixtures(cfg.seed)? {
            let mut worst: f64 = 0.0;
            for p in &grid.points {
                let r = p_plus_residue(&op, p)?.matrix;
                let s = boundary_ode_split(&op, p)?.p_plus;
                worst = worst.max(linalg::max_abs_diff(&r, &s));
            }
            c.push(Check::at_most(format!("{name} (m={}, rank={})", op.m, op.rank()), worst, tol));
            rows.push(json!({ "fixture": name, "m": op.m, "rank": op.rank(), "points": grid.len(), "max_residual": worst }));
        }
        c.detail = json!({ "fixtures": rows });
        Ok(())
    })
}

pub fn criterion_2(cfg: &SuiteConfig) -> Criterion {
    let tol = cfg.tolerances.get("closed_form");
    timed(2, None, |c| {
        let op = fixtures::laplace_circle();
        let conv = TraceConvention::OutwardNormal;
        let pd = linalg::diag(&[C64::from(1.0), C64::from(0.0)]);
        let (mut worst_p, mut worst_c) = (0.0f64, 0.0f64);
        for s in [1.0, -1.0] {
            let pt = CospherePoint::new(vec![0.0], vec![s])?;
            for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
                let p = p_plus_at_scale(&op, &pt, t)?;
                let expected = linalg::from_real_rows(&[&[0.5, 0.5 / t], &[0.5 * t, 0.5]]);
                worst_p = worst_p.max(linalg::max_abs_diff(&conv.transform(&p, 2, 1), &expected));
                let comm = conv.transform(&linalg::commutator(&pd, &p), 2, 1);
                let expected_c = linalg::from_real_rows(&[&[0.0, 0.5 / t], &[-0.5 * t, 0.0]]);
                worst_c = worst_c.max(linalg::max_abs_diff(&comm, &expected_c));
            }
        }
        c.push(Check::at_most("sigma0(P_C) vs (1/2)[[1,|xi|^-1],[|xi|,1]]", worst_p, tol));
        c.push(Check::at_most("[P_D, P_C] vs (1/2)[[0,|xi|^-1],[-|xi|,0]]", worst_c, tol));
        c.detail = json!({ "convention": conv.name(), "scales": [0.25, 0.5, 1.0, 2.0, 4.0] });
        Ok(())
    })
}

pub fn criterion_3(cfg: &SuiteConfig) -> Criterion {
    let tol = cfg.tolerances.get("duality");
    timed(3, None, |c| {
        let mut rows = Vec::new();
        for name in fixtures::NAMES {
            let op = fixtures::by_name(name, cfg.seed)?;
            let opd = op.formal_adjoint()?;
            let gd = GreenMatrices::new(&opd)?;
            let r = adjoint_duality_check(&op, &opd, &gd, &grid_for(op.geometry)?, tol)?;
            c.push(Check::at_most(format!("{name}: p_+ duality"), r.calderon_residual, tol));
            c.push(Check::at_most(format!("{name}: a^* + a_dagger"), r.green_residual, tol));
            rows.push(serde_json::to_value(&r)?);
        }
        c.detail = json!({ "fixtures": rows });
        Ok(())
    })
}

pub fn criterion_4(cfg: &SuiteConfig) -> Criterion {
    let tol = cfg.tolerances.get("sl");
    timed(4, None, |c| {
        let grid = circle_grid()?;
        let cases: Vec<(&str, ProjectorSpec, &str, bool)> = vec![
            ("laplace_circle", ProjectorSpec::Dirichlet, "dirichlet", true),
            ("laplace_circle", ProjectorSpec::Neumann, "neumann", true),
            ("laplace_circle", ProjectorSpec::Calderon, "calderon_complement", true),
            ("dirac_circle", ProjectorSpec::Calderon, "aps", true),
            ("coupled_rank2_circle", ProjectorSpec::Dirichlet, "dirichlet", true),
            ("coupled_rank2_circle", ProjectorSpec::Neumann, "neumann", true),
            ("order3_scalar_circle", ProjectorSpec::Calderon, "calderon_complement", true),
            ("laplace_circle", ProjectorSpec::RankDeficient, "rank_deficient", false),
            ("dirac_circle", ProjectorSpec::FullDirichlet, "full_dirichlet", false),
        ];
        let mut rows = Vec::new();
        for (fixture, spec, label, expect_regular) in cases {
            let op = fixtures::by_name(fixture, cfg.seed)?;
            let name = format!("{fixture}/{label}");
            // regularity_for refuses to return when the two methods disagree
            let r = match regularity_for(&op, &spec, &grid, tol) {
                Ok(r) => r,
                Err(e) => {
                    c.push(Check::holds(format!("{name}: symbol and ODE verdicts agree"), false));
                    rows.push(json!({ "case": name, "error": e.to_string() }));
                    continue;
                }
            };
            c.push(Check::holds(
                format!("{name}: symbol and ODE verdicts agree"),
                r.symbol.pointwise == r.ode.pointwise,
            ));
            let verdict = if r.sl_elliptic { "elliptic" } else { "not_elliptic" };
            let margin = r.symbol.relative_margin;
            if expect_regular {
                c.push(Check::at_least(format!("{name}: elliptic margin"), margin, tol));
                c.push(Check::holds(format!("{name}: regular"), r.verdict == Regularity::Regular));
            } else {
                c.push(Check::at_most(format!("{name}: not_elliptic margin"), margin, tol));
            }
            rows.push(json!({
                "case": name, "verdict": verdict,
                "regularity": if r.regular { "regular" } else { "neither" },
                "relative_margin": margin, "tolerance": tol,
                "witness": r.symbol.witness,
            }));
        }
        c.detail = json!({ "cases": rows });
        Ok(())
    })
}

const CASE_TRUNC: usize = 256;

pub fn criterion_5(cfg: &SuiteConfig) -> Criterion {
    let tol_chi = cfg.tolerances.get("chi_plus");
    let tol_rel = cfg.tolerances.get("case_study_relative");
    let tol_flat = cfg.tolerances.get("case_study_flat");
    timed(5, Some(60.0), |c| {
        let d0 = FourierModel::DiscD0;
        let pc = calderon_modes(&d0, CASE_TRUNC)?;
        let chi = chi_plus_model(&d0, CASE_TRUNC)?;
        let mut worst: f64 = 0.0;
        let mut mode_zero_rank = 0;
        for (p, (n, x)) in pc.iter().zip(&chi) {
            if p.n != *n {
                return Err(Error::numerical("suite", format!("mode lists out of step at {n}")));
            }
            if *n == 0 {
                // A(0) = 0: the cut r = 1/2 convention makes this a finite-rank difference
                mode_zero_rank = linalg::rank(&(&p.p - x), 1e-10);
            } else {
                worst = worst.max(linalg::max_abs_diff(&p.p, x));
            }
        }
        c.push(Check::at_most("D_0: |P_C(n) - chi^+(A)(n)|, 1 <= |n| <= 256", worst, tol_chi));
        c.informational.push(Check::at_most("D_0: rank of P_C(0) - chi^+(A)(0) (mode-0 cut)", mode_zero_rank as f64, 2.0));

        let cubic = case_study_limit(&AlphaProfile::parse("cubic:1.0")?, CASE_TRUNC as i64)?;
        c.push(Check::at_most(
            "D_alpha, alpha'(1) = 1: relative error of |n| (chi^+ - P_C)(n) at n = 256",
            cubic.raw_relative_error,
            tol_rel,
        ));
        let leak = cubic.samples.iter().map(|s| s.other).fold(0.0, f64::max);
        c.push(Check::at_most("D_alpha: entries outside (1,2)/(2,1)", leak, tol_rel));
        c.informational.push(Check::at_most(
            "D_alpha: Richardson-extrapolated relative error",
            cubic.richardson_relative_error,
            tol_rel,
        ));
        let flat = case_study_limit(&AlphaProfile::parse("flat:1.0")?, CASE_TRUNC as i64)?;
        c.push(Check::at_most("alpha'(1) = 0: |n| (chi^+ - P_C)(n) at n = 256", flat.raw_at_max, tol_flat));
        c.detail = json!({ "d0_max_residual": worst, "d0_mode_zero_rank": mode_zero_rank, "cubic": cubic, "flat": flat });
        Ok(())
    })
}

pub fn criterion_6(cfg: &SuiteConfig) -> Criterion {
    let factor = cfg.tolerances.get("compactness_factor");
    timed(6, None, |c| {
        let alpha = AlphaProfile::parse("cubic:1.0")?;
        let w = compactness_windows(&alpha, &[32, 64, 128])?;
        let target = factor * alpha.derivative_at_one().norm() / 4.0;
        for win in &w {
            c.push(Check::at_least(
                format!("window [{}, {}] lower bound", win.start, 2 * win.start),
                win.lower_bound,
                target,
            ));
        }
        c.detail = json!({ "windows": w });
        Ok(())
    })
}

pub fn criterion_7(_cfg: &SuiteConfig) -> Criterion {
    timed(7, None, |c| {
        let mut rows = Vec::new();
        for k in -3..=3i64 {
            // the pair index is evaluated at N/2, 3N/4 and N = 64, 96, 128
            let r = realized_index(&FourierModel::DiscD0, &aps_cut(128, k))?;
            for &(t, idx) in &r.pair.stabilization {
                c.push(Check::equal(format!("K = {k}, truncation {t}"), idx as f64, k as f64));
            }
            c.push(Check::holds(format!("K = {k}: kernel cross-check consistent"), r.consistent));
            rows.push(serde_json::to_value(&r)?);
        }
        c.detail = json!({ "cuts": rows });
        Ok(())
    })
}

const GRAPH_TRUNC: usize = 32;

pub fn criterion_8(cfg: &SuiteConfig) -> Criterion {
    let tol = cfg.tolerances.get("graph");
    timed(8, None, |c| {
        let model = FourierModel::DiscLaplace { shift: 1.0 };
        let pz = modes(GRAPH_TRUNC)
            .into_iter()
            .map(|n| Ok((n, dirichlet_neumann_projector(dtn_mode(&model, n)?))))
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for (name, b) in [
            ("dirichlet", dirichlet_subspace(GRAPH_TRUNC)),
            ("robin(0.7)", robin_subspace(GRAPH_TRUNC, 0.7)),
        ] {
            let g = graphical_decomposition(&b, &pz)?;
            c.push(Check::at_most(format!("{name}: reconstruction gap"), g.reconstruction_gap, tol));
            c.push(Check::at_most(format!("{name}: adjoint-formula gap"), g.adjoint_gap, tol));
            rows.push(json!({ "condition": name, "g_max_abs": g.g_max_abs,
                "reconstruction_gap": g.reconstruction_gap, "adjoint_gap": g.adjoint_gap,
                "w_plus_dim": g.w_plus_dim, "w_minus_dim": g.w_minus_dim }));
        }
        let chi = chi_plus_model(&FourierModel::DiscD0, GRAPH_TRUNC)?;
        let aps = TruncatedSubspace::kernel_of(vec![0.5, 0.5], &chi);
        let g = graphical_decomposition(&aps, &chi)?;
        c.push(Check::equal("aps (D_0): max |g|", g.g_max_abs, 0.0));
        rows.push(json!({ "condition": "aps", "g_max_abs": g.g_max_abs,
            "reconstruction_gap": g.reconstruction_gap, "adjoint_gap": g.adjoint_gap }));
        c.detail = json!({ "truncation": GRAPH_TRUNC, "conditions": rows });
        Ok(())
    })
}

pub fn criterion_9(cfg: &SuiteConfig) -> Criterion {
    let tq = cfg.tolerances.get("weyl_quadrature");
    let tm = cfg.tolerances.get("weyl_median");
    let ti = cfg.tolerances.get("weyl_interval");
    timed(9, Some(30.0), |c| {
        let w = weyl_constant(&WeylInput::scalar(Manifold::UnitDisc, 2, 1.0), 16)?;
        c.push(Check::at_most("disc c_D relative error vs 4", (w.c_d - 4.0).abs() / 4.0, tq));
        let eigs = model_eigenvalues(Manifold::UnitDisc, Bc::Dirichlet, 2000)?;
        let mut ratios: Vec<f64> = (1000..=2000).map(|k| eigs[k - 1] / k as f64).collect();
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = ratios[ratios.len() / 2];
        c.push(Check::at_most("disc median lambda_k/k, k in [1000, 2000], relative to 4", (med - 4.0).abs() / 4.0, tm));
        let iv = model_eigenvalues(Manifold::Interval { length: std::f64::consts::PI }, Bc::Dirichlet, 2000)?;
        let fit = asymptotic_fit(&iv, 2, 1)?;
        c.push(Check::at_most("interval c_hat relative to 1", (fit.c_hat - 1.0).abs(), ti));
        let two_term = {
            // N(l) = l/4 - sqrt(l)/2 inverted at k: sqrt(l) = 1 + sqrt(1 + 4k)
            let k = 1500.0f64;
            let s = 1.0 + (1.0 + 4.0 * k).sqrt();
            s * s / k
        };
        c.detail = json!({
            "c_d": w.c_d, "quadrature_resolution": w.resolution, "refinement_change": w.refinement_change,
            "disc_median_ratio": med, "two_term_prediction_at_k_1500": two_term,
            "interval_c_hat": fit.c_hat, "interval_drift": fit.drift,
        });
        Ok(())
    })
}

pub fn criterion_10(_cfg: &SuiteConfig) -> Criterion {
    timed(10, None, |c| {
        let truncs = [8usize, 16, 32];
        let lambdas = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(2.0, -3.0)];
        let mut rows = Vec::new();
        for model in [FourierModel::DiscD0, FourierModel::DiscLaplace { shift: 0.0 }] {
            for &lam in &lambdas {
                let g = max_kernel_growth(&model, lam, &truncs)?;
                for w in g.dims.windows(2) {
                    let growth = w[1].1 as f64 - w[0].1 as f64;
                    c.push(Check::at_least(
                        format!("{} at lambda = {lam}: N {} -> {}", model.name(), w[0].0, w[1].0),
                        growth,
                        w[0].0 as f64 / 2.0,
                    ));
                }
                rows.push(json!({ "model": model.name(), "lambda": [lam.re, lam.im], "dims": g.dims }));
            }
        }
        c.detail = json!({ "growth": rows });
        Ok(())
    })
}

pub fn criterion_11(cfg: &SuiteConfig) -> Criterion {
    let ts = cfg.tolerances.get("poincare_stability");
    let tm = cfg.tolerances.get("poincare_match");
    timed(11, None, |c| {
        let j01 = radial_zeros(RadialCondition::Dirichlet, 0, 3.0)?
            .first()
            .copied()
            .ok_or_else(|| Error::numerical("suite", "no Bessel zero below 3"))?;
        let mut rows = Vec::new();
        for model in [FourierModel::DiscD0, FourierModel::DiscLaplace { shift: 1.0 }] {
            let r = poincare_constant(&model, "dirichlet", 32, cfg.seed)?;
            c.push(Check::at_least(format!("{}: smallest singular value", r.model), r.sigma_min, 0.0));
            c.push(Check::at_most(format!("{}: spread across truncations", r.model), r.relative_spread, ts));
            c.push(Check::holds(format!("{}: random vectors satisfy the bound", r.model), r.random_pass));
            if let FourierModel::DiscLaplace { shift } = model {
                let exact = shift + j01 * j01;
                c.push(Check::at_most(
                    "disc Laplace + 1: relative distance to 1 + j01^2",
                    (r.sigma_min - exact).abs() / exact,
                    tm,
                ));
            }
            rows.push(serde_json::to_value(&r)?);
        }
        c.detail = json!({ "realizations": rows });
        Ok(())
    })
}

/// Criteria 1 to 11 in order.
pub fn run_criteria(cfg: &SuiteConfig) -> Vec<Criterion> {
    vec![
        criterion_1(cfg),
        criterion_2(cfg),
        criterion_3(cfg),
        criterion_4(cfg),
        criterion_5(cfg),
        criterion_6(cfg),
        criterion_7(cfg),
        criterion_8(cfg),
        criterion_9(cfg),
        criterion_10(cfg),
        criterion_11(cfg),
    ]
}

pub fn suite_report(cfg: &SuiteConfig, criteria: &[Criterion]) -> Report {
    let mut r = Report::new(
        "suite",
        ConventionFlags::new(TraceConvention::DtJet, TraceConvention::OutwardNormal),
        &cfg.tolerances,
    );
    r.seed = Some(cfg.seed);
    for c in criteria {
        for ch in &c.checks {
            let mut ch = ch.clone();
            ch.name = format!("criterion {}: {}", c.id, ch.name);
            r.push(ch);
        }
        r.pass &= c.pass;
        r.metadata.runtime_seconds.insert(format!("criterion_{:02}", c.id), c.seconds);
    }
    r.results = json!({ "criteria": criteria });
    r
}

/// Runs criteria 1 to 11 twice and compares the metadata-free reports byte
/// for byte; the total wall-clock time of both runs must stay under 5 min.
pub fn run_suite(cfg: &SuiteConfig) -> (Vec<Criterion>, Report) {
    let t0 = Instant::now();
    let first = run_criteria(cfg);
    let a = suite_report(cfg, &first).deterministic_json();
    let second = run_criteria(cfg);
    let b = suite_report(cfg, &second).deterministic_json();
    let total = t0.elapsed().as_secs_f64();
    let mut c12 = Criterion::new(12, TITLES[11]);
    c12.runtime_limit_seconds = Some(300.0);
    let first_diff = a.lines().zip(b.lines()).position(|(x, y)| x != y);
    c12.push(Check::holds("two runs give byte-identical reports", a == b));
    c12.detail = json!({ "report_bytes": a.len(), "first_differing_line": first_diff });
    c12.seconds = total;
    c12.pass &= total <= 300.0;
    let mut all = first;
    all.push(c12);
    let mut report = suite_report(cfg, &all);
    report.metadata.runtime_seconds.insert("total".into(), total);
    (all, report)
}
