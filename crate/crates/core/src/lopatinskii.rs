//! Shapiro-Lopatinskii ellipticity, regularity and boundary-decomposing
//! checks for boundary conditions B = ker P.

use serde::Serialize;
use serde_json::Value;

use crate::calderon::{split_on_grid, CompanionSplit, TraceConvention};
use crate::error::{Error, Result};
use crate::json::{parse_cmat, schema};
use crate::linalg::{self, CMat, C64};
use crate::symbol::{CollarOperator, CosphereGrid, CospherePoint, ProjectorField, IDEMPOTENCE_TOL};

/// Relative singular-value margin below which a symbol counts as singular.
pub const SL_TOL: f64 = 1e-7;

/// How a projector field is specified in a projector file.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectorSpec {
    /// first k trace slots vanish
    Slots(usize),
    /// u = 0: the first m/2 slots
    Dirichlet,
    /// the last m/2 slots
    Neumann,
    /// sigma(P) = p_+; B = ker P is the Calderon complement
    Calderon,
    /// sigma(P) = 1 - p_+; B is the Cauchy data space itself
    CalderonRange,
    /// P = 1
    FullDirichlet,
    /// Dirichlet except P = 0 over boundary point 0
    RankDeficient,
    Constant {
        matrix: CMat,
        convention: TraceConvention,
    },
}

impl ProjectorSpec {
    pub fn parse(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| schema("$", "expected object"))?;
        let kind = obj
            .get("kind")
            .ok_or_else(|| schema("$.kind", "missing required field"))?
            .as_str()
            .ok_or_else(|| schema("$.kind", "expected string"))?;
        Ok(match kind {
            "dirichlet" => ProjectorSpec::Dirichlet,
            "neumann" => ProjectorSpec::Neumann,
            "calderon" | "aps" | "calderon_complement" => ProjectorSpec::Calderon,
            "calderon_range" => ProjectorSpec::CalderonRange,
            "full_dirichlet" => ProjectorSpec::FullDirichlet,
            "rank_deficient" => ProjectorSpec::RankDeficient,
            "slots" => {
                let k = obj
                    .get("k")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| schema("$.k", "expected non-negative integer"))?;
                ProjectorSpec::Slots(k as usize)
            }
            "constant" => {
                let matrix = parse_cmat(
                    obj.get("matrix")
                        .ok_or_else(|| schema("$.matrix", "missing required field"))?,
                    "$.matrix",
                )?;
                let convention = match obj.get("convention") {
                    None => TraceConvention::DtJet,
                    Some(c) => TraceConvention::parse(
                        c.as_str().ok_or_else(|| schema("$.convention", "expected string"))?,
                    )
                    .map_err(|e| schema("$.convention", &e.to_string()))?,
                };
                ProjectorSpec::Constant { matrix, convention }
            }
            other => return Err(schema("$.kind", &format!("unknown projector kind `{other}`"))),
        })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&text).map_err(|e| {
            schema(
                &format!("line {} column {}", e.line(), e.column()),
                &format!("invalid JSON: {e}"),
            )
        })?;
        Self::parse(&v)
    }

    pub fn name(&self) -> String {
        match self {
            ProjectorSpec::Slots(k) => format!("slots({k})"),
            ProjectorSpec::Dirichlet => "dirichlet".into(),
            ProjectorSpec::Neumann => "neumann".into(),
            ProjectorSpec::Calderon => "calderon".into(),
            ProjectorSpec::CalderonRange => "calderon_range".into(),
            ProjectorSpec::FullDirichlet => "full_dirichlet".into(),
            ProjectorSpec::RankDeficient => "rank_deficient".into(),
            ProjectorSpec::Constant { .. } => "constant".into(),
        }
    }

    /// Projector matrices in D_t-jet coordinates at every grid point.
    pub fn field(
        &self,
        op: &CollarOperator,
        grid: &CosphereGrid,
        splits: &[CompanionSplit],
    ) -> Result<ProjectorField> {
        let (m, r) = (op.m, op.rank());
        let n = m * r;
        let slots = |lo: usize, hi: usize| {
            linalg::diag(
                &(0..n)
                    .map(|i| {
                        let s = i / r;
                        C64::new(if s >= lo && s < hi { 1.0 } else { 0.0 }, 0.0)
                    })
                    .collect::<Vec<_>>(),
            )
        };
        let half = || {
            if m % 2 == 1 {
                Err(Error::InvalidInput(format!(
                    "Dirichlet/Neumann conditions need even order, got m = {m}"
                )))
            } else {
                Ok(m / 2)
            }
        };
        let values: Vec<CMat> = match self {
            ProjectorSpec::Slots(k) => {
                if *k > m {
                    return Err(Error::InvalidInput(format!("slot count {k} exceeds m = {m}")));
                }
                vec![slots(0, *k); grid.len()]
            }
            ProjectorSpec::Dirichlet => vec![slots(0, half()?); grid.len()],
            ProjectorSpec::Neumann => vec![slots(half()?, m); grid.len()],
            ProjectorSpec::Calderon => splits.iter().map(|s| s.p_plus.clone()).collect(),
            ProjectorSpec::CalderonRange => splits.iter().map(|s| s.p_minus()).collect(),
            ProjectorSpec::FullDirichlet => vec![linalg::identity(n); grid.len()],
            ProjectorSpec::RankDeficient => {
                let d = slots(0, m.div_ceil(2));
                grid.points
                    .iter()
                    .map(|p| if p.base_index == 0 { CMat::zeros(n, n) } else { d.clone() })
                    .collect()
            }
            ProjectorSpec::Constant { matrix, convention } => {
                if matrix.nrows() != n || matrix.ncols() != n {
                    return Err(Error::Dimension(format!(
                        "projector matrix is {}x{}, expected {n}x{n}",
                        matrix.nrows(),
                        matrix.ncols()
                    )));
                }
                // P_dt = S^{-1} P_conv S
                let s = convention.conjugator(m, r);
                let si = linalg::inverse(&s, "trace conjugator")?;
                vec![&si * matrix * &s; grid.len()]
            }
        };
        ProjectorField::new(values, IDEMPOTENCE_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlMethod {
    Symbol,
    Ode,
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipticityReport {
    pub elliptic: bool,
    pub method: SlMethod,
    pub min_singular_value: f64,
    /// min over points of sigma_min / |A|
    pub relative_margin: f64,
    pub tolerance: f64,
    pub witness: CospherePoint,
    /// per-point verdicts in grid order
    pub pointwise: Vec<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub commutator_order_estimate: Option<f64>,
}

fn check_shapes(field: &ProjectorField, splits: &[CompanionSplit]) -> Result<()> {
    if field.values.len() != splits.len() {
        return Err(Error::Dimension(format!(
            "projector field has {} points, grid has {}",
            field.values.len(),
            splits.len()
        )));
    }
    for (i, (p, s)) in field.values.iter().zip(splits).enumerate() {
        if p.nrows() != s.p_plus.nrows() {
            return Err(Error::Dimension(format!(
                "projector at point {i} is {}x{}, trace space has dimension {}",
                p.nrows(),
                p.ncols(),
                s.p_plus.nrows()
            )));
        }
    }
    Ok(())
}

fn assemble(
    method: SlMethod,
    grid: &CosphereGrid,
    per_point: Vec<(f64, f64)>,
    tol: f64,
) -> EllipticityReport {
    let mut worst = 0;
    for (i, v) in per_point.iter().enumerate() {
        if v.1 < per_point[worst].1 {
            worst = i;
        }
    }
    let pointwise: Vec<bool> = per_point.iter().map(|v| v.1 > tol).collect();
    EllipticityReport {
        elliptic: pointwise.iter().all(|&b| b),
        method,
        min_singular_value: per_point.iter().map(|v| v.0).fold(f64::INFINITY, f64::min),
        relative_margin: per_point[worst].1,
        tolerance: tol,
        witness: grid.points[worst].clone(),
        pointwise,
        commutator_order_estimate: None,
    }
}

/// Symbol of A = P_C - (1 - P) at one point.
pub fn sl_symbol(p_plus: &CMat, p: &CMat) -> CMat {
    p_plus - (linalg::identity(p.nrows()) - p)
}

pub fn sl_check_symbol(
    grid: &CosphereGrid,
    splits: &[CompanionSplit],
    field: &ProjectorField,
    tol: f64,
) -> Result<EllipticityReport> {
    check_shapes(field, splits)?;
    let per_point = splits
        .iter()
        .zip(&field.values)
        .map(|(s, p)| {
            let a = sl_symbol(&s.p_plus, p);
            let smin = linalg::min_singular_value(&a);
            (smin, smin / linalg::spectral_norm(&a).max(1.0))
        })
        .collect();
    Ok(assemble(SlMethod::Symbol, grid, per_point, tol))
}

/// Unique solvability of the half-line problem: P restricted to E_+ must be
/// an isomorphism onto ran P.
pub fn sl_check_ode(
    grid: &CosphereGrid,
    splits: &[CompanionSplit],
    field: &ProjectorField,
    tol: f64,
) -> Result<EllipticityReport> {
    check_shapes(field, splits)?;
    let per_point = splits
        .iter()
        .zip(&field.values)
        .map(|(s, p)| {
            let range = linalg::orth(p, 1e-8);
            if range.ncols() != s.dim_plus() {
                return (0.0, 0.0);
            }
            if range.ncols() == 0 {
                return (1.0, 1.0);
            }
            let map = range.adjoint() * p * &s.basis_plus;
            let smin = linalg::min_singular_value(&map);
            (smin, smin / linalg::spectral_norm(p).max(1.0))
        })
        .collect();
    Ok(assemble(SlMethod::Ode, grid, per_point, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    Regular,
    Neither,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub verdict: Regularity,
    pub regular: bool,
    pub fredholm: bool,
    pub sl_elliptic: bool,
    /// the field is not a continuous symbol (rank jumps on a component), so
    /// only the pointwise statement is made
    pub symbol_level_only: bool,
    pub symbol: EllipticityReport,
    pub ode: EllipticityReport,
}

/// Regularity, Fredholmness and SL ellipticity coincide for projections in
/// the calculus; the report states all three.
pub fn regularity_verdict(
    grid: &CosphereGrid,
    splits: &[CompanionSplit],
    field: &ProjectorField,
    tol: f64,
) -> Result<RegularityReport> {
    let symbol = sl_check_symbol(grid, splits, field, tol)?;
    let ode = sl_check_ode(grid, splits, field, tol)?;
    if symbol.pointwise != ode.pointwise {
        return Err(Error::numerical(
            "regularity_verdict",
            "symbol and half-line verdicts disagree; margin is at the tolerance",
        ));
    }
    let symbol_level_only = !field.rank_constant_on_components(grid);
    let ok = symbol.elliptic && !symbol_level_only;
    Ok(RegularityReport {
        verdict: if ok { Regularity::Regular } else { Regularity::Neither },
        regular: ok,
        fredholm: ok,
        sl_elliptic: symbol.elliptic,
        symbol_level_only,
        symbol,
        ode,
    })
}

/// Convenience wrapper computing the splits first.
pub fn regularity_for(
    op: &CollarOperator,
    spec: &ProjectorSpec,
    grid: &CosphereGrid,
    tol: f64,
) -> Result<RegularityReport> {
    let splits = split_on_grid(op, grid)?;
    let field = spec.field(op, grid, &splits)?;
    regularity_verdict(grid, &splits, &field, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct FourierDecay {
    pub modes: Vec<i64>,
    pub norms: Vec<f64>,
    /// least-squares slope of log norm against log |n| over the upper half of
    /// the modes; None when the norms vanish identically
    pub exponent: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecomposingReport {
    pub pass: bool,
    /// max over the grid of |[p_+, sigma(P)]|
    pub principal_commutator: f64,
    pub symbol_pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fourier: Option<FourierDecay>,
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Decay of |(1 - P_C(n)) P(n) P_C(n)| in |n|. `modes` carries
/// (n, P_C(n), P(n)); modes with n = 0 are ignored.
pub fn fourier_decay(modes: &[(i64, CMat, CMat)], order: usize) -> FourierDecay {
    let mut data: Vec<(i64, f64)> = modes
        .iter()
        .filter(|(n, _, _)| *n != 0)
        .map(|(n, pc, p)| {
            let id = linalg::identity(pc.nrows());
            (*n, linalg::spectral_norm(&((&id - pc) * p * pc)))
        })
        .collect();
    data.sort_by_key(|(n, _)| n.unsigned_abs());
    let threshold = -(order as f64) + 0.1;
    let nmax = data.iter().map(|(n, _)| n.unsigned_abs()).max().unwrap_or(0);
    let top: Vec<&(i64, f64)> = data
        .iter()
        .filter(|(n, _)| 2 * n.unsigned_abs() >= nmax)
        .collect();
    let scale = data.iter().map(|d| d.1).fold(0.0, f64::max);
    let exponent = if scale < 1e-13 || top.len() < 2 {
        None
    } else {
        let x: Vec<f64> = top.iter().map(|(n, _)| n.unsigned_abs() as f64).collect();
        let y: Vec<f64> = top.iter().map(|(_, v)| v.max(1e-300)).collect();
        Some(loglog_slope(&x, &y))
    };
    FourierDecay {
        modes: data.iter().map(|d| d.0).collect(),
        norms: data.iter().map(|d| d.1).collect(),
        pass: exponent.is_none_or(|e| e <= threshold),
        exponent,
        threshold,
    }
}

pub fn boundary_decomposing_check(
    splits: &[CompanionSplit],
    field: &ProjectorField,
    fourier: Option<FourierDecay>,
    tol: f64,
) -> Result<DecomposingReport> {
    check_shapes(field, splits)?;
    let principal_commutator = splits
        .iter()
        .zip(&field.values)
        .map(|(s, p)| linalg::commutator(&s.p_plus, p).norm())
        .fold(0.0, f64::max);
    let symbol_pass = principal_commutator <= tol;
    let pass = symbol_pass && fourier.as_ref().is_none_or(|f| f.pass);
    Ok(DecomposingReport {
        pass,
        principal_commutator,
        symbol_pass,
        fourier,
    })
}
