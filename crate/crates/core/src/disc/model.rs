//! Rotation-invariant model problems with circle boundary, solved mode by
//! mode.
//!
//! First-order disc models act on pairs (u_1, u_2) with
//! D_alpha u = sigma(d_{x_n} + A + R_0) u, x_n = 1 - r inward,
//! A = diag(-i d_theta, i d_theta) and sigma = [[0, 1], [-1, 0]]. On e^{in theta}
//! the kernel equation is r u' = A(n) u + r (n alpha(r) + lambda) sigma u.
//! Traces are (u_1, u_2)(1).
//!
//! The Laplace-type model is -Delta + shift with traces (u, d_r u)(1), i.e.
//! outward normal-derivative coordinates.

use rayon::prelude::*;
use serde::Serialize;

use super::ode::{regular_solution_at_one, regular_solution_on, CVec, OdeOptions, RadialSystem};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// Polynomial alpha(r) with alpha(1) = 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaProfile {
    /// s (r - 1) r^2
    Cubic { s: f64 },
    /// s (r - 1) r^4 (3 - 2r)
    Bump { s: f64 },
    /// s (r - 1) r^2 (2 - r^2)
    Mixed { s: f64 },
    /// s (r - 1)^2 r^2, alpha'(1) = 0
    Flat { s: f64 },
    /// explicit coefficients in ascending powers of r
    Poly {
        #[serde(skip)]
        coeffs: Vec<C64>,
    },
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

impl AlphaProfile {
    /// Parses `cubic:1.0`, `bump:0.5`, `mixed:1`, `flat:2`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, s) = match spec.split_once(':') {
            Some((n, v)) => (
                n,
                v.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad profile scale in `{spec}`")))?,
            ),
            None => (spec, 1.0),
        };
        match name {
            "cubic" => Ok(AlphaProfile::Cubic { s }),
            "bump" => Ok(AlphaProfile::Bump { s }),
            "mixed" => Ok(AlphaProfile::Mixed { s }),
            "flat" => Ok(AlphaProfile::Flat { s }),
            other => Err(Error::InvalidInput(format!(
                "unknown alpha profile `{other}` (cubic, bump, mixed, flat)"
            ))),
        }
    }

    pub fn poly(coeffs: Vec<C64>) -> Result<Self> {
        let p = AlphaProfile::Poly { coeffs };
        if p.eval(1.0).norm() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "alpha must vanish at r = 1, got {}",
                p.eval(1.0)
            )));
        }
        Ok(p)
    }

    pub fn name(&self) -> String {
        match self {
            AlphaProfile::Cubic { s } => format!("cubic:{s}"),
            AlphaProfile::Bump { s } => format!("bump:{s}"),
            AlphaProfile::Mixed { s } => format!("mixed:{s}"),
            AlphaProfile::Flat { s } => format!("flat:{s}"),
            AlphaProfile::Poly { .. } => "poly".into(),
        }
    }

    /// Coefficients in ascending powers of r.
    pub fn coeffs(&self) -> Vec<C64> {
        let real = |s: f64, factors: &[&[f64]]| -> Vec<C64> {
            let mut p = vec![s];
            for f in factors {
                p = poly_mul(&p, f);
            }
            p.into_iter().map(C64::from).collect()
        };
        let rm1: &[f64] = &[-1.0, 1.0];
        let r2: &[f64] = &[0.0, 0.0, 1.0];
        match self {
            AlphaProfile::Cubic { s } => real(*s, &[rm1, r2]),
            AlphaProfile::Bump { s } => real(*s, &[rm1, &[0.0, 0.0, 0.0, 0.0, 1.0], &[3.0, -2.0]]),
            AlphaProfile::Mixed { s } => real(*s, &[rm1, r2, &[2.0, 0.0, -1.0]]),
            AlphaProfile::Flat { s } => real(*s, &[rm1, rm1, r2]),
            AlphaProfile::Poly { coeffs } => coeffs.clone(),
        }
    }

    pub fn eval(&self, r: f64) -> C64 {
        self.coeffs().iter().rev().fold(C64::from(0.0), |acc, c| acc * r + c)
    }

    pub fn derivative_at_one(&self) -> C64 {
        self.coeffs()
            .iter()
            .enumerate()
            .map(|(k, c)| c * k as f64)
            .sum()
    }

    pub fn second_derivative_at_one(&self) -> C64 {
        self.coeffs()
            .iter()
            .enumerate()
            .map(|(k, c)| c * (k * k.saturating_sub(1)) as f64)
            .sum()
    }

    pub fn is_real(&self) -> bool {
        self.coeffs().iter().all(|c| c.im == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FourierModel {
    /// Cauchy-Riemann pair on the unit disc
    DiscD0,
    DiscDAlpha { alpha: AlphaProfile },
    /// -Delta + shift on the unit disc
    DiscLaplace { shift: f64 },
    /// sigma (d_t + A) on [0, inf) x S^1 with A(n) = n K + L, K and L hermitian
    HalfCylinder {
        #[serde(with = "crate::json::cmat_rows")]
        k: CMat,
        #[serde(with = "crate::json::cmat_rows")]
        l: CMat,
    },
}

/// Spectral cut used for mode 0 of first-order disc models.
pub const MODE_ZERO_CUT: f64 = 0.5;

pub fn sigma() -> CMat {
    linalg::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]])
}

/// Convention flags printed in every disc report.
#[derive(Debug, Clone, Serialize)]
pub struct DiscConventions {
    pub trace_coordinates: &'static str,
    pub normal_variable: &'static str,
    pub mode_zero_cut: f64,
    pub mode_zero_calderon: &'static str,
    pub exterior_complement: &'static str,
    pub adjoint_measure: &'static str,
}

impl FourierModel {
    pub fn parse(name: &str, alpha: Option<&str>, shift: f64) -> Result<Self> {
        match name {
            "d0" | "disc_d0" => Ok(FourierModel::DiscD0),
            "d_alpha" | "disc_d_alpha" => Ok(FourierModel::DiscDAlpha {
                alpha: AlphaProfile::parse(alpha.unwrap_or("cubic:1.0"))?,
            }),
            "laplace" | "disc_laplace" => Ok(FourierModel::DiscLaplace { shift }),
            other => Err(Error::InvalidInput(format!(
                "unknown model `{other}` (d0, d_alpha, laplace)"
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            FourierModel::DiscD0 => "disc_d0".into(),
            FourierModel::DiscDAlpha { alpha } => format!("disc_d_alpha({})", alpha.name()),
            FourierModel::DiscLaplace { shift } => format!("disc_laplace(shift={shift})"),
            FourierModel::HalfCylinder { .. } => "half_cylinder_first_order".into(),
        }
    }

    pub fn order(&self) -> usize {
        match self {
            FourierModel::DiscLaplace { .. } => 2,
            _ => 1,
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            FourierModel::DiscLaplace { .. } => 1,
            _ => 2,
        }
    }

    pub fn trace_dim(&self) -> usize {
        self.order() * self.rank()
    }

    /// Flags the non-self-adjoint case of complex alpha.
    pub fn complex_alpha(&self) -> bool {
        matches!(self, FourierModel::DiscDAlpha { alpha } if !alpha.is_real())
    }

    pub fn conventions(&self) -> DiscConventions {
        let (tc, nv) = match self {
            FourierModel::DiscLaplace { .. } => ("(u, d_r u) at r = 1 (outward normal)", "r"),
            FourierModel::HalfCylinder { .. } => ("(u_1, u_2) at t = 0", "t inward"),
            _ => ("(u_1, u_2) at r = 1", "x_n = 1 - r inward"),
        };
        DiscConventions {
            trace_coordinates: tc,
            normal_variable: nv,
            mode_zero_cut: MODE_ZERO_CUT,
            mode_zero_calderon: "P_C(0) = I: constants are interior Hardy elements",
            exterior_complement: "Riemann-sphere exterior (decaying or bounded exterior solutions)",
            adjoint_measure: "r dr dtheta; D_alpha^dagger = D_alpha - sigma / r",
        }
    }

    fn alpha_coeffs(&self) -> Vec<C64> {
        match self {
            FourierModel::DiscDAlpha { alpha } => alpha.coeffs(),
            _ => vec![],
        }
    }

    /// Radial system of D u = lambda u (or of the formal adjoint) in mode n.
    pub fn radial_system(&self, n: i64, lambda: C64, adjoint: bool) -> Result<RadialSystem> {
        let nf = n as f64;
        match self {
            FourierModel::DiscD0 | FourierModel::DiscDAlpha { .. } => {
                let a = adapted_boundary_operator(self, n)?;
                let m0 = if adjoint { a - linalg::identity(2) } else { a };
                let alpha = self.alpha_coeffs();
                let len = alpha.len().max(1);
                let mut m1 = vec![CMat::zeros(2, 2); len];
                for (j, b) in m1.iter_mut().enumerate() {
                    let aj = alpha.get(j).copied().unwrap_or_default();
                    let aj = if adjoint { aj.conj() } else { aj };
                    let mut coef = aj * nf;
                    if j == 0 {
                        coef += lambda;
                    }
                    *b = sigma() * coef;
                }
                Ok(RadialSystem { m0, m1 })
            }
            FourierModel::DiscLaplace { shift } => {
                let mu = C64::from(*shift) - lambda;
                let m0 = CMat::from_row_slice(
                    2,
                    2,
                    &[C64::from(0.0), C64::from(1.0), C64::from(nf * nf), C64::from(0.0)],
                );
                let mut b1 = CMat::zeros(2, 2);
                b1[(1, 0)] = mu;
                Ok(RadialSystem {
                    m0,
                    m1: vec![CMat::zeros(2, 2), b1],
                })
            }
            FourierModel::HalfCylinder { .. } => Err(Error::InvalidInput(
                "the half-cylinder model has no radial system".into(),
            )),
        }
    }

    /// Traces at the boundary of a basis of solutions of D u = lambda u that
    /// are square integrable near the centre (exponents with Re rho > -1).
    pub fn regular_traces(&self, n: i64, lambda: C64, adjoint: bool) -> Result<CMat> {
        if let FourierModel::HalfCylinder { .. } = self {
            if lambda != C64::from(0.0) {
                return Err(Error::InvalidInput(
                    "half-cylinder traces are only available at lambda = 0".into(),
                ));
            }
            let a = adapted_boundary_operator(self, n)?;
            return half_cylinder_split(&a, n).map(|(p, _)| linalg::orth(&p, 1e-10));
        }
        let sys = self.radial_system(n, lambda, adjoint)?;
        let opts = OdeOptions::default();
        let mut cols: Vec<CVec> = Vec::new();
        for (rho, v) in regular_starts(&sys) {
            cols.push(regular_solution_at_one(&sys, rho, &v, &opts).map_err(|e| ode_error(e, n))?);
        }
        Ok(columns(sys.dim(), &cols))
    }

    /// Regular solutions of D u = lambda u in mode n sampled at the given
    /// radii, stacked into one column per solution.
    pub fn regular_samples(&self, n: i64, lambda: C64, radii: &[f64]) -> Result<CMat> {
        let sys = self.radial_system(n, lambda, false)?;
        let opts = OdeOptions::default();
        let mut cols: Vec<CVec> = Vec::new();
        for (rho, v) in regular_starts(&sys) {
            let samples = regular_solution_on(&sys, rho, &v, radii, &opts).map_err(|e| ode_error(e, n))?;
            let stacked: Vec<C64> = samples.iter().flat_map(|w| w.iter().copied()).collect();
            cols.push(CVec::from_vec(stacked));
        }
        Ok(columns(sys.dim() * radii.len(), &cols))
    }

    /// Traces of the exterior complement in mode n (lambda = 0).
    pub fn exterior_traces(&self, n: i64) -> Result<CMat> {
        match self {
            FourierModel::DiscD0 | FourierModel::DiscDAlpha { .. } => {
                // alpha vanishes outside, so the exterior problem is D_0's
                let mut x = CMat::zeros(2, 0);
                if n > 0 {
                    x = CMat::from_column_slice(2, 1, &[C64::from(0.0), C64::from(1.0)]);
                } else if n < 0 {
                    x = CMat::from_column_slice(2, 1, &[C64::from(1.0), C64::from(0.0)]);
                }
                Ok(x)
            }
            FourierModel::HalfCylinder { .. } => {
                let a = adapted_boundary_operator(self, n)?;
                half_cylinder_split(&a, n).map(|(_, m)| linalg::orth(&m, 1e-10))
            }
            FourierModel::DiscLaplace { shift } => {
                let y = exterior_log_derivative(n, *shift)?;
                Ok(CMat::from_column_slice(2, 1, &[C64::from(1.0), C64::from(y)]))
            }
        }
    }
}

fn ode_error(e: Error, n: i64) -> Error {
    match e {
        Error::Ode { reason, .. } => Error::Ode { mode: n, reason },
        Error::Numerical { message, .. } => Error::Ode { mode: n, reason: message },
        other => other,
    }
}

fn columns(rows: usize, cols: &[CVec]) -> CMat {
    let mut out = CMat::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

/// Exponents rho with Re rho > -1 (square integrable near the centre) and
/// the leading vectors of the matching Frobenius solutions.
fn regular_starts(sys: &RadialSystem) -> Vec<(C64, CVec)> {
    let mut exps: Vec<C64> = Vec::new();
    for ev in linalg::eigenvalues(&sys.m0) {
        if !exps.iter().any(|e| (e - ev).norm() < 1e-9) {
            exps.push(ev);
        }
    }
    let mut out = Vec::new();
    for rho in exps {
        if rho.re <= -1.0 + 1e-9 {
            continue;
        }
        let rho = C64::new(rho.re.round(), 0.0);
        let shifted = &sys.m0 - linalg::identity(sys.dim()) * rho;
        let vs = linalg::null_space(&shifted, 1e-10);
        for j in 0..vs.ncols() {
            out.push((rho, vs.column(j).into_owned()));
        }
    }
    out
}

fn half_cylinder_split(a: &CMat, n: i64) -> Result<(CMat, CMat)> {
    let margin = linalg::eigenvalues(a).iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    if margin < 1e-10 {
        return Err(Error::Transversality { mode: n, margin });
    }
    let p = linalg::right_of_projector(a, 0.0, 0.0)?;
    let m = linalg::identity(a.nrows()) - &p;
    Ok((p, m))
}

/// r u'/u at r = 1 for the exterior solution of u'' + u'/r - n^2 u/r^2 = mu u
/// decaying (or bounded) at infinity.
pub fn exterior_log_derivative(n: i64, mu: f64) -> Result<f64> {
    let nf = (n as f64).abs();
    if mu < 0.0 {
        return Err(Error::InvalidInput(format!(
            "exterior problem needs a non-negative shift, got {mu}"
        )));
    }
    if mu == 0.0 {
        if n == 0 {
            // constants are bounded at infinity and also interior solutions
            return Err(Error::Transversality { mode: 0, margin: 0.0 });
        }
        return Ok(-nf);
    }
    let sm = mu.sqrt();
    let big_r = 40.0 / sm + 4.0 * nf / sm + 2.0;
    let y0 = -(nf * nf + mu * big_r * big_r).sqrt() - 0.5;
    let start = CVec::from_vec(vec![C64::from(y0)]);
    let (y, _) = super::ode::dopri5(
        |s, y| {
            let r2 = (2.0 * s).exp();
            CVec::from_vec(vec![C64::from(nf * nf + mu * r2) - y[0] * y[0]])
        },
        big_r.ln(),
        0.0,
        &start,
        &OdeOptions::default(),
    )?;
    Ok(y[0].re)
}

/// A(n) of a first-order model.
pub fn adapted_boundary_operator(model: &FourierModel, n: i64) -> Result<CMat> {
    match model {
        FourierModel::DiscD0 | FourierModel::DiscDAlpha { .. } => {
            Ok(linalg::diag(&[C64::from(n as f64), C64::from(-(n as f64))]))
        }
        FourierModel::HalfCylinder { k, l } => Ok(k * C64::from(n as f64) + l),
        FourierModel::DiscLaplace { .. } => Err(Error::InvalidInput(
            "adapted boundary operators exist for first-order models only".into(),
        )),
    }
}

/// Per-mode matrices (n, M(n)).
pub type ModeMats = Vec<(i64, CMat)>;

pub fn modes(trunc: usize) -> Vec<i64> {
    let n = trunc as i64;
    (-n..=n).collect()
}

/// chi^+(A(n) - cut) for every mode.
pub fn chi_plus(a_modes: &ModeMats, cut: f64) -> Result<ModeMats> {
    let mut bad = Vec::new();
    for (n, a) in a_modes {
        if linalg::eigenvalues(a).iter().any(|ev| (ev.re - cut).abs() < 1e-10 && ev.im.abs() < 1e-10) {
            bad.push(*n);
        }
    }
    if !bad.is_empty() {
        return Err(Error::InvalidInput(format!(
            "cut {cut} is an eigenvalue of A(n) for modes {bad:?}"
        )));
    }
    a_modes
        .iter()
        .map(|(n, a)| {
            let is_diag = (0..a.nrows()).all(|i| (0..a.ncols()).all(|j| i == j || a[(i, j)] == C64::from(0.0)));
            let p = if is_diag {
                linalg::diag(
                    &(0..a.nrows())
                        .map(|i| C64::from(if a[(i, i)].re > cut { 1.0 } else { 0.0 }))
                        .collect::<Vec<_>>(),
                )
            } else {
                linalg::right_of_projector(a, cut, 0.0)?
            };
            Ok((*n, p))
        })
        .collect()
}

pub fn adapted_modes(model: &FourierModel, trunc: usize) -> Result<ModeMats> {
    modes(trunc)
        .into_iter()
        .map(|n| Ok((n, adapted_boundary_operator(model, n)?)))
        .collect()
}

/// chi^+(A) with the mode-zero cut of the disc models.
pub fn chi_plus_model(model: &FourierModel, trunc: usize) -> Result<ModeMats> {
    let cut = match model {
        FourierModel::HalfCylinder { .. } => 0.0,
        _ => MODE_ZERO_CUT,
    };
    chi_plus(&adapted_modes(model, trunc)?, cut)
}

/// Per-mode basis of the Hardy space C_D (traces of regular solutions of
/// D u = 0).
pub fn hardy_modes(model: &FourierModel, trunc: usize) -> Result<ModeMats> {
    modes(trunc)
        .into_par_iter()
        .map(|n| Ok((n, model.regular_traces(n, C64::from(0.0), false)?)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeProjector {
    pub n: i64,
    #[serde(with = "crate::json::cmat_rows")]
    pub p: CMat,
    pub transversality: f64,
}

/// Projector onto the Hardy space along the exterior Hardy space, per mode.
pub fn calderon_mode(model: &FourierModel, n: i64) -> Result<ModeProjector> {
    let h = model.regular_traces(n, C64::from(0.0), false)?;
    let x = model.exterior_traces(n)?;
    let d = model.trace_dim();
    if h.ncols() + x.ncols() != d {
        return Err(Error::Transversality { mode: n, margin: 0.0 });
    }
    let margin = linalg::transversality_margin(&h, &x);
    if margin < 1e-8 {
        return Err(Error::Transversality { mode: n, margin });
    }
    Ok(ModeProjector {
        n,
        p: linalg::oblique_projector(&h, &x)?,
        transversality: margin,
    })
}

pub fn calderon_modes(model: &FourierModel, trunc: usize) -> Result<Vec<ModeProjector>> {
    modes(trunc)
        .into_par_iter()
        .map(|n| calderon_mode(model, n))
        .collect()
}

/// Lambda_DN(n) = d_r u / u at r = 1 of the regular solution.
pub fn dtn_mode(model: &FourierModel, n: i64) -> Result<f64> {
    let FourierModel::DiscLaplace { .. } = model else {
        return Err(Error::InvalidInput("Dirichlet-to-Neumann maps need the Laplace model".into()));
    };
    let h = model.regular_traces(n, C64::from(0.0), false)?;
    let u = h[(0, 0)];
    if u.norm() < 1e-12 * h.norm() {
        return Err(Error::numerical(
            "dtn_modes",
            format!("Dirichlet problem not uniquely solvable at mode {n}"),
        ));
    }
    Ok((h[(1, 0)] / u).re)
}

pub fn dtn_modes(model: &FourierModel, trunc: usize) -> Result<Vec<(i64, f64)>> {
    modes(trunc)
        .into_par_iter()
        .map(|n| Ok((n, dtn_mode(model, n)?)))
        .collect()
}

/// P_{zeta,d}(n) = [[1, 0], [Lambda(n), 0]]: projection onto C_D along the
/// Neumann-data line.
pub fn dirichlet_neumann_projector(lambda: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[C64::from(1.0), C64::from(0.0), C64::from(lambda), C64::from(0.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn bessel_i(n: u32, x: f64) -> f64 {
        // power series, used as an independent oracle
        let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
        let mut sum = term;
        for k in 1..200 {
            term *= (x / 2.0).powi(2) / (k as f64 * (k + n) as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    }

    fn bessel_k_log_derivative(n: f64, x: f64) -> f64 {
        // K_n(x) = int_0^inf exp(-x cosh t) cosh(n t) dt, K_n' from the same
        let (mut k, mut dk) = (0.0, 0.0);
        let h = 1e-3;
        for i in 0..40000 {
            let t = (i as f64 + 0.5) * h;
            let e = (-x * t.cosh()).exp();
            k += e * (n * t).cosh() * h;
            dk -= e * t.cosh() * (n * t).cosh() * h;
        }
        x * dk / k
    }

    #[test]
    fn profiles_vanish_at_the_boundary() {
        for p in ["cubic:1", "bump:1", "mixed:1", "flat:1"] {
            let a = AlphaProfile::parse(p).unwrap();
            assert!(a.eval(1.0).norm() < 1e-15);
        }
        assert!((AlphaProfile::parse("cubic:2").unwrap().derivative_at_one() - c(2.0, 0.0)).norm() < 1e-14);
        assert!((AlphaProfile::parse("bump:1").unwrap().derivative_at_one() - c(1.0, 0.0)).norm() < 1e-14);
        assert!((AlphaProfile::parse("mixed:1").unwrap().derivative_at_one() - c(1.0, 0.0)).norm() < 1e-14);
        assert!(AlphaProfile::parse("flat:1").unwrap().derivative_at_one().norm() < 1e-14);
        assert!(AlphaProfile::poly(vec![c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn adapted_operator_and_cut() {
        let a = adapted_modes(&FourierModel::DiscD0, 3).unwrap();
        assert_eq!(a[6].1, linalg::diag(&[c(3.0, 0.0), c(-3.0, 0.0)]));
        let chi = chi_plus(&a, 0.5).unwrap();
        assert_eq!(chi[6].1, linalg::diag(&[c(1.0, 0.0), c(0.0, 0.0)]));
        assert_eq!(chi[3].1, CMat::zeros(2, 2));
        let err = chi_plus(&a, 3.0).unwrap_err().to_string();
        assert!(err.contains("[-3, 3]"), "{err}");
        assert!(adapted_boundary_operator(&FourierModel::DiscLaplace { shift: 1.0 }, 2).is_err());
    }

    #[test]
    fn d0_hardy_space_is_chi_plus() {
        let model = FourierModel::DiscD0;
        let chi = chi_plus_model(&model, 6).unwrap();
        for (mp, (n, x)) in calderon_modes(&model, 6).unwrap().iter().zip(&chi) {
            assert_eq!(mp.n, *n);
            if *n == 0 {
                assert!(linalg::max_abs_diff(&mp.p, &linalg::identity(2)) < 1e-12);
            } else {
                assert!(linalg::max_abs_diff(&mp.p, x) < 1e-12, "mode {n}");
            }
        }
        let h = hardy_modes(&model, 2).unwrap();
        assert_eq!(h[2].1.ncols(), 2);
        assert!((h[3].1[(0, 0)].norm() - 1.0).abs() < 1e-12 && h[3].1[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn laplace_traces_against_bessel_oracles() {
        let pure = FourierModel::DiscLaplace { shift: 0.0 };
        for n in [-5i64, -1, 0, 2, 7] {
            assert!((dtn_mode(&pure, n).unwrap() - n.abs() as f64).abs() < 1e-10);
        }
        let shifted = FourierModel::DiscLaplace { shift: 1.0 };
        for n in [0u32, 1, 4] {
            let oracle = (bessel_i(n + 1, 1.0) + n as f64 * bessel_i(n, 1.0)) / bessel_i(n, 1.0);
            assert!((dtn_mode(&shifted, n as i64).unwrap() - oracle).abs() < 1e-10, "n={n}");
            let ext = exterior_log_derivative(n as i64, 1.0).unwrap();
            assert!((ext - bessel_k_log_derivative(n as f64, 1.0)).abs() < 1e-6, "n={n}");
        }
        assert!(matches!(
            calderon_mode(&pure, 0),
            Err(Error::Transversality { mode: 0, .. })
        ));
    }

    #[test]
    fn laplace_calderon_approaches_the_symbol() {
        let model = FourierModel::DiscLaplace { shift: 1.0 };
        let n = 200i64;
        let p = calderon_mode(&model, n).unwrap().p;
        let scaled = CMat::from_row_slice(
            2,
            2,
            &[p[(0, 0)], p[(0, 1)] * n as f64, p[(1, 0)] / n as f64, p[(1, 1)]],
        );
        let half = linalg::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(linalg::max_abs_diff(&scaled, &half) < 1e-2);
        assert!(linalg::idempotence_residual(&p) < 1e-10);
        let pz = dirichlet_neumann_projector(dtn_mode(&model, 3).unwrap());
        assert!(linalg::idempotence_residual(&pz) < 1e-14);
    }

    #[test]
    fn d_alpha_traces_agree_with_series() {
        let model = FourierModel::DiscDAlpha {
            alpha: AlphaProfile::parse("mixed:1").unwrap(),
        };
        for n in [-4i64, 1, 9] {
            let sys = model.radial_system(n, C64::from(0.0), false).unwrap();
            let rho = C64::from(n.abs() as f64);
            let v = if n > 0 {
                CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])
            } else {
                CVec::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)])
            };
            let series = super::super::ode::eval_series(
                &super::super::ode::frobenius_series(&sys, rho, &v, 400).unwrap(),
                1.0,
            );
            let ode = model.regular_traces(n, C64::from(0.0), false).unwrap();
            assert_eq!(ode.ncols(), 1);
            // the null-space basis vector may carry a phase
            let k = if n > 0 { 0 } else { 1 };
            let scale = ode[(k, 0)] / series[k];
            assert!((ode.column(0) - &series * scale).norm() < 1e-10 * ode.column(0).norm(), "n={n} ode={} series={}", ode.column(0), series * scale);
        }
        // adjoint: no regular solution in mode 0
        assert_eq!(model.regular_traces(0, C64::from(0.0), true).unwrap().ncols(), 0);
        assert_eq!(model.regular_traces(3, C64::from(0.0), true).unwrap().ncols(), 1);
    }
}
