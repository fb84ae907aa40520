//! E_+(D), p_+(D) and Riesz projections.
//!
//! Trace jets are handled in (v, D_t v, ..., D_t^{m-1} v) coordinates with
//! t the inward normal variable and D_t = -i d/dt. Use [`TraceConvention`] to
//! move to normal-derivative coordinates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, I};
use crate::symbol::{CollarOperator, CosphereGrid, CospherePoint, ProjectorField, IDEMPOTENCE_TOL};

/// Real roots closer than this to the axis count as an ellipticity violation.
pub const ROOT_MARGIN: f64 = 1e-8;

/// Coordinates for trace jets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceConvention {
    /// (v, D_t v, ..., D_t^{m-1} v), D_t = -i d/dt, t inward
    DtJet,
    /// (v, d_t v, ..., d_t^{m-1} v), t inward
    InwardNormal,
    /// (v, d_nu v, ..., d_nu^{m-1} v), nu the outward normal
    OutwardNormal,
}

impl TraceConvention {
    pub fn name(&self) -> &'static str {
        match self {
            TraceConvention::DtJet => "dt_jet",
            TraceConvention::InwardNormal => "inward_normal",
            TraceConvention::OutwardNormal => "outward_normal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dt_jet" | "dt" => Ok(TraceConvention::DtJet),
            "inward_normal" | "inward" => Ok(TraceConvention::InwardNormal),
            "outward_normal" | "outward" => Ok(TraceConvention::OutwardNormal),
            other => Err(Error::InvalidInput(format!(
                "unknown trace convention `{other}` (dt_jet, inward_normal, outward_normal)"
            ))),
        }
    }

    /// Diagonal S with w_conv = S w_dt.
    pub fn conjugator(&self, m: usize, rank: usize) -> CMat {
        let unit = match self {
            TraceConvention::DtJet => C64::new(1.0, 0.0),
            // d_t = i D_t
            TraceConvention::InwardNormal => I,
            // d_nu = -d_t = -i D_t
            TraceConvention::OutwardNormal => -I,
        };
        let d: Vec<C64> = (0..m * rank).map(|k| unit.powu((k / rank) as u32)).collect();
        linalg::diag(&d)
    }

    /// Express an endomorphism of D_t-jets in this convention.
    pub fn transform(&self, p: &CMat, m: usize, rank: usize) -> CMat {
        let s = self.conjugator(m, rank);
        let si = linalg::diag(
            &(0..m * rank)
                .map(|k| C64::new(1.0, 0.0) / s[(k, k)])
                .collect::<Vec<_>>(),
        );
        &s * p * si
    }
}

/// sum_l a_l(xi') xi_n^{m-l}, stored by ascending power of xi_n.
#[derive(Debug, Clone)]
pub struct MatrixPolynomial {
    pub coeffs: Vec<CMat>,
}

impl MatrixPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> &CMat {
        self.coeffs.last().unwrap()
    }

    pub fn eval(&self, z: C64) -> CMat {
        let mut acc = self.leading().clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc * z + c;
        }
        acc
    }
}

pub fn conormal_symbol(op: &CollarOperator, p: &CospherePoint) -> Result<MatrixPolynomial> {
    let m = op.m;
    let mut coeffs = vec![CMat::zeros(op.rank(), op.rank()); m + 1];
    for l in 0..=m {
        coeffs[m - l] = op.coefficient_at(l, p)?;
    }
    Ok(MatrixPolynomial { coeffs })
}

/// Block companion matrix of A_0^{-1} sigma_cn acting on D_t-jets.
pub fn companion_matrix(op: &CollarOperator, p: &CospherePoint) -> Result<CMat> {
    companion_matrix_at(op, p, 1.0)
}

/// Principal symbol of P_C at scale * xi' (off the cosphere), in D_t-jets.
pub fn p_plus_at_scale(op: &CollarOperator, p: &CospherePoint, scale: f64) -> Result<CMat> {
    if scale <= 0.0 {
        return Err(Error::InvalidInput(format!("covector scale must be positive, got {scale}")));
    }
    linalg::upper_half_plane_projector(&companion_matrix_at(op, p, scale)?, ROOT_MARGIN)
}

fn companion_matrix_at(op: &CollarOperator, p: &CospherePoint, scale: f64) -> Result<CMat> {
    let r = op.rank();
    let m = op.m;
    let a0inv = linalg::inverse(op.a0(), "A_0")?;
    let mut c = CMat::zeros(r * m, r * m);
    for j in 0..m - 1 {
        for d in 0..r {
            c[(j * r + d, (j + 1) * r + d)] = C64::new(1.0, 0.0);
        }
    }
    for k in 0..m {
        let blk = -(&a0inv * op.coeffs[m - k].eval(p, scale)?);
        c.view_mut(((m - 1) * r, k * r), (r, r)).copy_from(&blk);
    }
    Ok(c)
}

#[derive(Debug, Clone)]
pub struct CompanionSplit {
    pub point: CospherePoint,
    pub roots: Vec<C64>,
    /// min |Im root|
    pub margin: f64,
    pub companion: CMat,
    pub basis_plus: CMat,
    pub basis_minus: CMat,
    pub p_plus: CMat,
}

impl CompanionSplit {
    pub fn dim_plus(&self) -> usize {
        self.basis_plus.ncols()
    }

    pub fn dim_minus(&self) -> usize {
        self.basis_minus.ncols()
    }

    pub fn p_minus(&self) -> CMat {
        linalg::identity(self.p_plus.nrows()) - &self.p_plus
    }
}

pub fn boundary_ode_split(op: &CollarOperator, p: &CospherePoint) -> Result<CompanionSplit> {
    let c = companion_matrix(op, p)?;
    let roots = linalg::eigenvalues(&c);
    let margin = roots.iter().map(|z| z.im.abs()).fold(f64::INFINITY, f64::min);
    if margin < ROOT_MARGIN {
        return Err(Error::NotElliptic {
            context: format!("covector {:?}: conormal root on the real axis", p.covector),
            margin,
        });
    }
    let p_plus = linalg::upper_half_plane_projector(&c, 0.0)?;
    let n = p_plus.nrows();
    let basis_plus = linalg::orth(&p_plus, 1e-8);
    let basis_minus = linalg::orth(&(linalg::identity(n) - &p_plus), 1e-8);
    let upper = roots.iter().filter(|z| z.im > 0.0).count();
    if basis_plus.ncols() != upper || basis_plus.ncols() + basis_minus.ncols() != n {
        return Err(Error::numerical(
            "boundary_ode_split",
            format!(
                "rank of p_plus ({}) does not match the {upper} upper roots",
                basis_plus.ncols()
            ),
        ));
    }
    Ok(CompanionSplit {
        point: p.clone(),
        roots,
        margin,
        companion: c,
        basis_plus,
        basis_minus,
        p_plus,
    })
}

/// Companion splits at every grid point, computed in parallel.
pub fn split_on_grid(op: &CollarOperator, grid: &CosphereGrid) -> Result<Vec<CompanionSplit>> {
    grid.points
        .par_iter()
        .map(|p| boundary_ode_split(op, p))
        .collect()
}

pub fn p_plus_field(op: &CollarOperator, grid: &CosphereGrid) -> Result<ProjectorField> {
    let values = split_on_grid(op, grid)?.into_iter().map(|s| s.p_plus).collect();
    ProjectorField::new(values, IDEMPOTENCE_TOL)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidueResult {
    #[serde(with = "crate::json::cmat_rows")]
    pub matrix: CMat,
    pub nodes: usize,
    pub circles: usize,
    /// difference between the last two node counts
    pub convergence: f64,
}

/// Contour circles enclosing exactly the upper roots.
fn upper_contours(roots: &[C64]) -> Result<Vec<(C64, f64)>> {
    let upper: Vec<C64> = roots.iter().copied().filter(|z| z.im > 0.0).collect();
    let lower: Vec<C64> = roots.iter().copied().filter(|z| z.im <= 0.0).collect();
    if upper.is_empty() {
        return Ok(Vec::new());
    }
    let center = upper.iter().sum::<C64>() / upper.len() as f64;
    let spread = upper.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
    let half_gap = 0.5 * upper.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
    let radius = 1.5 * spread + half_gap;
    let separated = |c: C64, r: f64, inside: &[C64], outside: &[C64]| {
        inside.iter().all(|z| (z - c).norm() < r * (1.0 - 1e-3))
            && outside.iter().all(|z| (z - c).norm() > r * (1.0 + 1e-3))
    };
    if separated(center, radius, &upper, &lower) {
        return Ok(vec![(center, radius)]);
    }
    // one circle per cluster of coincident upper roots
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for z in &upper {
        match clusters
            .iter_mut()
            .find(|c| (c[0] - z).norm() < 1e-6 * (1.0 + z.norm()))
        {
            Some(c) => c.push(*z),
            None => clusters.push(vec![*z]),
        }
    }
    let mut out = Vec::new();
    for cl in &clusters {
        let c = cl.iter().sum::<C64>() / cl.len() as f64;
        let nearest = roots
            .iter()
            .filter(|z| (*z - c).norm() >= 1e-6 * (1.0 + c.norm()))
            .map(|z| (z - c).norm())
            .fold(f64::INFINITY, f64::min);
        let r = (0.5 * nearest).min(0.5 * c.im);
        if r < ROOT_MARGIN {
            return Err(Error::Contour(format!(
                "upper root {c} is within {r:e} of another root or the real axis"
            )));
        }
        out.push((c, r));
    }
    Ok(out)
}

fn residue_sum(poly: &MatrixPolynomial, circles: &[(C64, f64)], nodes: usize) -> Result<CMat> {
    let m = poly.degree();
    let r = poly.leading().nrows();
    let mut q = CMat::zeros(r * m, r * m);
    for &(center, radius) in circles {
        for k in 0..nodes {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / nodes as f64;
            let w = C64::from_polar(radius, theta);
            let z = center + w;
            let ainv = linalg::inverse(&poly.eval(z), "conormal symbol on contour")?;
            let weight = w / nodes as f64;
            let mut zpow = vec![C64::new(1.0, 0.0); 2 * m];
            for i in 1..2 * m {
                zpow[i] = zpow[i - 1] * z;
            }
            // Q_{j,k} = sum_l z^{j+l} a^{-1} a_{m-k-l-1}; a_i multiplies z^{m-i}
            for kk in 0..m {
                for l in 0..m - kk {
                    let idx = m - kk - l - 1;
                    let coeff = &poly.coeffs[m - idx];
                    let block = &ainv * coeff;
                    for j in 0..m {
                        let f = weight * zpow[j + l];
                        let mut view = q.view_mut((j * r, kk * r), (r, r));
                        view += &block * f;
                    }
                }
            }
        }
    }
    Ok(q)
}

/// p_+ from the residue formula, evaluated by trapezoidal contour integrals.
pub fn p_plus_residue(op: &CollarOperator, p: &CospherePoint) -> Result<ResidueResult> {
    let poly = conormal_symbol(op, p)?;
    let c = companion_matrix(op, p)?;
    let roots = linalg::eigenvalues(&c);
    let margin = roots.iter().map(|z| z.im.abs()).fold(f64::INFINITY, f64::min);
    if margin < ROOT_MARGIN {
        return Err(Error::Contour(format!(
            "roots within {margin:e} of the real axis cannot be separated"
        )));
    }
    let circles = upper_contours(&roots)?;
    let mut nodes = 256;
    let mut prev = residue_sum(&poly, &circles, nodes)?;
    loop {
        let next = residue_sum(&poly, &circles, 2 * nodes)?;
        let diff = linalg::max_abs_diff(&next, &prev);
        nodes *= 2;
        if diff <= 1e-10 || nodes >= 1 << 15 {
            if diff > 1e-10 {
                return Err(Error::numerical(
                    "p_plus_residue",
                    format!("contour quadrature did not converge (change {diff:e})"),
                ));
            }
            return Ok(ResidueResult {
                matrix: next,
                nodes,
                circles: circles.len(),
                convergence: diff,
            });
        }
        prev = next;
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Contour {
    #[serde(with = "crate::json::c64_pair")]
    pub center: C64,
    pub radius: f64,
    pub n_points: usize,
}

/// Riesz projection of every matrix in the field; checks idempotence and
/// commutation with the input.
pub fn riesz_projection(field: &[CMat], contour: &Contour) -> Result<ProjectorField> {
    let mut out = Vec::with_capacity(field.len());
    for (i, m) in field.iter().enumerate() {
        let p = linalg::riesz_projector(m, contour.center, contour.radius, contour.n_points)
            .map_err(|e| match e {
                Error::Contour(msg) => Error::Contour(format!("point {i}: {msg}")),
                other => other,
            })?;
        let scale = m.norm().max(1.0);
        let idem = linalg::idempotence_residual(&p);
        let comm = linalg::commutator(&p, m).norm();
        if idem > IDEMPOTENCE_TOL * p.norm().max(1.0) || comm > IDEMPOTENCE_TOL * scale * p.norm().max(1.0) {
            return Err(Error::numerical(
                "riesz_projection",
                format!("point {i}: idempotence {idem:e}, commutator {comm:e}; increase n_points"),
            ));
        }
        out.push(p);
    }
    Ok(ProjectorField {
        values: out,
        tolerance: IDEMPOTENCE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::symbol::{Geometry, Polynomial, SymbolMatrix};

    fn p1() -> CospherePoint {
        CospherePoint::new(vec![0.0], vec![1.0]).unwrap()
    }

    fn laplace() -> CollarOperator {
        CollarOperator::new(
            Geometry::Circle,
            vec![
                SymbolMatrix::identity(1, 1),
                SymbolMatrix::zeros(1, 1, 1),
                SymbolMatrix::new(
                    1,
                    1,
                    1,
                    vec![Polynomial::monomial(1, vec![2], 0, c(1.0, 0.0)).unwrap()],
                )
                .unwrap(),
            ],
        )
        .unwrap()
    }

    /// D = sigma (d_t + A) with sigma = [[0,1],[-1,0]], c_A(xi) = diag(-xi, xi)
    fn first_order() -> CollarOperator {
        let sigma = linalg::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let a0 = &sigma * I;
        let mut a1 = SymbolMatrix::zeros(2, 2, 1);
        // sigma c_A = [[0, xi], [xi, 0]]
        let xi = Polynomial::monomial(1, vec![1], 0, c(1.0, 0.0)).unwrap();
        a1.set(0, 1, xi.clone()).unwrap();
        a1.set(1, 0, xi).unwrap();
        CollarOperator::new(Geometry::Circle, vec![SymbolMatrix::from_const(&a0, 1), a1]).unwrap()
    }

    #[test]
    fn laplace_conormal_and_split() {
        let op = laplace();
        let poly = conormal_symbol(&op, &p1()).unwrap();
        assert_eq!(poly.eval(c(2.0, 0.0))[(0, 0)], c(5.0, 0.0));
        assert_eq!(poly.leading(), op.a0());
        let s = boundary_ode_split(&op, &p1()).unwrap();
        assert_eq!((s.dim_plus(), s.dim_minus()), (1, 1));
        for z in s.p_plus.iter() {
            assert!((z.norm() - 0.5).abs() < 1e-12);
        }
        // D_t jets of e^{-t}: (1, i)
        let expected = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.5, 0.0)]);
        assert!(linalg::max_abs_diff(&s.p_plus, &expected) < 1e-12);
    }

    #[test]
    fn conventions_give_the_laplace_matrix() {
        let s = boundary_ode_split(&laplace(), &p1()).unwrap();
        let out = TraceConvention::OutwardNormal.transform(&s.p_plus, 2, 1);
        let expected = linalg::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(linalg::max_abs_diff(&out, &expected) < 1e-12);
        let inw = TraceConvention::InwardNormal.transform(&s.p_plus, 2, 1);
        let flipped = linalg::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        assert!(linalg::max_abs_diff(&inw, &flipped) < 1e-12);
    }

    #[test]
    fn first_order_split_is_chi_plus() {
        let s = boundary_ode_split(&first_order(), &p1()).unwrap();
        let expected = linalg::diag(&[c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(linalg::max_abs_diff(&s.p_plus, &expected) < 1e-12);
        let r = p_plus_residue(&first_order(), &p1()).unwrap();
        assert!(linalg::max_abs_diff(&r.matrix, &expected) < 1e-10);
    }

    #[test]
    fn residue_matches_split_for_laplace() {
        let s = boundary_ode_split(&laplace(), &p1()).unwrap();
        let r = p_plus_residue(&laplace(), &p1()).unwrap();
        assert!(linalg::max_abs_diff(&s.p_plus, &r.matrix) < 1e-9);
        assert!(linalg::idempotence_residual(&r.matrix) < 1e-9);
    }

    #[test]
    fn riesz_examples() {
        let contour = Contour {
            center: c(1.0, 0.0),
            radius: 0.5,
            n_points: 128,
        };
        let d = linalg::diag(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let f = riesz_projection(std::slice::from_ref(&d), &contour).unwrap();
        assert!(linalg::max_abs_diff(&f.values[0], &d) < 1e-12);
        let jordan = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let f = riesz_projection(&[jordan], &contour).unwrap();
        assert!(linalg::max_abs_diff(&f.values[0], &linalg::identity(2)) < 1e-12);
        let on = linalg::diag(&[c(1.5, 0.0), c(0.0, 0.0)]);
        let err = riesz_projection(&[d, on], &contour).unwrap_err();
        assert!(err.to_string().contains("point 1"), "{err}");
    }

    #[test]
    fn real_root_is_rejected() {
        let wave = CollarOperator::new(
            Geometry::Circle,
            vec![
                SymbolMatrix::identity(1, 1),
                SymbolMatrix::zeros(1, 1, 1),
                SymbolMatrix::new(
                    1,
                    1,
                    1,
                    vec![Polynomial::monomial(1, vec![2], 0, c(-1.0, 0.0)).unwrap()],
                )
                .unwrap(),
            ],
        )
        .unwrap();
        assert!(matches!(boundary_ode_split(&wave, &p1()), Err(Error::NotElliptic { .. })));
        assert!(matches!(p_plus_residue(&wave, &p1()), Err(Error::Contour(_))));
    }
}
