//! Green's formula matrices tau, atilde, a and adjoint boundary conditions.

use serde::Serialize;

use crate::calderon::boundary_ode_split;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, I};
use crate::symbol::{
    dn_order_check, CollarOperator, CosphereGrid, CospherePoint, DnVerdict, ProjectorField,
    SymbolMatrix, IDEMPOTENCE_TOL,
};

/// m x m antidiagonal permutation.
pub fn tau(m: usize) -> CMat {
    CMat::from_fn(m, m, |i, j| {
        if i + j + 1 == m {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn tau_kron(m: usize, rank: usize) -> CMat {
    tau(m).kronecker(&linalg::identity(rank))
}

/// Symbolic Green matrices of an operator. Only principal parts are kept:
/// block (j, k) of atilde is a_{j-k} for j >= k.
#[derive(Debug, Clone)]
pub struct GreenMatrices {
    pub m: usize,
    pub rank: usize,
    pub tau: CMat,
    pub atilde: SymbolMatrix,
    pub a: SymbolMatrix,
}

impl GreenMatrices {
    pub fn new(op: &CollarOperator) -> Result<Self> {
        let (m, r, dim) = (op.m, op.rank(), op.geometry.boundary_dim());
        let mut atilde = SymbolMatrix::zeros(r * m, r * m, dim);
        for j in 0..m {
            for k in 0..=j {
                atilde.set_block(j * r, k * r, &op.coeffs[j - k]);
            }
        }
        let t = tau_kron(m, r);
        let a = SymbolMatrix::left_const(&(&t * (-I)), &atilde)?;
        Ok(GreenMatrices {
            m,
            rank: r,
            tau: tau(m),
            atilde,
            a,
        })
    }

    pub fn weights(&self) -> Vec<i32> {
        (0..self.m * self.rank).map(|i| (i / self.rank) as i32).collect()
    }

    pub fn reversed_weights(&self) -> Vec<i32> {
        let m = self.m as i32;
        self.weights().into_iter().map(|w| m - 1 - w).collect()
    }

    pub fn atilde_dn(&self) -> DnVerdict {
        let w = self.weights();
        dn_order_check(&self.atilde, 0, &w, &w)
    }

    /// a maps weights (0..m-1) to the reversed weights.
    pub fn a_dn(&self) -> DnVerdict {
        dn_order_check(&self.a, 0, &self.reversed_weights(), &self.weights())
    }

    pub fn at(&self, p: &CospherePoint) -> Result<GreenAt> {
        Ok(GreenAt {
            atilde: self.atilde.eval(p, 1.0)?,
            a: self.a.eval(p, 1.0)?,
        })
    }

    /// Symbolic inverse of atilde by forward substitution. Block (j, k) has
    /// degree j - k.
    pub fn invert_atilde_symbolic(&self) -> Result<SymbolMatrix> {
        let (m, r) = (self.m, self.rank);
        let a0 = self.atilde.block(0, 0, r, r).as_constant().ok_or_else(|| {
            Error::InvalidInput("leading coefficient A_0 must be constant".into())
        })?;
        let a0inv = linalg::inverse(&a0, "A_0")?;
        let dim = self.atilde.dim();
        let mut blocks: Vec<Vec<SymbolMatrix>> = vec![vec![SymbolMatrix::zeros(r, r, dim); m]; m];
        for k in 0..m {
            blocks[k][k] = SymbolMatrix::from_const(&a0inv, dim);
            for j in k + 1..m {
                let mut acc = SymbolMatrix::zeros(r, r, dim);
                for l in k..j {
                    let prod = self.atilde.block(j * r, l * r, r, r).mul(&blocks[l][k])?;
                    acc = acc.add(&prod)?;
                }
                blocks[j][k] = SymbolMatrix::left_const(&(-&a0inv), &acc)?;
            }
        }
        let mut out = SymbolMatrix::zeros(r * m, r * m, dim);
        for (j, row) in blocks.iter().enumerate() {
            for (k, b) in row.iter().enumerate() {
                out.set_block(j * r, k * r, b);
            }
        }
        Ok(out)
    }

    pub fn invert_atilde(&self, p: &CospherePoint) -> Result<CMat> {
        self.invert_atilde_symbolic()?.eval(p, 1.0)
    }
}

/// Green matrices evaluated at a cosphere point.
#[derive(Debug, Clone)]
pub struct GreenAt {
    pub atilde: CMat,
    pub a: CMat,
}

/// P_dagger = (a^*)^{-1} (1 - P^*) a^*.
pub fn adjoint_projector(a: &CMat, p: &CMat) -> Result<CMat> {
    if a.nrows() != p.nrows() || p.nrows() != p.ncols() {
        return Err(Error::Dimension(format!(
            "projector is {}x{}, pairing matrix is {}x{}",
            p.nrows(),
            p.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    let astar = a.adjoint();
    let n = p.nrows();
    let inner = linalg::identity(n) - p.adjoint();
    linalg::solve(&astar, &(inner * &astar), "a^*")
}

/// Symbol of the adjoint boundary condition B_P^* = B_{P_dagger} on a grid.
pub fn adjoint_condition_symbol(
    g: &GreenMatrices,
    field: &ProjectorField,
    g_dagger: &GreenMatrices,
    grid: &CosphereGrid,
) -> Result<ProjectorField> {
    if g.m != g_dagger.m || g.rank != g_dagger.rank {
        return Err(Error::Dimension(format!(
            "D has (m, rank) = ({}, {}), D^dagger has ({}, {})",
            g.m, g.rank, g_dagger.m, g_dagger.rank
        )));
    }
    if field.values.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "projector field has {} points, grid has {}",
            field.values.len(),
            grid.len()
        )));
    }
    let mut out = Vec::with_capacity(grid.len());
    for (pt, p) in grid.points.iter().zip(&field.values) {
        let a = g.a.eval(pt, 1.0)?;
        out.push(adjoint_projector(&a, p)?);
    }
    ProjectorField::new(out, IDEMPOTENCE_TOL)
}

#[derive(Debug, Clone, Serialize)]
pub struct AdjointDualityReport {
    pub pass: bool,
    /// max over the grid of |a^* + a_dagger|
    pub green_residual: f64,
    /// max over the grid of |p_+(D^dagger) - [a (1 - p_+(D)) a^{-1}]^*|
    pub calderon_residual: f64,
    pub tolerance: f64,
    pub points: usize,
}

/// Residuals of the two adjoint identities at one point.
pub fn duality_residuals(
    a: &CMat,
    a_dagger: &CMat,
    p_plus: &CMat,
    p_plus_dagger: &CMat,
) -> Result<(f64, f64)> {
    let green = (a.adjoint() + a_dagger).norm();
    let n = p_plus.nrows();
    let ainv = linalg::inverse(a, "a")?;
    let predicted = (a * (linalg::identity(n) - p_plus) * ainv).adjoint();
    Ok((green, linalg::max_abs_diff(p_plus_dagger, &predicted)))
}

/// Checks a^* + a_dagger = 0 and the p_+ duality between D and D^dagger.
/// `g_dagger` is normally built from `op.formal_adjoint()`.
pub fn adjoint_duality_check(
    op: &CollarOperator,
    op_dagger: &CollarOperator,
    g_dagger: &GreenMatrices,
    grid: &CosphereGrid,
    tolerance: f64,
) -> Result<AdjointDualityReport> {
    let g = GreenMatrices::new(op)?;
    let mut green_residual: f64 = 0.0;
    let mut calderon_residual: f64 = 0.0;
    for pt in &grid.points {
        let a = g.a.eval(pt, 1.0)?;
        let ad = g_dagger.a.eval(pt, 1.0)?;
        let pp = boundary_ode_split(op, pt)?.p_plus;
        let ppd = boundary_ode_split(op_dagger, pt)?.p_plus;
        let (gr, cr) = duality_residuals(&a, &ad, &pp, &ppd)?;
        green_residual = green_residual.max(gr);
        calderon_residual = calderon_residual.max(cr);
    }
    Ok(AdjointDualityReport {
        pass: green_residual <= tolerance && calderon_residual <= tolerance,
        green_residual,
        calderon_residual,
        tolerance,
        points: grid.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::symbol::{build_cosphere_grid, Geometry, Polynomial};

    fn xi_pow(k: u32, coef: C64) -> Polynomial {
        Polynomial::monomial(1, vec![k], 0, coef).unwrap()
    }

    fn scalar(k: u32, coef: C64) -> SymbolMatrix {
        SymbolMatrix::new(1, 1, 1, vec![xi_pow(k, coef)]).unwrap()
    }

    /// D_t^m + |xi'|^m for even m, constant a_l otherwise zero
    fn dm_plus_a(m: usize) -> CollarOperator {
        let mut coeffs = vec![SymbolMatrix::identity(1, 1)];
        for _ in 1..m {
            coeffs.push(SymbolMatrix::zeros(1, 1, 1));
        }
        coeffs.push(scalar(m as u32, c(1.0, 0.0)));
        CollarOperator::new(Geometry::Circle, coeffs).unwrap()
    }

    fn pt() -> CospherePoint {
        CospherePoint::new(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn tau_is_an_involution() {
        let t = tau(3);
        assert_eq!(&t * &t, linalg::identity(3));
        assert_eq!(t[(0, 2)], c(1.0, 0.0));
        assert_eq!(t[(1, 1)], c(1.0, 0.0));
    }

    #[test]
    fn first_order_a_is_minus_i_sigma() {
        let sigma = linalg::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let mut a1 = SymbolMatrix::zeros(2, 2, 1);
        a1.set(0, 0, xi_pow(1, c(1.0, 0.0))).unwrap();
        a1.set(1, 1, xi_pow(1, c(-1.0, 0.0))).unwrap();
        let op = CollarOperator::new(
            Geometry::Circle,
            vec![SymbolMatrix::from_const(&sigma, 1), a1],
        )
        .unwrap();
        let g = GreenMatrices::new(&op).unwrap();
        let at = g.at(&pt()).unwrap();
        assert!(linalg::max_abs_diff(&at.a, &(&sigma * (-I))) < 1e-15);
    }

    #[test]
    fn patterns_pass_dn_checks() {
        let mut coeffs = vec![SymbolMatrix::identity(1, 1)];
        for l in 1..=3u32 {
            coeffs.push(scalar(l, c(l as f64, 0.5)));
        }
        let op = CollarOperator::new(Geometry::Circle, coeffs).unwrap();
        let g = GreenMatrices::new(&op).unwrap();
        assert!(g.atilde_dn().pass);
        assert!(g.a_dn().pass);
        let inv = g.invert_atilde_symbolic().unwrap();
        let w = g.weights();
        assert!(dn_order_check(&inv, 0, &w, &w).pass);
        let at = g.at(&pt()).unwrap();
        let prod = at.atilde * g.invert_atilde(&pt()).unwrap();
        assert!(linalg::max_abs_diff(&prod, &linalg::identity(3)) < 1e-12);
    }

    #[test]
    fn two_by_two_inverse_by_hand() {
        let a0 = linalg::from_real_rows(&[&[2.0, 1.0], &[0.0, 1.0]]);
        let b = SymbolMatrix::new(
            2,
            2,
            1,
            vec![
                xi_pow(1, c(1.0, 0.0)),
                xi_pow(1, c(0.0, 2.0)),
                Polynomial::zero(1),
                xi_pow(1, c(-1.0, 0.0)),
            ],
        )
        .unwrap();
        let op = CollarOperator::new(
            Geometry::Circle,
            vec![SymbolMatrix::from_const(&a0, 1), b.clone(), SymbolMatrix::zeros(2, 2, 1)],
        )
        .unwrap();
        let g = GreenMatrices::new(&op).unwrap();
        let inv = g.invert_atilde(&pt()).unwrap();
        let a0i = linalg::inverse(&a0, "a0").unwrap();
        let expected = -(&a0i * b.eval(&pt(), 1.0).unwrap() * &a0i);
        assert!(linalg::max_abs_diff(&inv.view((2, 0), (2, 2)).into_owned(), &expected) < 1e-14);
        assert!(linalg::max_abs_diff(&inv.view((0, 0), (2, 2)).into_owned(), &a0i) < 1e-14);
    }

    #[test]
    fn bundle_conditions_are_dual() {
        for m in [2usize, 3, 4] {
            let op = dm_plus_a(m);
            let g = GreenMatrices::new(&op).unwrap();
            let a = g.a.eval(&pt(), 1.0).unwrap();
            for k in 0..=m {
                let pk = linalg::diag(
                    &(0..m)
                        .map(|i| c(if i < k { 1.0 } else { 0.0 }, 0.0))
                        .collect::<Vec<_>>(),
                );
                let pd = adjoint_projector(&a, &pk).unwrap();
                let expected = linalg::diag(
                    &(0..m)
                        .map(|i| c(if i < m - k { 1.0 } else { 0.0 }, 0.0))
                        .collect::<Vec<_>>(),
                );
                assert!(linalg::max_abs_diff(&pd, &expected) < 1e-14, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn zero_projector_dualises_to_identity_and_back() {
        let op = dm_plus_a(2);
        let opd = op.formal_adjoint().unwrap();
        let g = GreenMatrices::new(&op).unwrap();
        let gd = GreenMatrices::new(&opd).unwrap();
        let grid = build_cosphere_grid(Geometry::Circle, 4).unwrap();
        let zero = ProjectorField::new(vec![CMat::zeros(2, 2); grid.len()], 1e-9).unwrap();
        let pd = adjoint_condition_symbol(&g, &zero, &gd, &grid).unwrap();
        for v in &pd.values {
            assert!(linalg::max_abs_diff(v, &linalg::identity(2)) < 1e-14);
        }
        let back = adjoint_condition_symbol(&gd, &pd, &g, &grid).unwrap();
        for v in &back.values {
            assert!(v.norm() < 1e-14);
        }
    }

    #[test]
    fn laplace_duality_and_corruption() {
        let op = dm_plus_a(2);
        let opd = op.formal_adjoint().unwrap();
        let gd = GreenMatrices::new(&opd).unwrap();
        let grid = build_cosphere_grid(Geometry::Circle, 8).unwrap();
        let rep = adjoint_duality_check(&op, &opd, &gd, &grid, 1e-8).unwrap();
        assert!(rep.pass, "{rep:?}");

        let mut bad = gd.clone();
        bad.a = bad.a.scale(c(-1.0, 0.0));
        let rep = adjoint_duality_check(&op, &opd, &bad, &grid, 1e-8).unwrap();
        assert!(!rep.pass);
        let anorm = GreenMatrices::new(&op).unwrap().a.eval(&pt(), 1.0).unwrap().norm();
        assert!((rep.green_residual - 2.0 * anorm).abs() < 1e-12);
    }
}
