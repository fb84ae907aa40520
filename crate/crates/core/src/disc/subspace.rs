//! Truncated boundary subspaces, Fredholm-pair indices and graphical
//! decompositions. Every subspace of a rotation-invariant model is block
//! diagonal in the Fourier modes, so all linear algebra runs per mode.

use serde::Serialize;

use super::model::{FourierModel, ModeMats};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

pub const RANK_TOL: f64 = 1e-8;

/// Columns spanning a subspace of the truncated trace space, stored per
/// mode in unweighted coordinates. Slot j carries the Sobolev order
/// `orders[j]`.
#[derive(Debug, Clone)]
pub struct TruncatedSubspace {
    pub trunc: usize,
    pub orders: Vec<f64>,
    pub blocks: Vec<(i64, CMat)>,
}

/// Orders s_j = m - 1/2 - j of the graded trace space.
pub fn trace_orders(model: &FourierModel) -> Vec<f64> {
    let m = model.order();
    let mut out = Vec::new();
    for j in 0..m {
        for _ in 0..model.rank() {
            out.push(m as f64 - 0.5 - j as f64);
        }
    }
    out
}

fn mode_weights(orders: &[f64], n: i64) -> CMat {
    let base = 1.0 + (n * n) as f64;
    linalg::diag(&orders.iter().map(|s| C64::from(base.powf(s / 2.0))).collect::<Vec<_>>())
}

impl TruncatedSubspace {
    pub fn from_fn(trunc: usize, orders: Vec<f64>, f: impl Fn(i64) -> CMat) -> Self {
        let blocks = super::model::modes(trunc).into_iter().map(|n| (n, f(n))).collect();
        TruncatedSubspace { trunc, orders, blocks }
    }

    /// Span of the unit vectors of the slots selected per mode.
    pub fn slots(trunc: usize, orders: Vec<f64>, keep: impl Fn(i64, usize) -> bool) -> Self {
        let d = orders.len();
        Self::from_fn(trunc, orders, |n| {
            let idx: Vec<usize> = (0..d).filter(|&j| keep(n, j)).collect();
            let mut b = CMat::zeros(d, idx.len());
            for (c, &j) in idx.iter().enumerate() {
                b[(j, c)] = C64::from(1.0);
            }
            b
        })
    }

    fn from_modes(orders: Vec<f64>, mats: &ModeMats, f: impl Fn(&CMat) -> CMat) -> Self {
        let trunc = mats.iter().map(|(n, _)| n.unsigned_abs() as usize).max().unwrap_or(0);
        TruncatedSubspace {
            trunc,
            orders,
            blocks: mats.iter().map(|(n, p)| (*n, f(p))).collect(),
        }
    }

    /// Range of per-mode projectors.
    pub fn range_of(orders: Vec<f64>, projectors: &ModeMats) -> Self {
        Self::from_modes(orders, projectors, exact_range)
    }

    /// Kernel of per-mode projectors (B = ker P).
    pub fn kernel_of(orders: Vec<f64>, projectors: &ModeMats) -> Self {
        Self::from_modes(orders, projectors, |p| {
            exact_range(&(linalg::identity(p.nrows()) - p))
        })
    }

    /// Per-mode bases given directly (e.g. Hardy spaces).
    pub fn spans(orders: Vec<f64>, bases: &ModeMats) -> Self {
        Self::from_modes(orders, bases, |b| b.clone())
    }

    pub fn slot_dim(&self) -> usize {
        self.orders.len()
    }

    pub fn block(&self, n: i64) -> Option<&CMat> {
        self.blocks.iter().find(|(m, _)| *m == n).map(|(_, b)| b)
    }

    pub fn weights(&self, n: i64) -> CMat {
        mode_weights(&self.orders, n)
    }

    pub fn weighted_block(&self, n: i64) -> Option<CMat> {
        self.block(n).map(|b| self.weights(n) * b)
    }

    pub fn restrict(&self, trunc: usize) -> Self {
        TruncatedSubspace {
            trunc,
            orders: self.orders.clone(),
            blocks: self
                .blocks
                .iter()
                .filter(|(n, _)| n.unsigned_abs() as usize <= trunc)
                .cloned()
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|(_, b)| b.ncols()).sum()
    }

    pub fn ambient_dim(&self) -> usize {
        self.blocks.len() * self.slot_dim()
    }

    /// Block-diagonal weighted basis of the whole truncated subspace.
    pub fn dense(&self) -> CMat {
        let d = self.slot_dim();
        let mut out = CMat::zeros(self.ambient_dim(), self.dim());
        let mut col = 0;
        for (i, (n, _)) in self.blocks.iter().enumerate() {
            let wb = self.weighted_block(*n).unwrap();
            out.view_mut((i * d, col), (d, wb.ncols())).copy_from(&wb);
            col += wb.ncols();
        }
        out
    }

    /// Smallest and largest singular values of the weighted basis.
    pub fn conditioning(&self) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (n, _) in &self.blocks {
            let s = linalg::singular_values(&self.weighted_block(*n).unwrap());
            if let (Some(a), Some(b)) = (s.first(), s.last()) {
                hi = hi.max(*a);
                lo = lo.min(*b);
            }
        }
        (lo, hi)
    }

    /// The L2 annihilator of J B per mode (J is the Green matrix), carrying
    /// the dual orders.
    pub fn adjoint(&self, green: &CMat) -> Self {
        let orders: Vec<f64> = self.orders.iter().map(|s| -s).collect();
        TruncatedSubspace {
            trunc: self.trunc,
            orders,
            blocks: self
                .blocks
                .iter()
                .map(|(n, b)| (*n, complement(&(green * b))))
                .collect(),
        }
    }
}

/// Orthonormal basis of the range, kept exact for diagonal 0/1 projectors.
fn exact_range(p: &CMat) -> CMat {
    let d = p.nrows();
    let diagonal01 = (0..d).all(|i| {
        (0..d).all(|j| {
            let v = p[(i, j)];
            if i == j {
                v == C64::from(0.0) || v == C64::from(1.0)
            } else {
                v == C64::from(0.0)
            }
        })
    });
    if diagonal01 {
        let idx: Vec<usize> = (0..d).filter(|&i| p[(i, i)] == C64::from(1.0)).collect();
        let mut b = CMat::zeros(d, idx.len());
        for (c, &i) in idx.iter().enumerate() {
            b[(i, c)] = C64::from(1.0);
        }
        return b;
    }
    linalg::orth(p, 1e-10)
}

fn complement(b: &CMat) -> CMat {
    if b.ncols() == 0 {
        return linalg::identity(b.nrows());
    }
    linalg::orth_complement(b, 1e-10)
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    pub dim_intersection: i64,
    pub codim_sum: i64,
    pub index: i64,
    pub stabilization: Vec<(usize, i64)>,
    pub stabilized: bool,
    pub status: String,
    pub min_singular_value: f64,
    pub gram_condition: f64,
}

/// (dim B cap C, codim (B + C)) at one truncation.
fn pair_counts(b: &TruncatedSubspace, c: &TruncatedSubspace) -> Result<(i64, i64)> {
    if b.orders != c.orders || b.blocks.len() != c.blocks.len() {
        return Err(Error::Dimension(
            "subspaces live in different truncated spaces".into(),
        ));
    }
    let d = b.slot_dim();
    let (mut inter, mut codim) = (0i64, 0i64);
    for (n, _) in &b.blocks {
        let qb = linalg::orth(&b.weighted_block(*n).unwrap(), RANK_TOL);
        let qc = linalg::orth(
            &c.weighted_block(*n)
                .ok_or_else(|| Error::Dimension(format!("mode {n} missing")))?,
            RANK_TOL,
        );
        let r = linalg::rank(&linalg::hcat(&qb, &qc), RANK_TOL) as i64;
        inter += qb.ncols() as i64 + qc.ncols() as i64 - r;
        codim += d as i64 - r;
    }
    Ok((inter, codim))
}

/// Index of the pair (B, C), stabilized over the truncations N/2, 3N/4, N.
pub fn fredholm_pair_index(b: &TruncatedSubspace, c: &TruncatedSubspace) -> Result<IndexReport> {
    let n = b.trunc;
    let mut stabilization = Vec::new();
    let mut last = (0, 0);
    for t in [n / 2, 3 * n / 4, n] {
        let counts = pair_counts(&b.restrict(t), &c.restrict(t))?;
        stabilization.push((t, counts.0 - counts.1));
        last = counts;
    }
    let stabilized = stabilization.windows(2).all(|w| w[0].1 == w[1].1);
    let (lo, hi) = b.conditioning();
    Ok(IndexReport {
        dim_intersection: last.0,
        codim_sum: last.1,
        index: last.0 - last.1,
        stabilization,
        stabilized,
        status: if stabilized { "ok".into() } else { "warning: index not stabilized".into() },
        min_singular_value: lo,
        gram_condition: if lo > 0.0 { (hi / lo).powi(2) } else { f64::INFINITY },
    })
}

/// Green matrix J of the model: the boundary term of Green's formula is
/// <J gamma u, gamma v> up to sign.
pub fn green_matrix(model: &FourierModel) -> CMat {
    match model {
        FourierModel::DiscLaplace { .. } => linalg::from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]]),
        _ => super::model::sigma(),
    }
}

/// APS-type boundary condition for D_0-type models: first slot on modes
/// n < K, second slot on modes n >= 1.
pub fn aps_cut(trunc: usize, k: i64) -> TruncatedSubspace {
    TruncatedSubspace::slots(trunc, vec![0.5, 0.5], move |n, j| if j == 0 { n < k } else { n >= 1 })
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelCount {
    pub ker_d_b: i64,
    pub ker_adjoint_b_star: i64,
    pub index: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RealizedIndex {
    pub index: i64,
    pub pair: IndexReport,
    pub ker_d_min: i64,
    pub ker_d_min_adjoint: i64,
    pub cross_check: KernelCount,
    pub consistent: bool,
}

fn regular_modes(model: &FourierModel, trunc: usize, adjoint: bool) -> Result<ModeMats> {
    use rayon::prelude::*;
    super::model::modes(trunc)
        .into_par_iter()
        .map(|n| Ok((n, model.regular_traces(n, C64::from(0.0), adjoint)?)))
        .collect()
}

fn nullity(m: &CMat) -> i64 {
    m.ncols() as i64 - linalg::rank(m, RANK_TOL) as i64
}

/// dim{c : H c in B} summed over modes.
fn solutions_in(h: &ModeMats, b: &TruncatedSubspace) -> i64 {
    h.iter()
        .map(|(n, hn)| {
            let bn = b.block(*n).unwrap();
            let qh = linalg::orth(hn, RANK_TOL);
            let qb = linalg::orth(bn, RANK_TOL);
            let r = linalg::rank(&linalg::hcat(&qh, &qb), RANK_TOL) as i64;
            qh.ncols() as i64 + qb.ncols() as i64 - r + nullity(hn)
        })
        .sum()
}

/// ind(D_B) = ind(B, C_D) + dim ker D_min - dim ker D_min^dagger, with the
/// kernel count dim ker D_B - dim ker D^dagger_{B*} as a cross-check.
pub fn realized_index(model: &FourierModel, b: &TruncatedSubspace) -> Result<RealizedIndex> {
    let trunc = b.trunc;
    let h = regular_modes(model, trunc, false)?;
    let h_adj = regular_modes(model, trunc, true)?;
    let c = TruncatedSubspace::spans(b.orders.clone(), &h);
    let pair = fredholm_pair_index(b, &c)?;
    let ker_d_min: i64 = h.iter().map(|(_, m)| nullity(m)).sum();
    let ker_d_min_adjoint: i64 = h_adj.iter().map(|(_, m)| nullity(m)).sum();
    let b_star = b.adjoint(&green_matrix(model));
    let ker_d_b = solutions_in(&h, b);
    let ker_adj = solutions_in(&h_adj, &b_star);
    let index = pair.index + ker_d_min - ker_d_min_adjoint;
    Ok(RealizedIndex {
        index,
        consistent: index == ker_d_b - ker_adj,
        pair,
        ker_d_min,
        ker_d_min_adjoint,
        cross_check: KernelCount {
            ker_d_b,
            ker_adjoint_b_star: ker_adj,
            index: ker_d_b - ker_adj,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnihilatorReport {
    pub pass: bool,
    pub max_pairing: f64,
    pub dims_complementary: bool,
}

/// B* = (J B)^perp pairs to zero with J B and has complementary dimension.
pub fn annihilator_check(b: &TruncatedSubspace, green: &CMat, tol: f64) -> AnnihilatorReport {
    let bs = b.adjoint(green);
    let mut max_pairing: f64 = 0.0;
    let mut dims = true;
    for ((n, bn), (_, sn)) in b.blocks.iter().zip(&bs.blocks) {
        let _ = n;
        dims &= bn.ncols() + sn.ncols() == b.slot_dim();
        if bn.ncols() > 0 && sn.ncols() > 0 {
            let pairing = sn.adjoint() * green * bn;
            let scale = linalg::spectral_norm(bn).max(1e-300);
            max_pairing = max_pairing.max(pairing.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale);
        }
    }
    AnnihilatorReport {
        pass: dims && max_pairing <= tol,
        max_pairing,
        dims_complementary: dims,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphicalMode {
    pub n: i64,
    pub w_plus: usize,
    pub w_minus: usize,
    pub v_minus: usize,
    #[serde(with = "crate::json::cmat_rows")]
    pub g: CMat,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphicalDecomposition {
    pub pass: bool,
    pub w_plus_dim: usize,
    pub w_minus_dim: usize,
    pub v_minus_dim: usize,
    pub g_max_abs: f64,
    pub reconstruction_gap: f64,
    pub adjoint_gap: f64,
    pub min_x_minus_singular_value: f64,
    pub tolerance: f64,
    pub modes: Vec<GraphicalMode>,
}

pub const GRAPH_TOL: f64 = 1e-8;

fn weighted_gap(a: &CMat, b: &CMat, w: &CMat) -> f64 {
    linalg::gap(&(w * a), &(w * b), 1e-10)
}

fn pseudo_inverse(v: &CMat) -> Result<CMat> {
    Ok(linalg::inverse(&(v.adjoint() * v), "graphical decomposition")? * v.adjoint())
}

/// B = {v + g v : v in V_-} + W_+ relative to the projection P_+, and the
/// adjoint form B^perp = {u - g* u : u in V_+*} + W_-*.
pub fn graphical_decomposition(b: &TruncatedSubspace, p_plus: &ModeMats) -> Result<GraphicalDecomposition> {
    let d = b.slot_dim();
    let dual: Vec<f64> = b.orders.iter().map(|s| -s).collect();
    let mut out = GraphicalDecomposition {
        pass: false,
        w_plus_dim: 0,
        w_minus_dim: 0,
        v_minus_dim: 0,
        g_max_abs: 0.0,
        reconstruction_gap: 0.0,
        adjoint_gap: 0.0,
        min_x_minus_singular_value: f64::INFINITY,
        tolerance: GRAPH_TOL,
        modes: Vec::new(),
    };
    for (n, bn) in &b.blocks {
        let pp = p_plus
            .iter()
            .find(|(m, _)| m == n)
            .map(|(_, p)| p.clone())
            .ok_or_else(|| Error::Dimension(format!("P_+ missing mode {n}")))?;
        let pm = linalg::identity(d) - &pp;
        let w = b.weights(*n);
        let wd = mode_weights(&dual, *n);

        let ran_pp = exact_range(&pp);
        let w_plus = linalg::intersection(&ran_pp, bn, RANK_TOL);
        let b_rest = if w_plus.ncols() == 0 {
            bn.clone()
        } else {
            linalg::intersection(bn, &complement(&w_plus), RANK_TOL)
        };
        let x = &pm * &b_rest;
        if x.ncols() > 0 {
            let s = linalg::min_singular_value(&(&w * &x)) / linalg::spectral_norm(&(&w * &b_rest));
            out.min_x_minus_singular_value = out.min_x_minus_singular_value.min(s);
            if s < 1e-10 {
                return Err(Error::numerical(
                    "graphical_decomposition",
                    format!("X_- not invertible at mode {n}: smallest singular value {s:e}"),
                ));
            }
        }
        let g_on_basis = &pp * &b_rest;
        let g = if x.ncols() == 0 {
            CMat::zeros(d, d)
        } else {
            &g_on_basis * pseudo_inverse(&x)?
        };
        let rebuilt = linalg::hcat(&(&x + &g_on_basis), &w_plus);
        let rec = if bn.ncols() == 0 && rebuilt.ncols() == 0 {
            0.0
        } else {
            weighted_gap(&rebuilt, bn, &w)
        };

        // adjoint side, L2 pairing
        let b_perp = complement(bn);
        let ran_pp_star = exact_range(&pp.adjoint());
        let ran_pm_star = exact_range(&pm.adjoint());
        let w_minus_star = linalg::intersection(&ran_pm_star, &b_perp, RANK_TOL);
        let v_plus_star = linalg::intersection(&ran_pp_star, &complement(&w_plus), RANK_TOL);
        let v_minus_star = linalg::intersection(&ran_pm_star, &complement(&w_minus_star), RANK_TOL);
        let mut adjoint_cols = w_minus_star.clone();
        if v_plus_star.ncols() > 0 {
            let gstar_u = if x.ncols() == 0 {
                CMat::zeros(d, v_plus_star.ncols())
            } else {
                if v_minus_star.ncols() != x.ncols() {
                    return Err(Error::numerical(
                        "graphical_decomposition",
                        format!(
                            "dim V_-* = {} differs from dim V_- = {} at mode {n}",
                            v_minus_star.ncols(),
                            x.ncols()
                        ),
                    ));
                }
                let m = x.adjoint() * &v_minus_star;
                let coeff = linalg::solve(&m, &(g_on_basis.adjoint() * &v_plus_star), "g* on V_+*")?;
                &v_minus_star * coeff
            };
            adjoint_cols = linalg::hcat(&(&v_plus_star - gstar_u), &w_minus_star);
        }
        let adj = if b_perp.ncols() == 0 && adjoint_cols.ncols() == 0 {
            0.0
        } else {
            weighted_gap(&adjoint_cols, &b_perp, &wd)
        };
        let w_minus = linalg::intersection(&exact_range(&pm), &complement(&v_minus_star), RANK_TOL);

        out.w_plus_dim += w_plus.ncols();
        out.w_minus_dim += w_minus.ncols();
        out.v_minus_dim += x.ncols();
        out.g_max_abs = out.g_max_abs.max(g.iter().map(|z| z.norm()).fold(0.0, f64::max));
        out.reconstruction_gap = out.reconstruction_gap.max(rec);
        out.adjoint_gap = out.adjoint_gap.max(adj);
        out.modes.push(GraphicalMode {
            n: *n,
            w_plus: w_plus.ncols(),
            w_minus: w_minus.ncols(),
            v_minus: x.ncols(),
            g,
        });
    }
    out.pass = out.reconstruction_gap <= GRAPH_TOL && out.adjoint_gap <= GRAPH_TOL;
    Ok(out)
}

/// Robin condition d_r u + a u = 0 per mode (constant a).
pub fn robin_subspace(trunc: usize, a: f64) -> TruncatedSubspace {
    TruncatedSubspace::from_fn(trunc, vec![1.5, 0.5], move |_| {
        CMat::from_column_slice(2, 1, &[C64::from(1.0), C64::from(-a)])
    })
}

/// Dirichlet condition u = 0 for the Laplace model.
pub fn dirichlet_subspace(trunc: usize) -> TruncatedSubspace {
    TruncatedSubspace::slots(trunc, vec![1.5, 0.5], |_, j| j == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::model::{calderon_modes, chi_plus_model, dirichlet_neumann_projector, dtn_mode};

    fn hardy_d0(trunc: usize) -> TruncatedSubspace {
        TruncatedSubspace::slots(trunc, vec![0.5, 0.5], |n, j| if j == 0 { n >= 0 } else { n <= 0 })
    }

    #[test]
    fn equal_subspaces() {
        let c = hardy_d0(8);
        let r = fredholm_pair_index(&c, &c).unwrap();
        assert_eq!(r.dim_intersection as usize, c.dim());
        assert_eq!(r.codim_sum as usize, c.ambient_dim() - c.dim());
        assert!(r.stabilized);
    }

    #[test]
    fn aps_cut_index_brute_force() {
        for k in -3..=3i64 {
            let r = fredholm_pair_index(&aps_cut(16, k), &hardy_d0(16)).unwrap();
            // brute force over the mode index sets
            let (mut inter, mut codim) = (0, 0);
            for n in -16..=16i64 {
                let b = [n < k, n >= 1];
                let c = [n >= 0, n <= 0];
                for j in 0..2 {
                    if b[j] && c[j] {
                        inter += 1;
                    }
                    if !b[j] && !c[j] {
                        codim += 1;
                    }
                }
            }
            assert_eq!((r.dim_intersection, r.codim_sum), (inter, codim));
            assert_eq!(r.index, k);
        }
    }

    #[test]
    fn calderon_complement_is_transversal() {
        let model = FourierModel::DiscLaplace { shift: 1.0 };
        let pc: ModeMats = calderon_modes(&model, 12).unwrap().into_iter().map(|m| (m.n, m.p)).collect();
        let orders = trace_orders(&model);
        let c = TruncatedSubspace::range_of(orders.clone(), &pc);
        let cc = TruncatedSubspace::kernel_of(orders, &pc);
        let r = fredholm_pair_index(&cc, &c).unwrap();
        assert_eq!((r.dim_intersection, r.codim_sum, r.index), (0, 0, 0));
    }

    #[test]
    fn realized_index_for_aps_cuts() {
        for k in [-2i64, 0, 3] {
            let r = realized_index(&FourierModel::DiscD0, &aps_cut(12, k)).unwrap();
            assert_eq!(r.index, k);
            assert_eq!((r.ker_d_min, r.ker_d_min_adjoint), (0, 0));
            assert!(r.consistent, "{:?}", r.cross_check);
        }
    }

    #[test]
    fn annihilators_are_perfect() {
        let green = green_matrix(&FourierModel::DiscLaplace { shift: 1.0 });
        for b in [robin_subspace(6, 0.7), dirichlet_subspace(6)] {
            let r = annihilator_check(&b, &green, 1e-8);
            assert!(r.pass, "{r:?}");
        }
        // Dirichlet is self-dual, Robin maps to Robin with conjugate coefficient
        let bs = dirichlet_subspace(3).adjoint(&green);
        assert!(linalg::gap(bs.block(2).unwrap(), dirichlet_subspace(3).block(2).unwrap(), 1e-10) < 1e-12);
        let r = robin_subspace(3, 0.7);
        let rs = r.adjoint(&green);
        assert!(linalg::gap(rs.block(1).unwrap(), r.block(1).unwrap(), 1e-10) < 1e-12);
    }

    fn laplace_pz(trunc: usize) -> ModeMats {
        let model = FourierModel::DiscLaplace { shift: 1.0 };
        super::super::model::modes(trunc)
            .into_iter()
            .map(|n| (n, dirichlet_neumann_projector(dtn_mode(&model, n).unwrap())))
            .collect()
    }

    #[test]
    fn robin_graph_matches_closed_form() {
        let a = 0.7;
        let pz = laplace_pz(10);
        let g = graphical_decomposition(&robin_subspace(10, a), &pz).unwrap();
        assert!(g.pass, "{} {}", g.reconstruction_gap, g.adjoint_gap);
        assert_eq!((g.w_plus_dim, g.w_minus_dim), (0, 0));
        for m in &g.modes {
            let lam = pz.iter().find(|(n, _)| *n == m.n).unwrap().1[(1, 0)].re;
            let t = 1.0 / (lam + a);
            assert!((m.g[(0, 1)].re + t).abs() < 1e-12);
            assert!((m.g[(1, 1)].re + lam * t).abs() < 1e-10);
        }
    }

    #[test]
    fn dirichlet_and_aps_have_trivial_graphs() {
        let g = graphical_decomposition(&dirichlet_subspace(10), &laplace_pz(10)).unwrap();
        assert!(g.pass);
        assert_eq!(g.g_max_abs, 0.0);
        assert_eq!(g.v_minus_dim, 21);
        let chi = chi_plus_model(&FourierModel::DiscD0, 10).unwrap();
        let b = TruncatedSubspace::kernel_of(vec![0.5, 0.5], &chi);
        let g = graphical_decomposition(&b, &chi).unwrap();
        assert!(g.pass);
        assert_eq!(g.g_max_abs, 0.0);
        assert_eq!((g.w_plus_dim, g.w_minus_dim), (0, 0));
    }

    #[test]
    fn subspace_bookkeeping() {
        let b = robin_subspace(4, 1.0);
        assert_eq!(b.dim(), 9);
        assert_eq!(b.dense().shape(), (18, 9));
        assert_eq!(b.restrict(2).dim(), 5);
        let w = b.weights(3);
        assert!((w[(0, 0)].re - 10f64.powf(0.75)).abs() < 1e-12);
        assert!((w[(1, 1)].re - 10f64.powf(0.25)).abs() < 1e-12);
        assert_eq!(trace_orders(&FourierModel::DiscD0), vec![0.5, 0.5]);
    }
}
