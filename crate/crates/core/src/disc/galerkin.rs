//! Truncated realizations on the disc: Galerkin Poincare constants for
//! Dirichlet conditions and kernel growth of the maximal operator.
//!
//! Mode n is discretized by phi_k = r^nu (1 - t) P_k^(2, nu)(2t - 1), t = r^2,
//! nu = |n|. These vanish at r = 1, are smooth at the centre and are
//! orthogonal in L^2(r dr), so the mass matrix stays well conditioned.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::model::{modes, FourierModel};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::special::gauss_legendre_on;

type RMat = DMatrix<f64>;

/// Values, first and second derivatives in x of P_k^(a, b)(x), k = 0..=kmax.
fn jacobi_table(kmax: usize, a: f64, b: f64, x: f64) -> [Vec<f64>; 3] {
    let mut p = vec![0.0; kmax + 1];
    let mut dp = vec![0.0; kmax + 1];
    let mut ddp = vec![0.0; kmax + 1];
    p[0] = 1.0;
    if kmax >= 1 {
        p[1] = (a + 1.0) + (a + b + 2.0) * (x - 1.0) / 2.0;
        dp[1] = (a + b + 2.0) / 2.0;
    }
    for k in 2..=kmax {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let den = 2.0 * kf * (kf + a + b) * (s - 2.0);
        let ak = (s - 1.0) * s * (s - 2.0) / den;
        let bk = (s - 1.0) * (a * a - b * b) / den;
        let ck = 2.0 * (kf + a - 1.0) * (kf + b - 1.0) * s / den;
        let lin = ak * x + bk;
        p[k] = lin * p[k - 1] - ck * p[k - 2];
        dp[k] = ak * p[k - 1] + lin * dp[k - 1] - ck * dp[k - 2];
        ddp[k] = 2.0 * ak * dp[k - 1] + lin * ddp[k - 1] - ck * ddp[k - 2];
    }
    [p, dp, ddp]
}

/// Radial factor of a slot: clamped slots vanish at r = 1, free slots do not.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Clamped,
    Free,
}

/// h_k(t) = (1 - t) P_k^(2, nu)(2t - 1) (clamped) or P_k^(0, nu)(2t - 1)
/// (free), with h', h'' in t.
fn radial_basis(kmax: usize, nu: f64, t: f64, slot: Slot) -> [Vec<f64>; 3] {
    let a = if slot == Slot::Clamped { 2.0 } else { 0.0 };
    let [p, dp, ddp] = jacobi_table(kmax, a, nu, 2.0 * t - 1.0);
    if slot == Slot::Free {
        return [p, dp.iter().map(|x| 2.0 * x).collect(), ddp.iter().map(|x| 4.0 * x).collect()];
    }
    let mut h = vec![0.0; kmax + 1];
    let mut dh = vec![0.0; kmax + 1];
    let mut ddh = vec![0.0; kmax + 1];
    for k in 0..=kmax {
        let (q, dq, ddq) = (p[k], 2.0 * dp[k], 4.0 * ddp[k]);
        h[k] = (1.0 - t) * q;
        dh[k] = (1.0 - t) * dq - q;
        ddh[k] = (1.0 - t) * ddq - 2.0 * dq;
    }
    [h, dh, ddh]
}

/// One Galerkin block: mass and Gram matrix of the operator images.
struct Block {
    n: i64,
    mass: RMat,
    gram: RMat,
}

/// Rows f_k(t) of the operator image such that ||D phi||^2 = 1/2 int t^p f f dt.
fn block(
    kmax: usize,
    nu: usize,
    slot: Slot,
    image: impl Fn(&[Vec<f64>; 3], f64, usize) -> f64,
    power: i32,
    n: i64,
) -> Block {
    let deg = nu + 2 * kmax + 6;
    let (ts, ws) = gauss_legendre_on(deg / 2 + 2, 0.0, 1.0);
    let k = kmax + 1;
    let mut fm = RMat::zeros(ts.len(), k);
    let mut fg = RMat::zeros(ts.len(), k);
    for (i, (&t, &w)) in ts.iter().zip(&ws).enumerate() {
        let tab = radial_basis(kmax, nu as f64, t, slot);
        let wm = (0.5 * w * t.powi(nu as i32)).sqrt();
        let wg = (0.5 * w * t.powi(power)).sqrt();
        for j in 0..k {
            fm[(i, j)] = wm * tab[0][j];
            fg[(i, j)] = wg * image(&tab, t, j);
        }
    }
    Block {
        n,
        mass: fm.transpose() * &fm,
        gram: fg.transpose() * &fg,
    }
}

/// Eigenvalues of gram x = lambda mass x, after a diagonal rescaling and a
/// Cholesky reduction of the mass matrix.
fn generalized_eigenvalues(b: &Block) -> Result<Vec<f64>> {
    let k = b.mass.nrows();
    let d: Vec<f64> = (0..k).map(|i| 1.0 / b.mass[(i, i)].sqrt()).collect();
    let dm = RMat::from_diagonal(&nalgebra::DVector::from_vec(d));
    let m = &dm * &b.mass * &dm;
    let g = &dm * &b.gram * &dm;
    let chol = m.cholesky().ok_or_else(|| {
        Error::numerical("poincare_constant", format!("mass matrix not positive at mode {}", b.n))
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numerical("poincare_constant", "singular Cholesky factor"))?;
    let c = &linv * g * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    Ok(eig.eigenvalues.iter().cloned().collect())
}

fn min_generalized(b: &Block) -> Result<f64> {
    Ok(generalized_eigenvalues(b)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Slot boundary conditions of a realization: which slots are clamped in
/// mode n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Realization {
    Dirichlet,
    /// D_0-type APS cut K: slot 1 free on n < K, slot 2 free on n >= 1
    Aps(i64),
}

impl Realization {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Realization::Dirichlet),
            "aps" => Ok(Realization::Aps(0)),
            other => Err(Error::InvalidInput(format!(
                "unsupported realization `{other}` (dirichlet, aps)"
            ))),
        }
    }

    fn slot(&self, n: i64, j: usize) -> Slot {
        match self {
            Realization::Dirichlet => Slot::Clamped,
            Realization::Aps(k) => {
                let free = if j == 0 { n < *k } else { n >= 1 };
                if free {
                    Slot::Free
                } else {
                    Slot::Clamped
                }
            }
        }
    }
}

/// Galerkin blocks of a realization, one per mode and slot.
fn realization_blocks(model: &FourierModel, real: Realization, trunc: usize, kmax: usize) -> Result<Vec<Block>> {
    match (model, real) {
        (FourierModel::DiscD0, _) => Ok(modes(trunc)
            .into_par_iter()
            .flat_map_iter(|n| {
                let nu = n.unsigned_abs() as usize;
                // D_0 = sigma(-d_r + A(n)/r): slot images r^(nu-1) (c h - 2t h')
                [n - nu as i64, -(n + nu as i64)].into_iter().enumerate().map(move |(j, c)| {
                    let c = c as f64;
                    let slot = real.slot(n, j);
                    if c == 0.0 {
                        block(kmax, nu, slot, |tab, _, j| 2.0 * tab[1][j], nu as i32 + 1, n)
                    } else {
                        block(kmax, nu, slot, move |tab, t, j| c * tab[0][j] - 2.0 * t * tab[1][j], nu as i32 - 1, n)
                    }
                })
            })
            .collect()),
        (FourierModel::DiscLaplace { shift }, Realization::Dirichlet) => {
            let s = *shift;
            Ok(modes(trunc)
                .into_par_iter()
                .map(|n| {
                    let nu = n.unsigned_abs() as usize;
                    let nf = nu as f64;
                    block(
                        kmax,
                        nu,
                        Slot::Clamped,
                        |tab, t, j| -4.0 * t * tab[2][j] - 4.0 * (nf + 1.0) * tab[1][j] + s * tab[0][j],
                        nu as i32,
                        n,
                    )
                })
                .collect())
        }
        (other, real) => Err(Error::InvalidInput(format!(
            "no Galerkin realization {real:?} for {}",
            other.name()
        ))),
    }
}

fn dirichlet_blocks(model: &FourierModel, trunc: usize, kmax: usize) -> Result<Vec<Block>> {
    realization_blocks(model, Realization::Dirichlet, trunc, kmax)
}

/// Singular values of the truncated realization (modes |n| <= N, radial
/// degree N), sorted, keeping only values below 0.8 N where every mode that
/// can contribute is present.
pub fn truncated_singular_values(model: &FourierModel, real: Realization, trunc: usize) -> Result<Vec<f64>> {
    let blocks = realization_blocks(model, real, trunc, trunc.max(8))?;
    let cut = 0.8 * trunc as f64;
    let cut = match model {
        FourierModel::DiscLaplace { shift } => cut * cut + shift,
        _ => cut,
    };
    let per: Vec<Vec<f64>> = blocks.par_iter().map(generalized_eigenvalues).collect::<Result<_>>()?;
    let mut out: Vec<f64> = per.into_iter().flatten().map(|l| l.max(0.0).sqrt()).filter(|&m| m <= cut).collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct PoincareReport {
    pub model: String,
    pub boundary: String,
    pub trunc: usize,
    pub degree: usize,
    pub sigma_min: f64,
    pub lambda_1: f64,
    pub minimizing_mode: i64,
    pub graph_norm_constant: f64,
    pub stability: Vec<(usize, f64)>,
    pub relative_spread: f64,
    pub stable: bool,
    pub random_checks: usize,
    pub random_pass: bool,
    pub min_random_ratio: f64,
}

/// Below this smallest singular value the realization is treated as having
/// a kernel.
pub const KERNEL_FLOOR: f64 = 1e-6;

fn sigma_at(model: &FourierModel, trunc: usize) -> Result<(f64, i64, Vec<Block>)> {
    let blocks = dirichlet_blocks(model, trunc, trunc.max(8))?;
    let mins: Vec<f64> = blocks.iter().map(min_generalized).collect::<Result<_>>()?;
    let (i, lam) = mins
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let sigma = lam.max(0.0).sqrt();
    if sigma < KERNEL_FLOOR {
        return Err(Error::numerical(
            "poincare_constant",
            format!(
                "truncated realization has a kernel at mode {} (smallest singular value {sigma:e})",
                blocks[i].n
            ),
        ));
    }
    Ok((sigma, blocks[i].n, blocks))
}

/// Smallest singular value of the Dirichlet realization at truncation N
/// (modes |n| <= N, radial degree max(N, 8)), with stability over N/4, N/2, N
/// and the inequality sigma ||u|| <= ||D u|| checked on random vectors.
pub fn poincare_constant(model: &FourierModel, boundary: &str, trunc: usize, seed: u64) -> Result<PoincareReport> {
    if boundary != "dirichlet" {
        return Err(Error::InvalidInput(format!(
            "Poincare constants need the Dirichlet condition, got `{boundary}`"
        )));
    }
    let mut stability = Vec::new();
    for t in [trunc / 4, trunc / 2] {
        stability.push((t, sigma_at(model, t.max(1))?.0));
    }
    let (sigma, mode, blocks) = sigma_at(model, trunc)?;
    stability.push((trunc, sigma));
    let lo = stability.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let hi = stability.iter().map(|s| s.1).fold(0.0, f64::max);
    let spread = (hi - lo) / hi;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = 100;
    let mut min_ratio = f64::INFINITY;
    for _ in 0..checks {
        let (mut num, mut den) = (0.0, 0.0);
        for b in &blocks {
            let x = nalgebra::DVector::from_fn(b.mass.nrows(), |_, _| rng.random::<f64>() - 0.5);
            num += (x.transpose() * &b.gram * &x)[(0, 0)];
            den += (x.transpose() * &b.mass * &x)[(0, 0)];
        }
        min_ratio = min_ratio.min((num / den).sqrt() / sigma);
    }
    Ok(PoincareReport {
        model: model.name(),
        boundary: boundary.into(),
        trunc,
        degree: trunc.max(8),
        sigma_min: sigma,
        lambda_1: sigma * sigma,
        minimizing_mode: mode,
        graph_norm_constant: (1.0 + 1.0 / (sigma * sigma)).sqrt(),
        stability,
        relative_spread: spread,
        stable: spread <= 0.02,
        random_checks: checks,
        random_pass: min_ratio >= 1.0 - 1e-10,
        min_random_ratio: min_ratio,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelGrowth {
    pub lambda: (f64, f64),
    pub dims: Vec<(usize, usize)>,
    pub linear_growth: bool,
}

/// Radii at which regular solutions are sampled for the rank count.
pub const SAMPLE_RADII: [f64; 3] = [0.35, 0.7, 1.0];

/// Numerical dimension of the kernel of the truncated maximal operator
/// D - lambda for each truncation.
pub fn max_kernel_growth(model: &FourierModel, lambda: C64, truncs: &[usize]) -> Result<KernelGrowth> {
    let top = truncs.iter().copied().max().unwrap_or(0);
    let per_mode: Vec<(i64, usize)> = modes(top)
        .into_par_iter()
        .map(|n| {
            let s = model.regular_samples(n, lambda, &SAMPLE_RADII)?;
            Ok((n, linalg::rank(&s, 1e-8)))
        })
        .collect::<Result<_>>()?;
    let dims: Vec<(usize, usize)> = truncs
        .iter()
        .map(|&t| {
            let d = per_mode
                .iter()
                .filter(|(n, _)| n.unsigned_abs() as usize <= t)
                .map(|(_, r)| r)
                .sum();
            (t, d)
        })
        .collect();
    let linear_growth = dims.len() >= 3 && dims.windows(2).all(|w| w[1].1 as f64 - w[0].1 as f64 >= (w[1].0 - w[0].0) as f64);
    Ok(KernelGrowth {
        lambda: (lambda.re, lambda.im),
        dims,
        linear_growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{radial_zeros, RadialCondition};

    fn j01() -> f64 {
        radial_zeros(RadialCondition::Dirichlet, 0, 3.0).unwrap()[0]
    }

    #[test]
    fn every_dirichlet_slot_is_bessel() {
        // both slots of D_0 in mode n square to the Bessel operator of order |n|
        let blocks = dirichlet_blocks(&FourierModel::DiscD0, 3, 16).unwrap();
        for b in &blocks {
            let mut mu: Vec<f64> = generalized_eigenvalues(b).unwrap().iter().map(|l| l.sqrt()).collect();
            mu.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let z = radial_zeros(RadialCondition::Dirichlet, b.n.unsigned_abs() as usize, 20.0).unwrap();
            for (m, j) in mu.iter().zip(&z).take(3) {
                assert!((m - j).abs() < 1e-8, "mode {}: {m} vs {j}", b.n);
            }
        }
    }

    #[test]
    fn jacobi_matches_closed_forms() {
        // P_1^(a,b)(x) = (a+1) + (a+b+2)(x-1)/2 and P_k^(a,b)(1) = binom(k+a, k)
        let [p, dp, ddp] = jacobi_table(4, 2.0, 3.0, 1.0);
        assert!((p[4] - 15.0).abs() < 1e-12);
        assert!((dp[1] - 3.5).abs() < 1e-14);
        // P_2^(0,0) = (3x^2 - 1)/2
        let [p, dp, ddp2] = jacobi_table(2, 0.0, 0.0, 0.3);
        assert!((p[2] - (3.0 * 0.09 - 1.0) / 2.0).abs() < 1e-14);
        assert!((dp[2] - 0.9).abs() < 1e-14);
        assert!((ddp2[2] - 3.0).abs() < 1e-14);
        assert_eq!(ddp[0], 0.0);
    }

    #[test]
    fn d0_dirichlet_constant_is_the_first_bessel_zero() {
        let r = poincare_constant(&FourierModel::DiscD0, "dirichlet", 16, 7).unwrap();
        assert!((r.sigma_min - j01()).abs() < 1e-9, "{}", r.sigma_min);
        assert_eq!(r.minimizing_mode, 0);
        assert!(r.stable && r.random_pass);
    }

    #[test]
    fn shifted_laplace_dirichlet() {
        let r = poincare_constant(&FourierModel::DiscLaplace { shift: 1.0 }, "dirichlet", 16, 7).unwrap();
        assert!((r.sigma_min - (1.0 + j01() * j01())).abs() < 1e-8, "{}", r.sigma_min);
        assert!(r.random_pass);
    }

    #[test]
    fn inserted_kernel_mode_is_an_error() {
        let shift = -j01() * j01();
        let err = poincare_constant(&FourierModel::DiscLaplace { shift }, "dirichlet", 16, 7).unwrap_err();
        assert!(err.to_string().contains("kernel at mode 0"), "{err}");
        assert!(poincare_constant(&FourierModel::DiscD0, "neumann", 8, 7).is_err());
    }

    #[test]
    fn kernel_dimensions() {
        let d0 = max_kernel_growth(&FourierModel::DiscD0, C64::from(0.0), &[2, 4, 8]).unwrap();
        assert_eq!(d0.dims, vec![(2, 6), (4, 10), (8, 18)]);
        let lap = max_kernel_growth(&FourierModel::DiscLaplace { shift: 0.0 }, C64::new(2.0, -3.0), &[2, 4, 8]).unwrap();
        assert_eq!(lap.dims, vec![(2, 5), (4, 9), (8, 17)]);
        assert!(d0.linear_growth && lap.linear_growth);
    }
}
