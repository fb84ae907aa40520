//! Weyl constants by cosphere quadrature and model spectra to fit them.
//!
//! c_D = ((1 / (n (2 pi)^n)) int_{S*M} Tr sigma^{-n/m})^{-m/n}, with the
//! Liouville measure dx dS(xi) on the Euclidean unit cosphere bundle.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::Serialize;

use crate::disc::galerkin::{truncated_singular_values, Realization};
use crate::disc::FourierModel;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::special::{gauss_legendre_on, radial_zeros, RadialCondition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manifold {
    Interval { length: f64 },
    Rectangle { a: f64, b: f64 },
    UnitDisc,
}

impl Manifold {
    pub fn parse(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = args
            .split(',')
            .filter(|x| !x.is_empty())
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad manifold parameter `{x}`")))
            })
            .collect::<Result<_>>()?;
        match (name, nums.as_slice()) {
            ("disc", []) | ("unit_disc", []) => Ok(Manifold::UnitDisc),
            ("interval", []) => Ok(Manifold::Interval { length: PI }),
            ("interval", [l]) => Ok(Manifold::Interval { length: *l }),
            ("rectangle", []) => Ok(Manifold::Rectangle { a: PI, b: PI }),
            ("rectangle", [a, b]) => Ok(Manifold::Rectangle { a: *a, b: *b }),
            _ => Err(Error::InvalidInput(format!(
                "unknown manifold `{s}` (disc, interval[:L], rectangle[:a,b])"
            ))),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Manifold::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Manifold::Interval { length } => *length,
            Manifold::Rectangle { a, b } => a * b,
            Manifold::UnitDisc => PI,
        }
    }
}

/// sigma(x, xi) = S (xi^T G xi)^{m/2} with S positive hermitian (fibre rank)
/// and G a positive symmetric matrix (anisotropy), both constant.
#[derive(Debug, Clone, Serialize)]
pub struct WeylInput {
    pub manifold: Manifold,
    pub order: usize,
    #[serde(with = "crate::json::cmat_rows")]
    pub fibre: CMat,
    pub metric: Vec<Vec<f64>>,
}

impl WeylInput {
    /// Scalar symbol t |xi|^m.
    pub fn scalar(manifold: Manifold, order: usize, t: f64) -> Self {
        let n = manifold.dimension();
        WeylInput {
            manifold,
            order,
            fibre: linalg::diag(&[t.into()]),
            metric: (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
        }
    }

    pub fn with_fibre(mut self, fibre: CMat) -> Self {
        self.fibre = fibre;
        self
    }

    fn quadratic(&self, xi: &[f64]) -> f64 {
        let mut q = 0.0;
        for (i, a) in xi.iter().enumerate() {
            for (j, b) in xi.iter().enumerate() {
                q += a * self.metric[i][j] * b;
            }
        }
        q
    }

    /// Eigenvalues of sigma at a cosphere point.
    fn symbol_eigenvalues(&self, xi: &[f64]) -> Vec<f64> {
        let scale = self.quadratic(xi).powf(self.order as f64 / 2.0);
        let h = (&self.fibre + self.fibre.adjoint()) * num_complex::Complex64::from(0.5 * scale);
        SymmetricEigen::new(h).eigenvalues.iter().cloned().collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylConstant {
    pub c_d: f64,
    pub integral: f64,
    pub resolution: usize,
    pub refinement_change: f64,
    pub converged: bool,
    pub min_symbol_eigenvalue: f64,
}

fn cosphere_integral(w: &WeylInput, res: usize) -> Result<(f64, f64)> {
    let n = w.manifold.dimension();
    let p = -(n as f64) / w.order as f64;
    // spatial quadrature: the symbol is x-independent, but the integral is
    // still assembled as a product rule so variable data plugs in unchanged
    let spatial: Vec<f64> = match w.manifold {
        Manifold::Interval { length } => gauss_legendre_on(res.max(2), 0.0, length).1,
        Manifold::Rectangle { a, b } => {
            let (_, wa) = gauss_legendre_on(res.max(2), 0.0, a);
            let (_, wb) = gauss_legendre_on(res.max(2), 0.0, b);
            wa.iter().flat_map(|x| wb.iter().map(move |y| x * y)).collect()
        }
        Manifold::UnitDisc => {
            let (rs, wr) = gauss_legendre_on(res.max(2), 0.0, 1.0);
            let wt = 2.0 * PI / res as f64;
            rs.iter().zip(&wr).flat_map(|(r, w)| (0..res).map(move |_| r * w * wt)).collect()
        }
    };
    let directions: Vec<(Vec<f64>, f64)> = if n == 1 {
        vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)]
    } else {
        (0..res)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / res as f64;
                (vec![phi.cos(), phi.sin()], 2.0 * PI / res as f64)
            })
            .collect()
    };
    let mut fibre = 0.0;
    let mut min_eig = f64::INFINITY;
    for (xi, wxi) in &directions {
        let eigs = w.symbol_eigenvalues(xi);
        let lo = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        min_eig = min_eig.min(lo);
        if lo <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "interior principal symbol is not positive at xi = {xi:?} (eigenvalue {lo:e})"
            )));
        }
        fibre += wxi * eigs.iter().map(|e| e.powf(p)).sum::<f64>();
    }
    let vol: f64 = spatial.iter().sum();
    Ok((vol * fibre, min_eig))
}

/// c_D from the cosphere integral, refined until doubling the resolution
/// changes it by less than 1e-6 relative.
pub fn weyl_constant(w: &WeylInput, resolution: usize) -> Result<WeylConstant> {
    let n = w.manifold.dimension() as f64;
    let m = w.order as f64;
    let to_c = |i: f64| (i / (n * (2.0 * PI).powf(n))).powf(-m / n);
    let mut res = resolution.max(4);
    let (mut integral, mut min_eig) = cosphere_integral(w, res)?;
    let mut change = f64::INFINITY;
    for _ in 0..12 {
        let (next, e) = cosphere_integral(w, 2 * res)?;
        change = (to_c(next) - to_c(integral)).abs() / to_c(next);
        integral = next;
        min_eig = e;
        res *= 2;
        if change < 1e-6 {
            break;
        }
    }
    Ok(WeylConstant {
        c_d: to_c(integral),
        integral,
        resolution: res,
        refinement_change: change,
        converged: change < 1e-6,
        min_symbol_eigenvalue: min_eig,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bc {
    Dirichlet,
    Neumann,
    Robin { c: f64 },
}

impl Bc {
    pub fn parse(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "dirichlet" => Ok(Bc::Dirichlet),
            None if s == "neumann" => Ok(Bc::Neumann),
            Some(("robin", c)) => {
                let c: f64 = c
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad Robin coefficient `{c}`")))?;
                if c < 0.0 {
                    return Err(Error::InvalidInput("Robin coefficient must be non-negative".into()));
                }
                Ok(Bc::Robin { c })
            }
            _ => Err(Error::InvalidInput(format!(
                "unknown boundary condition `{s}` (dirichlet, neumann, robin:c)"
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Bc::Dirichlet => "dirichlet".into(),
            Bc::Neumann => "neumann".into(),
            Bc::Robin { c } => format!("robin:{c}"),
        }
    }
}

/// Roots k > 0 of the interval Robin equation (k^2 - c^2) sin kL - 2ck cos kL = 0
/// (u' = c u at 0, -u' = c u at L), below kmax.
fn interval_robin_roots(c: f64, length: f64, kmax: f64) -> Result<Vec<f64>> {
    let f = |k: f64| (k * k - c * c) * (k * length).sin() - 2.0 * c * k * (k * length).cos();
    let h = 0.05 / length;
    let mut out = Vec::new();
    let mut a = 1e-9;
    let mut fa = f(a);
    while a < kmax {
        let b = a + h;
        let fb = f(b);
        if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm * flo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
                if hi - lo < 1e-15 * mid {
                    break;
                }
            }
            let k = 0.5 * (lo + hi);
            // residual of the normalized equation
            let r = f(k) / (k * k + c * c + 2.0 * c * k);
            if r.abs() > 1e-10 {
                return Err(Error::numerical("model_eigenvalues", format!("Robin root residual {r:e} at k = {k}")));
            }
            out.push(k);
        }
        a = b;
        fa = fb;
    }
    Ok(out)
}

/// Eigenvalues of the 1D problem on [0, L] up to lmax.
fn interval_spectrum(bc: Bc, length: f64, lmax: f64) -> Result<Vec<f64>> {
    let kmax = lmax.sqrt();
    let step = PI / length;
    Ok(match bc {
        Bc::Dirichlet => (1..).map(|j| (j as f64 * step).powi(2)).take_while(|&l| l <= lmax).collect(),
        Bc::Neumann => (0..).map(|j| (j as f64 * step).powi(2)).take_while(|&l| l <= lmax).collect(),
        Bc::Robin { c: 0.0 } => interval_spectrum(Bc::Neumann, length, lmax)?,
        Bc::Robin { c } => interval_robin_roots(c, length, kmax)?.into_iter().map(|k| k * k).collect(),
    })
}

/// Disc eigenvalues (Laplacian, unit disc) below kmax^2 with multiplicity.
fn disc_spectrum(bc: Bc, kmax: f64) -> Result<Vec<f64>> {
    let cond = match bc {
        Bc::Dirichlet => RadialCondition::Dirichlet,
        Bc::Neumann => RadialCondition::Neumann,
        Bc::Robin { c } => RadialCondition::Robin(c),
    };
    let nmax = kmax.ceil() as usize + 2;
    let per: Vec<Vec<f64>> = (0..=nmax)
        .into_par_iter()
        .map(|n| {
            let z = radial_zeros(cond, n, kmax).map_err(|e| match e {
                Error::Numerical { message, .. } => Error::numerical("model_eigenvalues", format!("mode {n}: {message}")),
                other => other,
            })?;
            let mult = if n == 0 { 1 } else { 2 };
            Ok(z.iter().flat_map(|k| std::iter::repeat_n(k * k, mult)).collect())
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<f64> = per.into_iter().flatten().collect();
    let neumann_like = matches!(bc, Bc::Neumann) || matches!(bc, Bc::Robin { c } if c == 0.0);
    if neumann_like {
        out.push(0.0);
    }
    Ok(out)
}

/// The lowest `count` eigenvalues of the Laplacian on the model manifold,
/// sorted, with multiplicity.
pub fn model_eigenvalues(manifold: Manifold, bc: Bc, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidInput("eigenvalue count must be at least 1".into()));
    }
    // Weyl guess for the cutoff, enlarged until enough eigenvalues are found
    let vol = manifold.volume();
    let mut lmax = match manifold {
        Manifold::Interval { length } => ((count as f64 + 2.0) * PI / length).powi(2),
        _ => 4.0 * PI * (count as f64 + 10.0) / vol * 1.2 + 50.0,
    };
    loop {
        let mut all = match manifold {
            Manifold::Interval { length } => interval_spectrum(bc, length, lmax)?,
            Manifold::Rectangle { a, b } => {
                let sa = interval_spectrum(bc, a, lmax)?;
                let sb = interval_spectrum(bc, b, lmax)?;
                sa.iter()
                    .flat_map(|x| sb.iter().map(move |y| x + y))
                    .filter(|&l| l <= lmax)
                    .collect()
            }
            Manifold::UnitDisc => disc_spectrum(bc, lmax.sqrt())?
                .into_iter()
                .filter(|&l| l <= lmax)
                .collect(),
        };
        if all.len() >= count {
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            all.truncate(count);
            return Ok(all);
        }
        lmax *= 1.5;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Window {
    pub from: usize,
    pub to: usize,
    pub median: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticFit {
    pub c_hat: f64,
    pub count: usize,
    pub windows: Vec<Window>,
    pub drift: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Median of lambda_k / k^{m/n} over the top half (k is 1-based), with
/// medians over four consecutive windows of the top half as drift report.
pub fn asymptotic_fit(eigs: &[f64], m: usize, n: usize) -> Result<AsymptoticFit> {
    if eigs.len() < 500 {
        return Err(Error::InvalidInput(format!(
            "asymptotic fit needs at least 500 eigenvalues, got {}",
            eigs.len()
        )));
    }
    let e = m as f64 / n as f64;
    let k = eigs.len();
    let ratio = |i: usize| eigs[i] / ((i + 1) as f64).powf(e);
    let start = k / 2;
    let c_hat = median((start..k).map(ratio).collect());
    let width = (k - start) / 4;
    let windows: Vec<Window> = (0..4)
        .map(|w| {
            let from = start + w * width;
            let to = if w == 3 { k } else { from + width };
            Window {
                from: from + 1,
                to,
                median: median((from..to).map(ratio).collect()),
            }
        })
        .collect();
    let drift = (windows[3].median - windows[0].median) / c_hat;
    Ok(AsymptoticFit {
        c_hat,
        count: k,
        windows,
        drift,
    })
}

/// N(lambda) (c_D / lambda)^{n/m} at lambda = lambda_{K/2}.
pub fn counting_ratio(eigs: &[f64], c_d: f64, m: usize, n: usize) -> f64 {
    let lam = eigs[eigs.len() / 2 - 1];
    let count = eigs.iter().filter(|&&x| x <= lam).count() as f64;
    count * (c_d / lam).powf(n as f64 / m as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularValueFit {
    pub model: String,
    pub realization: String,
    pub trunc: usize,
    pub predicted: f64,
    pub fitted: f64,
    pub relative_error: f64,
    pub window: (usize, usize),
    pub pass: bool,
}

/// Fit mu_k ~ sqrt(c_{D^dagger D}) k^{m/n} to the truncated singular values
/// of a disc realization; the prediction comes from the cosphere
/// quadrature of sigma^* sigma.
pub fn singular_value_fit(model: &FourierModel, real: Realization, trunc: usize) -> Result<SingularValueFit> {
    let (order, rank) = (model.order(), model.rank());
    // sigma^* sigma = |xi|^{2m} on the fibre
    let w = WeylInput::scalar(Manifold::UnitDisc, 2 * order, 1.0).with_fibre(linalg::identity(rank));
    let c = weyl_constant(&w, 16)?.c_d;
    let predicted = c.sqrt();
    let mu = truncated_singular_values(model, real, trunc)?;
    if mu.len() < 40 {
        return Err(Error::InvalidInput(format!(
            "truncation {trunc} resolves only {} singular values",
            mu.len()
        )));
    }
    let k = mu.len();
    let e = order as f64 / 2.0;
    let start = k / 2;
    let fitted = median((start..k).map(|i| mu[i] / ((i + 1) as f64).powf(e)).collect());
    let rel = (fitted - predicted).abs() / predicted;
    Ok(SingularValueFit {
        model: model.name(),
        realization: format!("{real:?}").to_lowercase(),
        trunc,
        predicted,
        fitted,
        relative_error: rel,
        window: (start + 1, k),
        pass: rel <= 0.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn closed_form_constants() {
        let disc = weyl_constant(&WeylInput::scalar(Manifold::UnitDisc, 2, 1.0), 8).unwrap();
        assert!((disc.c_d - 4.0).abs() < 4e-6 && disc.converged);
        let int = weyl_constant(&WeylInput::scalar(Manifold::Interval { length: PI }, 2, 1.0), 8).unwrap();
        assert!((int.c_d - 1.0).abs() < 1e-12);
        let scaled = weyl_constant(&WeylInput::scalar(Manifold::UnitDisc, 2, 3.0), 8).unwrap();
        assert!((scaled.c_d - 12.0).abs() < 1e-5);
        // rank 2, distinct eigenvalues: c = 4 / (1 + 1/t)
        let t = 3.0;
        let w = WeylInput::scalar(Manifold::UnitDisc, 2, 1.0).with_fibre(linalg::diag(&[c(1.0, 0.0), c(t, 0.0)]));
        assert!((weyl_constant(&w, 8).unwrap().c_d - 4.0 / (1.0 + 1.0 / t)).abs() < 1e-5);
        let bad = WeylInput::scalar(Manifold::UnitDisc, 2, -1.0);
        assert!(weyl_constant(&bad, 8).is_err());
    }

    #[test]
    fn anisotropic_metric_quadrature() {
        // xi^T diag(1, 4) xi: int over the circle of (cos^2 + 4 sin^2)^{-1} = 2 pi / 2
        let mut w = WeylInput::scalar(Manifold::UnitDisc, 2, 1.0);
        w.metric = vec![vec![1.0, 0.0], vec![0.0, 4.0]];
        let r = weyl_constant(&w, 8).unwrap();
        assert!((r.c_d - 8.0).abs() < 1e-5, "{}", r.c_d);
    }

    #[test]
    fn model_spectra() {
        let d = model_eigenvalues(Manifold::Interval { length: PI }, Bc::Dirichlet, 4).unwrap();
        assert_eq!(d, vec![1.0, 4.0, 9.0, 16.0]);
        let r = model_eigenvalues(Manifold::Rectangle { a: PI, b: PI }, Bc::Dirichlet, 6).unwrap();
        assert_eq!(r, vec![2.0, 5.0, 5.0, 8.0, 10.0, 10.0]);
        let disc = model_eigenvalues(Manifold::UnitDisc, Bc::Dirichlet, 6).unwrap();
        let j = |n, k| radial_zeros(RadialCondition::Dirichlet, n, 12.0).unwrap()[k];
        let expect = [j(0, 0), j(1, 0), j(1, 0), j(2, 0), j(2, 0), j(0, 1)];
        for (a, b) in disc.iter().zip(expect) {
            assert!((a - b * b).abs() < 1e-9);
        }
        assert_eq!(model_eigenvalues(Manifold::UnitDisc, Bc::Neumann, 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn robin_interpolates_between_neumann_and_dirichlet() {
        let k = 30;
        let neu = model_eigenvalues(Manifold::UnitDisc, Bc::Neumann, k).unwrap();
        let dir = model_eigenvalues(Manifold::UnitDisc, Bc::Dirichlet, k).unwrap();
        let small = model_eigenvalues(Manifold::UnitDisc, Bc::Robin { c: 1e-6 }, k).unwrap();
        let large = model_eigenvalues(Manifold::UnitDisc, Bc::Robin { c: 1e6 }, k).unwrap();
        for i in 0..k {
            assert!(neu[i] <= dir[i]);
            assert!((small[i] - neu[i]).abs() < 1e-4);
            assert!((large[i] - dir[i]).abs() < 1e-3 * dir[i]);
        }
        let iv = model_eigenvalues(Manifold::Interval { length: 1.0 }, Bc::Robin { c: 1.0 }, 5).unwrap();
        let ivn = model_eigenvalues(Manifold::Interval { length: 1.0 }, Bc::Neumann, 5).unwrap();
        let ivd = model_eigenvalues(Manifold::Interval { length: 1.0 }, Bc::Dirichlet, 5).unwrap();
        for i in 0..5 {
            assert!(ivn[i] < iv[i] && iv[i] < ivd[i]);
        }
    }

    #[test]
    fn interval_fit() {
        let e = model_eigenvalues(Manifold::Interval { length: PI }, Bc::Dirichlet, 1000).unwrap();
        let f = asymptotic_fit(&e, 2, 1).unwrap();
        assert!((f.c_hat - 1.0).abs() < 1e-12);
        assert!(asymptotic_fit(&e[..100], 2, 1).is_err());
    }

    #[test]
    fn singular_values_of_d0() {
        let f = singular_value_fit(&FourierModel::DiscD0, Realization::Aps(0), 48).unwrap();
        assert!((f.predicted - 2f64.sqrt()).abs() < 1e-5);
        assert!(f.pass, "{f:?}");
    }
}
