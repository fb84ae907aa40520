//! Named operator fixtures used by the suite, the CLI and the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calderon::boundary_ode_split;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I};
use crate::symbol::{CollarOperator, CospherePoint, Geometry, Polynomial, SymbolMatrix};

/// Constant matrix times xi^l on the circle.
fn circle_term(mat: &CMat, l: u32) -> SymbolMatrix {
    let (r, k) = (mat.nrows(), mat.ncols());
    let entries = (0..r)
        .flat_map(|i| (0..k).map(move |j| mat[(i, j)]))
        .map(|z| {
            if z == C64::new(0.0, 0.0) {
                Polynomial::zero(1)
            } else {
                Polynomial::monomial(1, vec![l], 0, z).unwrap()
            }
        })
        .collect();
    SymbolMatrix::new(r, k, 1, entries).unwrap()
}

fn circle_op(terms: &[CMat]) -> CollarOperator {
    let coeffs = terms.iter().enumerate().map(|(l, m)| circle_term(m, l as u32)).collect();
    CollarOperator::new(Geometry::Circle, coeffs).unwrap()
}

fn scalar(z: C64) -> CMat {
    linalg::diag(&[z])
}

/// D_t^2 + xi^2: the Laplace-type model.
pub fn laplace_circle() -> CollarOperator {
    circle_op(&[scalar(c(1.0, 0.0)), scalar(c(0.0, 0.0)), scalar(c(1.0, 0.0))])
}

/// sigma (D_t + ...) with sigma = [[0,1],[-1,0]] and conormal symbol
/// i sigma xi_n + [[0, xi], [xi, 0]].
pub fn dirac_circle() -> CollarOperator {
    let sigma = linalg::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
    circle_op(&[&sigma * I, linalg::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])])
}

/// Scalar Cauchy-Riemann type D_t + i xi: one root, -i xi.
pub fn cr_scalar_circle() -> CollarOperator {
    circle_op(&[scalar(c(1.0, 0.0)), scalar(I)])
}

/// D_t^3 + i xi^3.
pub fn order3_scalar_circle() -> CollarOperator {
    let z = scalar(c(0.0, 0.0));
    circle_op(&[scalar(c(1.0, 0.0)), z.clone(), z, scalar(I)])
}

/// D_t^2 I + M xi^2 with M hermitian positive and non-diagonal.
pub fn coupled_rank2_circle() -> CollarOperator {
    let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.5), c(1.0, -0.5), c(2.0, 0.0)]);
    circle_op(&[linalg::identity(2), CMat::zeros(2, 2), m])
}

/// Smallest |Im| of the conormal roots over both covector directions.
fn root_margin(op: &CollarOperator) -> f64 {
    [1.0, -1.0]
        .iter()
        .map(|&s| {
            let p = CospherePoint::new(vec![0.0], vec![s]).unwrap();
            boundary_ode_split(op, &p).map(|sp| sp.margin).unwrap_or(0.0)
        })
        .fold(f64::INFINITY, f64::min)
}

fn random_c(rng: &mut ChaCha8Rng, scale: f64) -> C64 {
    c(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

/// Order 3, rank 2: S diag(D_t^3 + i xi^3, D_t^3 - 2i xi^3) S^{-1} plus a
/// seeded coupling, redrawn until every conormal root is at distance 0.2
/// from the real axis.
pub fn random_order3_rank2(seed: u64) -> Result<CollarOperator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        let s = CMat::from_fn(2, 2, |i, j| {
            let d = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
            d + random_c(&mut rng, 0.4)
        });
        let Ok(si) = linalg::inverse(&s, "conjugator") else {
            continue;
        };
        let d3 = linalg::diag(&[I, c(0.0, -2.0)]);
        let mut terms = vec![linalg::identity(2), CMat::zeros(2, 2), CMat::zeros(2, 2), &s * d3 * &si];
        for t in terms.iter_mut().skip(1) {
            *t += CMat::from_fn(2, 2, |_, _| random_c(&mut rng, 0.15));
        }
        let op = circle_op(&terms);
        if root_margin(&op) > 0.2 {
            return Ok(op);
        }
    }
    Err(Error::numerical("random_order3_rank2", format!("no elliptic draw for seed {seed}")))
}

/// D_t^2 + |xi'|^2 over the flat 2-torus.
pub fn laplace_torus() -> CollarOperator {
    let one = c(1.0, 0.0);
    let xi2 = Polynomial::monomial(2, vec![2, 0], 0, one)
        .unwrap()
        .add(&Polynomial::monomial(2, vec![0, 2], 0, one).unwrap());
    CollarOperator::new(
        Geometry::FlatTorus2d,
        vec![
            SymbolMatrix::identity(1, 2),
            SymbolMatrix::zeros(1, 1, 2),
            SymbolMatrix::new(1, 1, 2, vec![xi2]).unwrap(),
        ],
    )
    .unwrap()
}

pub const NAMES: [&str; 7] = [
    "laplace_circle",
    "dirac_circle",
    "cr_scalar_circle",
    "order3_scalar_circle",
    "coupled_rank2_circle",
    "random_order3_rank2",
    "laplace_torus",
];

pub fn by_name(name: &str, seed: u64) -> Result<CollarOperator> {
    Ok(match name {
        "laplace_circle" => laplace_circle(),
        "dirac_circle" => dirac_circle(),
        "cr_scalar_circle" => cr_scalar_circle(),
        "order3_scalar_circle" => order3_scalar_circle(),
        "coupled_rank2_circle" => coupled_rank2_circle(),
        "random_order3_rank2" => random_order3_rank2(seed)?,
        "laplace_torus" => laplace_torus(),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown fixture `{other}` (one of {})",
                NAMES.join(", ")
            )))
        }
    })
}

/// The circle fixtures: orders 1, 2, 3 and ranks 1, 2.
pub fn circle_fixtures(seed: u64) -> Result<Vec<(&'static str, CollarOperator)>> {
    NAMES[..6].iter().map(|&n| Ok((n, by_name(n, seed)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{build_cosphere_grid, interior_ellipticity};

    #[test]
    fn every_fixture_is_elliptic() {
        for name in NAMES {
            let op = by_name(name, 7).unwrap();
            let g = build_cosphere_grid(op.geometry, 4).unwrap();
            assert!(interior_ellipticity(&op, &g, 16).unwrap().pass, "{name}");
        }
    }

    #[test]
    fn orders_and_ranks_are_covered() {
        let f = circle_fixtures(7).unwrap();
        let pairs: Vec<(usize, usize)> = f.iter().map(|(_, op)| (op.m, op.rank())).collect();
        for m in 1..=3 {
            assert!(pairs.iter().any(|p| p.0 == m), "order {m}");
        }
        for r in 1..=2 {
            assert!(pairs.iter().any(|p| p.1 == r), "rank {r}");
        }
    }

    #[test]
    fn random_fixture_depends_only_on_the_seed() {
        let a = random_order3_rank2(11).unwrap();
        let b = random_order3_rank2(11).unwrap();
        let p = CospherePoint::new(vec![0.0], vec![1.0]).unwrap();
        for l in 0..=3 {
            assert_eq!(a.coefficient_at(l, &p).unwrap(), b.coefficient_at(l, &p).unwrap());
        }
        let d = random_order3_rank2(12).unwrap();
        assert_ne!(a.coefficient_at(3, &p).unwrap(), d.coefficient_at(3, &p).unwrap());
        assert!(root_margin(&a) > 0.2);
    }

    #[test]
    fn cr_roots_switch_half_planes() {
        let op = cr_scalar_circle();
        let up = boundary_ode_split(&op, &CospherePoint::new(vec![0.0], vec![1.0]).unwrap()).unwrap();
        let dn = boundary_ode_split(&op, &CospherePoint::new(vec![0.0], vec![-1.0]).unwrap()).unwrap();
        assert_eq!((up.dim_plus(), dn.dim_plus()), (0, 1));
    }
}
