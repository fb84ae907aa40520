//! The D_alpha case study on the unit disc, the Fourier-tier version of the
//! symbol recursion, and Robin probes on the Laplace model.

use rayon::prelude::*;
use serde::Serialize;

use super::model::{calderon_mode, chi_plus_model, dtn_mode, modes, AlphaProfile, FourierModel, ModeMats};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::lopatinskii::loglog_slope;

fn chi_minus_calderon(model: &FourierModel, n: i64) -> Result<CMat> {
    let a = super::model::adapted_boundary_operator(model, n)?;
    let chi = super::model::chi_plus(&vec![(n, a)], super::model::MODE_ZERO_CUT)?;
    Ok(&chi[0].1 - calderon_mode(model, n)?.p)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaledDifference {
    pub n: i64,
    /// |n| (chi^+ - P_C)(n) entry (1,2): nonzero for n < 0 (xi = -n > 0)
    pub e12: f64,
    /// entry (2,1): nonzero for n > 0
    pub e21: f64,
    /// largest entry outside the two off-diagonal positions
    pub other: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseStudyLimit {
    pub profile: String,
    pub alpha_prime: f64,
    pub alpha_second: f64,
    pub target_magnitude: f64,
    pub samples: Vec<ScaledDifference>,
    pub raw_at_max: f64,
    pub raw_relative_error: f64,
    pub richardson: f64,
    pub richardson_relative_error: f64,
    pub predicted_first_correction: f64,
    pub cauchy_spread: f64,
    pub cauchy_window: (i64, i64),
    pub sign_xi_positive: f64,
    pub sign_xi_negative: f64,
    pub symmetric: bool,
}

/// |n| (chi^+(A) - P_C)(n) for the given modes.
pub fn scaled_differences(model: &FourierModel, ns: &[i64]) -> Result<Vec<ScaledDifference>> {
    ns.par_iter()
        .map(|&n| {
            let d = chi_minus_calderon(model, n)? * C64::from(n.abs() as f64);
            let other = [(0, 0), (1, 1)]
                .iter()
                .map(|&(i, j)| d[(i, j)].norm())
                .fold(0.0, f64::max);
            Ok(ScaledDifference {
                n,
                e12: d[(0, 1)].re,
                e21: d[(1, 0)].re,
                other: other.max(d[(0, 1)].im.abs()).max(d[(1, 0)].im.abs()),
            })
        })
        .collect()
}

/// The nonzero off-diagonal entry of a sample (by the block structure).
fn active(s: &ScaledDifference) -> f64 {
    if s.n > 0 {
        s.e21
    } else {
        s.e12
    }
}

/// Sampling for the limit: powers of two up to `nmax` on both sides, plus
/// the Cauchy window [64, 256] when it fits.
pub fn case_study_limit(alpha: &AlphaProfile, nmax: i64) -> Result<CaseStudyLimit> {
    let model = FourierModel::DiscDAlpha { alpha: alpha.clone() };
    let mut ns: Vec<i64> = Vec::new();
    let mut k = 4;
    while k <= nmax {
        ns.push(k);
        ns.push(-k);
        k *= 2;
    }
    let window = (64.min(nmax / 4).max(1), nmax);
    for n in (window.0..=window.1).step_by(16) {
        if !ns.contains(&n) {
            ns.push(n);
            ns.push(-n);
        }
    }
    ns.sort();
    let samples = scaled_differences(&model, &ns)?;
    let at = |n: i64| samples.iter().find(|s| s.n == n).map(active).unwrap();
    let ap = alpha.derivative_at_one().re;
    let app = alpha.second_derivative_at_one().re;
    let target = ap.abs() / 4.0;
    let top = *ns.iter().filter(|&&n| n > 0).max().unwrap();
    let raw = at(top).abs().max(at(-top).abs());
    let rich_p = 2.0 * at(top) - at(top / 2);
    let rich_m = 2.0 * at(-top) - at(-top / 2);
    let rel = |v: f64| if target > 0.0 { (v - target).abs() / target } else { v.abs() };
    let raw_err = rel(at(top).abs()).max(rel(at(-top).abs()));
    let rich_err = rel(rich_p.abs()).max(rel(rich_m.abs()));
    let in_window: Vec<f64> = samples
        .iter()
        .filter(|s| s.n.abs() >= window.0 && s.n.abs() <= window.1)
        .map(|s| active(s).abs())
        .collect();
    let spread = in_window.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - in_window.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CaseStudyLimit {
        profile: alpha.name(),
        alpha_prime: ap,
        alpha_second: app,
        target_magnitude: target,
        raw_at_max: raw,
        raw_relative_error: raw_err,
        richardson: rich_p.abs().max(rich_m.abs()),
        richardson_relative_error: rich_err,
        predicted_first_correction: (3.0 * ap + app) / 8.0,
        cauchy_spread: spread,
        cauchy_window: window,
        sign_xi_positive: at(-top).signum(),
        sign_xi_negative: at(top).signum(),
        symmetric: (at(top) - at(-top)).abs() <= 1e-8 * (1.0 + at(top).abs()),
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactnessWindow {
    pub start: i64,
    pub lower_bound: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Lower bound over modes |n| in [N, 2N] of the norm of chi^+ - P_C as a map
/// from the weighted -1/2 space to the weighted +1/2 space.
pub fn compactness_windows(alpha: &AlphaProfile, starts: &[i64]) -> Result<Vec<CompactnessWindow>> {
    let model = FourierModel::DiscDAlpha { alpha: alpha.clone() };
    let threshold = 0.8 * alpha.derivative_at_one().norm() / 4.0;
    starts
        .iter()
        .map(|&big_n| {
            let ns: Vec<i64> = (big_n..=2 * big_n).flat_map(|n| [n, -n]).collect();
            let lower = ns
                .par_iter()
                .map(|&n| {
                    let d = chi_minus_calderon(&model, n)?;
                    Ok((1.0 + (n * n) as f64).sqrt() * linalg::spectral_norm(&d))
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            Ok(CompactnessWindow {
                start: big_n,
                lower_bound: lower,
                threshold,
                pass: lower >= threshold,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FiniteIntersection {
    pub dims: Vec<(usize, usize)>,
    pub stabilized: bool,
}

/// dim(ran chi^+(A) cap C_D) at increasing truncations.
pub fn finite_intersection(model: &FourierModel, truncs: &[usize]) -> Result<FiniteIntersection> {
    let top = truncs.iter().copied().max().unwrap_or(0);
    let chi = chi_plus_model(model, top)?;
    let per_mode: Vec<(i64, usize)> = chi
        .par_iter()
        .map(|(n, p)| {
            let h = model.regular_traces(*n, C64::from(0.0), false)?;
            let r = linalg::orth(p, 1e-10);
            Ok((*n, linalg::intersection(&r, &h, 1e-8).ncols()))
        })
        .collect::<Result<_>>()?;
    let dims: Vec<(usize, usize)> = truncs
        .iter()
        .map(|&t| (t, per_mode.iter().filter(|(n, _)| n.unsigned_abs() as usize <= t).map(|x| x.1).sum()))
        .collect();
    let k = dims.len();
    let stabilized = k >= 3 && dims[k - 1].1 == dims[k - 2].1 && dims[k - 2].1 == dims[k - 3].1;
    Ok(FiniteIntersection { dims, stabilized })
}

#[derive(Debug, Clone, Serialize)]
pub struct RecursionReport {
    pub model: String,
    pub k_max: usize,
    pub trunc: usize,
    pub max_idempotence_residual: f64,
    /// log-log slope of ||P - P_C||(n) against |n| over |n| >= N/2
    pub decay_slope: Option<f64>,
    pub max_tail_difference: f64,
    pub pass: bool,
    /// |n| (P - P_principal)(n) at the largest mode
    #[serde(with = "crate::json::cmat_rows")]
    pub order_minus_one_limit: CMat,
    #[serde(skip)]
    pub projectors: ModeMats,
}

fn grading(orders: &[f64], n: i64) -> (CMat, CMat) {
    let base = (1.0 + (n * n) as f64).sqrt();
    let top = orders[0];
    let p: Vec<C64> = orders.iter().map(|s| C64::from(base.powf(top - s))).collect();
    let pinv: Vec<C64> = p.iter().map(|x| C64::from(1.0) / x).collect();
    (linalg::diag(&p), linalg::diag(&pinv))
}

fn principal_projector(model: &FourierModel, n: i64) -> Result<CMat> {
    match model {
        FourierModel::DiscLaplace { .. } => {
            let a = n.abs() as f64;
            Ok(linalg::from_real_rows(&[&[0.5, 0.5 / a], &[0.5 * a, 0.5]]))
        }
        _ => {
            let a = super::model::adapted_boundary_operator(model, n)?;
            Ok(super::model::chi_plus(&vec![(n, a)], super::model::MODE_ZERO_CUT)?.remove(0).1)
        }
    }
}

/// Starting from `start`, adds k_max successive order -k corrections
/// estimated from the exact per-mode projectors at the largest modes (by
/// Richardson extrapolation), then restores idempotence with a Riesz
/// projection around 1. Mode 0 carries the exact projector.
pub fn recursion_from(
    model: &FourierModel,
    start: &ModeMats,
    exact: &ModeMats,
    k_max: usize,
) -> Result<RecursionReport> {
    let m = model.order();
    if k_max > m {
        return Err(Error::InvalidInput(format!("k_max = {k_max} exceeds the order {m}")));
    }
    let orders = super::subspace::trace_orders(model);
    let trunc = start.iter().map(|(n, _)| n.unsigned_abs() as usize).max().unwrap_or(0);
    let big = trunc as i64;
    let normalize = |n: i64, p: &CMat| {
        let (g, gi) = grading(&orders, n);
        gi * p * g
    };
    let mut q: Vec<(i64, CMat)> = start.iter().map(|(n, p)| (*n, normalize(*n, p))).collect();
    let qc: Vec<(i64, CMat)> = exact.iter().map(|(n, p)| (*n, normalize(*n, p))).collect();
    let find = |v: &Vec<(i64, CMat)>, n: i64| v.iter().find(|(m, _)| *m == n).map(|x| x.1.clone()).unwrap();
    for k in 1..=k_max {
        let coef = |n: i64| (find(&qc, n) - find(&q, n)) * C64::from((n.abs() as f64).powi(k as i32));
        let half = (big / 2).max(1);
        let lp = coef(big) * C64::from(2.0) - coef(half);
        let lm = coef(-big) * C64::from(2.0) - coef(-half);
        for (n, qn) in q.iter_mut() {
            if *n != 0 {
                let l = if *n > 0 { &lp } else { &lm };
                *qn += l * C64::from((n.abs() as f64).powi(-(k as i32)));
            }
        }
    }
    let mut out: ModeMats = Vec::new();
    let mut idem: f64 = 0.0;
    let mut tail = Vec::new();
    for (n, qn) in &q {
        let proj = if *n == 0 {
            find(&qc, 0)
        } else {
            linalg::riesz_projector(qn, C64::from(1.0), 0.5, 256).map_err(|e| {
                Error::numerical("approximate_calderon_recursion", format!("spectral gap closes at mode {n}: {e}"))
            })?
        };
        idem = idem.max(linalg::idempotence_residual(&proj));
        if 2 * n.abs() >= big && *n != 0 {
            tail.push((*n, linalg::spectral_norm(&(&proj - find(&qc, *n)))));
        }
        let (g, gi) = grading(&orders, *n);
        out.push((*n, g * proj * gi));
    }
    let max_tail = tail.iter().map(|t| t.1).fold(0.0, f64::max);
    let slope = if max_tail <= 1e-12 {
        None
    } else {
        // worst side at each |n|
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for a in (big / 2).max(1)..=big {
            let v = tail.iter().filter(|t| t.0.abs() == a).map(|t| t.1).fold(0.0, f64::max);
            if v > 0.0 {
                xs.push(a as f64);
                ys.push(v);
            }
        }
        Some(loglog_slope(&xs, &ys))
    };
    let principal_top = normalize(big, &principal_projector(model, big)?);
    let out_top = normalize(big, &find(&out, big));
    Ok(RecursionReport {
        model: model.name(),
        k_max,
        trunc,
        max_idempotence_residual: idem,
        decay_slope: slope,
        max_tail_difference: max_tail,
        pass: idem <= 1e-10 && slope.is_none_or(|s| s <= -(k_max as f64) + 0.1),
        order_minus_one_limit: (out_top - principal_top) * C64::from(big as f64),
        projectors: out,
    })
}

/// Recursion started from the principal symbol per mode.
pub fn approximate_calderon_recursion(model: &FourierModel, trunc: usize, k_max: usize) -> Result<RecursionReport> {
    let exact: ModeMats = super::model::calderon_modes(model, trunc)?
        .into_iter()
        .map(|m| (m.n, m.p))
        .collect();
    let start: ModeMats = modes(trunc)
        .into_iter()
        .map(|n| {
            if n == 0 {
                Ok((0, exact.iter().find(|x| x.0 == 0).unwrap().1.clone()))
            } else {
                Ok((n, principal_projector(model, n)?))
            }
        })
        .collect::<Result<_>>()?;
    recursion_from(model, &start, &exact, k_max)
}

#[derive(Debug, Clone, Serialize)]
pub struct RobinProbe {
    pub model: String,
    pub trunc: usize,
    /// smallest singular value of the truncated Lambda_DN + M_a
    pub margin: f64,
    /// the same in the weighted norms H^{3/2} -> H^{1/2}
    pub weighted_margin: f64,
    /// (N, ||M_a||_{H^{3/2} -> H^{1/2}}, ||M_a||_{H^{7/2} -> H^{5/2}})
    pub multiplication_norms: Vec<(usize, f64, f64)>,
    pub low_norms_bounded: bool,
    pub high_norms_increasing: bool,
}

/// Fourier coefficients of sum_{k <= kmax} 2^{-2k} (z^{2^k} + z^{-2^k}).
pub fn lacunary(kmax: u32) -> Vec<(i64, C64)> {
    let mut out = Vec::new();
    for k in 0..=kmax {
        let c = C64::from(4f64.powi(-(k as i32)));
        out.push((1i64 << k, c));
        out.push((-(1i64 << k), c));
    }
    out
}

fn toeplitz(a: &[(i64, C64)], trunc: usize) -> CMat {
    let ns = modes(trunc);
    let d = ns.len();
    let mut m = CMat::zeros(d, d);
    for (i, &n) in ns.iter().enumerate() {
        for (j, &k) in ns.iter().enumerate() {
            for (f, c) in a {
                if *f == n - k {
                    m[(i, j)] += c;
                }
            }
        }
    }
    m
}

fn sobolev(trunc: usize, s: f64) -> CMat {
    linalg::diag(&modes(trunc).iter().map(|&n| C64::from((1.0 + (n * n) as f64).powf(s / 2.0))).collect::<Vec<_>>())
}

/// Spectral norm by power iteration on M^H M.
fn power_norm(m: &CMat) -> f64 {
    let d = m.ncols();
    let mut v = nalgebra::DVector::from_fn(d, |i, _| C64::from(1.0 + (i % 7) as f64 * 0.1));
    let mut est = 0.0;
    for _ in 0..500 {
        let w = m.adjoint() * (m * &v);
        let nrm = w.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        let next = nrm.sqrt();
        v = w / C64::from(nrm);
        if (next - est).abs() <= 1e-12 * next {
            return next;
        }
        est = next;
    }
    est
}

/// Invertibility margin of Lambda_DN + a and multiplication norms of a
/// across truncations.
pub fn robin_probe(model: &FourierModel, a: &[(i64, C64)], trunc: usize, norm_truncs: &[usize]) -> Result<RobinProbe> {
    let lam: Vec<C64> = modes(trunc)
        .into_par_iter()
        .map(|n| dtn_mode(model, n).map(C64::from))
        .collect::<Result<_>>()?;
    let op = linalg::diag(&lam) + toeplitz(a, trunc);
    let margin = linalg::min_singular_value(&op);
    let weighted = sobolev(trunc, 0.5) * &op * sobolev(trunc, -1.5);
    let weighted_margin = linalg::min_singular_value(&weighted);
    let mut norms = Vec::new();
    for &t in norm_truncs {
        let ma = toeplitz(a, t);
        let low = power_norm(&(sobolev(t, 0.5) * &ma * sobolev(t, -1.5)));
        let high = power_norm(&(sobolev(t, 2.5) * &ma * sobolev(t, -3.5)));
        norms.push((t, low, high));
    }
    let lows: Vec<f64> = norms.iter().map(|x| x.1).collect();
    let low_max = lows.iter().cloned().fold(0.0, f64::max);
    let low_min = lows.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RobinProbe {
        model: model.name(),
        trunc,
        margin,
        weighted_margin,
        low_norms_bounded: low_max <= 1.5 * low_min,
        high_norms_increasing: norms.windows(2).all(|w| w[1].2 > w[0].2 * (1.0 + 1e-6)),
        multiplication_norms: norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d0_has_no_order_minus_one_part() {
        let s = scaled_differences(&FourierModel::DiscD0, &[-7, 3, 40]).unwrap();
        for x in s {
            assert!(x.e12.abs() + x.e21.abs() + x.other < 1e-10);
        }
    }

    #[test]
    fn d_alpha_block_structure_and_limit() {
        let alpha = AlphaProfile::parse("cubic:1").unwrap();
        let model = FourierModel::DiscDAlpha { alpha: alpha.clone() };
        let s = scaled_differences(&model, &[-64, 64]).unwrap();
        // n > 0 lives in (2,1), n < 0 in (1,2)
        assert!(s[0].e21.abs() < 1e-10 && s[1].e12.abs() < 1e-10);
        assert!(s[0].other < 1e-10 && s[1].other < 1e-10);
        let lim = case_study_limit(&alpha, 64).unwrap();
        // first correction is -(3 a' + a'') / (8 n): Richardson removes it
        assert!(lim.richardson_relative_error < lim.raw_relative_error);
        // the remaining O(n^-2) term is about 1e-3 in absolute size at n = 64
        assert!(lim.richardson_relative_error < 1e-2, "{}", lim.richardson_relative_error);
        assert!(lim.symmetric);
    }

    #[test]
    fn flat_profile_is_order_minus_two() {
        let lim = case_study_limit(&AlphaProfile::parse("flat:1").unwrap(), 64).unwrap();
        assert!(lim.raw_at_max < 0.02, "{}", lim.raw_at_max);
        assert_eq!(lim.target_magnitude, 0.0);
    }

    #[test]
    fn compactness_lower_bounds() {
        let w = compactness_windows(&AlphaProfile::parse("bump:1").unwrap(), &[16, 32]).unwrap();
        assert!(w.iter().all(|x| x.pass), "{w:?}");
    }

    #[test]
    fn intersection_with_chi_plus_is_finite() {
        let model = FourierModel::DiscDAlpha {
            alpha: AlphaProfile::parse("cubic:1").unwrap(),
        };
        let r = finite_intersection(&model, &[4, 8, 16]).unwrap();
        assert!(r.stabilized, "{r:?}");
    }

    #[test]
    fn recursion_on_d0_is_exact_and_fixed_point() {
        let r = approximate_calderon_recursion(&FourierModel::DiscD0, 32, 1).unwrap();
        assert!(r.pass && r.decay_slope.is_none());
        let exact: ModeMats = super::super::model::calderon_modes(&FourierModel::DiscD0, 16)
            .unwrap()
            .into_iter()
            .map(|m| (m.n, m.p))
            .collect();
        let fixed = recursion_from(&FourierModel::DiscD0, &exact, &exact, 1).unwrap();
        for ((_, a), (_, b)) in fixed.projectors.iter().zip(&exact) {
            assert!(linalg::max_abs_diff(a, b) < 1e-10);
        }
        assert!(recursion_from(&FourierModel::DiscD0, &exact, &exact, 2).is_err());
    }

    #[test]
    fn recursion_on_d_alpha_corrects_order_minus_one() {
        let model = FourierModel::DiscDAlpha {
            alpha: AlphaProfile::parse("cubic:1").unwrap(),
        };
        let r = approximate_calderon_recursion(&model, 32, 1).unwrap();
        assert!(r.pass, "{:?} {}", r.decay_slope, r.max_idempotence_residual);
        assert!(r.order_minus_one_limit.norm() > 0.2);
    }

    #[test]
    fn robin_constant_and_zero() {
        let model = FourierModel::DiscLaplace { shift: 1.0 };
        let c = robin_probe(&model, &[(0, C64::from(2.0))], 8, &[]).unwrap();
        let lam0 = dtn_mode(&model, 0).unwrap();
        assert!((c.margin - (lam0 + 2.0)).abs() < 1e-10);
        let z = robin_probe(&model, &[], 8, &[]).unwrap();
        assert!((z.margin - lam0).abs() < 1e-10);
    }

    #[test]
    fn lacunary_norms() {
        let model = FourierModel::DiscLaplace { shift: 1.0 };
        let r = robin_probe(&model, &lacunary(8), 4, &[16, 32, 64, 128]).unwrap();
        assert!(r.low_norms_bounded && r.high_norms_increasing, "{:?}", r.multiplication_norms);
    }
}
