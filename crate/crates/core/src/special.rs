//! Bessel functions of the first kind, their zeros, and Gauss-Legendre rules.

use crate::error::{Error, Result};

/// J_0(x), ..., J_nmax(x) by Miller's backward recurrence, normalised with
/// J_0 + 2 sum J_2k = 1.
pub fn bessel_j_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = (nmax as f64).max(ax);
    let mut start = (top + 30.0 + (50.0 * top).sqrt()) as usize;
    start += start % 2;
    let mut jp1 = 0.0f64;
    let mut j = 1e-300f64;
    let mut norm = 0.0f64;
    for k in (1..=start).rev() {
        let jm1 = (2.0 * k as f64 / ax) * j - jp1;
        jp1 = j;
        j = jm1;
        // j now holds J_{k-1}
        let idx = k - 1;
        if idx <= nmax {
            out[idx] = j;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

pub fn bessel_j(n: usize, x: f64) -> f64 {
    bessel_j_all(n, x)[n]
}

/// (J_n(x), J_n'(x)).
pub fn bessel_j_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let all = bessel_j_all(n + 1, x);
    let d = if n == 0 {
        -all[1]
    } else {
        0.5 * (all[n - 1] - all[n + 1])
    };
    (all[n], d)
}

/// Boundary condition whose radial eigenfunctions J_n(k r) are selected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialCondition {
    /// J_n(k) = 0
    Dirichlet,
    /// J_n'(k) = 0
    Neumann,
    /// k J_n'(k) + c J_n(k) = 0, evaluated divided by 1 + |c| so the
    /// residual keeps unit scale as c grows towards the Dirichlet limit
    Robin(f64),
}

impl RadialCondition {
    pub fn eval(&self, n: usize, x: f64) -> f64 {
        let (j, dj) = bessel_j_and_derivative(n, x);
        match *self {
            RadialCondition::Dirichlet => j,
            RadialCondition::Neumann => dj,
            RadialCondition::Robin(c) => (x * dj + c * j) / (1.0 + c.abs()),
        }
    }
}

/// Positive zeros of the radial condition below `xmax`, in increasing order.
/// The trivial root x = 0 of the Neumann condition is not included.
pub fn radial_zeros(cond: RadialCondition, n: usize, xmax: f64) -> Result<Vec<f64>> {
    let start = match cond {
        // all positive zeros exceed n (n >= 1) for J_n and J_n'; Robin with
        // c >= 0 likewise has none below n
        RadialCondition::Robin(c) if c < 0.0 => 1e-6,
        _ => (0.9 * n as f64).max(1e-6),
    };
    let h = 0.2;
    let mut zeros = Vec::new();
    let mut a = start;
    let mut fa = cond.eval(n, a);
    while a < xmax {
        let b = (a + h).min(xmax);
        let fb = cond.eval(n, b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            zeros.push(bisect(|x| cond.eval(n, x), a, b, fa)?);
        }
        a = b;
        fa = fb;
        if b >= xmax {
            break;
        }
    }
    Ok(zeros)
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= 1e-13 * m.max(1.0) {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    let x = 0.5 * (a + b);
    let r = f(x);
    if r.abs() > 1e-10 {
        return Err(Error::numerical(
            "bessel zero",
            format!("residual {r:e} at {x} exceeds 1e-10"),
        ));
    }
    Ok(x)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_p_and_dp(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_p_and_dp(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    (
        x.iter().map(|t| a + h * (t + 1.0)).collect(),
        w.iter().map(|t| t * h).collect(),
    )
}

fn legendre_p_and_dp(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// P_k, P_k', P_k'' for k = 0..=kmax at an interior point |x| < 1.
pub fn legendre_table(kmax: usize, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; kmax + 1];
    let mut dp = vec![0.0; kmax + 1];
    let mut ddp = vec![0.0; kmax + 1];
    p[0] = 1.0;
    if kmax >= 1 {
        p[1] = x;
    }
    for k in 2..=kmax {
        p[k] = ((2 * k - 1) as f64 * x * p[k - 1] - (k - 1) as f64 * p[k - 2]) / k as f64;
    }
    let s = 1.0 - x * x;
    for k in 1..=kmax {
        dp[k] = k as f64 * (p[k - 1] - x * p[k]) / s;
        ddp[k] = (2.0 * x * dp[k] - (k * (k + 1)) as f64 * p[k]) / s;
    }
    (p, dp, ddp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // independent oracle: J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt,
    // trapezoid on a periodic integrand converges geometrically
    fn j_integral(n: usize, x: f64) -> f64 {
        let m = 2000;
        let mut s = 0.0;
        for q in 0..m {
            let t = 2.0 * PI * q as f64 / m as f64;
            s += (n as f64 * t - x * t.sin()).cos();
        }
        s / m as f64
    }

    #[test]
    fn miller_matches_integral_representation() {
        for &x in &[0.1, 1.0, 2.5, 10.0, 37.3, 120.0] {
            for &n in &[0usize, 1, 2, 5, 17, 60, 150] {
                let a = bessel_j(n, x);
                let b = j_integral(n, x);
                assert!((a - b).abs() < 1e-13, "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn tabulated_zeros() {
        let d0 = radial_zeros(RadialCondition::Dirichlet, 0, 10.0).unwrap();
        assert!((d0[0] - 2.404_825_557_695_773).abs() < 1e-12);
        assert!((d0[1] - 5.520_078_110_286_311).abs() < 1e-12);
        let d1 = radial_zeros(RadialCondition::Dirichlet, 1, 5.0).unwrap();
        assert!((d1[0] - 3.831_705_970_207_512).abs() < 1e-12);
        let n1 = radial_zeros(RadialCondition::Neumann, 1, 3.0).unwrap();
        assert!((n1[0] - 1.841_183_781_340_659_3).abs() < 1e-12);
        let n0 = radial_zeros(RadialCondition::Neumann, 0, 4.0).unwrap();
        assert_eq!(n0.len(), 1);
        assert!((n0[0] - 3.831_705_970_207_512).abs() < 1e-12);
    }

    #[test]
    fn robin_zero_lies_between_neumann_and_dirichlet() {
        let r = radial_zeros(RadialCondition::Robin(1.0), 0, 3.0).unwrap();
        assert!(r[0] > 0.0 && r[0] < 2.404_825_557_695_773);
        let (j, dj) = bessel_j_and_derivative(0, r[0]);
        assert!((r[0] * dj + j).abs() < 1e-10);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((i - 2.0 / 23.0).abs() < 1e-14);
        let (x, w) = gauss_legendre_on(7, 0.0, 1.0);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(5)).sum();
        assert!((i - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_derivatives_satisfy_ode() {
        let (p, dp, ddp) = legendre_table(9, 0.37);
        for k in 0..=9 {
            let r = (1.0 - 0.37f64 * 0.37) * ddp[k] - 2.0 * 0.37 * dp[k]
                + (k * (k + 1)) as f64 * p[k];
            assert!(r.abs() < 1e-12);
        }
        // P_3' = (15 x^2 - 3)/2
        assert!((dp[3] - (15.0 * 0.37 * 0.37 - 3.0) / 2.0).abs() < 1e-13);
    }
}
