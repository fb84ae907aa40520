//! Dormand-Prince 5(4) integration and Frobenius starts for radial systems
//! r dw/dr = (M0 - rho) w + sum_j B_j r^{j+1} w.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

pub type CVec = DVector<C64>;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-12,
            atol: 1e-15,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates y' = f(s, y) from s0 to s1 (either direction).
pub fn dopri5<F>(f: F, s0: f64, s1: f64, y0: &CVec, opts: &OdeOptions) -> Result<(CVec, OdeStats)>
where
    F: Fn(f64, &CVec) -> CVec,
{
    let span = s1 - s0;
    if span == 0.0 {
        return Ok((y0.clone(), OdeStats::default()));
    }
    let dir = span.signum();
    let mut s = s0;
    let mut y = y0.clone();
    let mut h = dir * (span.abs() * 1e-3).max(1e-6).min(span.abs());
    let mut stats = OdeStats::default();
    let mut k1 = f(s, &y);
    while (s1 - s) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::numerical(
                "dopri5",
                format!("step limit reached at s = {s:.6}"),
            ));
        }
        if (s + h - s1) * dir > 0.0 {
            h = s1 - s;
        }
        let k2 = f(s + C2 * h, &(&y + &k1 * C64::from(h * A21)));
        let k3 = f(s + C3 * h, &(&y + (&k1 * C64::from(A31) + &k2 * C64::from(A32)) * C64::from(h)));
        let k4 = f(
            s + C4 * h,
            &(&y + (&k1 * C64::from(A41) + &k2 * C64::from(A42) + &k3 * C64::from(A43)) * C64::from(h)),
        );
        let k5 = f(
            s + C5 * h,
            &(&y + (&k1 * C64::from(A51) + &k2 * C64::from(A52) + &k3 * C64::from(A53) + &k4 * C64::from(A54)) * C64::from(h)),
        );
        let k6 = f(
            s + h,
            &(&y + (&k1 * C64::from(A61) + &k2 * C64::from(A62) + &k3 * C64::from(A63) + &k4 * C64::from(A64) + &k5 * C64::from(A65)) * C64::from(h)),
        );
        let ynew = &y + (&k1 * C64::from(B1) + &k3 * C64::from(B3) + &k4 * C64::from(B4) + &k5 * C64::from(B5) + &k6 * C64::from(B6)) * C64::from(h);
        let k7 = f(s + h, &ynew);
        let err = (&k1 * C64::from(E1) + &k3 * C64::from(E3) + &k4 * C64::from(E4) + &k5 * C64::from(E5) + &k6 * C64::from(E6) + &k7 * C64::from(E7)) * C64::from(h);
        let mut en: f64 = 0.0;
        for i in 0..y.len() {
            let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
            en = en.max(err[i].norm() / sc);
        }
        if !en.is_finite() {
            return Err(Error::numerical("dopri5", format!("non-finite state at s = {s:.6}")));
        }
        if en <= 1.0 {
            s += h;
            y = ynew;
            k1 = k7;
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * (1.0 + s.abs()) {
            return Err(Error::numerical("dopri5", format!("step size underflow at s = {s:.6}")));
        }
    }
    Ok((y, stats))
}

/// r dw/dr = (M0 - rho) w + r M1(r) w with M1(r) = sum_j B_j r^j.
#[derive(Debug, Clone)]
pub struct RadialSystem {
    pub m0: CMat,
    pub m1: Vec<CMat>,
}

impl RadialSystem {
    pub fn dim(&self) -> usize {
        self.m0.nrows()
    }

    fn m1_at(&self, r: f64) -> CMat {
        let mut acc = CMat::zeros(self.dim(), self.dim());
        for b in self.m1.iter().rev() {
            acc = acc * C64::from(r) + b;
        }
        acc
    }

    /// Generator of the scaled system in s = ln r.
    pub fn generator(&self, rho: C64, s: f64) -> CMat {
        let r = s.exp();
        let n = self.dim();
        &self.m0 - linalg::identity(n) * rho + self.m1_at(r) * C64::from(r)
    }
}

/// Frobenius coefficients c_k of w = sum_k c_k r^k with c_0 = v.
pub fn frobenius_series(sys: &RadialSystem, rho: C64, v: &CVec, terms: usize) -> Result<Vec<CVec>> {
    let n = sys.dim();
    let shifted = &sys.m0 - linalg::identity(n) * rho;
    let mut c = vec![v.clone()];
    for k in 1..terms {
        let mut rhs = CVec::zeros(n);
        for (j, b) in sys.m1.iter().enumerate() {
            if j < k {
                rhs += b * &c[k - 1 - j];
            }
        }
        let lhs = linalg::identity(n) * C64::from(k as f64) - &shifted;
        let sol = linalg::solve(&lhs, &CMat::from_column_slice(n, 1, rhs.as_slice()), "Frobenius recursion")
            .map_err(|_| Error::Ode {
                mode: 0,
                reason: format!("resonant exponents: rho + {k} is also an exponent"),
            })?;
        c.push(sol.column(0).into_owned());
    }
    Ok(c)
}

pub fn eval_series(c: &[CVec], r: f64) -> CVec {
    let mut acc = CVec::zeros(c[0].len());
    for ck in c.iter().rev() {
        acc = acc * C64::from(r) + ck;
    }
    acc
}

/// Starting radius of every radial solve.
pub const FROBENIUS_START: f64 = 1e-3;

/// Solution regular at r = 0 with leading term r^rho v, returned as
/// w(1) = u(1). Seeds at r = 1e-3 from the Frobenius series.
pub fn regular_solution_at_one(sys: &RadialSystem, rho: C64, v: &CVec, opts: &OdeOptions) -> Result<CVec> {
    let eps = FROBENIUS_START;
    let mut terms = 4;
    let c = loop {
        let c = frobenius_series(sys, rho, v, terms)?;
        let last = c.last().unwrap().norm() * eps.powi(terms as i32 - 1);
        if last < 1e-18 * v.norm() || terms >= 256 {
            break c;
        }
        terms *= 2;
    };
    let w0 = eval_series(&c, eps);
    let (w1, _) = dopri5(
        |s, w| sys.generator(rho, s) * w,
        eps.ln(),
        0.0,
        &w0,
        opts,
    )?;
    Ok(w1)
}

/// Regular solution sampled at increasing radii in (FROBENIUS_START, 1],
/// returned unscaled: u(r) = r^rho w(r).
pub fn regular_solution_on(
    sys: &RadialSystem,
    rho: C64,
    v: &CVec,
    radii: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<CVec>> {
    let eps = FROBENIUS_START;
    let c = frobenius_series(sys, rho, v, 256)?;
    let mut w = eval_series(&c, eps);
    let mut s = eps.ln();
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        if r <= eps || r > 1.0 {
            return Err(Error::InvalidInput(format!("sample radius {r} outside ({eps}, 1]")));
        }
        let (w1, _) = dopri5(|t, y| sys.generator(rho, t) * y, s, r.ln(), &w, opts)?;
        w = w1;
        s = r.ln();
        out.push(&w * C64::from(r).powc(rho));
    }
    Ok(out)
}
