//! Graded bundles, polynomial symbol matrices, cosphere grids and collar
//! operators.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::linalg::{self, CMat, C64};
use crate::special::gauss_legendre;

/// Default tolerance for projector idempotence.
pub const IDEMPOTENCE_TOL: f64 = 1e-9;
/// Default relative singular-value margin for ellipticity.
pub const ELLIPTICITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedBundle {
    pub rank: usize,
    pub m: usize,
    pub weights: Vec<i32>,
}

impl GradedBundle {
    pub fn new(rank: usize, m: usize) -> Result<Self> {
        Self::with_weights(rank, m, (0..m as i32).collect())
    }

    pub fn with_weights(rank: usize, m: usize, weights: Vec<i32>) -> Result<Self> {
        if rank == 0 || m == 0 {
            return Err(Error::InvalidInput(format!(
                "graded bundle needs rank >= 1 and m >= 1 (got rank {rank}, m {m})"
            )));
        }
        if weights.len() != m || weights.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "grading weights must be {m} strictly increasing integers, got {weights:?}"
            )));
        }
        Ok(GradedBundle { rank, m, weights })
    }

    /// Weight of every scalar coordinate of E (x) C^m, slot-major.
    pub fn expanded_weights(&self) -> Vec<i32> {
        self.weights
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w, self.rank))
            .collect()
    }
}

/// c * prod xi_i^{p_i} * |xi|^{norm_power}
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub powers: Vec<u32>,
    #[serde(default, skip_serializing_if = "is_zero_i32")]
    pub norm_power: i32,
    #[serde(with = "json::c64_pair")]
    pub coef: C64,
}

fn is_zero_i32(v: &i32) -> bool {
    *v == 0
}

impl Monomial {
    pub fn degree(&self) -> i32 {
        self.powers.iter().sum::<u32>() as i32 + self.norm_power
    }

    fn eval(&self, xi: &[f64], norm: f64) -> C64 {
        let mut v = self.coef;
        for (x, &p) in xi.iter().zip(&self.powers) {
            if p > 0 {
                v *= x.powi(p as i32);
            }
        }
        if self.norm_power != 0 {
            v *= norm.powi(self.norm_power);
        }
        v
    }
}

/// Homogeneous polynomial (allowing powers of |xi|) in the boundary covector.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn constant(dim: usize, c: C64) -> Self {
        Self::combine(
            dim,
            vec![Monomial {
                powers: vec![0; dim],
                norm_power: 0,
                coef: c,
            }],
        )
    }

    pub fn monomial(dim: usize, powers: Vec<u32>, norm_power: i32, coef: C64) -> Result<Self> {
        Self::from_terms(
            dim,
            vec![Monomial {
                powers,
                norm_power,
                coef,
            }],
        )
    }

    /// Validates covector dimension and homogeneity.
    pub fn from_terms(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.powers.len() != dim {
                return Err(Error::Dimension(format!(
                    "monomial has {} powers but the covector has dimension {dim}",
                    t.powers.len()
                )));
            }
        }
        let p = Self::combine(dim, terms);
        if !p.is_homogeneous() {
            return Err(Error::InvalidInput(format!(
                "polynomial is not homogeneous: degrees {:?}",
                p.terms.iter().map(|t| t.degree()).collect::<Vec<_>>()
            )));
        }
        Ok(p)
    }

    fn combine(dim: usize, terms: Vec<Monomial>) -> Self {
        let mut map: BTreeMap<(Vec<u32>, i32), C64> = BTreeMap::new();
        for t in terms {
            *map.entry((t.powers, t.norm_power)).or_insert(C64::new(0.0, 0.0)) += t.coef;
        }
        let terms = map
            .into_iter()
            .filter(|(_, c)| *c != C64::new(0.0, 0.0))
            .map(|((powers, norm_power), coef)| Monomial {
                powers,
                norm_power,
                coef,
            })
            .collect();
        Polynomial { dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.terms.windows(2).all(|w| w[0].degree() == w[1].degree())
    }

    /// Homogeneity degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<i32> {
        self.terms.first().map(|t| t.degree())
    }

    pub fn eval(&self, xi: &[f64]) -> C64 {
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.terms
            .iter()
            .fold(C64::new(0.0, 0.0), |acc, t| acc + t.eval(xi, norm))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(Monomial {
                    powers: a.powers.iter().zip(&b.powers).map(|(x, y)| x + y).collect(),
                    norm_power: a.norm_power + b.norm_power,
                    coef: a.coef * b.coef,
                });
            }
        }
        Self::combine(self.dim, terms)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::combine(self.dim, terms)
    }

    pub fn scale(&self, c: C64) -> Polynomial {
        Self::combine(
            self.dim,
            self.terms
                .iter()
                .map(|t| Monomial {
                    coef: t.coef * c,
                    ..t.clone()
                })
                .collect(),
        )
    }

    /// Complex conjugate as a function of real xi.
    pub fn conj(&self) -> Polynomial {
        Self::combine(
            self.dim,
            self.terms
                .iter()
                .map(|t| Monomial {
                    coef: t.coef.conj(),
                    ..t.clone()
                })
                .collect(),
        )
    }

    /// Constant value if the polynomial has degree 0 and no xi dependence.
    pub fn as_constant(&self) -> Option<C64> {
        match self.terms.as_slice() {
            [] => Some(C64::new(0.0, 0.0)),
            [t] if t.norm_power == 0 && t.powers.iter().all(|&p| p == 0) => Some(t.coef),
            _ => None,
        }
    }
}

/// Matrix of homogeneous polynomials in the boundary covector.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    rows: usize,
    cols: usize,
    dim: usize,
    entries: Vec<Polynomial>,
}

impl SymbolMatrix {
    pub fn new(rows: usize, cols: usize, dim: usize, entries: Vec<Polynomial>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} symbol needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.dim != dim {
                return Err(Error::Dimension(format!(
                    "entry {i} lives on covector dimension {} instead of {dim}",
                    e.dim
                )));
            }
            if !e.is_homogeneous() {
                return Err(Error::InvalidInput(format!(
                    "entry ({}, {}) is not homogeneous",
                    i / cols,
                    i % cols
                )));
            }
        }
        Ok(SymbolMatrix {
            rows,
            cols,
            dim,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize, dim: usize) -> Self {
        SymbolMatrix {
            rows,
            cols,
            dim,
            entries: vec![Polynomial::zero(dim); rows * cols],
        }
    }

    pub fn from_const(m: &CMat, dim: usize) -> Self {
        let mut s = Self::zeros(m.nrows(), m.ncols(), dim);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                s.entries[i * m.ncols() + j] = Polynomial::constant(dim, m[(i, j)]);
            }
        }
        s
    }

    pub fn identity(n: usize, dim: usize) -> Self {
        Self::from_const(&linalg::identity(n), dim)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Polynomial) -> Result<()> {
        if p.dim != self.dim {
            return Err(Error::Dimension("entry covector dimension".into()));
        }
        if !p.is_homogeneous() {
            return Err(Error::InvalidInput(format!(
                "entry ({i}, {j}) is not homogeneous"
            )));
        }
        self.entries[i * self.cols + j] = p;
        Ok(())
    }

    /// Per-entry homogeneity degree (`None` for zero entries).
    pub fn degree_pattern(&self) -> Vec<Vec<Option<i32>>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.entry(i, j).degree()).collect())
            .collect()
    }

    /// Evaluate at an arbitrary (not necessarily unit) covector.
    pub fn eval_at(&self, xi: &[f64]) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.entry(i, j).eval(xi))
    }

    /// Evaluate at scale * xi' for a cosphere point.
    pub fn eval(&self, p: &CospherePoint, scale: f64) -> Result<CMat> {
        if p.covector.len() != self.dim {
            return Err(Error::Dimension(format!(
                "symbol lives on covectors of dimension {}, point has {}",
                self.dim,
                p.covector.len()
            )));
        }
        if scale <= 0.0 {
            return Err(Error::InvalidInput(format!("scale must be positive, got {scale}")));
        }
        let xi: Vec<f64> = p.covector.iter().map(|x| x * scale).collect();
        Ok(self.eval_at(&xi))
    }

    pub fn mul(&self, other: &SymbolMatrix) -> Result<SymbolMatrix> {
        if self.cols != other.rows || self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols, self.dim);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Polynomial::zero(self.dim);
                for k in 0..self.cols {
                    acc = acc.add(&self.entry(i, k).mul(other.entry(k, j)));
                }
                if !acc.is_homogeneous() {
                    return Err(Error::InvalidInput(format!(
                        "product entry ({i}, {j}) is not homogeneous: orders are not DN-compatible"
                    )));
                }
                out.entries[i * other.cols + j] = acc;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &SymbolMatrix) -> Result<SymbolMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension("symbol sum shape".into()));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect();
        SymbolMatrix::new(self.rows, self.cols, self.dim, entries)
    }

    pub fn scale(&self, c: C64) -> SymbolMatrix {
        SymbolMatrix {
            entries: self.entries.iter().map(|e| e.scale(c)).collect(),
            ..self.clone()
        }
    }

    /// Pointwise conjugate transpose.
    pub fn adjoint(&self) -> SymbolMatrix {
        let mut out = Self::zeros(self.cols, self.rows, self.dim);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.entries[j * self.rows + i] = self.entry(i, j).conj();
            }
        }
        out
    }

    /// Constant matrix times symbol.
    pub fn left_const(c: &CMat, s: &SymbolMatrix) -> Result<SymbolMatrix> {
        SymbolMatrix::from_const(c, s.dim).mul(s)
    }

    pub fn block(&self, i0: usize, j0: usize, r: usize, c: usize) -> SymbolMatrix {
        let mut out = Self::zeros(r, c, self.dim);
        for i in 0..r {
            for j in 0..c {
                out.entries[i * c + j] = self.entry(i0 + i, j0 + j).clone();
            }
        }
        out
    }

    pub fn set_block(&mut self, i0: usize, j0: usize, b: &SymbolMatrix) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self.entries[(i0 + i) * self.cols + j0 + j] = b.entry(i, j).clone();
            }
        }
    }

    /// The constant matrix, if every entry is constant.
    pub fn as_constant(&self) -> Option<CMat> {
        let mut m = CMat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self.entry(i, j).as_constant()?;
            }
        }
        Some(m)
    }

    /// Row-major list of (row, col, monomials) for nonzero entries.
    pub fn nonzero_entries(&self) -> Vec<(usize, usize, &[Monomial])> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let e = self.entry(i, j);
                if !e.is_zero() {
                    out.push((i, j, e.terms()));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DnViolation {
    pub row: usize,
    pub col: usize,
    pub expected: i32,
    pub actual: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DnVerdict {
    pub pass: bool,
    pub violations: Vec<DnViolation>,
}

/// Checks degree[j][k] = order - col_weights[k] + row_weights[j] on every
/// nonzero entry (zero entries are compatible with any order).
pub fn dn_order_check(
    s: &SymbolMatrix,
    declared_order: i32,
    row_weights: &[i32],
    col_weights: &[i32],
) -> DnVerdict {
    let mut violations = Vec::new();
    if row_weights.len() != s.rows || col_weights.len() != s.cols {
        violations.push(DnViolation {
            row: row_weights.len(),
            col: col_weights.len(),
            expected: s.rows as i32,
            actual: s.cols as i32,
        });
        return DnVerdict {
            pass: false,
            violations,
        };
    }
    for (j, row) in s.degree_pattern().iter().enumerate() {
        for (k, d) in row.iter().enumerate() {
            if let Some(d) = d {
                let expected = declared_order - col_weights[k] + row_weights[j];
                if *d != expected {
                    violations.push(DnViolation {
                        row: j,
                        col: k,
                        expected,
                        actual: *d,
                    });
                }
            }
        }
    }
    DnVerdict {
        pass: violations.is_empty(),
        violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Circle,
    FlatTorus2d,
    Sphere2,
}

impl Geometry {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "circle" => Ok(Geometry::Circle),
            "flat_torus_2d" | "torus" => Ok(Geometry::FlatTorus2d),
            "sphere_2" | "sphere" => Ok(Geometry::Sphere2),
            other => Err(Error::UnsupportedGeometry(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Circle => "circle",
            Geometry::FlatTorus2d => "flat_torus_2d",
            Geometry::Sphere2 => "sphere_2",
        }
    }

    /// Dimension of the boundary (= of the covector xi').
    pub fn boundary_dim(&self) -> usize {
        match self {
            Geometry::Circle => 1,
            Geometry::FlatTorus2d | Geometry::Sphere2 => 2,
        }
    }

    /// Total measure of the unit cosphere bundle.
    pub fn cosphere_measure(&self) -> f64 {
        match self {
            Geometry::Circle => 4.0 * PI,
            Geometry::FlatTorus2d => 8.0 * PI * PI * PI,
            Geometry::Sphere2 => 8.0 * PI * PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CospherePoint {
    pub base: Vec<f64>,
    pub covector: Vec<f64>,
    /// Connected component of S*Sigma containing the point.
    pub component: usize,
    /// Index of the base point in the grid.
    pub base_index: usize,
}

impl CospherePoint {
    pub fn new(base: Vec<f64>, covector: Vec<f64>) -> Result<Self> {
        let norm = covector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidInput(format!(
                "cosphere covector must have unit length, got {norm}"
            )));
        }
        let component = if covector.len() == 1 && covector[0] < 0.0 {
            1
        } else {
            0
        };
        Ok(CospherePoint {
            base,
            covector,
            component,
            base_index: 0,
        })
    }

    pub fn negated(&self) -> CospherePoint {
        let covector: Vec<f64> = self.covector.iter().map(|x| -x).collect();
        let component = if covector.len() == 1 && covector[0] < 0.0 {
            1
        } else {
            0
        };
        CospherePoint {
            covector,
            component,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CosphereGrid {
    pub geometry: Geometry,
    pub resolution: usize,
    pub points: Vec<CospherePoint>,
    pub weights: Vec<f64>,
}

fn unit_circle_point(theta: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    let v = vec![c, s];
    let n = (c * c + s * s).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn build_cosphere_grid(geometry: Geometry, resolution: usize) -> Result<CosphereGrid> {
    if resolution < 2 {
        return Err(Error::InvalidInput(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    let h = 2.0 * PI / resolution as f64;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match geometry {
        Geometry::Circle => {
            for i in 0..resolution {
                let x = i as f64 * h;
                for s in [1.0, -1.0] {
                    let mut p = CospherePoint::new(vec![x], vec![s])?;
                    p.base_index = i;
                    points.push(p);
                    weights.push(h);
                }
            }
        }
        Geometry::FlatTorus2d => {
            for i in 0..resolution {
                for j in 0..resolution {
                    for k in 0..resolution {
                        let mut p = CospherePoint::new(
                            vec![i as f64 * h, j as f64 * h],
                            unit_circle_point(k as f64 * h),
                        )?;
                        p.base_index = i * resolution + j;
                        points.push(p);
                        weights.push(h * h * h);
                    }
                }
            }
        }
        Geometry::Sphere2 => {
            let (z, wz) = gauss_legendre(resolution);
            let nphi = 2 * resolution;
            let hphi = 2.0 * PI / nphi as f64;
            for (i, (&zi, &wi)) in z.iter().zip(&wz).enumerate() {
                let theta = zi.acos();
                for j in 0..nphi {
                    let phi = j as f64 * hphi;
                    for k in 0..resolution {
                        // covector in the orthonormal frame (e_theta, e_phi)
                        let mut p = CospherePoint::new(
                            vec![theta, phi],
                            unit_circle_point(k as f64 * h),
                        )?;
                        p.base_index = i * nphi + j;
                        points.push(p);
                        weights.push(wi * hphi * h);
                    }
                }
            }
        }
    }
    Ok(CosphereGrid {
        geometry,
        resolution,
        points,
        weights,
    })
}

/// Parses `circle:64`, `flat_torus_2d:8`, `sphere_2:6`.
pub fn parse_grid_spec(spec: &str) -> Result<CosphereGrid> {
    let (name, res) = spec
        .split_once(':')
        .ok_or_else(|| Error::InvalidInput(format!("grid spec `{spec}` must look like circle:64")))?;
    let res: usize = res
        .parse()
        .map_err(|_| Error::InvalidInput(format!("grid resolution `{res}` is not an integer")))?;
    build_cosphere_grid(Geometry::parse(name)?, res)
}

impl CosphereGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Index of the point with the same base and opposite covector.
    pub fn antipode(&self, i: usize) -> Option<usize> {
        let p = &self.points[i];
        self.points.iter().position(|q| {
            q.base_index == p.base_index
                && q.covector
                    .iter()
                    .zip(&p.covector)
                    .all(|(a, b)| (a + b).abs() < 1e-12)
        })
    }

    pub fn components(&self) -> usize {
        self.points.iter().map(|p| p.component).max().map_or(0, |c| c + 1)
    }
}

/// Order-m operator D = sum_l A_l D_{x_n}^{m-l} near the boundary, stored by
/// the principal symbols a_l(xi') of its coefficients at x_n = 0.
#[derive(Debug, Clone)]
pub struct CollarOperator {
    pub bundle_in: GradedBundle,
    pub bundle_out: GradedBundle,
    pub m: usize,
    pub geometry: Geometry,
    /// a_l for l = 0..=m; a_l is homogeneous of degree l.
    pub coeffs: Vec<SymbolMatrix>,
    pub dnormal: Vec<Option<SymbolMatrix>>,
    pub zeroth: Vec<Option<CMat>>,
    a0: CMat,
}

impl CollarOperator {
    pub fn new(geometry: Geometry, coeffs: Vec<SymbolMatrix>) -> Result<Self> {
        let n = coeffs.len();
        Self::with_parts(geometry, coeffs, vec![None; n], vec![None; n])
    }

    pub fn with_parts(
        geometry: Geometry,
        coeffs: Vec<SymbolMatrix>,
        dnormal: Vec<Option<SymbolMatrix>>,
        zeroth: Vec<Option<CMat>>,
    ) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidInput(
                "a collar operator needs coefficients a_0..a_m with m >= 1".into(),
            ));
        }
        let m = coeffs.len() - 1;
        let rank_f = coeffs[0].rows();
        let rank_e = coeffs[0].cols();
        let dim = geometry.boundary_dim();
        for (l, a) in coeffs.iter().enumerate() {
            if a.rows() != rank_f || a.cols() != rank_e {
                return Err(Error::Dimension(format!(
                    "coefficient a_{l} is {}x{}, expected {rank_f}x{rank_e}",
                    a.rows(),
                    a.cols()
                )));
            }
            if a.dim() != dim {
                return Err(Error::Dimension(format!(
                    "coefficient a_{l} uses covector dimension {}, geometry {} has {dim}",
                    a.dim(),
                    geometry.name()
                )));
            }
            for (i, row) in a.degree_pattern().iter().enumerate() {
                for (j, d) in row.iter().enumerate() {
                    if let Some(d) = d {
                        if *d != l as i32 {
                            return Err(Error::InvalidInput(format!(
                                "coefficient a_{l} entry ({i}, {j}) has degree {d}, expected {l}"
                            )));
                        }
                    }
                }
            }
        }
        if rank_e != rank_f {
            return Err(Error::Dimension(format!(
                "elliptic operators need equal fiber ranks, got E = {rank_e}, F = {rank_f}"
            )));
        }
        let a0 = coeffs[0].as_constant().ok_or_else(|| {
            Error::InvalidInput("leading coefficient A_0 must be a constant matrix".into())
        })?;
        linalg::inverse(&a0, "leading coefficient A_0")?;
        Ok(CollarOperator {
            bundle_in: GradedBundle::new(rank_e, m)?,
            bundle_out: GradedBundle::new(rank_f, m)?,
            m,
            geometry,
            coeffs,
            dnormal,
            zeroth,
            a0,
        })
    }

    pub fn rank(&self) -> usize {
        self.bundle_in.rank
    }

    pub fn a0(&self) -> &CMat {
        &self.a0
    }

    pub fn a0_condition_number(&self) -> f64 {
        let s = linalg::singular_values(&self.a0);
        s[0] / s[s.len() - 1]
    }

    /// a_l evaluated at the unit covector of p.
    pub fn coefficient_at(&self, l: usize, p: &CospherePoint) -> Result<CMat> {
        self.coeffs[l].eval(p, 1.0)
    }

    /// Interior principal symbol a(xi', xi_n) = sum_l a_l(xi') xi_n^{m-l}.
    pub fn principal_symbol(&self, xi: &[f64], xi_n: C64) -> CMat {
        let r = self.rank();
        let mut acc = CMat::zeros(r, r);
        for (l, a) in self.coeffs.iter().enumerate() {
            acc += a.eval_at(xi) * xi_n.powu((self.m - l) as u32);
        }
        acc
    }

    /// Principal part of the formal adjoint: a_l^dagger = a_l^*.
    pub fn formal_adjoint(&self) -> Result<CollarOperator> {
        let coeffs = self.coeffs.iter().map(|a| a.adjoint()).collect();
        CollarOperator::new(self.geometry, coeffs)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InteriorEllipticityReport {
    pub pass: bool,
    pub min_singular_value: f64,
    /// min singular value divided by the largest symbol norm sampled
    pub relative_margin: f64,
    pub tolerance: f64,
    pub witness_point: CospherePoint,
    /// (|xi'|, xi_n) of the witness on the unit sphere
    pub witness_tangential_scale: f64,
    pub witness_xi_n: f64,
}

/// Smallest singular value of the interior principal symbol over the grid
/// times the unit half-circle of (|xi'|, xi_n), including the real roots of
/// the conormal determinant and the normal directions xi' = 0.
pub fn interior_ellipticity(
    op: &CollarOperator,
    grid: &CosphereGrid,
    xi_n_samples: usize,
) -> Result<InteriorEllipticityReport> {
    interior_ellipticity_with_tol(op, grid, xi_n_samples, ELLIPTICITY_TOL)
}

pub fn interior_ellipticity_with_tol(
    op: &CollarOperator,
    grid: &CosphereGrid,
    xi_n_samples: usize,
    tolerance: f64,
) -> Result<InteriorEllipticityReport> {
    if xi_n_samples < 8 {
        return Err(Error::InvalidInput(format!(
            "need at least 8 xi_n samples, got {xi_n_samples}"
        )));
    }
    if grid.points.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    // (min sv, max norm, point index, tangential scale, xi_n)
    let per_point: Vec<(f64, f64, usize, f64, f64)> = grid
        .points
        .par_iter()
        .enumerate()
        .map(|(idx, p)| {
            let mut angles: Vec<(f64, f64)> = (0..xi_n_samples)
                .map(|k| {
                    let psi = -PI / 2.0 + PI * (k as f64 + 0.5) / xi_n_samples as f64;
                    (psi.cos(), psi.sin())
                })
                .collect();
            angles.push((0.0, 1.0));
            angles.push((0.0, -1.0));
            for root in conormal_real_roots(op, &p.covector) {
                let n = (1.0 + root * root).sqrt();
                angles.push((1.0 / n, root / n));
            }
            let mut best = (f64::INFINITY, 0.0f64, idx, 0.0, 0.0);
            for (t, xn) in angles {
                let xi: Vec<f64> = p.covector.iter().map(|x| x * t).collect();
                let a = op.principal_symbol(&xi, C64::new(xn, 0.0));
                let s = linalg::singular_values(&a);
                let (top, low) = (s[0], s[s.len() - 1]);
                best.1 = best.1.max(top);
                if low < best.0 {
                    best.0 = low;
                    best.3 = t;
                    best.4 = xn;
                }
            }
            best
        })
        .collect();
    let max_norm = per_point.iter().map(|x| x.1).fold(0.0, f64::max);
    let worst = per_point
        .iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .unwrap();
    let relative = if max_norm > 0.0 { worst.0 / max_norm } else { 0.0 };
    Ok(InteriorEllipticityReport {
        pass: relative > tolerance,
        min_singular_value: worst.0,
        relative_margin: relative,
        tolerance,
        witness_point: grid.points[worst.2].clone(),
        witness_tangential_scale: worst.3,
        witness_xi_n: worst.4,
    })
}

/// Real parts of the near-real roots xi_n of det sum_l a_l(xi') xi_n^{m-l}.
fn conormal_real_roots(op: &CollarOperator, xi: &[f64]) -> Vec<f64> {
    let r = op.rank();
    let m = op.m;
    let a0inv = match linalg::inverse(op.a0(), "A_0") {
        Ok(x) => x,
        Err(_) => return Vec::new(),
    };
    let mut comp = CMat::zeros(r * m, r * m);
    for j in 0..m - 1 {
        for d in 0..r {
            comp[(j * r + d, (j + 1) * r + d)] = C64::new(1.0, 0.0);
        }
    }
    for k in 0..m {
        let blk = -(&a0inv * op.coeffs[m - k].eval_at(xi));
        comp.view_mut(((m - 1) * r, k * r), (r, r)).copy_from(&blk);
    }
    linalg::eigenvalues(&comp)
        .into_iter()
        .filter(|z| z.im.abs() <= 1e-6 * (1.0 + z.norm()))
        .map(|z| z.re)
        .collect()
}

/// Per-point projector matrices on a grid (or per Fourier mode).
#[derive(Debug, Clone)]
pub struct ProjectorField {
    pub values: Vec<CMat>,
    pub tolerance: f64,
}

impl ProjectorField {
    /// Checks idempotence at every point.
    pub fn new(values: Vec<CMat>, tolerance: f64) -> Result<Self> {
        for (i, p) in values.iter().enumerate() {
            if p.nrows() != p.ncols() {
                return Err(Error::Dimension(format!("projector at point {i} is not square")));
            }
            let r = linalg::idempotence_residual(p);
            if r > tolerance * p.norm().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "projector at point {i} is not idempotent (|P^2 - P| = {r:e})"
                )));
            }
        }
        Ok(ProjectorField { values, tolerance })
    }

    pub fn max_idempotence_residual(&self) -> f64 {
        self.values
            .iter()
            .map(linalg::idempotence_residual)
            .fold(0.0, f64::max)
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.values.iter().map(|p| linalg::rank(p, 1e-8)).collect()
    }

    /// True when the rank is constant on each connected component of the grid.
    pub fn rank_constant_on_components(&self, grid: &CosphereGrid) -> bool {
        let ranks = self.ranks();
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        for (p, r) in grid.points.iter().zip(ranks) {
            if let Some(prev) = seen.insert(p.component, r) {
                if prev != r {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use proptest::prelude::*;

    fn poly1(powers: u32, norm_power: i32, coef: f64) -> Polynomial {
        Polynomial::monomial(1, vec![powers], norm_power, c(coef, 0.0)).unwrap()
    }

    #[test]
    fn circle_grid_layout() {
        let g = build_cosphere_grid(Geometry::Circle, 8).unwrap();
        assert_eq!(g.len(), 16);
        assert!(g.weights.iter().all(|&w| (w - 2.0 * PI / 8.0).abs() < 1e-15));
        assert_eq!(g.components(), 2);
        assert_eq!(g.antipode(0), Some(1));
        assert!(matches!(
            build_cosphere_grid(Geometry::Circle, 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn torus_and_sphere_measures() {
        let g = build_cosphere_grid(Geometry::FlatTorus2d, 16).unwrap();
        assert_eq!(g.len(), 16 * 16 * 16);
        assert!((g.total_weight() - 8.0 * PI.powi(3)).abs() < 1e-8);
        let s = build_cosphere_grid(Geometry::Sphere2, 6).unwrap();
        assert!((s.total_weight() - 8.0 * PI * PI).abs() < 1e-8);
        let t = build_cosphere_grid(Geometry::FlatTorus2d, 4).unwrap();
        assert!(t.antipode(1).is_some());
    }

    #[test]
    fn unknown_geometry_is_reported() {
        let e = Geometry::parse("klein_bottle").unwrap_err();
        assert!(e.to_string().contains("klein_bottle"));
    }

    #[test]
    fn eval_scales_by_degree() {
        let p = CospherePoint::new(vec![0.0], vec![1.0]).unwrap();
        let s = SymbolMatrix::new(1, 1, 1, vec![poly1(1, 0, 1.0)]).unwrap();
        assert_eq!(s.eval(&p, 3.0).unwrap()[(0, 0)], c(3.0, 0.0));
        let lap = SymbolMatrix::new(1, 1, 1, vec![poly1(0, 2, 1.0)]).unwrap();
        assert_eq!(lap.eval(&p, 2.0).unwrap()[(0, 0)], c(4.0, 0.0));
        let mixed = SymbolMatrix::new(
            2,
            2,
            1,
            vec![
                poly1(0, 0, 1.0),
                poly1(0, -1, 1.0),
                poly1(1, 0, 1.0),
                poly1(0, 0, 1.0),
            ],
        )
        .unwrap();
        let a = mixed.eval(&p, 1.0).unwrap();
        let b = mixed.eval(&p, 5.0).unwrap();
        let expect = [[1.0, 0.2], [5.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((b[(i, j)] - a[(i, j)] * expect[i][j]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dimension_mismatch_on_eval() {
        let p = CospherePoint::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        let s = SymbolMatrix::new(1, 1, 1, vec![poly1(1, 0, 1.0)]).unwrap();
        assert!(matches!(s.eval(&p, 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn dn_check_patterns() {
        let id = SymbolMatrix::identity(2, 1);
        assert!(dn_order_check(&id, 0, &[0, 1], &[0, 1]).pass);
        // lower triangular atilde for m = 3
        let mut at = SymbolMatrix::identity(3, 1);
        at.set(1, 0, poly1(1, 0, 2.0)).unwrap();
        at.set(2, 0, poly1(0, 2, 1.0)).unwrap();
        at.set(2, 1, poly1(1, 0, -1.0)).unwrap();
        assert!(dn_order_check(&at, 0, &[0, 1, 2], &[0, 1, 2]).pass);
        // swapped rows of A_0 * identity (m = 2): two violations
        let mut sw = SymbolMatrix::zeros(2, 2, 1);
        sw.set(0, 1, poly1(0, 0, 1.0)).unwrap();
        sw.set(1, 0, poly1(0, 0, 1.0)).unwrap();
        let v = dn_order_check(&sw, 0, &[0, 1], &[0, 1]);
        assert!(!v.pass);
        assert_eq!(v.violations.len(), 2);
    }

    #[test]
    fn non_homogeneous_entries_rejected() {
        let bad = poly1(1, 0, 1.0).add(&poly1(0, 0, 1.0));
        assert!(SymbolMatrix::new(1, 1, 1, vec![bad]).is_err());
    }

    fn laplace(sign: f64) -> CollarOperator {
        CollarOperator::new(
            Geometry::Circle,
            vec![
                SymbolMatrix::identity(1, 1),
                SymbolMatrix::zeros(1, 1, 1),
                SymbolMatrix::new(1, 1, 1, vec![poly1(2, 0, sign)]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn interior_ellipticity_examples() {
        let g = build_cosphere_grid(Geometry::Circle, 8).unwrap();
        let rep = interior_ellipticity(&laplace(1.0), &g, 16).unwrap();
        assert!(rep.pass);
        assert!(rep.min_singular_value >= 0.5);
        let rep = interior_ellipticity(&laplace(-1.0), &g, 16).unwrap();
        assert!(!rep.pass);
        assert!(rep.min_singular_value < 1e-12);
        let ratio = rep.witness_xi_n / rep.witness_tangential_scale;
        assert!((ratio.abs() - 1.0).abs() < 1e-9);
        assert!(interior_ellipticity(&laplace(1.0), &g, 4).is_err());
    }

    #[test]
    fn singular_leading_coefficient_rejected() {
        let z = SymbolMatrix::zeros(1, 1, 1);
        let r = CollarOperator::new(Geometry::Circle, vec![z.clone(), z]);
        assert!(r.is_err());
    }

    #[test]
    fn rank_profile_detects_degenerate_locus() {
        let g = build_cosphere_grid(Geometry::Circle, 4).unwrap();
        let mut values = vec![linalg::diag(&[c(1.0, 0.0), c(0.0, 0.0)]); g.len()];
        values[2] = CMat::zeros(2, 2);
        let f = ProjectorField::new(values, IDEMPOTENCE_TOL).unwrap();
        assert!(!f.rank_constant_on_components(&g));
        assert!(ProjectorField::new(vec![CMat::identity(2, 2) * c(2.0, 0.0)], 1e-9).is_err());
    }

    fn random_dn(
        rows: usize,
        cols: usize,
        order: i32,
        row_w: &[i32],
        col_w: &[i32],
        coefs: &[f64],
    ) -> SymbolMatrix {
        let mut s = SymbolMatrix::zeros(rows, cols, 2);
        for i in 0..rows {
            for j in 0..cols {
                let d = order - col_w[j] + row_w[i];
                let k = (i * cols + j) % coefs.len();
                let p = d.max(0) as u32;
                let terms = vec![
                    Monomial {
                        powers: vec![p, 0],
                        norm_power: d - p as i32,
                        coef: c(coefs[k], 0.5),
                    },
                    Monomial {
                        powers: vec![0, 0],
                        norm_power: d,
                        coef: c(-0.25, coefs[(k + 1) % coefs.len()]),
                    },
                ];
                s.set(i, j, Polynomial::from_terms(2, terms).unwrap()).unwrap();
            }
        }
        s
    }

    proptest! {
        #[test]
        fn homogeneity_holds(
            p in 0u32..4, q in 0u32..4, np in -2i32..3,
            re in -3.0f64..3.0, x in -2.0f64..2.0, y in 0.1f64..2.0
        ) {
            let poly = Polynomial::from_terms(2, vec![
                Monomial { powers: vec![p, q], norm_power: np, coef: c(re, 1.0) },
                Monomial { powers: vec![p + q, 0], norm_power: np, coef: c(0.5, -re) },
            ]).unwrap();
            let d = poly.degree().unwrap();
            let base = poly.eval(&[x, y]);
            for t in [0.5, 2.0, 10.0] {
                let v = poly.eval(&[t * x, t * y]);
                let expected = base * t.powi(d);
                prop_assert!((v - expected).norm() <= 1e-12 * expected.norm().max(1e-300));
            }
        }

        #[test]
        fn dn_composition(
            coefs in proptest::collection::vec(-2.0f64..2.0, 4),
            alpha in -1i32..3, beta in -1i32..3,
        ) {
            let r = [0, 1, 3];
            let s = [0, 2];
            let t = [1, 2, 4];
            let s1 = random_dn(2, 3, alpha, &s, &r, &coefs);
            let s2 = random_dn(3, 2, beta, &t, &s, &coefs);
            prop_assert!(dn_order_check(&s1, alpha, &s, &r).pass);
            prop_assert!(dn_order_check(&s2, beta, &t, &s).pass);
            let prod = s2.mul(&s1).unwrap();
            prop_assert!(dn_order_check(&prod, alpha + beta, &t, &r).pass);
        }
    }
}
