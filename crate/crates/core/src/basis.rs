//! Scaled monomial bases `((x - x_K) / h_K)^alpha` on cells and
//! `((s - s_mid) / h_f)^j` on edges, optionally L2-orthonormalized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{PolygonalMesh, QuadratureRule};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMode {
    Raw,
    Orthonormal,
}

impl BasisMode {
    pub fn default_for_order(k: usize) -> Self {
        if k >= 3 {
            Self::Orthonormal
        } else {
            Self::Raw
        }
    }
}

/// `dim P_k` in two variables; zero for negative degrees.
pub fn poly_dim(k: isize) -> usize {
    if k < 0 {
        0
    } else {
        let k = k as usize;
        (k + 1) * (k + 2) / 2
    }
}

/// Exponents in graded lexicographic order: (0,0), (1,0), (0,1), (2,0), ...
pub fn monomial_exponents(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(poly_dim(k as isize));
    for d in 0..=k {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

pub fn monomial_index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

/// Basis of `P_k(K)`. Basis function `i` is `sum_j coeffs[(i, j)] m_j` with
/// `m_j` the scaled monomials; `coeffs` is lower triangular, so the first
/// `poly_dim(r)` functions span `P_r` for every `r <= k`.
#[derive(Debug, Clone)]
pub struct CellPolyBasis {
    order: usize,
    centroid: Point,
    diameter: f64,
    mode: BasisMode,
    cell: Option<usize>,
    exponents: Vec<(usize, usize)>,
    coeffs: DMatrix<f64>,
    coeffs_inv: DMatrix<f64>,
}

impl CellPolyBasis {
    pub fn raw(order: usize, centroid: Point, diameter: f64) -> Self {
        let n = poly_dim(order as isize);
        Self {
            order,
            centroid,
            diameter,
            mode: BasisMode::Raw,
            cell: None,
            exponents: monomial_exponents(order),
            coeffs: DMatrix::identity(n, n),
            coeffs_inv: DMatrix::identity(n, n),
        }
    }

    /// Basis on a mesh cell in the requested mode; `quad` must be exact to
    /// degree `2 order` when orthonormalizing.
    pub fn for_cell(
        mesh: &PolygonalMesh,
        cell: usize,
        order: usize,
        mode: BasisMode,
        quad: &QuadratureRule,
    ) -> Result<Self> {
        let g = mesh.cell_geometry(cell);
        let mut basis = Self::raw(order, g.centroid, g.diameter);
        basis.cell = Some(cell);
        if mode == BasisMode::Orthonormal {
            basis = basis.orthonormalize(quad)?;
        }
        Ok(basis)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn centroid(&self) -> Point {
        self.centroid
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exponents
    }

    /// Change of basis from scaled monomials (rows: basis functions).
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    fn monomials(&self, x: Point) -> DVector<f64> {
        let s = (x - self.centroid) / self.diameter;
        let mut px = vec![1.0; self.order + 1];
        let mut py = vec![1.0; self.order + 1];
        for i in 1..=self.order {
            px[i] = px[i - 1] * s.x;
            py[i] = py[i - 1] * s.y;
        }
        DVector::from_iterator(self.dim(), self.exponents.iter().map(|&(a, b)| px[a] * py[b]))
    }

    fn monomial_gradients(&self, x: Point) -> (DVector<f64>, DVector<f64>) {
        let s = (x - self.centroid) / self.diameter;
        let mut px = vec![1.0; self.order + 1];
        let mut py = vec![1.0; self.order + 1];
        for i in 1..=self.order {
            px[i] = px[i - 1] * s.x;
            py[i] = py[i - 1] * s.y;
        }
        let h = self.diameter;
        let dx = self.exponents.iter().map(|&(a, b)| if a == 0 { 0.0 } else { a as f64 * px[a - 1] * py[b] / h });
        let dy = self.exponents.iter().map(|&(a, b)| if b == 0 { 0.0 } else { b as f64 * px[a] * py[b - 1] / h });
        (DVector::from_iterator(self.dim(), dx), DVector::from_iterator(self.dim(), dy))
    }

    /// Values of all basis functions at `x`.
    pub fn eval_at(&self, x: Point) -> DVector<f64> {
        match self.mode {
            BasisMode::Raw => self.monomials(x),
            BasisMode::Orthonormal => &self.coeffs * self.monomials(x),
        }
    }

    /// Partial derivatives `(d/dx, d/dy)` of all basis functions at `x`.
    pub fn gradient_at(&self, x: Point) -> (DVector<f64>, DVector<f64>) {
        let (dx, dy) = self.monomial_gradients(x);
        match self.mode {
            BasisMode::Raw => (dx, dy),
            BasisMode::Orthonormal => (&self.coeffs * dx, &self.coeffs * dy),
        }
    }

    /// Value matrix, one row per point.
    pub fn eval(&self, points: &[Point]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(points.len(), self.dim());
        for (r, &p) in points.iter().enumerate() {
            out.row_mut(r).copy_from(&self.eval_at(p).transpose());
        }
        out
    }

    /// `(d/dx, d/dy)` matrices, one row per point.
    pub fn eval_gradient(&self, points: &[Point]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut gx = DMatrix::zeros(points.len(), self.dim());
        let mut gy = DMatrix::zeros(points.len(), self.dim());
        for (r, &p) in points.iter().enumerate() {
            let (dx, dy) = self.gradient_at(p);
            gx.row_mut(r).copy_from(&dx.transpose());
            gy.row_mut(r).copy_from(&dy.transpose());
        }
        (gx, gy)
    }

    /// Value of `sum_i c_i b_i` at `x`.
    pub fn eval_poly(&self, c: &DVector<f64>, x: Point) -> f64 {
        self.eval_at(x).dot(c)
    }

    pub fn gram_matrix(&self, quad: &QuadratureRule) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let v = self.eval_at(*p);
            g.ger(*w, &v, &v, 1.0);
        }
        g
    }

    /// L2-orthonormal basis spanning the same spaces `P_r`, `r <= k`.
    /// A raw basis is passed through the Cholesky step twice to remove the
    /// round-off left by the ill-conditioned monomial Gram matrix.
    pub fn orthonormalize(&self, quad: &QuadratureRule) -> Result<Self> {
        let once = self.cholesky_step(quad)?;
        if self.mode == BasisMode::Raw {
            once.cholesky_step(quad)
        } else {
            Ok(once)
        }
    }

    fn cholesky_step(&self, quad: &QuadratureRule) -> Result<Self> {
        let g = self.gram_matrix(quad);
        let g = (&g + g.transpose()) * 0.5;
        let chol = nalgebra::Cholesky::new(g.clone())
            .ok_or_else(|| Error::SingularGram { cell: self.cell, condition: spectral_condition(&g) })?;
        let l = chol.l();
        let l_inv = l.clone().try_inverse().ok_or(Error::SingularGram { cell: self.cell, condition: f64::INFINITY })?;
        let mut out = self.clone();
        out.coeffs = &l_inv * &self.coeffs;
        out.coeffs_inv = &self.coeffs_inv * l;
        out.mode = BasisMode::Orthonormal;
        Ok(out)
    }

    fn monomial_partial(&self, axis: usize) -> DMatrix<f64> {
        let n = self.dim();
        let mut r = DMatrix::zeros(n, n);
        for (j, &(a, b)) in self.exponents.iter().enumerate() {
            let (e, target) = if axis == 0 { (a, (a.wrapping_sub(1), b)) } else { (b, (a, b.wrapping_sub(1))) };
            if e > 0 {
                r[(monomial_index(target.0, target.1), j)] = e as f64 / self.diameter;
            }
        }
        r
    }

    /// Matrix of `d/dx` (`axis = 0`) or `d/dy` acting on basis coefficients.
    pub fn partial_matrix(&self, axis: usize) -> DMatrix<f64> {
        let r = self.monomial_partial(axis);
        match self.mode {
            BasisMode::Raw => r,
            BasisMode::Orthonormal => self.coeffs_inv.transpose() * r * self.coeffs.transpose(),
        }
    }

    /// Matrix `M_j` with `coeffs(d_sigma^j p) = M_j coeffs(p)`.
    pub fn directional_derivative_matrix(&self, sigma: Point, j: usize) -> Result<DMatrix<f64>> {
        if (sigma.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("sigma {sigma:?} is not a unit vector")));
        }
        let n = self.dim();
        let m1 = self.partial_matrix(0) * sigma.x + self.partial_matrix(1) * sigma.y;
        let mut m = DMatrix::identity(n, n);
        for _ in 0..j.min(self.order + 1) {
            m = &m1 * m;
        }
        Ok(m)
    }

    /// Coefficients of the Laplacian of a polynomial.
    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        let dx = self.partial_matrix(0);
        let dy = self.partial_matrix(1);
        &dx * &dx + &dy * &dy
    }

    /// Coefficients of a polynomial given in scaled monomials.
    pub fn from_monomial_coefficients(&self, a: &DVector<f64>) -> DVector<f64> {
        match self.mode {
            BasisMode::Raw => a.clone(),
            BasisMode::Orthonormal => self.coeffs_inv.transpose() * a,
        }
    }
}

fn spectral_condition(g: &DMatrix<f64>) -> f64 {
    let eig = g.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Basis of `P_k'(f)` in the scaled arclength `s = (x - mid) . t / h_f`.
#[derive(Debug, Clone)]
pub struct EdgePolyBasis {
    order: usize,
    midpoint: Point,
    tangent: Point,
    length: f64,
    mode: BasisMode,
    coeffs: DMatrix<f64>,
}

impl EdgePolyBasis {
    /// `tangent` is the unit direction of increasing arclength.
    pub fn new(order: usize, a: Point, b: Point, mode: BasisMode) -> Self {
        let length = (b - a).norm();
        let n = order + 1;
        let mut basis = Self {
            order,
            midpoint: (a + b) * 0.5,
            tangent: (b - a) / length,
            length,
            mode: BasisMode::Raw,
            coeffs: DMatrix::identity(n, n),
        };
        if mode == BasisMode::Orthonormal {
            basis.orthonormalize();
        }
        basis
    }

    pub fn for_edge(mesh: &PolygonalMesh, edge: usize, order: usize, mode: BasisMode) -> Self {
        let (a, b) = mesh.edge_endpoints(edge);
        Self::new(order, a, b, mode)
    }

    fn orthonormalize(&mut self) {
        // Gram of the raw monomials s^i on s in [-1/2, 1/2] times h_f
        let n = self.order + 1;
        let g = DMatrix::from_fn(n, n, |i, j| {
            let p = i + j;
            if p % 2 == 1 {
                0.0
            } else {
                self.length * 2.0 * 0.5f64.powi(p as i32 + 1) / (p as f64 + 1.0)
            }
        });
        let l = nalgebra::Cholesky::new(g).expect("edge monomial Gram is SPD").l();
        self.coeffs = l.try_inverse().expect("triangular factor is invertible");
        self.mode = BasisMode::Orthonormal;
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.order + 1
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn parameter(&self, x: Point) -> f64 {
        (x - self.midpoint).dot(&self.tangent) / self.length
    }

    pub fn eval_param(&self, s: f64) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        let mut p = 1.0;
        for i in 0..self.dim() {
            v[i] = p;
            p *= s;
        }
        match self.mode {
            BasisMode::Raw => v,
            BasisMode::Orthonormal => &self.coeffs * v,
        }
    }

    pub fn eval_at(&self, x: Point) -> DVector<f64> {
        self.eval_param(self.parameter(x))
    }

    pub fn gram_matrix(&self, quad: &QuadratureRule) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let v = self.eval_at(*p);
            g.ger(*w, &v, &v, 1.0);
        }
        g
    }
}
