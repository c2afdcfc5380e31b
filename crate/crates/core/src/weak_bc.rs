//! Weak imposition of Dirichlet data: the stabilized Barbosa-Hughes
//! multiplier system and the Nitsche system obtained from it by edge-local
//! condensation with `gamma = 1 / alpha`.
//!
//! The multiplier approximates `lambda = -grad u . nu`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisMode, EdgePolyBasis};
use crate::element::{lagrange_weights, VemSpace};
use crate::geometry::{edge_quadrature, PolygonalMesh};
use crate::linalg::{LinearSystem, MultiplierBlock, SaddlePartition, TripletList};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BarbosaHughes,
    Nitsche,
}

/// Multiplier degree `k'` relative to the space order `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MultiplierOrder {
    #[serde(rename = "k")]
    K,
    #[serde(rename = "k-1")]
    KMinus1,
}

impl MultiplierOrder {
    pub fn resolve(self, k: usize) -> usize {
        match self {
            Self::K => k,
            Self::KMinus1 => k - 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakBcConfig {
    pub method: Method,
    pub order: usize,
    /// Barbosa-Hughes only; Nitsche always uses `k' = k`.
    pub kprime: MultiplierOrder,
    pub alpha: f64,
    pub gamma: f64,
    /// Exactness of the edge rule for data terms; defaults to `2k + 2`.
    pub data_exactness: Option<usize>,
}

pub const DEFAULT_ALPHA: f64 = 1e-3;
pub const DEFAULT_GAMMA: f64 = 1e3;

impl WeakBcConfig {
    pub fn nitsche(order: usize, gamma: f64) -> Self {
        Self {
            method: Method::Nitsche,
            order,
            kprime: MultiplierOrder::K,
            alpha: 1.0 / gamma,
            gamma,
            data_exactness: None,
        }
    }

    pub fn barbosa_hughes(order: usize, alpha: f64, kprime: MultiplierOrder) -> Self {
        Self { method: Method::BarbosaHughes, order, kprime, alpha, gamma: 1.0 / alpha, data_exactness: None }
    }

    pub fn multiplier_order(&self) -> usize {
        match self.method {
            Method::Nitsche => self.order,
            Method::BarbosaHughes => self.kprime.resolve(self.order),
        }
    }

    pub fn edge_exactness(&self) -> usize {
        self.data_exactness.unwrap_or(2 * self.order + 2).max(2 * self.order)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidArgument("order must be at least 1".into()));
        }
        match self.method {
            Method::BarbosaHughes => {
                if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                    return Err(Error::InvalidArgument("alpha must be positive".into()));
                }
                if self.alpha >= 0.25 {
                    log::warn!("alpha = {} may exceed the stability threshold", self.alpha);
                }
            }
            Method::Nitsche => {
                if !(self.gamma > 0.0 && self.gamma.is_finite()) {
                    return Err(Error::InvalidArgument("gamma must be positive".into()));
                }
                if self.gamma <= 4.0 {
                    log::warn!("gamma = {} may be below the stability threshold", self.gamma);
                }
            }
        }
        Ok(())
    }

    fn check_space(&self, space: &VemSpace) -> Result<()> {
        self.validate()?;
        for el in space.elements() {
            if el.order() != self.order {
                return Err(Error::OrderMismatch { element: el.order(), config: self.order });
            }
        }
        Ok(())
    }
}

/// Discontinuous piecewise polynomials of degree `k'` on the boundary edges.
#[derive(Debug, Clone)]
pub struct MultiplierSpace {
    order: usize,
    edges: Vec<usize>,
    bases: Vec<EdgePolyBasis>,
}

impl MultiplierSpace {
    pub fn new(mesh: &PolygonalMesh, order: usize) -> Self {
        Self::with_mode(mesh, order, BasisMode::Orthonormal)
    }

    pub fn with_mode(mesh: &PolygonalMesh, order: usize, mode: BasisMode) -> Self {
        let edges = mesh.boundary_edges().to_vec();
        let bases = edges.iter().map(|&e| EdgePolyBasis::for_edge(mesh, e, order, mode)).collect();
        Self { order, edges, bases }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.edges.len() * (self.order + 1)
    }

    pub fn block_size(&self) -> usize {
        self.order + 1
    }

    /// Boundary edges in block order.
    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn basis(&self, block: usize) -> &EdgePolyBasis {
        &self.bases[block]
    }

    pub fn offset(&self, block: usize) -> usize {
        block * self.block_size()
    }

    pub fn partition(&self, n_u: usize) -> SaddlePartition {
        SaddlePartition {
            n_u,
            blocks: self
                .edges
                .iter()
                .enumerate()
                .map(|(b, &edge)| MultiplierBlock { edge, offset: n_u + self.offset(b), size: self.block_size() })
                .collect(),
        }
    }

    /// Value at `x` on block `block` of the field with coefficients `coeffs`.
    pub fn eval(&self, coeffs: &DVector<f64>, block: usize, x: Point) -> f64 {
        let o = self.offset(block);
        self.bases[block].eval_at(x).dot(&coeffs.rows(o, self.block_size()))
    }
}

/// Quadrature data of one boundary edge seen from its cell.
#[derive(Debug, Clone)]
pub(crate) struct EdgeTerms {
    pub edge: usize,
    pub cell: usize,
    pub h_tilde: f64,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Row `q`: local DOFs -> trace value at point `q`.
    pub trace: DMatrix<f64>,
    /// Row `q`: local DOFs -> `d_nu Pi^nabla v` at point `q`.
    pub dn: DMatrix<f64>,
}

impl EdgeTerms {
    pub fn new(space: &VemSpace, edge: usize, exactness: usize) -> Result<Self> {
        let mesh = space.mesh();
        let e = mesh.edge(edge);
        if !e.is_boundary() {
            return Err(Error::InvalidArgument(format!("edge {edge} is not a boundary edge")));
        }
        let cell = e.left;
        let el = space.element(cell);
        let local = el
            .local_edge(mesh, edge)
            .ok_or_else(|| Error::InvalidMesh(format!("edge {edge} missing from cell {cell}")))?;
        let cv = mesh.cell(cell);
        let (a, b) = (mesh.vertex(cv[local]), mesh.vertex(cv[(local + 1) % cv.len()]));
        let normal = mesh.edge_geometry(edge).normal;
        let quad = edge_quadrature(mesh, edge, exactness);
        let nq = quad.len();
        let ndof = el.num_dofs();
        let dofs = el.layout().edge_trace(local);
        let mut trace = DMatrix::zeros(nq, ndof);
        let mut dn = DMatrix::zeros(nq, ndof);
        let len2 = (b - a).norm_squared();
        for (q, &x) in quad.points.iter().enumerate() {
            let t = (x - a).dot(&(b - a)) / len2;
            for (&d, w) in dofs.iter().zip(lagrange_weights(el.gl_nodes(), t)) {
                trace[(q, d)] += w;
            }
            let (gx, gy) = el.basis().gradient_at(x);
            let g = gx * normal.x + gy * normal.y;
            dn.row_mut(q).copy_from(&(g.transpose() * el.pi_nabla()));
        }
        Ok(Self { edge, cell, h_tilde: el.diameter(), points: quad.points, weights: quad.weights, trace, dn })
    }

    /// `sum_q w_q a_q^T b_q` for row-per-point matrices.
    pub fn weighted(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut wb = b.clone();
        for (q, w) in self.weights.iter().enumerate() {
            wb.row_mut(q).scale_mut(*w);
        }
        a.transpose() * wb
    }

    pub fn weighted_vec(&self, a: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
        let wv = DVector::from_iterator(v.len(), v.iter().zip(&self.weights).map(|(a, b)| a * b));
        a.transpose() * wv
    }

    pub fn multiplier_values(&self, basis: &EdgePolyBasis) -> DMatrix<f64> {
        let mut psi = DMatrix::zeros(self.points.len(), basis.dim());
        for (q, &x) in self.points.iter().enumerate() {
            psi.row_mut(q).copy_from(&basis.eval_at(x).transpose());
        }
        psi
    }
}

pub(crate) fn boundary_terms(space: &VemSpace, exactness: usize) -> Result<Vec<EdgeTerms>> {
    space.mesh().boundary_edges().iter().map(|&e| EdgeTerms::new(space, e, exactness)).collect()
}

/// Boundary data of the corrected formulations, per boundary edge (in
/// boundary-edge order): the Taylor operator rows `c_q` (local DOFs) and the
/// data values at the quadrature points.
pub(crate) struct EdgeData<'a> {
    pub g_values: &'a [Vec<f64>],
    pub correction: Option<&'a [DMatrix<f64>]>,
}

fn sym(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

fn bulk(space: &VemSpace, f: &dyn Fn(Point) -> f64, n: usize) -> (TripletList, DVector<f64>) {
    let mut t = TripletList::new();
    let mut rhs = DVector::zeros(n);
    for el in space.elements() {
        let dofs = space.dofs().cell_dofs(el.cell());
        t.add_block(dofs, dofs, el.stiffness());
        let l = el.load_vector(f);
        for (i, &g) in dofs.iter().enumerate() {
            rhs[g] += l[i];
        }
    }
    (t, rhs)
}

pub(crate) fn assemble_bh_with(
    space: &VemSpace,
    mult: &MultiplierSpace,
    cfg: &WeakBcConfig,
    f: &dyn Fn(Point) -> f64,
    terms: &[EdgeTerms],
    data: &EdgeData,
) -> Result<LinearSystem> {
    cfg.check_space(space)?;
    let n_u = space.num_dofs();
    let n = n_u + mult.dim();
    let (mut t, mut rhs) = bulk(space, f, n);
    for (b, et) in terms.iter().enumerate() {
        debug_assert_eq!(mult.edges()[b], et.edge);
        let dofs = space.dofs().cell_dofs(et.cell);
        let lam: Vec<usize> = (0..mult.block_size()).map(|i| n_u + mult.offset(b) + i).collect();
        let psi = et.multiplier_values(mult.basis(b));
        let ah = cfg.alpha * et.h_tilde;
        t.add_block(dofs, dofs, &sym(et.weighted(&et.dn, &et.dn) * (-ah)));
        let coupling = et.weighted(&(&et.trace - &et.dn * ah), &psi);
        t.add_block(dofs, &lam, &coupling);
        let mut lu = coupling.transpose();
        if let Some(c) = data.correction {
            lu += et.weighted(&psi, &c[b]);
        }
        t.add_block(&lam, dofs, &lu);
        t.add_block(&lam, &lam, &sym(et.weighted(&psi, &psi) * (-ah)));
        let r = et.weighted_vec(&psi, &data.g_values[b]);
        for (i, &l) in lam.iter().enumerate() {
            rhs[l] += r[i];
        }
    }
    LinearSystem::new(t.compress(n, n), rhs, data.correction.is_none(), Some(mult.partition(n_u)))
}

/// Coefficients of the L2(f) projection onto `P_k(f)` of point values, using
/// the edge rule of `et`.
pub(crate) fn project_edge(et: &EdgeTerms, basis: &EdgePolyBasis, values: &[f64]) -> Result<DVector<f64>> {
    let psi = et.multiplier_values(basis);
    let m = et.weighted(&psi, &psi);
    m.lu().solve(&et.weighted_vec(&psi, values)).ok_or(Error::SingularEdgeBlock { edge: et.edge })
}

pub(crate) fn assemble_nitsche_with(
    space: &VemSpace,
    cfg: &WeakBcConfig,
    f: &dyn Fn(Point) -> f64,
    terms: &[EdgeTerms],
    data: &EdgeData,
) -> Result<LinearSystem> {
    cfg.check_space(space)?;
    let n = space.num_dofs();
    let (mut t, mut rhs) = bulk(space, f, n);
    let k = cfg.order;
    let mesh = space.mesh();
    for (b, et) in terms.iter().enumerate() {
        let dofs = space.dofs().cell_dofs(et.cell);
        let s = cfg.gamma / et.h_tilde;
        let tn = et.weighted(&et.trace, &et.dn);
        let e = et.weighted(&et.trace, &et.trace) * s - &tn - tn.transpose();
        t.add_block(dofs, dofs, &sym(e));
        let test = &et.trace * s - &et.dn;
        if let Some(c) = data.correction {
            t.add_block(dofs, dofs, &et.weighted(&test, &c[b]));
        }
        // g_h = Pi^0 g on P_k(f)
        let basis = EdgePolyBasis::for_edge(mesh, et.edge, k, BasisMode::Orthonormal);
        let coeffs = project_edge(et, &basis, &data.g_values[b])?;
        let gh: Vec<f64> = (et.multiplier_values(&basis) * coeffs).iter().copied().collect();
        let r = et.weighted_vec(&test, &gh);
        for (i, &g) in dofs.iter().enumerate() {
            rhs[g] += r[i];
        }
    }
    LinearSystem::new(t.compress(n, n), rhs, data.correction.is_none(), None)
}

pub(crate) fn plain_data(terms: &[EdgeTerms], g: &dyn Fn(Point) -> f64) -> Vec<Vec<f64>> {
    terms.iter().map(|et| et.points.iter().map(|&x| g(x)).collect()).collect()
}

/// Barbosa-Hughes saddle system `[u; lambda]`.
pub fn assemble_bh(
    space: &VemSpace,
    mult: &MultiplierSpace,
    cfg: &WeakBcConfig,
    f: &dyn Fn(Point) -> f64,
    g: &dyn Fn(Point) -> f64,
) -> Result<LinearSystem> {
    if mult.order() != cfg.multiplier_order() {
        return Err(Error::OrderMismatch { element: mult.order(), config: cfg.multiplier_order() });
    }
    let terms = boundary_terms(space, cfg.edge_exactness())?;
    let gv = plain_data(&terms, g);
    assemble_bh_with(space, mult, cfg, f, &terms, &EdgeData { g_values: &gv, correction: None })
}

/// Symmetric Nitsche system on the VEM DOFs.
pub fn assemble_nitsche(
    space: &VemSpace,
    cfg: &WeakBcConfig,
    f: &dyn Fn(Point) -> f64,
    g: &dyn Fn(Point) -> f64,
) -> Result<LinearSystem> {
    let terms = boundary_terms(space, cfg.edge_exactness())?;
    let gv = plain_data(&terms, g);
    assemble_nitsche_with(space, cfg, f, &terms, &EdgeData { g_values: &gv, correction: None })
}

pub(crate) fn recover_multiplier_with(
    space: &VemSpace,
    cfg: &WeakBcConfig,
    u: &DVector<f64>,
    terms: &[EdgeTerms],
    data: &EdgeData,
) -> Result<(MultiplierSpace, DVector<f64>)> {
    let mult = MultiplierSpace::new(space.mesh(), cfg.order);
    let mut out = DVector::zeros(mult.dim());
    for (b, et) in terms.iter().enumerate() {
        let ul = space.dofs().local(et.cell, u);
        let s = cfg.gamma / et.h_tilde;
        let mut jump = &et.trace * &ul;
        if let Some(c) = data.correction {
            jump += &c[b] * &ul;
        }
        let dn = &et.dn * &ul;
        let vals: Vec<f64> = (0..et.points.len()).map(|q| s * (jump[q] - data.g_values[b][q]) - dn[q]).collect();
        let coeffs = project_edge(et, mult.basis(b), &vals)?;
        out.rows_mut(mult.offset(b), mult.block_size()).copy_from(&coeffs);
    }
    Ok((mult, out))
}

/// Edge-local multiplier of a Nitsche solution:
/// `lambda_h = gamma / h_f Pi^0 (u_h - g) - d_nu Pi^nabla u_h`.
pub fn recover_multiplier(
    space: &VemSpace,
    cfg: &WeakBcConfig,
    u: &DVector<f64>,
    g: &dyn Fn(Point) -> f64,
) -> Result<(MultiplierSpace, DVector<f64>)> {
    let terms = boundary_terms(space, cfg.edge_exactness())?;
    let gv = plain_data(&terms, g);
    recover_multiplier_with(space, cfg, u, &terms, &EdgeData { g_values: &gv, correction: None })
}

/// Mesh-dependent boundary norms `||.||_{-1/2,h}`, `||.||_{1/2,h}` and the
/// discrete `||.||_{1,h}`.
#[derive(Debug, Clone)]
pub struct BoundaryNorms {
    edges: Vec<usize>,
    h_tilde: Vec<f64>,
    exactness: usize,
}

impl BoundaryNorms {
    pub fn new(mesh: &PolygonalMesh, exactness: usize) -> Self {
        let edges = mesh.boundary_edges().to_vec();
        let h_tilde = edges.iter().map(|&e| mesh.edge_cell_scale(e)).collect();
        Self { edges, h_tilde, exactness }
    }

    fn weighted_sq(&self, mesh: &PolygonalMesh, f: &dyn Fn(usize, Point) -> f64, power: f64) -> f64 {
        self.edges
            .iter()
            .zip(&self.h_tilde)
            .map(|(&e, &h)| {
                let q = edge_quadrature(mesh, e, self.exactness);
                h.powf(power) * q.integrate(|x| f(e, x).powi(2))
            })
            .sum()
    }

    /// `(sum_f h_f ||v||_{0,f}^2)^{1/2}` for `v(edge, x)`.
    pub fn minus_half(&self, mesh: &PolygonalMesh, v: &dyn Fn(usize, Point) -> f64) -> f64 {
        self.weighted_sq(mesh, v, 1.0).sqrt()
    }

    /// `(sum_f h_f^-1 ||v||_{0,f}^2)^{1/2}`.
    pub fn plus_half(&self, mesh: &PolygonalMesh, v: &dyn Fn(usize, Point) -> f64) -> f64 {
        self.weighted_sq(mesh, v, -1.0).sqrt()
    }

    /// `(a_h(v, v) + ||Pi^0 v||_{1/2,h}^2)^{1/2}` with `Pi^0` the L2 projection
    /// onto piecewise `P_{k'}` on the boundary.
    pub fn one_h(&self, space: &VemSpace, kprime: usize, v: &DVector<f64>) -> Result<f64> {
        let mut energy = 0.0;
        for el in space.elements() {
            let vl = space.dofs().local(el.cell(), v);
            energy += vl.dot(&(el.stiffness() * &vl));
        }
        let mut bnd = 0.0;
        for (&e, &h) in self.edges.iter().zip(&self.h_tilde) {
            let et = EdgeTerms::new(space, e, self.exactness)?;
            let vals: Vec<f64> = (&et.trace * space.dofs().local(et.cell, v)).iter().copied().collect();
            let basis = EdgePolyBasis::for_edge(space.mesh(), e, kprime, BasisMode::Orthonormal);
            let c = project_edge(&et, &basis, &vals)?;
            // orthonormal basis: ||Pi^0 v||^2 = |c|^2
            bnd += c.norm_squared() / h;
        }
        Ok((energy.max(0.0) + bnd).sqrt())
    }
}
