//! Local order-k virtual element on a polygon.
//!
//! Local DOF order: vertex values in loop order, then the `k - 1` interior
//! Gauss-Lobatto values of every edge (edges in loop order, nodes in the
//! direction of the loop), then the moments `|K|^-1 int_K v q_alpha` against a
//! basis `q` of `P_{k-2}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{poly_dim, BasisMode, CellPolyBasis};
use crate::geometry::{cell_quadrature, gauss_lobatto, PolygonalMesh, QuadratureRule};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stabilization {
    /// Identity on the DOFs.
    Euclidean,
    /// Diagonal weights `max(K_c[i][i], trace(K_c) / N_dof)`.
    DRecipe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub order: usize,
    pub n_vertices: usize,
}

impl DofLayout {
    pub fn edge_internal(&self) -> usize {
        self.order - 1
    }

    pub fn n_moments(&self) -> usize {
        poly_dim(self.order as isize - 2)
    }

    pub fn total(&self) -> usize {
        self.n_vertices * self.order + self.n_moments()
    }

    pub fn vertex(&self, i: usize) -> usize {
        i
    }

    pub fn edge_node(&self, edge: usize, j: usize) -> usize {
        self.n_vertices + edge * self.edge_internal() + j
    }

    pub fn moment(&self, alpha: usize) -> usize {
        self.n_vertices * self.order + alpha
    }

    /// Local DOFs of the `k + 1` Gauss-Lobatto nodes of local edge `i`, from
    /// vertex `i` to vertex `i + 1`.
    pub fn edge_trace(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.order + 1);
        out.push(self.vertex(i));
        out.extend((0..self.edge_internal()).map(|j| self.edge_node(i, j)));
        out.push(self.vertex((i + 1) % self.n_vertices));
        out
    }
}

/// Global DOF numbering: vertices, then edge nodes in stored edge
/// orientation, then cell moments.
#[derive(Debug, Clone)]
pub struct DofMap {
    order: usize,
    num_dofs: usize,
    cell_dofs: Vec<Vec<usize>>,
}

impl DofMap {
    pub fn new(mesh: &PolygonalMesh, order: usize) -> Self {
        let ke = order - 1;
        let nm = poly_dim(order as isize - 2);
        let edge_base = mesh.num_vertices();
        let moment_base = edge_base + mesh.num_edges() * ke;
        let cell_dofs = (0..mesh.num_cells())
            .map(|c| {
                let cell = mesh.cell(c);
                let mut d: Vec<usize> = cell.to_vec();
                for &(e, forward) in mesh.cell_edges(c) {
                    for j in 0..ke {
                        let jj = if forward { j } else { ke - 1 - j };
                        d.push(edge_base + e * ke + jj);
                    }
                }
                d.extend((0..nm).map(|a| moment_base + c * nm + a));
                d
            })
            .collect();
        Self { order, num_dofs: moment_base + mesh.num_cells() * nm, cell_dofs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c]
    }

    /// Global DOF vector of the interpolant of `u`.
    pub fn interpolate(&self, elements: &[LocalVemElement], u: &dyn Fn(Point) -> f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.num_dofs);
        for el in elements {
            let loc = el.interpolate(u);
            for (i, &g) in self.cell_dofs(el.cell()).iter().enumerate() {
                out[g] = loc[i];
            }
        }
        out
    }

    pub fn local(&self, c: usize, global: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.cell_dofs[c].len(), self.cell_dofs[c].iter().map(|&g| global[g]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementOptions {
    pub order: usize,
    pub stabilization: Stabilization,
    /// Defaults to [`BasisMode::default_for_order`].
    pub basis_mode: Option<BasisMode>,
    /// Cell quadrature exactness; defaults to `2k + 2`.
    pub quadrature_exactness: Option<usize>,
}

impl ElementOptions {
    pub fn new(order: usize, stabilization: Stabilization) -> Self {
        Self { order, stabilization, basis_mode: None, quadrature_exactness: None }
    }
}

#[derive(Debug, Clone)]
pub struct LocalVemElement {
    cell: usize,
    layout: DofLayout,
    basis: CellPolyBasis,
    quad: QuadratureRule,
    area: f64,
    perimeter: f64,
    vertices: Vec<Point>,
    gl_nodes: Vec<f64>,
    moment_scale: f64,
    pi_nabla: DMatrix<f64>,
    pi0_moments: DMatrix<f64>,
    grad_proj: [DMatrix<f64>; 2],
    dofs_of_basis: DMatrix<f64>,
    poly_stiffness: DMatrix<f64>,
    consistency: DMatrix<f64>,
    stab: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    gram: DMatrix<f64>,
}

/// Mesh, local elements and global DOF numbering of one discretization.
#[derive(Debug, Clone)]
pub struct VemSpace {
    mesh: PolygonalMesh,
    elements: Vec<LocalVemElement>,
    dofs: DofMap,
    options: ElementOptions,
}

impl VemSpace {
    pub fn new(mesh: PolygonalMesh, options: ElementOptions) -> Result<Self> {
        let elements = build_elements(&mesh, &options)?;
        let dofs = DofMap::new(&mesh, options.order);
        Ok(Self { mesh, elements, dofs, options })
    }

    pub fn mesh(&self) -> &PolygonalMesh {
        &self.mesh
    }

    pub fn elements(&self) -> &[LocalVemElement] {
        &self.elements
    }

    pub fn element(&self, c: usize) -> &LocalVemElement {
        &self.elements[c]
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn options(&self) -> &ElementOptions {
        &self.options
    }

    pub fn order(&self) -> usize {
        self.options.order
    }

    pub fn num_dofs(&self) -> usize {
        self.dofs.num_dofs()
    }

    pub fn interpolate(&self, u: &dyn Fn(Point) -> f64) -> DVector<f64> {
        self.dofs.interpolate(&self.elements, u)
    }
}

pub fn build_elements(mesh: &PolygonalMesh, opts: &ElementOptions) -> Result<Vec<LocalVemElement>> {
    (0..mesh.num_cells()).map(|c| build_element(mesh, c, opts)).collect()
}

pub fn build_element(mesh: &PolygonalMesh, cell: usize, opts: &ElementOptions) -> Result<LocalVemElement> {
    let k = opts.order;
    if k == 0 {
        return Err(Error::InvalidArgument("element order must be at least 1".into()));
    }
    let geo = *mesh.cell_geometry(cell);
    let vertices = mesh.cell_points(cell);
    let n = vertices.len();
    let layout = DofLayout { order: k, n_vertices: n };
    let ndof = layout.total();
    let quad = cell_quadrature(mesh, cell, opts.quadrature_exactness.unwrap_or(2 * k + 2).max(2 * k))?;
    let mode = opts.basis_mode.unwrap_or(BasisMode::default_for_order(k));
    let basis = CellPolyBasis::for_cell(mesh, cell, k, mode, &quad)?;
    let np = basis.dim();
    let nm = layout.n_moments();
    let nm1 = poly_dim(k as isize - 1);
    let area = geo.area;
    let moment_scale = match mode {
        BasisMode::Raw => 1.0,
        BasisMode::Orthonormal => area.sqrt(),
    };
    // int_K v b_g = |K| / moment_scale * DOF_moment(g) for g < nm
    let int_factor = area / moment_scale;

    let gram = basis.gram_matrix(&quad);
    let mut poly_stiffness = DMatrix::zeros(np, np);
    for (p, w) in quad.points.iter().zip(&quad.weights) {
        let (gx, gy) = basis.gradient_at(*p);
        poly_stiffness.ger(*w, &gx, &gx, 1.0);
        poly_stiffness.ger(*w, &gy, &gy, 1.0);
    }

    let (gl_nodes, gl_weights) = gauss_lobatto(k);
    let perimeter: f64 = (0..n).map(|i| (vertices[(i + 1) % n] - vertices[i]).norm()).sum();

    // DOFs -> Pk via G pi = B
    let lap = basis.laplacian_matrix();
    let mut b = DMatrix::zeros(np, ndof);
    let mut g = poly_stiffness.clone();
    for beta in 0..np {
        g[(0, beta)] = 0.0;
    }
    // projections of derivatives: rows for P_{k-1}, by parts
    let dx = basis.partial_matrix(0);
    let dy = basis.partial_matrix(1);
    let mut rhs_grad = [DMatrix::zeros(nm1, ndof), DMatrix::zeros(nm1, ndof)];
    for a in 1..np {
        for gidx in 0..nm {
            b[(a, layout.moment(gidx))] -= lap[(gidx, a)] * int_factor;
        }
    }
    for gidx in 0..nm1 {
        for m in 0..nm {
            rhs_grad[0][(gidx, layout.moment(m))] -= dx[(m, gidx)] * int_factor;
            rhs_grad[1][(gidx, layout.moment(m))] -= dy[(m, gidx)] * int_factor;
        }
    }
    let edge_rule = crate::geometry::gauss_legendre(k / 2 + 1);
    for i in 0..n {
        let (p0, p1) = (vertices[i], vertices[(i + 1) % n]);
        let len = (p1 - p0).norm();
        let t = p1 - p0;
        let normal = Point::new(t.y, -t.x) / len;
        let trace = layout.edge_trace(i);
        for (j, (&s, &w)) in gl_nodes.iter().zip(&gl_weights).enumerate() {
            let x = p0 + t * s;
            let (gx, gy) = basis.gradient_at(x);
            let dn = gx * normal.x + gy * normal.y;
            let vals = basis.eval_at(x);
            let col = trace[j];
            for a in 1..np {
                b[(a, col)] += w * len * dn[a];
            }
            b[(0, col)] += w * len / perimeter;
            for gidx in 0..nm1 {
                rhs_grad[0][(gidx, col)] += w * len * vals[gidx] * normal.x;
                rhs_grad[1][(gidx, col)] += w * len * vals[gidx] * normal.y;
            }
        }
        // boundary mean of the basis for the constant row
        for (&s, &w) in edge_rule.0.iter().zip(&edge_rule.1) {
            let v = basis.eval_at(p0 + t * s);
            for beta in 0..np {
                g[(0, beta)] += w * len * v[beta] / perimeter;
            }
        }
    }
    let pi_nabla = g.lu().solve(&b).ok_or(Error::SingularProjector { cell })?;
    if !pi_nabla.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularProjector { cell });
    }

    let mass_m1 = gram.view((0, 0), (nm1, nm1)).into_owned();
    let mass_lu = mass_m1.lu();
    let grad_proj = [
        mass_lu.solve(&rhs_grad[0]).ok_or(Error::SingularProjector { cell })?,
        mass_lu.solve(&rhs_grad[1]).ok_or(Error::SingularProjector { cell })?,
    ];
    let pi0_moments = if nm > 0 {
        let mass = gram.view((0, 0), (nm, nm)).into_owned();
        let mut rhs = DMatrix::zeros(nm, ndof);
        for a in 0..nm {
            rhs[(a, layout.moment(a))] = int_factor;
        }
        mass.lu().solve(&rhs).ok_or(Error::SingularProjector { cell })?
    } else {
        DMatrix::zeros(0, ndof)
    };

    // DOFs of the basis polynomials
    let mut d = DMatrix::zeros(ndof, np);
    for (i, &v) in vertices.iter().enumerate() {
        d.row_mut(layout.vertex(i)).copy_from(&basis.eval_at(v).transpose());
    }
    for i in 0..n {
        let (p0, p1) = (vertices[i], vertices[(i + 1) % n]);
        for j in 0..layout.edge_internal() {
            let x = p0 + (p1 - p0) * gl_nodes[j + 1];
            d.row_mut(layout.edge_node(i, j)).copy_from(&basis.eval_at(x).transpose());
        }
    }
    for a in 0..nm {
        for beta in 0..np {
            d[(layout.moment(a), beta)] = gram[(a, beta)] / int_factor;
        }
    }

    let consistency = pi_nabla.transpose() * &poly_stiffness * &pi_nabla;
    let consistency = (&consistency + consistency.transpose()) * 0.5;
    let stab = match opts.stabilization {
        Stabilization::Euclidean => DMatrix::identity(ndof, ndof),
        Stabilization::DRecipe => {
            let floor = consistency.trace() / ndof as f64;
            DMatrix::from_diagonal(&DVector::from_iterator(ndof, (0..ndof).map(|i| consistency[(i, i)].max(floor))))
        }
    };
    let ip = DMatrix::identity(ndof, ndof) - &d * &pi_nabla;
    let stiffness = &consistency + ip.transpose() * &stab * &ip;
    let stiffness = (&stiffness + stiffness.transpose()) * 0.5;

    Ok(LocalVemElement {
        cell,
        layout,
        basis,
        quad,
        area,
        perimeter,
        vertices,
        gl_nodes,
        moment_scale,
        pi_nabla,
        pi0_moments,
        grad_proj,
        dofs_of_basis: d,
        poly_stiffness,
        consistency,
        stab,
        stiffness,
        gram,
    })
}

impl LocalVemElement {
    pub fn cell(&self) -> usize {
        self.cell
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn layout(&self) -> &DofLayout {
        &self.layout
    }

    pub fn num_dofs(&self) -> usize {
        self.layout.total()
    }

    pub fn basis(&self) -> &CellPolyBasis {
        &self.basis
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn diameter(&self) -> f64 {
        self.basis.diameter()
    }

    /// Gauss-Lobatto parameters on `[0, 1]` used for edge DOFs.
    pub fn gl_nodes(&self) -> &[f64] {
        &self.gl_nodes
    }

    /// DOFs -> coefficients of `Pi^nabla v` in [`Self::basis`].
    pub fn pi_nabla(&self) -> &DMatrix<f64> {
        &self.pi_nabla
    }

    /// DOFs -> coefficients of the L2 projection onto `P_{k-2}`.
    pub fn pi0_moments(&self) -> &DMatrix<f64> {
        &self.pi0_moments
    }

    /// Basis coefficients -> DOFs.
    pub fn dofs_of_basis(&self) -> &DMatrix<f64> {
        &self.dofs_of_basis
    }

    pub fn poly_stiffness(&self) -> &DMatrix<f64> {
        &self.poly_stiffness
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn consistency(&self) -> &DMatrix<f64> {
        &self.consistency
    }

    pub fn stabilization(&self) -> &DMatrix<f64> {
        &self.stab
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// Local index of mesh edge `edge` in this cell's loop.
    pub fn local_edge(&self, mesh: &PolygonalMesh, edge: usize) -> Option<usize> {
        mesh.cell_edges(self.cell).iter().position(|&(e, _)| e == edge)
    }

    /// Local DOFs along local edge `i` together with the Lagrange weights
    /// reproducing the trace at parameter `t` in `[0, 1]` (loop direction).
    pub fn edge_trace_weights(&self, i: usize, t: f64) -> (Vec<usize>, Vec<f64>) {
        (self.layout.edge_trace(i), lagrange_weights(&self.gl_nodes, t))
    }

    pub fn interpolate(&self, u: &dyn Fn(Point) -> f64) -> DVector<f64> {
        let n = self.layout.n_vertices;
        let mut out = DVector::zeros(self.num_dofs());
        for i in 0..n {
            out[self.layout.vertex(i)] = u(self.vertices[i]);
            let (p0, p1) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for j in 0..self.layout.edge_internal() {
                out[self.layout.edge_node(i, j)] = u(p0 + (p1 - p0) * self.gl_nodes[j + 1]);
            }
        }
        for a in 0..self.layout.n_moments() {
            let q = self.quad.integrate(|x| u(x) * self.basis.eval_at(x)[a]);
            out[self.layout.moment(a)] = q * self.moment_scale / self.area;
        }
        out
    }

    /// DOF functional `v -> int_K f hatPi0(v)`.
    pub fn load_vector(&self, f: &dyn Fn(Point) -> f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.num_dofs());
        if self.layout.order == 1 {
            let total = self.quad.integrate(f);
            let n = self.layout.n_vertices;
            for i in 0..n {
                let prev = (self.vertices[i] - self.vertices[(i + n - 1) % n]).norm();
                let next = (self.vertices[(i + 1) % n] - self.vertices[i]).norm();
                out[i] = total * 0.5 * (prev + next) / self.perimeter;
            }
        } else {
            let nm = self.layout.n_moments();
            let mut fvec = DVector::zeros(nm);
            for (p, w) in self.quad.points.iter().zip(&self.quad.weights) {
                let fx = f(*p);
                let v = self.basis.eval_at(*p);
                for a in 0..nm {
                    fvec[a] += w * fx * v[a];
                }
            }
            out = self.pi0_moments.transpose() * fvec;
        }
        out
    }

    /// Coefficients (in the first `dim P_{k-1}` basis functions) of the L2
    /// projection of `(d/dx v, d/dy v)`.
    pub fn project_gradient_l2(&self, dofs: &DVector<f64>) -> [DVector<f64>; 2] {
        [&self.grad_proj[0] * dofs, &self.grad_proj[1] * dofs]
    }

    pub fn gradient_projector(&self) -> &[DMatrix<f64>; 2] {
        &self.grad_proj
    }
}

/// Lagrange basis on `nodes` evaluated at `t`.
pub fn lagrange_weights(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| nodes.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &xj)| (t - xj) / (nodes[i] - xj)).product())
        .collect()
}
