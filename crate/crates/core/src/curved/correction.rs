use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::levelset::{refine_root, LevelSet};
use crate::basis::EdgePolyBasis;
use crate::element::VemSpace;
use crate::geometry::{edge_quadrature, PolygonalMesh};
use crate::linalg::LinearSystem;
use crate::weak_bc::{
    assemble_bh_with, assemble_nitsche_with, boundary_terms, recover_multiplier_with, EdgeData, EdgeTerms,
    MultiplierSpace, WeakBcConfig,
};
use crate::{Error, Point, Result};

/// Direction along which boundary data is transferred from `Gamma_h` to
/// `Gamma`; constant per edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaStrategy {
    EdgeNormal,
    /// Normalized level-set gradient at the edge midpoint.
    DistanceGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionConfig {
    /// Taylor order `k*`, at most the space order.
    pub kstar: usize,
    pub sigma_strategy: SigmaStrategy,
    /// Root bracket `[0, delta_max_factor * h_f]`.
    pub delta_max_factor: f64,
    pub root_tol: f64,
    pub tau_threshold: f64,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        Self {
            kstar: 1,
            sigma_strategy: SigmaStrategy::EdgeNormal,
            delta_max_factor: 2.0,
            root_tol: 1e-12,
            tau_threshold: 0.5,
        }
    }
}

impl CorrectionConfig {
    pub fn with_kstar(kstar: usize, sigma_strategy: SigmaStrategy) -> Self {
        Self { kstar, sigma_strategy, ..Self::default() }
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        if self.kstar > order {
            return Err(Error::InvalidArgument(format!("k* = {} exceeds the order {order}", self.kstar)));
        }
        if !(self.delta_max_factor > 0.0 && self.root_tol > 0.0) {
            return Err(Error::InvalidArgument("bracket factor and root tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Expected size of `delta` relative to the mesh size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRegime {
    /// Inscribed polygons with vertices on `Gamma`.
    HSquared,
    /// Staircase approximations.
    HLinear,
}

pub fn kstar_default(k: usize, regime: DeltaRegime) -> usize {
    match regime {
        DeltaRegime::HSquared => (k as f64 / 2.0 - 0.75).ceil().max(0.0) as usize,
        DeltaRegime::HLinear => k,
    }
}

const SCAN_INTERVALS: usize = 64;
/// Points with a level-set value up to this are accepted as inside.
const INSIDE_TOL: f64 = 1e-10;

/// Smallest `delta >= 0` with `x + delta sigma` on `Gamma`, searched in
/// `[0, delta_max_factor * h_tilde]`.
pub fn delta(
    levelset: &dyn LevelSet,
    edge: usize,
    x: Point,
    sigma: Point,
    h_tilde: f64,
    cfg: &CorrectionConfig,
) -> Result<f64> {
    let f = |t: f64| levelset.value(x + sigma * t);
    let f0 = f(0.0);
    let bracket = cfg.delta_max_factor * h_tilde;
    if f0.abs() <= cfg.root_tol || (f0 > 0.0 && f0 <= INSIDE_TOL) {
        return Ok(0.0);
    }
    if f0 > 0.0 {
        return Err(Error::NoBracket { edge, bracket });
    }
    let step = bracket / SCAN_INTERVALS as f64;
    let mut a = 0.0;
    for i in 1..=SCAN_INTERVALS {
        let b = step * i as f64;
        if f(b) > 0.0 {
            return Ok(refine_root(&f, |t| levelset.gradient(x + sigma * t).dot(&sigma), a, b));
        }
        a = b;
    }
    Err(Error::NoBracket { edge, bracket })
}

/// Unit transfer direction of a boundary edge.
pub fn choose_sigma(
    levelset: &dyn LevelSet,
    mesh: &PolygonalMesh,
    edge: usize,
    strategy: SigmaStrategy,
) -> Result<Point> {
    let g = mesh.edge_geometry(edge);
    match strategy {
        SigmaStrategy::EdgeNormal => Ok(g.normal),
        SigmaStrategy::DistanceGradient => {
            let grad = levelset.gradient(g.midpoint);
            let n = grad.norm();
            if n < 1e-10 {
                return Err(Error::DegenerateGradient { edge });
            }
            Ok(grad / n)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TauReport {
    /// `(edge, max_q delta(x_q) / h_f)` per boundary edge.
    pub per_edge: Vec<(usize, f64)>,
    pub tau: f64,
    pub worst_edge: Option<usize>,
    pub threshold: f64,
}

impl TauReport {
    pub fn exceeds_threshold(&self) -> bool {
        self.tau > self.threshold
    }
}

/// Quadrature-point surrogate of `max_f max_{x in f} delta(x) / h_f`.
pub fn tau_report(
    levelset: &dyn LevelSet,
    mesh: &PolygonalMesh,
    cfg: &CorrectionConfig,
    exactness: usize,
) -> Result<TauReport> {
    let mut per_edge = Vec::with_capacity(mesh.boundary_edges().len());
    let mut tau = 0.0;
    let mut worst_edge = None;
    for &e in mesh.boundary_edges() {
        let sigma = choose_sigma(levelset, mesh, e, cfg.sigma_strategy)?;
        let h = mesh.edge_cell_scale(e);
        let q = edge_quadrature(mesh, e, exactness);
        let mut t_e: f64 = 0.0;
        for &x in &q.points {
            t_e = t_e.max(delta(levelset, e, x, sigma, h, cfg)? / h);
        }
        if t_e > tau || worst_edge.is_none() {
            tau = t_e.max(tau);
            worst_edge = Some(e);
        }
        per_edge.push((e, t_e));
    }
    if tau > cfg.tau_threshold {
        log::warn!("tau = {tau:.3} on edge {worst_edge:?} exceeds the threshold {}", cfg.tau_threshold);
    }
    Ok(TauReport { per_edge, tau, worst_edge, threshold: cfg.tau_threshold })
}

/// Transfer data of one boundary edge at its quadrature points.
#[derive(Debug, Clone)]
pub struct EdgeCorrection {
    pub edge: usize,
    pub cell: usize,
    pub sigma: Point,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Row `q` maps local cell DOFs to
    /// `sum_{j=1..k*} delta_q^j / j! d_sigma^j Pi^nabla v (x_q)`.
    pub operator: DMatrix<f64>,
}

impl EdgeCorrection {
    /// `x_q + delta_q sigma`.
    pub fn foot_points(&self) -> Vec<Point> {
        self.points.iter().zip(&self.deltas).map(|(&x, &d)| x + self.sigma * d).collect()
    }

    /// Block `int_f C(v) mu` with rows indexed by the multiplier basis and
    /// columns by the local cell DOFs.
    pub fn multiplier_block(&self, basis: &EdgePolyBasis) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(basis.dim(), self.operator.ncols());
        for (q, (&x, &w)) in self.points.iter().zip(&self.weights).enumerate() {
            out += basis.eval_at(x) * self.operator.row(q) * w;
        }
        out
    }
}

fn edge_correction(
    space: &VemSpace,
    levelset: &dyn LevelSet,
    cfg: &CorrectionConfig,
    et: &EdgeTerms,
) -> Result<EdgeCorrection> {
    let mesh = space.mesh();
    let sigma = choose_sigma(levelset, mesh, et.edge, cfg.sigma_strategy)?;
    let deltas =
        et.points.iter().map(|&x| delta(levelset, et.edge, x, sigma, et.h_tilde, cfg)).collect::<Result<Vec<f64>>>()?;
    let el = space.element(et.cell);
    let basis = el.basis();
    let mut operator = DMatrix::zeros(et.points.len(), el.num_dofs());
    if cfg.kstar > 0 {
        let m1 = basis.directional_derivative_matrix(sigma, 1)?;
        let mut mj = DMatrix::identity(basis.dim(), basis.dim());
        // P_q: polynomial coefficients -> sum_j delta^j / j! d_sigma^j at x_q
        let mut rows = DMatrix::zeros(et.points.len(), basis.dim());
        let phi: Vec<DVector<f64>> = et.points.iter().map(|&x| basis.eval_at(x)).collect();
        let mut fact = 1.0;
        for j in 1..=cfg.kstar {
            mj = &m1 * mj;
            fact *= j as f64;
            for (q, p) in phi.iter().enumerate() {
                let c = deltas[q].powi(j as i32) / fact;
                if c != 0.0 {
                    let r = (p.transpose() * &mj) * c;
                    let mut row = rows.row_mut(q);
                    row += r;
                }
            }
        }
        operator = rows * el.pi_nabla();
    }
    Ok(EdgeCorrection {
        edge: et.edge,
        cell: et.cell,
        sigma,
        points: et.points.clone(),
        weights: et.weights.clone(),
        deltas,
        operator,
    })
}

fn corrections(
    space: &VemSpace,
    levelset: &dyn LevelSet,
    cfg: &CorrectionConfig,
    terms: &[EdgeTerms],
) -> Result<Vec<EdgeCorrection>> {
    cfg.validate(space.order())?;
    terms.iter().map(|et| edge_correction(space, levelset, cfg, et)).collect()
}

/// Correction data for every boundary edge, in boundary-edge order, on edge
/// rules of the given exactness.
pub fn correction_blocks(
    space: &VemSpace,
    levelset: &dyn LevelSet,
    cfg: &CorrectionConfig,
    exactness: usize,
) -> Result<Vec<EdgeCorrection>> {
    let terms = boundary_terms(space, exactness)?;
    corrections(space, levelset, cfg, &terms)
}

struct Prepared {
    terms: Vec<EdgeTerms>,
    g_tilde: Vec<Vec<f64>>,
    operators: Option<Vec<DMatrix<f64>>>,
}

fn prepare(
    space: &VemSpace,
    levelset: &dyn LevelSet,
    cfg_bc: &WeakBcConfig,
    cfg: &CorrectionConfig,
    g: &dyn Fn(Point) -> f64,
) -> Result<Prepared> {
    let terms = boundary_terms(space, cfg_bc.edge_exactness())?;
    let corr = corrections(space, levelset, cfg, &terms)?;
    let g_tilde = corr.iter().map(|c| c.foot_points().into_iter().map(g).collect()).collect();
    let operators = (cfg.kstar > 0).then(|| corr.into_iter().map(|c| c.operator).collect());
    Ok(Prepared { terms, g_tilde, operators })
}

impl Prepared {
    fn data(&self) -> EdgeData<'_> {
        EdgeData { g_values: &self.g_tilde, correction: self.operators.as_deref() }
    }
}

/// Barbosa-Hughes system with the correction in the multiplier rows and
/// `g~(x) = g(x + delta(x) sigma)`. Not symmetric when `k* > 0`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_bdt_bh(
    space: &VemSpace,
    mult: &MultiplierSpace,
    levelset: &dyn LevelSet,
    cfg_bc: &WeakBcConfig,
    cfg: &CorrectionConfig,
    f: &dyn Fn(Point) -> f64,
    g: &dyn Fn(Point) -> f64,
) -> Result<LinearSystem> {
    if mult.order() != cfg_bc.multiplier_order() {
        return Err(Error::OrderMismatch { element: mult.order(), config: cfg_bc.multiplier_order() });
    }
    let p = prepare(space, levelset, cfg_bc, cfg, g)?;
    assemble_bh_with(space, mult, cfg_bc, f, &p.terms, &p.data())
}

/// Corrected Nitsche system on the VEM DOFs.
pub fn assemble_bdt_nitsche(
    space: &VemSpace,
    levelset: &dyn LevelSet,
    cfg_bc: &WeakBcConfig,
    cfg: &CorrectionConfig,
    f: &dyn Fn(Point) -> f64,
    g: &dyn Fn(Point) -> f64,
) -> Result<LinearSystem> {
    let p = prepare(space, levelset, cfg_bc, cfg, g)?;
    assemble_nitsche_with(space, cfg_bc, f, &p.terms, &p.data())
}

/// Edge-local multiplier of a corrected Nitsche solution:
/// `lambda_h = Pi^0 (gamma / h_f (u_h + C u_h - g~) - d_nu Pi^nabla u_h)`.
pub fn recover_multiplier_bdt(
    space: &VemSpace,
    levelset: &dyn LevelSet,
    cfg_bc: &WeakBcConfig,
    cfg: &CorrectionConfig,
    u: &DVector<f64>,
    g: &dyn Fn(Point) -> f64,
) -> Result<(MultiplierSpace, DVector<f64>)> {
    let p = prepare(space, levelset, cfg_bc, cfg, g)?;
    recover_multiplier_with(space, cfg_bc, u, &p.terms, &p.data())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curved::LevelSetDomain;
    use crate::element::{ElementOptions, Stabilization};
    use crate::geometry::{build_disk_approx_mesh, build_structured_mesh, Rectangle};
    use crate::weak_bc::{assemble_bh, assemble_nitsche, MultiplierOrder};

    fn cfg() -> CorrectionConfig {
        CorrectionConfig::default()
    }

    #[test]
    fn delta_closed_forms() {
        let c = LevelSetDomain::unit_circle();
        let d = delta(&c, 0, Point::new(0.6, 0.0), Point::new(1.0, 0.0), 0.5, &cfg()).unwrap();
        assert!((d - 0.4).abs() < 1e-12);
        let d = delta(&c, 0, Point::new(0.5, 0.5), Point::new(1.0, 0.0), 0.5, &cfg()).unwrap();
        assert!((d - (0.75f64.sqrt() - 0.5)).abs() < 1e-12);
        let d = delta(&c, 0, Point::new(0.0, 1.0), Point::new(0.0, 1.0), 0.5, &cfg()).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn delta_fails_without_bracket() {
        let c = LevelSetDomain::unit_circle();
        let r = delta(&c, 7, Point::new(0.0, 0.0), Point::new(1.0, 0.0), 0.1, &cfg());
        assert!(matches!(r, Err(Error::NoBracket { edge: 7, .. })));
    }

    #[test]
    fn kstar_formula() {
        assert_eq!(kstar_default(1, DeltaRegime::HSquared), 0);
        assert_eq!(kstar_default(2, DeltaRegime::HSquared), 1);
        assert_eq!(kstar_default(4, DeltaRegime::HSquared), 2);
        assert_eq!(kstar_default(3, DeltaRegime::HLinear), 3);
    }

    #[test]
    fn sigma_strategies_on_circle() {
        let c = LevelSetDomain::unit_circle();
        let m = build_disk_approx_mesh(&c, 16, 3).unwrap();
        for &e in m.boundary_edges() {
            let mid = m.edge_geometry(e).midpoint;
            let s = choose_sigma(&c, &m, e, SigmaStrategy::DistanceGradient).unwrap();
            assert!((s - mid / mid.norm()).norm() < 1e-12);
            // inscribed regular polygon: the chord normal is radial too
            let n = choose_sigma(&c, &m, e, SigmaStrategy::EdgeNormal).unwrap();
            assert!((n - s).norm() < 1e-12);
        }
    }

    #[test]
    fn sagitta_of_inscribed_polygon() {
        let c = LevelSetDomain::unit_circle();
        let m = build_disk_approx_mesh(&c, 16, 3).unwrap();
        let e = m.boundary_edges()[0];
        let mid = m.edge_geometry(e).midpoint;
        let s = choose_sigma(&c, &m, e, SigmaStrategy::EdgeNormal).unwrap();
        let d = delta(&c, e, mid, s, m.edge_cell_scale(e), &cfg()).unwrap();
        assert!((d - (1.0 - (std::f64::consts::PI / 16.0).cos())).abs() < 1e-12);
    }

    #[test]
    fn exact_polygon_degenerates() {
        let sq = LevelSetDomain::Polygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] };
        let m = build_structured_mesh(Rectangle::unit_square(), 3, 3).unwrap();
        let tau = tau_report(&sq, &m, &cfg(), 6).unwrap();
        assert_eq!(tau.tau, 0.0);
        let k = 2;
        let space = VemSpace::new(m, ElementOptions::new(k, Stabilization::DRecipe)).unwrap();
        let f = |x: Point| x.x * x.y + 1.0;
        let g = |x: Point| (x.x - x.y).sin();
        let ccfg = CorrectionConfig::with_kstar(2, SigmaStrategy::EdgeNormal);
        let bh = WeakBcConfig::barbosa_hughes(k, 1e-3, MultiplierOrder::K);
        let mult = MultiplierSpace::new(space.mesh(), k);
        let a = assemble_bh(&space, &mult, &bh, &f, &g).unwrap();
        let b = assemble_bdt_bh(&space, &mult, &sq, &bh, &ccfg, &f, &g).unwrap();
        assert!(a.matrix.max_abs_diff(&b.matrix) <= 1e-12);
        assert!((&a.rhs - &b.rhs).amax() <= 1e-12);
        let ni = WeakBcConfig::nitsche(k, 1e3);
        let a = assemble_nitsche(&space, &ni, &f, &g).unwrap();
        let b = assemble_bdt_nitsche(&space, &sq, &ni, &ccfg, &f, &g).unwrap();
        assert!(a.matrix.max_abs_diff(&b.matrix) <= 1e-12);
        assert!((&a.rhs - &b.rhs).amax() <= 1e-12);
    }

    #[test]
    fn kstar_zero_gives_empty_operator() {
        let c = LevelSetDomain::unit_circle();
        let m = build_disk_approx_mesh(&c, 12, 2).unwrap();
        let space = VemSpace::new(m, ElementOptions::new(2, Stabilization::DRecipe)).unwrap();
        let blocks =
            correction_blocks(&space, &c, &CorrectionConfig::with_kstar(0, SigmaStrategy::EdgeNormal), 6).unwrap();
        assert!(blocks.iter().all(|b| b.operator.amax() == 0.0));
        assert!(blocks.iter().any(|b| b.deltas.iter().any(|&d| d > 0.0)));
    }
}
