use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_errors, multiplier_error, RelativeErrors};
use super::problems::{domain_bbox, Manufactured, ProblemName};
use super::report::{ConvergenceReport, LevelResult, RateTable};
use crate::basis::BasisMode;
use crate::curved::{
    assemble_bdt_bh, assemble_bdt_nitsche, ray_exit, recover_multiplier_bdt, tau_report, CorrectionConfig, LevelSet,
    LevelSetDomain,
};
use crate::element::{ElementOptions, Stabilization, VemSpace};
use crate::geometry::{
    build_disk_approx_mesh, build_squares_approx_mesh, build_structured_mesh, build_voronoi_mesh, quality_report,
    ConvexPolygon, PolygonalMesh, Rectangle,
};
use crate::linalg::{condest_1norm, solve_factored, Factorization, LinearSystem};
use crate::weak_bc::{assemble_bh, assemble_nitsche, recover_multiplier, Method, MultiplierSpace, WeakBcConfig};
use crate::{Error, Point, Result};

/// Mesh ladder: level `l` refines the base resolution by `2^l` per direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum MeshFamily {
    /// `n x n` quadrilaterals on the bounding rectangle.
    Structured { base: usize },
    /// Voronoi tessellation with `base_seeds * 4^l` seeds.
    Voronoi { base_seeds: usize, lloyd_iters: usize },
    /// Polar mesh with `base_boundary * 2^l` vertices on the boundary.
    Disk { base_boundary: usize },
    /// Union of squares with `base * 2^l` squares across the bounding box.
    Squares { base: usize, refine_steps: u32 },
}

impl MeshFamily {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Structured { .. } => "structured",
            Self::Voronoi { .. } => "voronoi",
            Self::Disk { .. } => "disk",
            Self::Squares { .. } => "squares",
        }
    }

    pub fn build(&self, domain: &LevelSetDomain, level: usize, seed: u64) -> Result<PolygonalMesh> {
        let scale = 1usize << level;
        match *self {
            Self::Structured { base } => {
                let (lo, hi) = domain_bbox(domain);
                if !matches!(domain, LevelSetDomain::Polygon { .. }) {
                    return Err(Error::InvalidArgument("structured meshes need a polygonal domain".into()));
                }
                let rect = Rectangle { min: [lo.x, lo.y], max: [hi.x, hi.y] };
                build_structured_mesh(rect, base * scale, base * scale)
            }
            Self::Voronoi { base_seeds, lloyd_iters } => {
                let LevelSetDomain::Polygon { vertices } = domain else {
                    return Err(Error::InvalidArgument("Voronoi meshes need a polygonal domain".into()));
                };
                let poly = ConvexPolygon { vertices: vertices.clone() };
                build_voronoi_mesh(&poly, base_seeds * scale * scale, lloyd_iters, seed)
            }
            Self::Disk { base_boundary } => {
                let n = base_boundary * scale;
                build_disk_approx_mesh(domain, n, n.div_ceil(6).max(1))
            }
            Self::Squares { base, refine_steps } => {
                Ok(build_squares_approx_mesh(domain, base * scale, refine_steps)?.mesh)
            }
        }
    }
}

/// Complete description of a refinement study.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemSpec {
    pub problem: ProblemName,
    pub domain: LevelSetDomain,
    #[serde(skip)]
    pub solution: Manufactured,
    pub method: WeakBcConfig,
    pub correction: Option<CorrectionConfig>,
    pub mesh: MeshFamily,
    pub stabilization: Stabilization,
    /// Cell basis convention; defaults per order.
    pub basis_mode: Option<BasisMode>,
    pub seed: u64,
    pub condest: bool,
    /// When set, each level's matrix is written to `<prefix>_level<l>.mtx`.
    pub export_matrix: Option<PathBuf>,
}

impl ProblemSpec {
    pub fn new(problem: ProblemName, method: WeakBcConfig, mesh: MeshFamily) -> Self {
        Self {
            problem,
            domain: problem.domain(),
            solution: problem.solution(method.order),
            method,
            correction: None,
            mesh,
            stabilization: Stabilization::DRecipe,
            basis_mode: None,
            seed: 1,
            condest: false,
            export_matrix: None,
        }
    }

    pub fn with_correction(mut self, c: Option<CorrectionConfig>) -> Self {
        self.correction = c;
        self
    }

    pub fn with_stabilization(mut self, s: Stabilization) -> Self {
        self.stabilization = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        self.domain.validate()?;
        if let Some(c) = &self.correction {
            c.validate(self.method.order)?;
        }
        self.solution.validate(domain_bbox(&self.domain), self.seed)
    }
}

/// Everything computed on one mesh.
pub struct LevelSolution {
    pub space: VemSpace,
    pub system: LinearSystem,
    pub u: DVector<f64>,
    pub multiplier: (MultiplierSpace, DVector<f64>),
    pub errors: RelativeErrors,
    pub multiplier_error: f64,
    pub tau: Option<f64>,
    pub residual: f64,
    pub condest: Option<f64>,
}

/// Point where the ray from the level-set center through `x` meets `Gamma`.
pub fn radial_foot(ls: &dyn LevelSet, x: Point) -> Point {
    let c = ls.center();
    let d = x - c;
    let n = d.norm();
    if n == 0.0 {
        return x;
    }
    match ray_exit(ls, c, d / n) {
        Ok(t) => c + d * (t / n),
        Err(_) => x,
    }
}

/// Assembles and solves one level of a study.
pub fn solve_level(spec: &ProblemSpec, mesh: PolygonalMesh) -> Result<LevelSolution> {
    let k = spec.method.order;
    let opts = ElementOptions { basis_mode: spec.basis_mode, ..ElementOptions::new(k, spec.stabilization) };
    let space = VemSpace::new(mesh, opts)?;
    let sol = &spec.solution;
    let f = |x| (sol.f)(x);
    let ls: &dyn LevelSet = &spec.domain;
    let curved = spec.problem.is_curved();
    // curved domains: data known on Gamma only, extended along rays from the center
    let g = |x: Point| if curved { (sol.u)(radial_foot(ls, x)) } else { (sol.u)(x) };
    let cfg = &spec.method;
    let tau = match &spec.correction {
        Some(c) => Some(tau_report(ls, space.mesh(), c, cfg.edge_exactness())?.tau),
        None => None,
    };
    let bh_mult =
        (cfg.method == Method::BarbosaHughes).then(|| MultiplierSpace::new(space.mesh(), cfg.multiplier_order()));
    let system = match (&bh_mult, &spec.correction) {
        (Some(m), None) => assemble_bh(&space, m, cfg, &f, &g)?,
        (Some(m), Some(c)) => assemble_bdt_bh(&space, m, ls, cfg, c, &f, &g)?,
        (None, None) => assemble_nitsche(&space, cfg, &f, &g)?,
        (None, Some(c)) => assemble_bdt_nitsche(&space, ls, cfg, c, &f, &g)?,
    };
    let factors = Factorization::new(&system.matrix)?;
    let out = solve_factored(&system, &factors)?;
    let condest = if spec.condest { Some(condest_1norm(&system.matrix, &factors)?) } else { None };
    let n_u = space.num_dofs();
    let u = out.x.rows(0, n_u).into_owned();
    let multiplier = match bh_mult {
        Some(m) => {
            let l = out.x.rows(n_u, m.dim()).into_owned();
            (m, l)
        }
        None => match &spec.correction {
            Some(c) => recover_multiplier_bdt(&space, ls, cfg, c, &u, &g)?,
            None => recover_multiplier(&space, cfg, &u, &g)?,
        },
    };
    let grad = |x| (sol.grad)(x);
    let errors = compute_errors(&space, &u, &|x| (sol.u)(x), &grad)?;
    let lambda_err = multiplier_error(&space, &multiplier.0, &multiplier.1, &grad);
    Ok(LevelSolution {
        space,
        system,
        u,
        multiplier,
        errors,
        multiplier_error: lambda_err,
        tau,
        residual: out.residual,
        condest,
    })
}

fn run_level(spec: &ProblemSpec, level: usize) -> Result<LevelResult> {
    let t0 = Instant::now();
    let mesh = spec.mesh.build(&spec.domain, level, spec.seed)?;
    let quality = quality_report(&mesh);
    let s = solve_level(spec, mesh)?;
    if let Some(prefix) = &spec.export_matrix {
        let mut p = prefix.clone().into_os_string();
        p.push(format!("_level{level}.mtx"));
        s.system.write_matrix_market(PathBuf::from(p))?;
    }
    Ok(LevelResult {
        level,
        mesh: format!("{}_{}", spec.mesh.label(), level + 1),
        quality: Some(quality),
        n_dofs: s.space.num_dofs(),
        n_multipliers: s.system.dim() - s.space.num_dofs(),
        e1: Some(s.errors.e1),
        e0: Some(s.errors.e0),
        lambda_error: Some(s.multiplier_error),
        tau: s.tau,
        condest: s.condest,
        residual: Some(s.residual),
        seconds: t0.elapsed().as_secs_f64(),
        error: None,
    })
}

/// Runs `levels` independent refinement levels; a failing level is recorded
/// and the remaining levels still run.
pub fn run_study(spec: &ProblemSpec, levels: usize) -> Result<ConvergenceReport> {
    spec.validate()?;
    if levels == 0 {
        return Err(Error::InvalidArgument("at least one level is required".into()));
    }
    let mut results = Vec::with_capacity(levels);
    for level in 0..levels {
        match run_level(spec, level) {
            Ok(r) => results.push(r),
            Err(e) => {
                log::error!("level {level} failed: {e}");
                results.push(LevelResult::failed(level, format!("{}_{}", spec.mesh.label(), level + 1), e));
            }
        }
    }
    let rates = RateTable::from_levels(&results);
    Ok(ConvergenceReport::new(spec, results, rates))
}
