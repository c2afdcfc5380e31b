use std::collections::HashMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::element::VemSpace;
use crate::geometry::cell_quadrature;
use crate::weak_bc::{BoundaryNorms, MultiplierSpace};
use crate::{Error, Point, Result};

/// Relative broken errors: `e1` of the L2 gradient projection, `e0` of the
/// elliptic projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrors {
    pub e1: f64,
    pub e0: f64,
}

/// `e1 = |grad u - Pi^{0,k-1} grad u_h| / |grad u|` and
/// `e0 = |u - Pi^nabla u_h| / |u|` in broken L2 norms, on cell rules of
/// exactness `2k + 2`.
pub fn compute_errors(
    space: &VemSpace,
    u_dofs: &DVector<f64>,
    u: &dyn Fn(Point) -> f64,
    grad_u: &dyn Fn(Point) -> Point,
) -> Result<RelativeErrors> {
    let mesh = space.mesh();
    let k = space.order();
    let (mut d1, mut n1, mut d0, mut n0) = (0.0, 0.0, 0.0, 0.0);
    for el in space.elements() {
        let q = cell_quadrature(mesh, el.cell(), 2 * k + 2)?;
        let ul = space.dofs().local(el.cell(), u_dofs);
        let pu = el.pi_nabla() * &ul;
        let [gx, gy] = el.project_gradient_l2(&ul);
        let m = gx.len();
        for (&x, &w) in q.points.iter().zip(&q.weights) {
            let phi = el.basis().eval_at(x);
            let head = phi.rows(0, m);
            let gh = Point::new(head.dot(&gx), head.dot(&gy));
            let g = grad_u(x);
            d1 += w * (g - gh).norm_squared();
            n1 += w * g.norm_squared();
            let ux = u(x);
            d0 += w * (ux - phi.dot(&pu)).powi(2);
            n0 += w * ux * ux;
        }
    }
    if n1 <= 0.0 || n0 <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(RelativeErrors { e1: (d1 / n1).sqrt(), e0: (d0 / n0).sqrt() })
}

/// `||lambda - lambda_h||_{-1/2,h}` with `lambda = -grad u . nu_h` on the
/// meshed boundary.
pub fn multiplier_error(
    space: &VemSpace,
    mult: &MultiplierSpace,
    lambda_h: &DVector<f64>,
    grad_u: &dyn Fn(Point) -> Point,
) -> f64 {
    let mesh = space.mesh();
    let block: HashMap<usize, usize> = mult.edges().iter().enumerate().map(|(b, &e)| (e, b)).collect();
    let norms = BoundaryNorms::new(mesh, 2 * space.order() + 2);
    norms.minus_half(mesh, &|e, x| {
        let nu = mesh.edge_geometry(e).normal;
        -grad_u(x).dot(&nu) - mult.eval(lambda_h, block[&e], x)
    })
}

/// Errors at or below this level carry no rate information.
pub const EXACT_ERROR: f64 = 1e-12;

/// `log(e_i / e_{i+1}) / log(hbar_i / hbar_{i+1})` for consecutive levels;
/// `None` where an error is zero or at round-off level.
pub fn estimate_rates(errors: &[f64], hbars: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != hbars.len() {
        return Err(Error::InvalidArgument("errors and mesh sizes differ in length".into()));
    }
    if errors.len() < 2 {
        return Err(Error::InvalidArgument("at least two levels are needed for a rate".into()));
    }
    if hbars.iter().any(|&h| h.is_nan() || h <= 0.0) || errors.iter().any(|e| e.is_nan() || *e < 0.0) {
        return Err(Error::InvalidArgument("mesh sizes must be positive and errors nonnegative".into()));
    }
    Ok(errors
        .windows(2)
        .zip(hbars.windows(2))
        .map(|(e, h)| {
            (e[0] > EXACT_ERROR && e[1] > EXACT_ERROR && h[0] != h[1]).then(|| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        })
        .collect())
}
