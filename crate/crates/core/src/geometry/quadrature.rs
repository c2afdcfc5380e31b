use super::{cross, mesh::is_simple_polygon, Point, PolygonalMesh};
use crate::{Error, Result};

/// Points and positive weights; for an edge rule the weights sum to the
/// edge length, for a cell rule to its area.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

/// Gauss-Legendre rule with `n` points on [0, 1] (weights sum to 1),
/// exact for degree 2n-1. Nodes are returned in increasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x.iter().map(|&z| 0.5 * (z + 1.0)).collect(), w.iter().map(|&wi| 0.5 * wi).collect())
}

/// Gauss-Lobatto rule with `k + 1` points on [0, 1] (both endpoints included),
/// exact for degree 2k-1.
pub fn gauss_lobatto(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1);
    let n = k + 1;
    let kf = k as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    x[0] = -1.0;
    x[k] = 1.0;
    let end_w = 2.0 / (kf * (kf + 1.0));
    w[0] = end_w;
    w[k] = end_w;
    for i in 1..k {
        // Chebyshev-Gauss-Lobatto initial guess, Newton on P'_k
        let mut z = -(std::f64::consts::PI * i as f64 / kf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(k, z);
            // (1 - z^2) P''_k = 2 z P'_k - k (k + 1) P_k
            let d2p = (2.0 * z * dp - kf * (kf + 1.0) * p) / (1.0 - z * z);
            let dz = dp / d2p;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (p, _) = legendre(k, z);
        x[i] = z;
        w[i] = 2.0 / (kf * (kf + 1.0) * p * p);
    }
    // symmetrize
    for i in 0..n / 2 {
        let s = 0.5 * (x[n - 1 - i] - x[i]);
        x[i] = -s;
        x[n - 1 - i] = s;
        let ws = 0.5 * (w[i] + w[n - 1 - i]);
        w[i] = ws;
        w[n - 1 - i] = ws;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x.iter().map(|&z| 0.5 * (z + 1.0)).collect(), w.iter().map(|&wi| 0.5 * wi).collect())
}

fn line_rule(a: Point, b: Point, exactness: usize) -> QuadratureRule {
    let n = exactness / 2 + 1;
    let (t, w) = gauss_legendre(n);
    let len = (b - a).norm();
    QuadratureRule {
        points: t.iter().map(|&s| a + (b - a) * s).collect(),
        weights: w.iter().map(|&wi| wi * len).collect(),
        exactness,
    }
}

/// Gauss-Legendre rule on an edge, traversed in its stored orientation.
pub fn edge_quadrature(mesh: &PolygonalMesh, edge: usize, exactness: usize) -> QuadratureRule {
    let (a, b) = mesh.edge_endpoints(edge);
    line_rule(a, b, exactness)
}

/// The `k + 1` Gauss-Lobatto points of an edge (endpoints included), in the
/// edge's stored orientation.
pub fn gauss_lobatto_nodes(mesh: &PolygonalMesh, edge: usize, k: usize) -> Vec<Point> {
    let (a, b) = mesh.edge_endpoints(edge);
    gauss_lobatto(k).0.iter().map(|&s| a + (b - a) * s).collect()
}

/// Collapsed (Duffy) Gauss rule on a triangle, exact for the given degree.
pub fn triangle_quadrature(a: Point, b: Point, c: Point, exactness: usize) -> QuadratureRule {
    // the collapse adds a linear Jacobian factor in the first direction
    let n = (exactness + 2).div_ceil(2).max(1);
    let (t, w) = gauss_legendre(n);
    let area2 = cross(b - a, c - a).abs();
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&xi, &wx) in t.iter().zip(&w) {
        for (&eta, &wy) in t.iter().zip(&w) {
            let u = xi;
            let v = eta * (1.0 - xi);
            points.push(a + (b - a) * u + (c - a) * v);
            weights.push(wx * wy * (1.0 - xi) * area2);
        }
    }
    QuadratureRule { points, weights, exactness }
}

fn ear_clip(points: &[Point]) -> Option<Vec<[usize; 3]>> {
    let n = points.len();
    let scale = points.iter().map(|p| (p - points[0]).norm()).fold(0.0, f64::max);
    let tol = 1e-14 * scale * scale;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    let inside = |p: Point, a: Point, b: Point, c: Point| {
        cross(b - a, p - a) >= -tol && cross(c - b, p - b) >= -tol && cross(a - c, p - c) >= -tol
    };
    let mut guard = 0;
    while idx.len() > 3 {
        guard += 1;
        if guard > 4 * n * n {
            return None;
        }
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let ip = idx[(i + m - 1) % m];
            let ic = idx[i];
            let inext = idx[(i + 1) % m];
            let (a, b, c) = (points[ip], points[ic], points[inext]);
            let turn = cross(b - a, c - b);
            if turn.abs() <= tol && (b - a).dot(&(c - b)) > 0.0 {
                // collinear middle vertex: drop without a triangle
                idx.remove(i);
                clipped = true;
                break;
            }
            if turn <= tol {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != ip && j != ic && j != inext && {
                    let p = points[j];
                    p != a && p != b && p != c && inside(p, a, b, c)
                }
            });
            if !blocked {
                tris.push([ip, ic, inext]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return None;
        }
    }
    let (a, b, c) = (points[idx[0]], points[idx[1]], points[idx[2]]);
    if cross(b - a, c - a) > tol {
        tris.push([idx[0], idx[1], idx[2]]);
    }
    Some(tris)
}

/// Quadrature on a simple counter-clockwise polygon: a fan from the
/// centroid when every fan triangle is positively oriented, ear clipping
/// otherwise.
pub fn polygon_quadrature(points: &[Point], centroid: Point, exactness: usize) -> Option<QuadratureRule> {
    let n = points.len();
    let scale = points.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
    let fan_ok = (0..n).all(|i| cross(points[i] - centroid, points[(i + 1) % n] - centroid) > 1e-12 * scale * scale);
    let mut rule = QuadratureRule { points: Vec::new(), weights: Vec::new(), exactness };
    let mut push = |r: QuadratureRule| {
        rule.points.extend(r.points);
        rule.weights.extend(r.weights);
    };
    if fan_ok {
        for i in 0..n {
            push(triangle_quadrature(centroid, points[i], points[(i + 1) % n], exactness));
        }
    } else {
        if !is_simple_polygon(points) {
            return None;
        }
        for [a, b, c] in ear_clip(points)? {
            push(triangle_quadrature(points[a], points[b], points[c], exactness));
        }
    }
    Some(rule)
}

/// Cell quadrature exact for polynomials up to `exactness`.
pub fn cell_quadrature(mesh: &PolygonalMesh, cell: usize, exactness: usize) -> Result<QuadratureRule> {
    let pts = mesh.cell_points(cell);
    polygon_quadrature(&pts, mesh.cell_geometry(cell).centroid, exactness).ok_or(Error::NonSimplePolygon { cell })
}
