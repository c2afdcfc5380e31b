use serde::{Deserialize, Serialize};

use super::{Point, PolygonalMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshQualityReport {
    pub n_cells: usize,
    pub n_edges: usize,
    pub n_vertices: usize,
    /// max h_K
    pub h: f64,
    /// mean h_K
    pub h_mean: f64,
    /// smallest distance between two vertices of the same cell
    pub h_min: f64,
    /// min over cells of (sampled inradius) / h_K
    pub gamma0_estimate: f64,
    pub max_edges_per_cell: usize,
}

fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn distance_to_boundary(p: Point, poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            let t = ((p - a).dot(&(b - a)) / (b - a).norm_squared()).clamp(0.0, 1.0);
            (p - (a + (b - a) * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest inscribed-disk radius found on a sample grid, refined by a
/// shrinking pattern search around the best sample.
pub(crate) fn sampled_inradius(poly: &[Point]) -> f64 {
    let (mut lo, mut hi) = (poly[0], poly[0]);
    for p in poly {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    const N: usize = 21;
    let value = |p: Point| {
        if point_in_polygon(p, poly) {
            distance_to_boundary(p, poly)
        } else {
            0.0
        }
    };
    let mut best = (0.0, (lo + hi) * 0.5);
    for i in 0..N {
        for j in 0..N {
            let p = Point::new(
                lo.x + (hi.x - lo.x) * i as f64 / (N - 1) as f64,
                lo.y + (hi.y - lo.y) * j as f64 / (N - 1) as f64,
            );
            let v = value(p);
            if v > best.0 {
                best = (v, p);
            }
        }
    }
    let mut step = (hi - lo).norm() / (N - 1) as f64;
    while step > 1e-6 * (hi - lo).norm() {
        let mut improved = false;
        for (dx, dy) in
            [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (0.7, 0.7), (-0.7, 0.7), (0.7, -0.7), (-0.7, -0.7)]
        {
            let p = best.1 + Point::new(dx, dy) * step;
            let v = value(p);
            if v > best.0 {
                best = (v, p);
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best.0
}

pub fn quality_report(mesh: &PolygonalMesh) -> MeshQualityReport {
    let mut h: f64 = 0.0;
    let mut h_sum = 0.0;
    let mut h_min = f64::INFINITY;
    let mut gamma0 = f64::INFINITY;
    let mut max_edges = 0;
    for c in 0..mesh.num_cells() {
        let pts = mesh.cell_points(c);
        let hk = mesh.cell_geometry(c).diameter;
        h = h.max(hk);
        h_sum += hk;
        max_edges = max_edges.max(pts.len());
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                h_min = h_min.min((pts[i] - pts[j]).norm());
            }
        }
        gamma0 = gamma0.min(sampled_inradius(&pts) / hk);
    }
    MeshQualityReport {
        n_cells: mesh.num_cells(),
        n_edges: mesh.num_edges(),
        n_vertices: mesh.num_vertices(),
        h,
        h_mean: h_sum / mesh.num_cells() as f64,
        h_min,
        gamma0_estimate: gamma0.min(1.0),
        max_edges_per_cell: max_edges,
    }
}
