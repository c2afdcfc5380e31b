use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{cross, mesh::polygon_centroid, polygon_area, Point, PolygonalMesh};
use crate::{Error, Result};

/// Convex polygon given by counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<[f64; 2]>,
}

impl ConvexPolygon {
    pub fn unit_square() -> Self {
        Self { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] }
    }

    pub fn points(&self) -> Vec<Point> {
        self.vertices.iter().map(|v| Point::new(v[0], v[1])).collect()
    }

    fn validate(&self) -> Result<()> {
        let p = self.points();
        let n = p.len();
        if n < 3 {
            return Err(Error::InvalidArgument("domain polygon needs 3 vertices".into()));
        }
        for i in 0..n {
            if cross(p[(i + 1) % n] - p[i], p[(i + 2) % n] - p[(i + 1) % n]) < 0.0 {
                return Err(Error::InvalidArgument("domain polygon must be convex and counter-clockwise".into()));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: Point) -> bool {
        let p = self.points();
        let n = p.len();
        (0..n).all(|i| cross(p[(i + 1) % n] - p[i], x - p[i]) > 0.0)
    }
}

/// Keeps the part of `poly` where `normal . x <= offset`.
pub fn clip_polygon_halfplane(poly: &[Point], normal: Point, offset: f64) -> Vec<Point> {
    let n = poly.len();
    if n == 0 {
        return Vec::new();
    }
    let scale = normal.norm() * poly.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let eps = 1e-14 * scale;
    let dist: Vec<f64> = poly.iter().map(|p| normal.dot(p) - offset).collect();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let j = (i + 1) % n;
        let (di, dj) = (dist[i], dist[j]);
        if di <= eps {
            out.push(poly[i]);
        }
        if (di < -eps && dj > eps) || (di > eps && dj < -eps) {
            let t = di / (di - dj);
            out.push(poly[i] + (poly[j] - poly[i]) * t);
        }
    }
    out
}

fn voronoi_cells(domain: &[Point], seeds: &[Point]) -> Vec<Vec<Point>> {
    let mut order: Vec<usize> = Vec::with_capacity(seeds.len());
    seeds
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            order.clear();
            order.extend((0..seeds.len()).filter(|&j| j != i));
            order.sort_by(|&a, &b| (seeds[a] - s).norm_squared().total_cmp(&(seeds[b] - s).norm_squared()));
            let mut cell = domain.to_vec();
            for &j in &order {
                let radius = cell.iter().map(|p| (p - s).norm()).fold(0.0, f64::max);
                let d = (seeds[j] - s).norm();
                if d > 2.0 * radius {
                    break;
                }
                let normal = seeds[j] - s;
                let offset = 0.5 * (seeds[j].norm_squared() - s.norm_squared());
                cell = clip_polygon_halfplane(&cell, normal, offset);
                if cell.len() < 3 {
                    break;
                }
            }
            cell
        })
        .collect()
}

/// Merges coincident vertices, inserts vertices lying on other cells' edges
/// and returns a conforming vertex/cell description.
pub(crate) fn conforming_mesh(polys: &[Vec<Point>], tol: f64) -> Result<(Vec<Point>, Vec<Vec<usize>>)> {
    use std::collections::HashMap;
    let key = |p: Point| ((p.x / tol).floor() as i64, (p.y / tol).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut loops = Vec::with_capacity(polys.len());
    for poly in polys {
        let mut lp: Vec<usize> = Vec::with_capacity(poly.len());
        for &p in poly {
            let (kx, ky) = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = grid.get(&(kx + dx, ky + dy)) {
                        for &v in list {
                            if (vertices[v] - p).norm() <= tol {
                                found = Some(v);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let v = found.unwrap_or_else(|| {
                vertices.push(p);
                grid.entry((kx, ky)).or_default().push(vertices.len() - 1);
                vertices.len() - 1
            });
            if lp.last() != Some(&v) {
                lp.push(v);
            }
        }
        while lp.len() > 1 && lp.first() == lp.last() {
            lp.pop();
        }
        loops.push(lp);
    }

    // T-junctions: a vertex strictly inside another cell's edge
    let mut fixed = Vec::with_capacity(loops.len());
    for lp in &loops {
        let n = lp.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let a = vertices[lp[i]];
            let b = vertices[lp[(i + 1) % n]];
            out.push(lp[i]);
            let len = (b - a).norm();
            if len <= tol {
                continue;
            }
            let t_hat = (b - a) / len;
            let (minx, maxx) = (a.x.min(b.x) - tol, a.x.max(b.x) + tol);
            let (miny, maxy) = (a.y.min(b.y) - tol, a.y.max(b.y) + tol);
            let mut on: Vec<(f64, usize)> = vertices
                .iter()
                .enumerate()
                .filter(|(v, p)| {
                    *v != lp[i] && *v != lp[(i + 1) % n] && p.x >= minx && p.x <= maxx && p.y >= miny && p.y <= maxy
                })
                .filter_map(|(v, &p)| {
                    let s = (p - a).dot(&t_hat);
                    let off = cross(t_hat, p - a).abs();
                    (s > tol && s < len - tol && off <= tol).then_some((s, v))
                })
                .collect();
            on.sort_by(|x, y| x.0.total_cmp(&y.0));
            out.extend(on.into_iter().map(|(_, v)| v));
        }
        fixed.push(out);
    }
    Ok((vertices, fixed))
}

/// Voronoi tessellation of a convex polygon from `n_seeds` uniformly random
/// seeds, relaxed by `lloyd_iters` Lloyd steps. Deterministic in `rng_seed`.
pub fn build_voronoi_mesh(
    domain: &ConvexPolygon,
    n_seeds: usize,
    lloyd_iters: usize,
    rng_seed: u64,
) -> Result<PolygonalMesh> {
    domain.validate()?;
    if n_seeds == 0 {
        return Err(Error::InvalidArgument("n_seeds must be at least 1".into()));
    }
    let dom = domain.points();
    let (mut lo, mut hi) = (dom[0], dom[0]);
    for p in &dom {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let diam = (hi - lo).norm();
    let dom_area = polygon_area(&dom);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    const RETRIES: usize = 10;
    for attempt in 0..RETRIES {
        let mut seeds = Vec::with_capacity(n_seeds);
        while seeds.len() < n_seeds {
            let p = Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if domain.contains(p) {
                seeds.push(p);
            }
        }
        let mut cells = voronoi_cells(&dom, &seeds);
        for _ in 0..lloyd_iters {
            if cells.iter().any(|c| c.len() < 3) {
                break;
            }
            seeds = cells.iter().map(|c| polygon_centroid(c).0).collect();
            cells = voronoi_cells(&dom, &seeds);
        }
        let min_area = 1e-10 * dom_area / n_seeds as f64;
        if cells.iter().any(|c| c.len() < 3 || polygon_area(c) <= min_area) {
            log::warn!("voronoi attempt {attempt}: degenerate cell, regenerating seeds");
            continue;
        }
        let (vertices, loops) = conforming_mesh(&cells, 1e-10 * diam)?;
        match PolygonalMesh::new(vertices, loops) {
            Ok(m) => return Ok(m),
            Err(e) => log::warn!("voronoi attempt {attempt}: {e}, regenerating seeds"),
        }
    }
    Err(Error::MeshGeneration(format!("no valid Voronoi mesh of {n_seeds} seeds after {RETRIES} attempts")))
}
