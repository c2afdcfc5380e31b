use std::collections::HashMap;

use super::{cross, Point};
use crate::{Error, Result};

/// An edge stored with the orientation of its first adjacent cell
/// (`left`), which traverses `vertices[0] -> vertices[1]` counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub centroid: Point,
    pub area: f64,
    pub diameter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeometry {
    pub length: f64,
    pub midpoint: Point,
    /// Unit normal pointing out of the `left` cell. For boundary edges this is
    /// the outward normal of the meshed domain.
    pub normal: Point,
}

/// Conforming polygonal tessellation with counter-clockwise cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalMesh {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    /// For every cell, the edges in loop order, flagged `true` when the cell
    /// traverses the edge in its stored orientation.
    cell_edges: Vec<Vec<(usize, bool)>>,
    boundary_edges: Vec<usize>,
    cell_geometry: Vec<CellGeometry>,
    edge_geometry: Vec<EdgeGeometry>,
    boundary_levelset: Option<String>,
}

/// Signed area of a closed polygon (positive when counter-clockwise).
pub fn polygon_area(points: &[Point]) -> f64 {
    let n = points.len();
    (0..n).map(|i| cross(points[i], points[(i + 1) % n])).sum::<f64>() * 0.5
}

pub(crate) fn polygon_centroid(points: &[Point]) -> (Point, f64) {
    let n = points.len();
    let mut a = 0.0;
    let mut c = Point::zeros();
    // shift to the first vertex for accuracy
    let o = points[0];
    for i in 0..n {
        let p = points[i] - o;
        let q = points[(i + 1) % n] - o;
        let w = cross(p, q);
        a += w;
        c += (p + q) * w;
    }
    a *= 0.5;
    (o + c / (6.0 * a), a)
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point, tol: f64) -> bool {
    let d1 = cross(p2 - p1, q1 - p1);
    let d2 = cross(p2 - p1, q2 - p1);
    let d3 = cross(q2 - q1, p1 - q1);
    let d4 = cross(q2 - q1, p2 - q1);
    if ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol)) && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol)) {
        return true;
    }
    let on_segment = |a: Point, b: Point, p: Point, d: f64| {
        d.abs() <= tol
            && p.x >= a.x.min(b.x) - tol
            && p.x <= a.x.max(b.x) + tol
            && p.y >= a.y.min(b.y) - tol
            && p.y <= a.y.max(b.y) + tol
    };
    on_segment(p1, p2, q1, d1) || on_segment(p1, p2, q2, d2) || on_segment(q1, q2, p1, d3) || on_segment(q1, q2, p2, d4)
}

/// `true` when the closed polygon has no self-intersections.
pub(crate) fn is_simple_polygon(points: &[Point]) -> bool {
    let n = points.len();
    if n < 3 {
        return false;
    }
    let scale = points.iter().map(|p| (p - points[0]).norm()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-13 * scale * scale;
    for i in 0..n {
        let a1 = points[i];
        let a2 = points[(i + 1) % n];
        if (a2 - a1).norm() <= 1e-14 * scale {
            return false;
        }
        for j in i + 1..n {
            // skip adjacent segments
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let b1 = points[j];
            let b2 = points[(j + 1) % n];
            if segments_intersect(a1, a2, b1, b2, tol) {
                return false;
            }
        }
    }
    // adjacent segments must not fold back onto each other
    for i in 0..n {
        let prev = points[(i + n - 1) % n];
        let cur = points[i];
        let next = points[(i + 1) % n];
        let u = cur - prev;
        let v = next - cur;
        if cross(u, v).abs() <= tol && u.dot(&v) < 0.0 {
            return false;
        }
    }
    true
}

impl PolygonalMesh {
    /// Builds a mesh from vertex coordinates and counter-clockwise cell loops,
    /// validating conformity, orientation and simplicity.
    pub fn new(vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self> {
        Self::with_levelset(vertices, cells, None)
    }

    pub fn with_levelset(
        vertices: Vec<Point>,
        cells: Vec<Vec<usize>>,
        boundary_levelset: Option<String>,
    ) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidMesh("mesh has no cells".into()));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let mut cell_geometry = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(Error::InvalidMesh(format!("cell {c} has fewer than 3 vertices")));
            }
            if let Some(&v) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("cell {c} references vertex {v}")));
            }
            let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            let mut sorted = cell.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != cell.len() || !is_simple_polygon(&pts) {
                return Err(Error::NonSimplePolygon { cell: c });
            }
            let (centroid, area) = polygon_centroid(&pts);
            if area.is_nan() || area <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} is not counter-clockwise or has zero area ({area:e})"
                )));
            }
            let mut diameter: f64 = 0.0;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    diameter = diameter.max((pts[i] - pts[j]).norm());
                }
            }
            cell_geometry.push(CellGeometry { centroid, area, diameter });
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let n = cell.len();
            let mut local = Vec::with_capacity(n);
            for i in 0..n {
                let a = cell[i];
                let b = cell[(i + 1) % n];
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    None => {
                        lookup.insert(key, edges.len());
                        local.push((edges.len(), true));
                        edges.push(Edge { vertices: [a, b], left: c, right: None });
                    }
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.right.is_some() {
                            return Err(Error::InvalidMesh(format!("edge ({a}, {b}) shared by more than two cells")));
                        }
                        if edge.vertices != [b, a] {
                            return Err(Error::InvalidMesh(format!(
                                "edge ({a}, {b}) traversed twice in the same direction"
                            )));
                        }
                        edge.right = Some(c);
                        local.push((e, false));
                    }
                }
            }
            cell_edges.push(local);
        }
        let boundary_edges: Vec<usize> = (0..edges.len()).filter(|&e| edges[e].is_boundary()).collect();
        let edge_geometry = edges
            .iter()
            .map(|e| {
                let p = vertices[e.vertices[0]];
                let q = vertices[e.vertices[1]];
                let t = q - p;
                let length = t.norm();
                EdgeGeometry { length, midpoint: (p + q) * 0.5, normal: Point::new(t.y, -t.x) / length }
            })
            .collect();

        let mut used = vec![false; vertices.len()];
        for cell in &cells {
            for &v in cell {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} belongs to no cell")));
        }

        let mesh = Self {
            vertices,
            cells,
            edges,
            cell_edges,
            boundary_edges,
            cell_geometry,
            edge_geometry,
            boundary_levelset,
        };
        mesh.check_partition()?;
        Ok(mesh)
    }

    /// Boundary edges must close into loops, and the enclosed area must equal
    /// the sum of the cell areas.
    fn check_partition(&self) -> Result<()> {
        let loops = self.boundary_loops()?;
        let enclosed: f64 = loops
            .iter()
            .map(|l| {
                let pts: Vec<Point> = l.iter().map(|&v| self.vertices[v]).collect();
                polygon_area(&pts)
            })
            .sum();
        let total: f64 = self.cell_geometry.iter().map(|g| g.area).sum();
        if ((enclosed - total) / total).abs() > 1e-12 {
            return Err(Error::InvalidMesh(format!("cell areas sum to {total} but the boundary encloses {enclosed}")));
        }
        Ok(())
    }

    /// Vertex loops traced along the boundary edges in their stored orientation.
    pub fn boundary_loops(&self) -> Result<Vec<Vec<usize>>> {
        let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
        for &e in &self.boundary_edges {
            let [a, b] = self.edges[e].vertices;
            next.entry(a).or_default().push(b);
        }
        if next.values().any(|v| v.len() != 1) {
            return Err(Error::InvalidMesh("boundary is not a disjoint union of simple loops".into()));
        }
        let mut visited: HashMap<usize, bool> = next.keys().map(|&k| (k, false)).collect();
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut loops = Vec::new();
        for s in starts {
            if visited[&s] {
                continue;
            }
            let mut lp = vec![s];
            visited.insert(s, true);
            let mut cur = next[&s][0];
            while cur != s {
                match next.get(&cur) {
                    Some(n) if !visited[&cur] => {
                        visited.insert(cur, true);
                        lp.push(cur);
                        cur = n[0];
                    }
                    _ => {
                        return Err(Error::InvalidMesh("open boundary chain".into()));
                    }
                }
            }
            loops.push(lp);
        }
        Ok(loops)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point> {
        self.cells[c].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn cell_edges(&self, c: usize) -> &[(usize, bool)] {
        &self.cell_edges[c]
    }

    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    pub fn cell_geometry(&self, c: usize) -> &CellGeometry {
        &self.cell_geometry[c]
    }

    pub fn edge_geometry(&self, e: usize) -> &EdgeGeometry {
        &self.edge_geometry[e]
    }

    /// Scale of a boundary edge: the diameter of its adjacent cell.
    pub fn edge_cell_scale(&self, e: usize) -> f64 {
        self.cell_geometry[self.edges[e].left].diameter
    }

    pub fn edge_endpoints(&self, e: usize) -> (Point, Point) {
        let [a, b] = self.edges[e].vertices;
        (self.vertices[a], self.vertices[b])
    }

    pub fn boundary_levelset(&self) -> Option<&str> {
        self.boundary_levelset.as_deref()
    }

    pub fn set_boundary_levelset(&mut self, name: Option<String>) {
        self.boundary_levelset = name;
    }

    pub fn total_area(&self) -> f64 {
        self.cell_geometry.iter().map(|g| g.area).sum()
    }

    /// Returns a copy with every vertex mapped through `f`; the cell loops are
    /// kept and must remain valid.
    pub fn map_vertices(&self, f: impl Fn(Point) -> Point) -> Result<Self> {
        Self::with_levelset(
            self.vertices.iter().map(|&p| f(p)).collect(),
            self.cells.clone(),
            self.boundary_levelset.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> PolygonalMesh {
        PolygonalMesh::new(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn single_square_geometry() {
        let m = unit_square();
        let g = m.cell_geometry(0);
        assert!((g.area - 1.0).abs() < 1e-15);
        assert!((g.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert!((g.centroid - Point::new(0.5, 0.5)).norm() < 1e-15);
        assert_eq!(m.boundary_edges().len(), 4);
        for &e in m.boundary_edges() {
            let eg = m.edge_geometry(e);
            assert!(eg.normal.dot(&(eg.midpoint - g.centroid)) > 0.0);
        }
    }

    #[test]
    fn rejects_clockwise_cell() {
        let err = PolygonalMesh::new(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)],
            vec![vec![0, 3, 2, 1]],
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_bowtie() {
        let err = PolygonalMesh::new(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)],
            vec![vec![0, 2, 3, 1]],
        );
        assert!(matches!(err, Err(Error::NonSimplePolygon { .. })));
    }

    #[test]
    fn rejects_hanging_node_mismatch() {
        // left square has a midpoint vertex on its right side that the right
        // square does not share -> area mismatch is not the problem, edge
        // conformity is: boundary loop is not simple.
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 0.5),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
        ];
        let cells = vec![vec![0, 1, 2, 3, 4], vec![1, 5, 6, 3]];
        assert!(PolygonalMesh::new(v, cells).is_err());
    }

    #[test]
    fn boundary_loop_turns_once() {
        let m = unit_square();
        let loops = m.boundary_loops().unwrap();
        assert_eq!(loops.len(), 1);
        let pts: Vec<Point> = loops[0].iter().map(|&v| m.vertex(v)).collect();
        let n = pts.len();
        let mut turning = 0.0;
        for i in 0..n {
            let u = pts[(i + 1) % n] - pts[i];
            let w = pts[(i + 2) % n] - pts[(i + 1) % n];
            turning += cross(u, w).atan2(u.dot(&w));
        }
        assert!((turning - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}
