use serde::{Deserialize, Serialize};

use super::{Point, PolygonalMesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rectangle {
    pub fn unit_square() -> Self {
        Self { min: [0.0, 0.0], max: [1.0, 1.0] }
    }
}

/// `nx * ny` axis-aligned square (or rectangular) cells tiling `domain`.
pub fn build_structured_mesh(domain: Rectangle, nx: usize, ny: usize) -> Result<PolygonalMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument("nx and ny must be at least 1".into()));
    }
    let [x0, y0] = domain.min;
    let [x1, y1] = domain.max;
    if !(x1 > x0 && y1 > y0) {
        return Err(Error::InvalidArgument("empty rectangle".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point::new(x0 + (x1 - x0) * i as f64 / nx as f64, y0 + (y1 - y0) * j as f64 / ny as f64));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolygonalMesh::new(vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_cell() {
        let m = build_structured_mesh(Rectangle::unit_square(), 1, 1).unwrap();
        assert_eq!(m.num_cells(), 1);
        assert!((m.cell_geometry(0).area - 1.0).abs() < 1e-15);
        assert!((m.cell_geometry(0).diameter - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.boundary_edges().len(), 4);
    }

    #[test]
    fn two_by_two() {
        let m = build_structured_mesh(Rectangle::unit_square(), 2, 2).unwrap();
        assert_eq!(m.num_cells(), 4);
        assert_eq!(m.boundary_edges().len(), 8);
        assert_eq!(m.num_edges() - m.boundary_edges().len(), 4);
        assert_eq!(m.num_vertices() + m.num_cells(), m.num_edges() + 1);
    }

    #[test]
    fn rectangle_cells() {
        let m = build_structured_mesh(Rectangle { min: [0.0, 0.0], max: [2.0, 1.0] }, 2, 1).unwrap();
        for c in 0..2 {
            assert!((m.cell_geometry(c).area - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_zero_counts() {
        assert!(build_structured_mesh(Rectangle::unit_square(), 0, 3).is_err());
    }
}
