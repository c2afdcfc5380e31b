//! Polygonal meshes, their generators, quadrature and quality statistics.

mod curved_meshes;
mod io;
mod mesh;
mod quadrature;
mod quality;
mod structured;
mod voronoi;

pub use curved_meshes::{build_disk_approx_mesh, build_squares_approx_mesh, SquaresMeshInfo};
pub use io::{mesh_from_json, mesh_to_json, read_mesh_json, write_mesh_json, MeshFile};
pub use mesh::{polygon_area, CellGeometry, Edge, EdgeGeometry, PolygonalMesh};
pub use quadrature::{
    cell_quadrature, edge_quadrature, gauss_legendre, gauss_lobatto, gauss_lobatto_nodes, polygon_quadrature,
    triangle_quadrature, QuadratureRule,
};
pub use quality::{quality_report, MeshQualityReport};
pub use structured::{build_structured_mesh, Rectangle};
pub use voronoi::{build_voronoi_mesh, clip_polygon_halfplane, ConvexPolygon};

pub type Point = nalgebra::Vector2<f64>;

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}
