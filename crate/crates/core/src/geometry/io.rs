use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Point, PolygonalMesh};
use crate::Result;

/// On-disk mesh layout: explicit coordinates and counter-clockwise cell loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_levelset: Option<String>,
}

impl From<&PolygonalMesh> for MeshFile {
    fn from(mesh: &PolygonalMesh) -> Self {
        Self {
            vertices: mesh.vertices().iter().map(|p| [p.x, p.y]).collect(),
            cells: mesh.cells().to_vec(),
            boundary_levelset: mesh.boundary_levelset().map(str::to_owned),
        }
    }
}

impl TryFrom<MeshFile> for PolygonalMesh {
    type Error = crate::Error;

    fn try_from(file: MeshFile) -> Result<Self> {
        PolygonalMesh::with_levelset(
            file.vertices.iter().map(|v| Point::new(v[0], v[1])).collect(),
            file.cells,
            file.boundary_levelset,
        )
    }
}

pub fn mesh_to_json(mesh: &PolygonalMesh) -> Result<String> {
    Ok(serde_json::to_string(&MeshFile::from(mesh))?)
}

/// Parses and validates a mesh.
pub fn mesh_from_json(text: &str) -> Result<PolygonalMesh> {
    let file: MeshFile = serde_json::from_str(text)?;
    file.try_into()
}

pub fn write_mesh_json(mesh: &PolygonalMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mesh_to_json(mesh)?)?;
    Ok(())
}

pub fn read_mesh_json(path: impl AsRef<Path>) -> Result<PolygonalMesh> {
    mesh_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_voronoi_mesh, ConvexPolygon};

    #[test]
    fn roundtrip_preserves_mesh() {
        let m = build_voronoi_mesh(&ConvexPolygon::unit_square(), 30, 1, 2).unwrap();
        let back = mesh_from_json(&mesh_to_json(&m).unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn reader_validates() {
        let bad = r#"{"vertices": [[0,0],[1,0],[1,1],[0,1]], "cells": [[0,3,2,1]]}"#;
        assert!(mesh_from_json(bad).is_err());
        let good = r#"{"vertices": [[0,0],[1,0],[1,1],[0,1]], "cells": [[0,1,2,3]], "boundary_levelset": "square"}"#;
        let m = mesh_from_json(good).unwrap();
        assert_eq!(m.boundary_levelset(), Some("square"));
    }
}
