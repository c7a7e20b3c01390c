//! Admissible finite-volume meshes of a convex polygonal domain.
//!
//! A [`Mesh`] owns the cells (center point, area, vertex loop), the interior
//! edges `K|L` with their two-point geometry (length, center distance, unit
//! normal from `K` to `L`, diamond area) and the boundary edges. The derived
//! mesh size and regularity number are computed once at construction.
//!
//! Builders never validate implicitly; call [`validate_admissibility`] to get
//! the list of violated invariants.

mod build;
mod validate;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::MeshError;
use crate::geometry::{self, Point, VertexIndex};

pub use build::{build_uniform_rect, build_voronoi, jittered_lattice_sites};
pub use validate::{validate_admissibility, ValidationReport, Violation, ORTHOGONALITY_TOL};

/// A convex polygonal domain, stored counter-clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    vertices: Vec<Point>,
}

impl Domain {
    pub fn polygon(mut vertices: Vec<Point>) -> Result<Self, MeshError> {
        if vertices.len() < 3 || vertices.iter().any(|p| !p.is_finite()) {
            return Err(MeshError::DegenerateDomain);
        }
        if geometry::signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let scale = geometry::diameter(&vertices);
        if !(geometry::signed_area(&vertices) > 0.0) {
            return Err(MeshError::DegenerateDomain);
        }
        if !geometry::is_convex_ccw(&vertices, 1e-12 * scale * scale) {
            return Err(MeshError::NonConvexDomain);
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self, MeshError> {
        if !(x1 > x0 && y1 > y0) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(MeshError::DegenerateDomain);
        }
        Ok(Self {
            vertices: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
        })
    }

    pub fn unit_square() -> Self {
        Self::rectangle(0.0, 1.0, 0.0, 1.0).expect("unit square is valid")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        geometry::area(&self.vertices)
    }

    pub fn diameter(&self) -> f64 {
        geometry::diameter(&self.vertices)
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        geometry::convex_contains(&self.vertices, p, tol)
    }

    pub fn strictly_contains(&self, p: Point) -> bool {
        self.contains(p, 0.0) && geometry::boundary_distance(p, &self.vertices) > 0.0
    }
}

/// A control volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// The cell point `x_K` used by the two-point fluxes.
    pub center: Point,
    pub area: f64,
    /// Counter-clockwise vertex loop.
    pub vertices: Vec<Point>,
}

/// Interior edge `sigma = K|L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorEdge {
    /// `[K, L]`; the normal points from `K` to `L`.
    pub cells: [usize; 2],
    pub endpoints: [Point; 2],
    pub length: f64,
    /// `d_{K|L} = |x_L - x_K|`.
    pub distance: f64,
    pub normal: Point,
    /// `m_sigma * d_{K|L} / 2`.
    pub diamond_area: f64,
}

impl InteriorEdge {
    /// Two-point transmissibility `m_sigma / d_{K|L}`.
    pub fn transmissibility(&self) -> f64 {
        self.length / self.distance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub cell: usize,
    pub endpoints: [Point; 2],
    pub length: f64,
}

/// A Voronoi facet removed because it was shorter than the degeneracy threshold
/// (or only one of its two cells produced it).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedFacet {
    pub cells: [usize; 2],
    pub length: f64,
}

/// Edge reference used by cell-to-edge adjacency.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRef {
    Interior(usize),
    Boundary(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MeshFile {
    domain: Domain,
    cells: Vec<Cell>,
    interior_edges: Vec<InteriorEdge>,
    boundary_edges: Vec<BoundaryEdge>,
    #[serde(default)]
    dropped_facets: Vec<DroppedFacet>,
}

/// Immutable admissible finite-volume mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    domain: Domain,
    cells: Vec<Cell>,
    interior_edges: Vec<InteriorEdge>,
    boundary_edges: Vec<BoundaryEdge>,
    dropped_facets: Vec<DroppedFacet>,
    cell_edges: Vec<Vec<EdgeRef>>,
    size: f64,
    regularity: f64,
    max_vertex_valence: usize,
}

impl Mesh {
    /// Assembles a mesh from explicit parts without checking admissibility.
    pub fn from_parts(
        domain: Domain,
        cells: Vec<Cell>,
        interior_edges: Vec<InteriorEdge>,
        boundary_edges: Vec<BoundaryEdge>,
        dropped_facets: Vec<DroppedFacet>,
    ) -> Result<Self, MeshError> {
        if cells.is_empty() {
            return Err(MeshError::Empty);
        }
        let n = cells.len();
        for e in &interior_edges {
            if e.cells.iter().any(|&k| k >= n) {
                return Err(MeshError::CellIndex(e.cells[0].max(e.cells[1])));
            }
        }
        for e in &boundary_edges {
            if e.cell >= n {
                return Err(MeshError::CellIndex(e.cell));
            }
        }
        let mut cell_edges = vec![Vec::new(); n];
        for (i, e) in interior_edges.iter().enumerate() {
            cell_edges[e.cells[0]].push(EdgeRef::Interior(i));
            cell_edges[e.cells[1]].push(EdgeRef::Interior(i));
        }
        for (i, e) in boundary_edges.iter().enumerate() {
            cell_edges[e.cell].push(EdgeRef::Boundary(i));
        }
        let size = cells
            .iter()
            .map(|c| geometry::diameter(&c.vertices))
            .fold(0.0, f64::max);
        let mut mesh = Self {
            domain,
            cells,
            interior_edges,
            boundary_edges,
            dropped_facets,
            cell_edges,
            size,
            regularity: 0.0,
            max_vertex_valence: 0,
        };
        let (valence, reg) = mesh.compute_regularity();
        mesh.max_vertex_valence = valence;
        mesh.regularity = reg;
        Ok(mesh)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn interior_edges(&self) -> &[InteriorEdge] {
        &self.interior_edges
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Total edge count; discrete gradients are indexed interior edges first.
    pub fn num_edges(&self) -> usize {
        self.interior_edges.len() + self.boundary_edges.len()
    }

    pub fn dropped_facets(&self) -> &[DroppedFacet] {
        &self.dropped_facets
    }

    /// Edges of cell `k`.
    pub fn cell_edges(&self, k: usize) -> &[EdgeRef] {
        &self.cell_edges[k]
    }

    /// Mesh size `h`: the largest cell diameter.
    pub fn size(&self) -> f64 {
        self.size
    }

    /// Regularity number `max(N, max_{K, sigma in E_K} diam(K) / d(x_K, sigma))`
    /// where `N` is the largest number of edges meeting at a vertex.
    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    pub fn max_vertex_valence(&self) -> usize {
        self.max_vertex_valence
    }

    /// `|Lambda|` as measured from the domain polygon.
    pub fn domain_area(&self) -> f64 {
        self.domain.area()
    }

    pub fn cell_areas(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.area)
    }

    fn edge_endpoints(&self, e: EdgeRef) -> [Point; 2] {
        match e {
            EdgeRef::Interior(i) => self.interior_edges[i].endpoints,
            EdgeRef::Boundary(i) => self.boundary_edges[i].endpoints,
        }
    }

    fn compute_regularity(&self) -> (usize, f64) {
        let tol = 1e-9 * self.size.max(f64::MIN_POSITIVE);
        let mut index = VertexIndex::new(tol);
        let mut valence: Vec<usize> = Vec::new();
        let all_edges = self
            .interior_edges
            .iter()
            .map(|e| e.endpoints)
            .chain(self.boundary_edges.iter().map(|e| e.endpoints));
        for [a, b] in all_edges {
            for p in [a, b] {
                let id = index.insert(p);
                if id >= valence.len() {
                    valence.resize(id + 1, 0);
                }
                valence[id] += 1;
            }
        }
        let max_valence = valence.into_iter().max().unwrap_or(0);
        let mut ratio: f64 = 0.0;
        for (k, cell) in self.cells.iter().enumerate() {
            let diam = geometry::diameter(&cell.vertices);
            for &e in &self.cell_edges[k] {
                let [a, b] = self.edge_endpoints(e);
                let dist = geometry::point_segment_distance(cell.center, a, b);
                ratio = ratio.max(diam / dist);
            }
        }
        (max_valence, ratio.max(max_valence as f64))
    }

    /// Area of the part of cell `k` not covered by its interior-edge half
    /// diamonds. Boundary edges use `D_sigma = K`, so this residual is the
    /// informational boundary share of the diamond tiling.
    pub fn boundary_diamond_residual(&self, k: usize) -> f64 {
        let cell = &self.cells[k];
        let covered: f64 = self.cell_edges[k]
            .iter()
            .filter_map(|&e| match e {
                EdgeRef::Interior(i) => {
                    let edge = &self.interior_edges[i];
                    let [a, b] = edge.endpoints;
                    Some(0.5 * (a - cell.center).cross(b - cell.center).abs())
                }
                EdgeRef::Boundary(_) => None,
            })
            .sum();
        cell.area - covered
    }

    /// Index of the cell whose polygon contains `p`, if any.
    pub fn locate(&self, p: Point, tol: f64) -> Option<usize> {
        self.cells
            .iter()
            .position(|c| geometry::convex_contains(&c.vertices, p, tol))
    }

    pub fn to_json(&self) -> String {
        let file = MeshFile {
            domain: self.domain.clone(),
            cells: self.cells.clone(),
            interior_edges: self.interior_edges.clone(),
            boundary_edges: self.boundary_edges.clone(),
            dropped_facets: self.dropped_facets.clone(),
        };
        serde_json::to_string_pretty(&file).expect("mesh serializes")
    }

    /// Parses a mesh file. Stored geometric quantities are taken as given, so a
    /// corrupted file loads and is then caught by [`validate_admissibility`].
    pub fn from_json(text: &str) -> Result<Self, MeshError> {
        let file: MeshFile = serde_json::from_str(text).map_err(|e| MeshError::Parse(e.to_string()))?;
        Self::from_parts(
            file.domain,
            file.cells,
            file.interior_edges,
            file.boundary_edges,
            file.dropped_facets,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| MeshError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path.as_ref(), self.to_json())
            .map_err(|e| MeshError::Io(format!("{}: {e}", path.as_ref().display())))
    }

    /// Plain-text summary: counts, `h` and the regularity number.
    pub fn summary(&self) -> String {
        format!(
            "cells: {}\ninterior_edges: {}\nboundary_edges: {}\ndropped_facets: {}\nmesh_size_h: {:.16e}\nregularity: {:.16e}\nmax_vertex_valence: {}\ndomain_area: {:.16e}\n",
            self.num_cells(),
            self.interior_edges.len(),
            self.boundary_edges.len(),
            self.dropped_facets.len(),
            self.size,
            self.regularity,
            self.max_vertex_valence,
            self.domain_area(),
        )
    }

    #[cfg(test)]
    pub(crate) fn cells_mut(&mut self) -> &mut Vec<Cell> {
        &mut self.cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_regularity_is_four() {
        let mesh = build_uniform_rect(4, 4, &Domain::unit_square()).unwrap();
        assert_eq!(mesh.max_vertex_valence(), 4);
        assert!((mesh.regularity() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn single_cell_regularity_comes_from_the_distance_ratio() {
        // corners touch only two edges, so the center-to-edge ratio dominates
        let mesh = build_uniform_rect(1, 1, &Domain::unit_square()).unwrap();
        assert_eq!(mesh.max_vertex_valence(), 2);
        assert!((mesh.regularity() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn regularity_is_refinement_invariant() {
        let d = Domain::rectangle(0.0, 3.0, 0.0, 1.0).unwrap();
        let coarse = build_uniform_rect(3, 2, &d).unwrap().regularity();
        for k in [2, 4, 8] {
            let fine = build_uniform_rect(3 * k, 2 * k, &d).unwrap().regularity();
            assert!((fine - coarse).abs() < 1e-12 * coarse);
        }
    }

    #[test]
    fn mesh_size_is_max_cell_diameter() {
        let mesh = build_uniform_rect(2, 4, &Domain::unit_square()).unwrap();
        assert!((mesh.size() - (0.25f64 + 0.0625).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let d = Domain::unit_square();
        let mesh = build_voronoi(&jittered_lattice_sites(4, 3, &d, 0.7, 9), &d).unwrap();
        let back = Mesh::from_json(&mesh.to_json()).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.json");
        let mesh = build_uniform_rect(3, 3, &Domain::unit_square()).unwrap();
        mesh.save(&path).unwrap();
        assert_eq!(Mesh::load(&path).unwrap(), mesh);
        assert!(matches!(Mesh::from_json("{"), Err(MeshError::Parse(_))));
    }

    #[test]
    fn boundary_residuals_complete_the_tiling() {
        let mesh = build_uniform_rect(3, 2, &Domain::unit_square()).unwrap();
        let diamonds: f64 = mesh.interior_edges().iter().map(|e| e.diamond_area).sum();
        let residual: f64 = (0..mesh.num_cells()).map(|k| mesh.boundary_diamond_residual(k)).sum();
        assert!((diamonds + residual - 1.0).abs() < 1e-14);
        // single cell: the whole cell is boundary residual
        let one = build_uniform_rect(1, 1, &Domain::unit_square()).unwrap();
        assert_eq!(one.boundary_diamond_residual(0), 1.0);
    }

    #[test]
    fn locate_finds_containing_cell() {
        let mesh = build_uniform_rect(4, 4, &Domain::unit_square()).unwrap();
        assert_eq!(mesh.locate(Point::new(0.6, 0.3), 0.0), Some(6));
        assert_eq!(mesh.locate(Point::new(1.6, 0.3), 0.0), None);
    }

    #[test]
    fn domain_orientation_and_convexity() {
        let cw = Domain::polygon(vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(geometry::signed_area(cw.vertices()) > 0.0);
        let dart = Domain::polygon(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(0.5, 0.5),
            Point::new(0.0, 2.0),
        ]);
        assert_eq!(dart, Err(MeshError::NonConvexDomain));
    }
}
