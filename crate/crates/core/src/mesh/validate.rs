use std::fmt;

use super::Mesh;
use crate::geometry;

/// Absolute orthogonality tolerance, in units of the mesh size `h`.
pub const ORTHOGONALITY_TOL: f64 = 1e-9;
const AREA_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonPositiveCellArea { cell: usize, area: f64 },
    CellAreaMismatch { cell: usize, stored: f64, polygon: f64 },
    AreaSum { total: f64, domain: f64 },
    SelfEdge { edge: usize, cell: usize },
    NonPositiveEdge { edge: usize, length: f64, distance: f64 },
    EdgeLengthMismatch { edge: usize, stored: f64, measured: f64 },
    DistanceMismatch { edge: usize, stored: f64, measured: f64 },
    /// `|n| != 1` or `n` not perpendicular to the edge segment.
    BadNormal { edge: usize, residual: f64 },
    /// Component of `x_L - x_K` perpendicular to `n_KL`, or a normal pointing from `L` to `K`.
    Orthogonality { edge: usize, residual: f64 },
    DiamondArea { edge: usize, stored: f64, expected: f64 },
    DiamondTiling { total: f64, domain: f64 },
    BoundaryEdgeOffBoundary { edge: usize, distance: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositiveCellArea { cell, area } => write!(f, "cell {cell}: non-positive area {area:e}"),
            Self::CellAreaMismatch { cell, stored, polygon } => {
                write!(f, "cell {cell}: stored area {stored:e} differs from polygon area {polygon:e}")
            }
            Self::AreaSum { total, domain } => {
                write!(f, "cell areas sum to {total:.16e}, domain area is {domain:.16e}")
            }
            Self::SelfEdge { edge, cell } => write!(f, "interior edge {edge}: joins cell {cell} to itself"),
            Self::NonPositiveEdge { edge, length, distance } => {
                write!(f, "interior edge {edge}: length {length:e}, center distance {distance:e}")
            }
            Self::EdgeLengthMismatch { edge, stored, measured } => {
                write!(f, "interior edge {edge}: stored length {stored:e}, endpoints give {measured:e}")
            }
            Self::DistanceMismatch { edge, stored, measured } => {
                write!(f, "interior edge {edge}: stored distance {stored:e}, centers give {measured:e}")
            }
            Self::BadNormal { edge, residual } => write!(f, "interior edge {edge}: normal residual {residual:e}"),
            Self::Orthogonality { edge, residual } => {
                write!(f, "interior edge {edge}: orthogonality residual {residual:e}")
            }
            Self::DiamondArea { edge, stored, expected } => {
                write!(f, "interior edge {edge}: diamond area {stored:e}, expected {expected:e}")
            }
            Self::DiamondTiling { total, domain } => {
                write!(f, "diamonds cover {total:.16e}, domain area is {domain:.16e}")
            }
            Self::BoundaryEdgeOffBoundary { edge, distance } => {
                write!(f, "boundary edge {edge}: endpoint {distance:e} away from the domain boundary")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "admissible");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Checks every admissibility invariant; violations are returned as data.
pub fn validate_admissibility(mesh: &Mesh) -> ValidationReport {
    let mut out = Vec::new();
    let h = mesh.size();
    let abs_tol = ORTHOGONALITY_TOL * h;
    let domain_area = mesh.domain_area();

    for (k, cell) in mesh.cells().iter().enumerate() {
        if !(cell.area > 0.0) {
            out.push(Violation::NonPositiveCellArea { cell: k, area: cell.area });
            continue;
        }
        let polygon = geometry::area(&cell.vertices);
        if !rel_close(cell.area, polygon, AREA_TOL) {
            out.push(Violation::CellAreaMismatch { cell: k, stored: cell.area, polygon });
        }
    }
    let total: f64 = mesh.cell_areas().sum();
    if !rel_close(total, domain_area, AREA_TOL) {
        out.push(Violation::AreaSum { total, domain: domain_area });
    }

    let mut diamond_total = 0.0;
    for (i, e) in mesh.interior_edges().iter().enumerate() {
        let [k, l] = e.cells;
        if k == l {
            out.push(Violation::SelfEdge { edge: i, cell: k });
            continue;
        }
        if !(e.length > 0.0 && e.distance > 0.0) {
            out.push(Violation::NonPositiveEdge { edge: i, length: e.length, distance: e.distance });
            continue;
        }
        let [a, b] = e.endpoints;
        let measured = a.distance(b);
        if (measured - e.length).abs() > abs_tol {
            out.push(Violation::EdgeLengthMismatch { edge: i, stored: e.length, measured });
        }
        let xk = mesh.cells()[k].center;
        let xl = mesh.cells()[l].center;
        let delta = xl - xk;
        let centers = delta.norm();
        if (centers - e.distance).abs() > abs_tol {
            out.push(Violation::DistanceMismatch { edge: i, stored: e.distance, measured: centers });
        }
        let tangent = (b - a) * (1.0 / measured.max(f64::MIN_POSITIVE));
        let normal_residual = (e.normal.norm() - 1.0).abs().max(e.normal.dot(tangent).abs());
        if normal_residual > ORTHOGONALITY_TOL {
            out.push(Violation::BadNormal { edge: i, residual: normal_residual });
        }
        let along = delta.dot(e.normal);
        let perpendicular = (delta - e.normal * along).norm();
        if perpendicular > abs_tol || along <= 0.0 {
            out.push(Violation::Orthogonality { edge: i, residual: perpendicular });
        }
        let expected = 0.5 * e.length * e.distance;
        if !rel_close(e.diamond_area, expected, AREA_TOL) {
            out.push(Violation::DiamondArea { edge: i, stored: e.diamond_area, expected });
        }
        diamond_total += e.diamond_area;
    }
    diamond_total += (0..mesh.num_cells())
        .map(|k| mesh.boundary_diamond_residual(k))
        .sum::<f64>();
    if !rel_close(diamond_total, domain_area, AREA_TOL) {
        out.push(Violation::DiamondTiling { total: diamond_total, domain: domain_area });
    }

    let boundary = mesh.domain().vertices();
    for (i, e) in mesh.boundary_edges().iter().enumerate() {
        let distance = e
            .endpoints
            .iter()
            .map(|&p| geometry::boundary_distance(p, boundary))
            .fold(0.0, f64::max);
        let mid = (e.endpoints[0] + e.endpoints[1]) * 0.5;
        let distance = distance.max(geometry::boundary_distance(mid, boundary));
        if distance > abs_tol {
            out.push(Violation::BoundaryEdgeOffBoundary { edge: i, distance });
        }
    }

    ValidationReport { violations: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::mesh::{build_uniform_rect, Domain};

    #[test]
    fn displaced_center_is_reported_with_its_tangential_offset() {
        let mut mesh = build_uniform_rect(3, 3, &Domain::unit_square()).unwrap();
        // cell 4 is the middle cell; move it along y only
        let shift = 1e-3;
        mesh.cells_mut()[4].center = mesh.cells()[4].center + Point::new(0.0, shift);
        let report = validate_admissibility(&mesh);
        let ortho: Vec<_> = report
            .violations
            .iter()
            .filter_map(|v| match v {
                Violation::Orthogonality { edge, residual } => Some((*edge, *residual)),
                _ => None,
            })
            .collect();
        // the two vertical edges of the middle cell see the whole shift as residual
        assert_eq!(ortho.len(), 2);
        for (edge, residual) in ortho {
            let e = &mesh.interior_edges()[edge];
            assert!(e.cells.contains(&4));
            assert!((residual - shift).abs() < 1e-15);
        }
    }

    #[test]
    fn corrupted_area_breaks_conservation() {
        let mut mesh = build_uniform_rect(2, 2, &Domain::unit_square()).unwrap();
        mesh.cells_mut()[1].area *= 1.5;
        let report = validate_admissibility(&mesh);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::AreaSum { .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::CellAreaMismatch { cell: 1, .. })));
    }

    #[test]
    fn uniform_meshes_are_admissible() {
        for (nx, ny) in [(1, 1), (2, 1), (5, 3), (16, 16)] {
            let mesh = build_uniform_rect(nx, ny, &Domain::rectangle(-1.0, 2.0, 0.5, 1.5).unwrap()).unwrap();
            let report = validate_admissibility(&mesh);
            assert!(report.is_admissible(), "{nx}x{ny}: {report}");
        }
    }
}
