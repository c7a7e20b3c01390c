//! Text exports: CSV tables with 17 significant digits and legacy-VTK ASCII
//! unstructured grids with polygon cells.
//!
//! Field CSV columns are `cell,x,y,value`; trajectories append `t`, one row per
//! cell and snapshot, snapshot-major.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::FieldError;
use crate::field::{CellField, SpaceTimeField};
use crate::geometry::VertexIndex;
use crate::mesh::Mesh;

pub const FIELD_CSV_HEADER: &str = "cell,x,y,value";
pub const TRAJECTORY_CSV_HEADER: &str = "cell,x,y,value,t";

const VTK_POLYGON: u8 = 7;

fn push_rows(out: &mut String, mesh: &Mesh, values: &[f64], t: Option<f64>) {
    for (k, (cell, v)) in mesh.cells().iter().zip(values).enumerate() {
        let _ = write!(out, "{k},{:.16e},{:.16e},{v:.16e}", cell.center.x, cell.center.y);
        if let Some(t) = t {
            let _ = write!(out, ",{t:.16e}");
        }
        out.push('\n');
    }
}

pub fn field_to_csv(field: &CellField) -> String {
    let mut out = format!("{FIELD_CSV_HEADER}\n");
    push_rows(&mut out, field.mesh(), field.values(), None);
    out
}

pub fn trajectory_to_csv(traj: &SpaceTimeField) -> String {
    let mut out = format!("{TRAJECTORY_CSV_HEADER}\n");
    for n in 0..=traj.steps() {
        push_rows(&mut out, traj.mesh(), traj.snapshot_values(n), Some(traj.time(n)));
    }
    out
}

/// Reads a field written by [`field_to_csv`]. Rows may come in any order but
/// every cell must appear exactly once; coordinates are ignored.
pub fn field_from_csv(mesh: Arc<Mesh>, text: &str) -> Result<CellField, FieldError> {
    let n = mesh.num_cells();
    let mut values: Vec<Option<f64>> = vec![None; n];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == FIELD_CSV_HEADER {
            continue;
        }
        let bad = |what: &str| FieldError::Parse(format!("line {}: {what}", lineno + 1));
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        let k: usize = cols[0].parse().map_err(|_| bad("bad cell index"))?;
        let v: f64 = cols[3].parse().map_err(|_| bad("bad value"))?;
        let slot = values.get_mut(k).ok_or_else(|| bad("cell index out of range"))?;
        if slot.replace(v).is_some() {
            return Err(bad("duplicate cell"));
        }
    }
    let got = values.iter().filter(|v| v.is_some()).count();
    if got != n {
        return Err(FieldError::Length { expected: n, got });
    }
    CellField::new(mesh, values.into_iter().flatten().collect())
}

/// Legacy-VTK ASCII grid with one `SCALARS` block per named cell array.
pub fn mesh_to_vtk(mesh: &Mesh, title: &str, cell_data: &[(&str, &[f64])]) -> String {
    let tol = 1e-12 * mesh.size().max(f64::MIN_POSITIVE);
    let mut index = VertexIndex::new(tol);
    let loops: Vec<Vec<usize>> = mesh
        .cells()
        .iter()
        .map(|c| c.vertices.iter().map(|&p| index.insert(p)).collect())
        .collect();

    let mut out = String::from("# vtk DataFile Version 3.0\n");
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(out, "{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", index.len());
    for p in index.points() {
        let _ = writeln!(out, "{:.16e} {:.16e} 0", p.x, p.y);
    }
    let size: usize = loops.iter().map(|l| l.len() + 1).sum();
    let _ = writeln!(out, "CELLS {} {size}", loops.len());
    for l in &loops {
        let _ = write!(out, "{}", l.len());
        for id in l {
            let _ = write!(out, " {id}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {}", loops.len());
    for _ in &loops {
        let _ = writeln!(out, "{VTK_POLYGON}");
    }
    if !cell_data.is_empty() {
        let _ = writeln!(out, "CELL_DATA {}", loops.len());
        for (name, values) in cell_data {
            let name: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in values.iter() {
                let _ = writeln!(out, "{v:.16e}");
            }
        }
    }
    out
}

pub fn field_to_vtk(field: &CellField, name: &str) -> String {
    mesh_to_vtk(field.mesh(), name, &[(name, field.values())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_rect, Domain};

    fn mesh(nx: usize, ny: usize) -> Arc<Mesh> {
        Arc::new(build_uniform_rect(nx, ny, &Domain::unit_square()).unwrap())
    }

    #[test]
    fn field_csv_round_trips_bitwise() {
        let m = mesh(3, 2);
        let values: Vec<f64> = (0..6).map(|k| (k as f64 * 0.7).sin() / 3.0).collect();
        let f = CellField::new(m.clone(), values.clone()).unwrap();
        let text = field_to_csv(&f);
        assert_eq!(text.lines().count(), 7);
        assert_eq!(field_from_csv(m, &text).unwrap().values(), &values[..]);
    }

    #[test]
    fn csv_reader_rejects_gaps_and_duplicates() {
        let m = mesh(2, 1);
        let dup = "cell,x,y,value\n0,0,0,1\n0,0,0,2\n";
        assert!(matches!(field_from_csv(m.clone(), dup), Err(FieldError::Parse(_))));
        let gap = "cell,x,y,value\n1,0,0,1\n";
        assert_eq!(field_from_csv(m.clone(), gap).unwrap_err(), FieldError::Length { expected: 2, got: 1 });
        let nan = "0,0,0,1\n1,0,0,NaN\n";
        assert!(matches!(field_from_csv(m, nan), Err(FieldError::NonFinite { cell: 1, .. })));
    }

    #[test]
    fn trajectory_csv_has_one_row_per_cell_and_snapshot() {
        let m = mesh(2, 2);
        let traj = SpaceTimeField::new(m, 1.0, vec![vec![1.0; 4]; 5]).unwrap();
        let text = trajectory_to_csv(&traj);
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 5 * 4);
        assert!(rows[4].starts_with("0,") && rows[4].ends_with(",2.5000000000000000e-1"));
    }

    #[test]
    fn vtk_shares_vertices_between_cells() {
        let m = mesh(2, 2);
        let values = [1.0, 2.0, 3.0, 4.0];
        let text = mesh_to_vtk(&m, "demo", &[("u", &values)]);
        assert!(text.contains("POINTS 9 double"));
        assert!(text.contains("CELLS 4 20"));
        assert!(text.contains("CELL_DATA 4\nSCALARS u double 1\nLOOKUP_TABLE default\n1.0000000000000000e0\n"));
        assert_eq!(text.lines().filter(|l| *l == "7").count(), 4);
    }
}
