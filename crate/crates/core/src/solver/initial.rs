use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::field::CellField;
use crate::geometry::Point;
use crate::mesh::Mesh;
use crate::quadrature::TriangleRule;

/// Points per direction of the collapsed rule on each fan triangle.
pub const PROJECTION_ORDER: usize = 6;

/// Cell means `u_K = (1 / m_K) int_K u0`, integrated on the fan triangulation
/// of each cell and normalized by the quadrature area.
pub fn project_initial(u0: impl Fn(Point) -> f64, mesh: Arc<Mesh>) -> Result<CellField, FieldError> {
    let rule = TriangleRule::collapsed(PROJECTION_ORDER);
    let mut values = Vec::with_capacity(mesh.num_cells());
    for cell in mesh.cells() {
        let (mut integral, mut area) = (0.0, 0.0);
        for (p, w) in rule.polygon_nodes(&cell.vertices) {
            let v = u0(p);
            if !v.is_finite() {
                return Err(FieldError::InitialData { x: p.x, y: p.y });
            }
            integral += w * v;
            area += w;
        }
        values.push(integral / area);
    }
    CellField::new(mesh, values)
}

/// Named analytic initial data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticInitial {
    Constant { value: f64 },
    /// `amplitude cos(kx pi x) cos(ky pi y)`.
    CosineMode { kx: u32, ky: u32, amplitude: f64 },
    /// `left` for `x < threshold`, `right` otherwise.
    Step { threshold: f64, left: f64, right: f64 },
    /// `amplitude sum cos(a pi x) cos(b pi y) / sqrt(a^2 + b^2)` over
    /// `0 <= a, b <= modes`, `(a, b) != (0, 0)`: mode energies decay like the
    /// inverse Laplace eigenvalue.
    RoughModes { modes: u32, amplitude: f64 },
}

impl AnalyticInitial {
    pub fn eval(&self, p: Point) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Self::Constant { value } => value,
            Self::CosineMode { kx, ky, amplitude } => {
                amplitude * (kx as f64 * PI * p.x).cos() * (ky as f64 * PI * p.y).cos()
            }
            Self::Step { threshold, left, right } => {
                if p.x < threshold {
                    left
                } else {
                    right
                }
            }
            Self::RoughModes { modes, amplitude } => {
                let k = modes as usize;
                let cx: Vec<f64> = (0..=k).map(|a| (a as f64 * PI * p.x).cos()).collect();
                let cy: Vec<f64> = (0..=k).map(|b| (b as f64 * PI * p.y).cos()).collect();
                let mut sum = 0.0;
                for (a, x) in cx.iter().enumerate() {
                    for (b, y) in cy.iter().enumerate() {
                        if a + b > 0 {
                            sum += x * y / ((a * a + b * b) as f64).sqrt();
                        }
                    }
                }
                amplitude * sum
            }
        }
    }

    /// Projection onto the mesh; constants are assigned exactly.
    pub fn project(&self, mesh: Arc<Mesh>) -> Result<CellField, FieldError> {
        match *self {
            Self::Constant { value } => CellField::constant(mesh, value),
            _ => project_initial(|p| self.eval(p), mesh),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_rect, Domain};
    use std::f64::consts::PI;

    #[test]
    fn constant_data() {
        let mesh = Arc::new(build_uniform_rect(3, 2, &Domain::unit_square()).unwrap());
        let f = project_initial(|_| 4.25, mesh).unwrap();
        assert!(f.values().iter().all(|&v| (v - 4.25).abs() < 1e-14));
    }

    #[test]
    fn affine_data_gives_centroid_values() {
        let mesh = Arc::new(build_uniform_rect(2, 1, &Domain::rectangle(0.0, 2.0, 0.0, 1.0).unwrap()).unwrap());
        let f = project_initial(|p| p.x, mesh).unwrap();
        assert!((f.values()[0] - 0.5).abs() < 1e-14);
        assert!((f.values()[1] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn cosine_cell_means_match_closed_form() {
        // separable: the cell mean is the product of 1-D means of cos(pi x)
        let n = 16;
        let mesh = Arc::new(build_uniform_rect(n, n, &Domain::unit_square()).unwrap());
        let f = project_initial(|p| (PI * p.x).cos() * (PI * p.y).cos(), mesh.clone()).unwrap();
        let h = 1.0 / n as f64;
        let mean = |i: usize| ((PI * (i + 1) as f64 * h).sin() - (PI * i as f64 * h).sin()) / (PI * h);
        for j in 0..n {
            for i in 0..n {
                let exact = mean(i) * mean(j);
                assert!((f.values()[j * n + i] - exact).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_does_not_increase_the_norm() {
        let mesh = Arc::new(build_uniform_rect(8, 8, &Domain::unit_square()).unwrap());
        let f = project_initial(|p| (3.0 * p.x).exp() * (PI * p.y).sin(), mesh).unwrap();
        // ||u0||^2 = (e^6 - 1) / 6 * 1 / 2
        let exact = ((6f64).exp() - 1.0) / 12.0;
        assert!(f.l2_norm_sq() <= exact);
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let mesh = Arc::new(build_uniform_rect(2, 2, &Domain::unit_square()).unwrap());
        assert!(matches!(
            project_initial(|p| 1.0 / (p.x - p.x), mesh),
            Err(FieldError::InitialData { .. })
        ));
    }

    #[test]
    fn named_fields() {
        let mesh = Arc::new(build_uniform_rect(4, 1, &Domain::unit_square()).unwrap());
        let step = AnalyticInitial::Step { threshold: 0.5, left: 1.0, right: 0.0 }.project(mesh.clone()).unwrap();
        assert_eq!(step.values(), &[1.0, 1.0, 0.0, 0.0]);
        let c = AnalyticInitial::Constant { value: 0.3 }.project(mesh).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn rough_modes_have_zero_mean_and_the_expected_energy() {
        // every mode has zero mean over the unit square
        let mesh = Arc::new(build_uniform_rect(8, 8, &Domain::unit_square()).unwrap());
        let rough = AnalyticInitial::RoughModes { modes: 2, amplitude: 1.0 }.project(mesh).unwrap();
        assert!(rough.integral().abs() < 1e-13);
        let p = Point::new(0.0, 0.0);
        let expect = 2.0 * (1.0 + 0.5) + 1.0 / 2f64.sqrt() + 2.0 / 5f64.sqrt() + 1.0 / 8f64.sqrt();
        let value = AnalyticInitial::RoughModes { modes: 2, amplitude: 1.0 }.eval(p);
        assert!((value - expect).abs() < 1e-14);
    }
}
