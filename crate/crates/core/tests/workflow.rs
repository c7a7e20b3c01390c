use std::sync::Arc;

use stochheat::analysis::{
    gagliardo_bound_check, max_bound_check, run_ensemble, space_translate_check, LevelSpec,
};
use stochheat::field::CellField;
use stochheat::geometry::Point;
use stochheat::io::{field_from_csv, field_to_csv, mesh_to_vtk, trajectory_to_csv};
use stochheat::mesh::{build_uniform_rect, build_voronoi, jittered_lattice_sites, validate_admissibility, Domain, Mesh};
use stochheat::noise::{BrownianPath, NoiseKind, NoiseModel};
use stochheat::solver::{solve_trajectory, AnalyticInitial, SchemeConfig, TpfaOperator};

fn uniform(n: usize) -> Arc<Mesh> {
    Arc::new(build_uniform_rect(n, n, &Domain::unit_square()).unwrap())
}

fn voronoi_on(domain: &Domain, n: usize, seed: u64) -> Mesh {
    build_voronoi(&jittered_lattice_sites(n, n, domain, 0.6, seed), domain).unwrap()
}

#[test]
fn saved_voronoi_mesh_reloads_and_stays_admissible() {
    let domain = Domain::polygon(vec![
        Point::new(0.0, 0.0),
        Point::new(2.0, 0.0),
        Point::new(2.5, 1.0),
        Point::new(0.5, 1.5),
    ])
    .unwrap();
    let mesh = voronoi_on(&domain, 7, 11);
    assert!(validate_admissibility(&mesh).is_admissible());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.json");
    mesh.save(&path).unwrap();
    let back = Mesh::load(&path).unwrap();
    assert_eq!(back.summary(), mesh.summary());
    assert!(validate_admissibility(&back).is_admissible());
}

#[test]
fn exported_snapshot_replays_the_rest_of_a_run() {
    // restarting from the CSV snapshot at step 4 reproduces the tail bitwise
    let mesh = Arc::new(voronoi_on(&Domain::unit_square(), 6, 2));
    let op = TpfaOperator::assemble(mesh.clone()).unwrap();
    let model = NoiseModel::new(NoiseKind::Sine { sigma0: 0.8, omega: 3.0 }).unwrap();
    let path = BrownianPath::sample(5, 8, 0.5).unwrap();
    let u0 = AnalyticInitial::Step { threshold: 0.4, left: 2.0, right: -1.0 }.project(mesh.clone()).unwrap();
    let full = solve_trajectory(&op, &SchemeConfig::new(0.5, 8).unwrap(), &model, &path, &u0).unwrap();

    let text = field_to_csv(&full.snapshot(4));
    let restart = field_from_csv(mesh, &text).unwrap();
    let tail = BrownianPath::from_increments(0.25, path.increments()[4..].to_vec()).unwrap();
    let rest = solve_trajectory(&op, &SchemeConfig::new(0.25, 4).unwrap(), &model, &tail, &restart).unwrap();
    for n in 0..=4 {
        assert_eq!(rest.snapshot_values(n), full.snapshot_values(n + 4));
    }
    assert_eq!(trajectory_to_csv(&full).lines().count(), 1 + 9 * full.mesh().num_cells());
}

#[test]
fn vtk_export_lists_every_cell_value() {
    let mesh = uniform(3);
    let f = CellField::new(mesh.clone(), (0..9).map(f64::from).collect()).unwrap();
    let text = mesh_to_vtk(&mesh, "grid", &[("u", f.values())]);
    assert!(text.contains("POINTS 16 double"));
    let data: Vec<&str> = text.lines().skip_while(|l| *l != "LOOKUP_TABLE default").skip(1).collect();
    assert_eq!(data.len(), 9);
}

#[test]
fn second_moment_of_the_maximum_stays_bounded_under_refinement() {
    let model = NoiseModel::new(NoiseKind::Additive { sigma0: 0.5 }).unwrap();
    let stats: Vec<_> = [4, 8, 16]
        .into_iter()
        .map(|n| {
            let mesh = uniform(n);
            let op = TpfaOperator::assemble(mesh.clone()).unwrap();
            let cfg = SchemeConfig::new(1.0, n * n / 2).unwrap();
            let u0 = AnalyticInitial::CosineMode { kx: 1, ky: 0, amplitude: 1.0 }.project(mesh).unwrap();
            run_ensemble(&op, &cfg, &model, &u0, 200, 17).unwrap()
        })
        .collect();
    let report = max_bound_check(&stats);
    assert!(report.passed, "{report:?}");
}

#[test]
fn fractional_seminorms_stay_bounded_under_refinement() {
    let model = NoiseModel::new(NoiseKind::Linear { lambda: 1.0 }).unwrap();
    let levels: Vec<LevelSpec> = [4, 8].into_iter().map(|n| LevelSpec::new(uniform(n), 4 * n)).collect();
    let u0 = |p: Point| 1.0 + (std::f64::consts::PI * p.x).cos();
    let report = gagliardo_bound_check(&levels, 0.5, &model, &u0, 0.25, 40, 3).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn space_translates_are_controlled_on_a_voronoi_trajectory() {
    let mesh = Arc::new(voronoi_on(&Domain::unit_square(), 8, 4));
    let op = TpfaOperator::assemble(mesh.clone()).unwrap();
    let model = NoiseModel::new(NoiseKind::Linear { lambda: 0.5 }).unwrap();
    let path = BrownianPath::sample(9, 16, 0.2).unwrap();
    let u0 = AnalyticInitial::CosineMode { kx: 2, ky: 1, amplitude: 1.0 }.project(mesh).unwrap();
    let traj = solve_trajectory(&op, &SchemeConfig::new(0.2, 16).unwrap(), &model, &path, &u0).unwrap();
    for eta in [Point::new(0.05, 0.0), Point::new(-0.03, 0.04), Point::new(0.2, 0.2)] {
        let report = space_translate_check(&traj, eta).unwrap();
        assert!(report.max_ratio.is_finite() && report.max_ratio <= 4.0, "{eta:?}: {}", report.max_ratio);
    }
}
