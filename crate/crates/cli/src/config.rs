//! Experiment configuration: one TOML file of flat sections.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use stochheat::error::MeshError;
use stochheat::field::CellField;
use stochheat::geometry::Point;
use stochheat::io::field_from_csv;
use stochheat::mesh::{build_uniform_rect, build_voronoi, jittered_lattice_sites, Domain, Mesh};
use stochheat::noise::{NoiseKind, NoiseModel};
use stochheat::quadrature::TriangleRule;
use stochheat::solver::{AnalyticInitial, SchemeConfig, DEFAULT_TOLERANCE, PROJECTION_ORDER};

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Monte Carlo sample count `M`.
    pub samples: Option<usize>,
    /// Worker threads; results do not depend on it.
    pub parallel: Option<usize>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub domain: DomainSpec,
    pub mesh: MeshSpec,
    pub time: TimeSpec,
    pub noise: NoiseKind,
    pub initial: InitialSpec,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub ensemble: EnsembleOptions,
    pub converge: Option<ConvergeOptions>,
    #[serde(default)]
    pub verify: VerifyOptions,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// Convex polygon, counter-clockwise or clockwise.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self::Rectangle {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Uniform {
        nx: usize,
        ny: usize,
    },
    /// Clipped Voronoi diagram of a jittered `nx x ny` lattice of sites.
    Voronoi {
        nx: usize,
        ny: usize,
        #[serde(default = "default_jitter")]
        jitter: f64,
        #[serde(default)]
        seed: u64,
    },
    /// A mesh saved as JSON; stored geometry is validated, not recomputed.
    File {
        path: PathBuf,
    },
}

fn default_jitter() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub horizon: f64,
    pub steps: usize,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(try_from = "toml::Table")]
pub enum InitialSpec {
    Analytic(AnalyticInitial),
    /// Cell values in the `cell,x,y,value` layout.
    Csv(PathBuf),
}

impl TryFrom<toml::Table> for InitialSpec {
    type Error = String;

    fn try_from(table: toml::Table) -> Result<Self, String> {
        if table.get("name").and_then(|v| v.as_str()) == Some("csv") {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Csv {
                #[allow(dead_code)]
                name: String,
                path: PathBuf,
            }
            let csv: Csv = table.try_into().map_err(|e: toml::de::Error| e.message().to_string())?;
            return Ok(Self::Csv(csv.path));
        }
        table
            .try_into()
            .map(Self::Analytic)
            .map_err(|e: toml::de::Error| e.message().to_string())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Write every k-th snapshot as VTK when `--vtk` is given.
    pub vtk_every: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { vtk_every: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Energy,
    Gap,
    SpaceTranslate,
    TimeTranslate,
    Uniqueness,
    Boundedness,
    Gagliardo,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Self::Energy => "energy",
            Self::Gap => "gap",
            Self::SpaceTranslate => "space_translate",
            Self::TimeTranslate => "time_translate",
            Self::Uniqueness => "uniqueness",
            Self::Boundedness => "boundedness",
            Self::Gagliardo => "gagliardo",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleOptions {
    pub checks: Vec<Check>,
    /// Time shifts are `T / d` for each divisor `d`.
    pub tau_divisors: Vec<f64>,
    pub max_spread: f64,
    pub slope_range: [f64; 2],
    pub space_shifts: Vec<[f64; 2]>,
    /// Constant added to `u_0` for the second coupled trajectory.
    pub uniqueness_shift: f64,
    /// Cells per direction of the refinement levels, coarse to fine; the
    /// level checks need it and a mesh family that can be rebuilt.
    pub levels: Vec<usize>,
    pub alpha: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            checks: vec![
                Check::Energy,
                Check::Gap,
                Check::SpaceTranslate,
                Check::TimeTranslate,
                Check::Uniqueness,
                Check::Boundedness,
                Check::Gagliardo,
            ],
            tau_divisors: vec![64.0, 32.0, 16.0, 8.0],
            max_spread: 3.0,
            slope_range: [0.7, 1.3],
            space_shifts: vec![[0.05, 0.0], [0.0, 0.05], [0.05, 0.05]],
            uniqueness_shift: 0.1,
            levels: Vec::new(),
            alpha: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSpec {
    Finest,
    Modal,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeOptions {
    /// Refinement factors applied to the uniform mesh, coarse to fine.
    pub scales: Vec<usize>,
    /// Time steps per level.
    pub steps: Vec<usize>,
    #[serde(default = "default_reference")]
    pub reference: ReferenceSpec,
    #[serde(default = "default_exponents")]
    pub exponents: Vec<f64>,
}

fn default_reference() -> ReferenceSpec {
    ReferenceSpec::Finest
}

fn default_exponents() -> Vec<f64> {
    vec![1.0, 1.9]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub random_fields: usize,
    /// Breaks the symmetry of the assembled operator so the suite must fail.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            random_fields: 20,
            inject_fault: false,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().trim().to_string()))
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn samples(&self) -> Result<usize, CliError> {
        self.samples.ok_or_else(|| CliError::Config("missing key 'samples'".into()))
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        match &self.domain {
            DomainSpec::Rectangle { x0, x1, y0, y1 } => Domain::rectangle(*x0, *x1, *y0, *y1),
            DomainSpec::Polygon { vertices } => {
                Domain::polygon(vertices.iter().map(|&[x, y]| Point::new(x, y)).collect())
            }
        }
        .map_err(config_err)
    }

    pub fn mesh(&self) -> Result<Arc<Mesh>, CliError> {
        let mesh = match &self.mesh {
            MeshSpec::Uniform { nx, ny } => build_uniform_rect(*nx, *ny, &self.domain()?),
            MeshSpec::Voronoi { nx, ny, jitter, seed } => return self.voronoi(*nx, *ny, *jitter, *seed),
            MeshSpec::File { path } => Mesh::load(self.resolve(path)),
        };
        mesh.map(Arc::new).map_err(config_err)
    }

    fn voronoi(&self, nx: usize, ny: usize, jitter: f64, seed: u64) -> Result<Arc<Mesh>, CliError> {
        let domain = self.domain()?;
        if nx == 0 || ny == 0 {
            return Err(config_err(MeshError::InvalidCount { nx, ny }));
        }
        build_voronoi(&jittered_lattice_sites(nx, ny, &domain, jitter, seed), &domain)
            .map(Arc::new)
            .map_err(config_err)
    }

    /// The configured family rebuilt with `n x n` cells or sites.
    pub fn mesh_with_resolution(&self, n: usize) -> Result<Arc<Mesh>, CliError> {
        match &self.mesh {
            MeshSpec::Uniform { .. } => build_uniform_rect(n, n, &self.domain()?)
                .map(Arc::new)
                .map_err(config_err),
            MeshSpec::Voronoi { jitter, seed, .. } => self.voronoi(n, n, *jitter, *seed),
            MeshSpec::File { .. } => Err(CliError::Config("refinement levels need a uniform or voronoi mesh".into())),
        }
    }

    pub fn scheme(&self) -> Result<SchemeConfig, CliError> {
        let config = SchemeConfig::new(self.time.horizon, self.time.steps).map_err(config_err)?;
        config
            .with_tolerance(self.time.tolerance.unwrap_or(DEFAULT_TOLERANCE))
            .map_err(config_err)
    }

    pub fn noise(&self) -> Result<NoiseModel, CliError> {
        NoiseModel::new(self.noise).map_err(config_err)
    }

    pub fn initial_field(&self, mesh: &Arc<Mesh>) -> Result<CellField, CliError> {
        match &self.initial {
            InitialSpec::Analytic(a) => a.project(mesh.clone()).map_err(config_err),
            InitialSpec::Csv(path) => {
                let path = self.resolve(path);
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                field_from_csv(mesh.clone(), &text).map_err(config_err)
            }
        }
    }

    /// Closed-form datum, needed where it is projected on several meshes.
    pub fn analytic_initial(&self) -> Result<AnalyticInitial, CliError> {
        match &self.initial {
            InitialSpec::Analytic(a) => Ok(*a),
            InitialSpec::Csv(_) => Err(CliError::Config("this command needs an analytic initial datum".into())),
        }
    }

    /// `||u_0||^2`: by quadrature for analytic data, of the cell values otherwise.
    pub fn initial_norm_sq(&self, field: &CellField) -> f64 {
        match &self.initial {
            InitialSpec::Analytic(a) => {
                let rule = TriangleRule::collapsed(PROJECTION_ORDER);
                field
                    .mesh()
                    .cells()
                    .iter()
                    .map(|c| rule.integrate_polygon(&c.vertices, |p| a.eval(p).powi(2)))
                    .sum()
            }
            InitialSpec::Csv(_) => field.l2_norm_sq(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 1
[mesh]
family = "uniform"
nx = 2
ny = 2
[time]
horizon = 1.0
steps = 4
[noise]
kind = "zero"
[initial]
name = "constant"
value = 1.0
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        assert!(matches!(c.domain, DomainSpec::Rectangle { x1, .. } if x1 == 1.0));
        assert_eq!(c.ensemble.checks.len(), 7);
        assert_eq!(c.mesh().unwrap().num_cells(), 4);
        assert!(c.samples().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{BASE}\n[verify]\ninject_falt = true\n");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(CliError::Config(_))));
        let bad = BASE.replace("value = 1.0", "value = 1.0\nslope = 2.0");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn csv_initial_is_recognized() {
        let text = BASE.replace("name = \"constant\"\nvalue = 1.0", "name = \"csv\"\npath = \"u0.csv\"");
        let c = ExperimentConfig::parse(&text).unwrap();
        assert!(matches!(c.initial, InitialSpec::Csv(ref p) if p == Path::new("u0.csv")));
        assert!(c.analytic_initial().is_err());
    }

    #[test]
    fn analytic_norm_uses_the_datum() {
        let text = BASE.replace("name = \"constant\"\nvalue = 1.0", "name = \"cosine_mode\"\nkx = 1\nky = 0\namplitude = 2.0");
        let c = ExperimentConfig::parse(&text).unwrap();
        let mesh = c.mesh().unwrap();
        let u0 = c.initial_field(&mesh).unwrap();
        // ||2 cos(pi x)||^2 = 2 on the unit square, the 2x2 projection loses energy
        assert!((c.initial_norm_sq(&u0) - 2.0).abs() < 1e-4);
        assert!(u0.l2_norm_sq() < 1.7);
    }
}
