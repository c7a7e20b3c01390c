use std::fmt::Write as _;

use stochheat::analysis::{convergence_study, ConvergenceSettings, LevelSpec, ModalSolution, Reference};
use stochheat::field::ReconstructionMode;
use stochheat::geometry::Point;
use stochheat::mesh::build_uniform_rect;
use stochheat::solver::{AnalyticInitial, DEFAULT_TOLERANCE};

use super::analysis_err;
use crate::config::{MeshSpec, ReferenceSpec};
use crate::{CliError, ExperimentConfig, Output, Verdict};

const MODES: [(ReconstructionMode, &str); 2] = [(ReconstructionMode::Left, "left"), (ReconstructionMode::Right, "right")];

fn order_cell(o: Option<f64>) -> String {
    o.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

/// Nested uniform levels; passes when every error sequence decreases.
pub fn converge(config: &ExperimentConfig, out: &Output) -> Result<Verdict, CliError> {
    let opts = config
        .converge
        .as_ref()
        .ok_or_else(|| CliError::Config("missing section [converge]".into()))?;
    let MeshSpec::Uniform { nx, ny } = config.mesh else {
        return Err(CliError::Config("converge needs a uniform mesh family".into()));
    };
    if opts.scales.len() != opts.steps.len() || opts.scales.is_empty() {
        return Err(CliError::Config("converge.scales and converge.steps need the same nonzero length".into()));
    }
    let model = config.noise()?;
    let initial = config.analytic_initial()?;
    let domain = config.domain()?;
    let levels = opts
        .scales
        .iter()
        .zip(&opts.steps)
        .map(|(&s, &steps)| {
            build_uniform_rect(nx * s, ny * s, &domain)
                .map(|m| LevelSpec::new(m.into(), steps))
                .map_err(|e| CliError::Config(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let samples = match config.samples {
        Some(m) => m,
        None if model.is_zero() => 1,
        None => return Err(CliError::Config("missing key 'samples'".into())),
    };
    let reference = match opts.reference {
        ReferenceSpec::Finest => Reference::Finest,
        ReferenceSpec::Modal => match initial {
            AnalyticInitial::CosineMode { kx, ky, amplitude } => Reference::Modal(ModalSolution::cosine(kx, ky, amplitude)),
            _ => return Err(CliError::Config("the modal reference needs a cosine_mode initial datum".into())),
        },
    };
    let settings = ConvergenceSettings {
        horizon: config.time.horizon,
        samples,
        master_seed: config.seed,
        exponents: opts.exponents.clone(),
        tolerance: config.time.tolerance.unwrap_or(DEFAULT_TOLERANCE),
        reference,
    };
    let u0 = move |p: Point| initial.eval(p);
    let report = convergence_study(&levels, &model, &u0, &settings).map_err(analysis_err)?;

    out.write("convergence.csv", &report.to_csv())?;
    let mut orders = String::from("p,reconstruction,level,order_h,order_dt\n");
    let mut text = String::new();
    let mut passed = true;
    for (j, p) in report.exponents.iter().enumerate() {
        for (mode, name) in MODES {
            let errors: Vec<String> = (0..report.levels.len())
                .map(|i| format!("{:.4e}", report.error(i, j, mode).mean))
                .collect();
            let in_h = report.orders_in_h(j, mode);
            let in_dt = report.orders_in_dt(j, mode);
            for (i, (oh, odt)) in in_h.iter().zip(&in_dt).enumerate() {
                let _ = writeln!(orders, "{p},{name},{},{},{}", i + 1, order_cell(*oh), order_cell(*odt));
            }
            let monotone = report.is_monotone(j, mode);
            passed &= monotone;
            let shown: Vec<String> = in_h.iter().map(|o| o.map_or("-".into(), |v| format!("{v:.3}"))).collect();
            let _ = writeln!(
                text,
                "p = {p}, {name}: errors [{}], orders in h [{}]{}",
                errors.join(", "),
                shown.join(", "),
                if monotone { "" } else { "  NOT MONOTONE" }
            );
        }
    }
    out.write("orders.csv", &orders)?;
    out.write("report.txt", &text)?;
    print!("{text}");
    Ok(Verdict::from_bool(passed))
}
