//! Manufactured problems, experiment configuration, convergence rates and
//! output files.

mod checks;
mod config;
mod export;
mod jet;
mod problems;

pub use checks::{run_self_checks, CheckResult, MIN_RHO};
pub use config::{ExperimentConfig, ExportConfig, ParameterOverrides, ProblemKind};
pub use export::{write_svg_mesh, write_trace_csv, write_vtk, TRACE_CSV_HEADER};
pub use jet::Jet;
pub use problems::{
    example1, example2, patch_problem, Domain, FieldJets, ManufacturedProblem, PointData, SelfCheck,
    EXAMPLE2_SINGULARITY,
};

use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;

use crate::adaptivity::{adapt_loop, solve_level, AdaptConfig, AdaptTrace, LevelSolution, RefinementMode};
use crate::error::{Result, VemError};
use crate::estimator::write_indicator_csv;
use crate::geometry::{generate_mesh, MeshFamily, PolyMesh};

/// `r = -2 log(e2 / e1) / log(N2 / N1)` between consecutive levels.
pub fn convergence_rate(dofs: &[usize], values: &[f64]) -> Result<Vec<f64>> {
    if dofs.len() != values.len() {
        return Err(VemError::DofMismatch("rate inputs differ in length".into()));
    }
    if let Some(&v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(VemError::NonPositiveQuantity(v));
    }
    if let Some(&d) = dofs.iter().find(|d| **d == 0) {
        return Err(VemError::NonPositiveQuantity(d as f64));
    }
    Ok(dofs
        .windows(2)
        .zip(values.windows(2))
        .map(|(d, v)| -2.0 * (v[1] / v[0]).ln() / (d[1] as f64 / d[0] as f64).ln())
        .collect())
}

/// Rate between two arbitrary levels.
pub fn span_rate(d1: usize, e1: f64, d2: usize, e2: f64) -> f64 {
    -2.0 * (e2 / e1).ln() / (d2 as f64 / d1 as f64).ln()
}

/// Family mesh at resolution `n` with the problem's boundary split.
pub fn problem_mesh(problem: &ManufacturedProblem, family: MeshFamily, n: usize) -> Result<PolyMesh> {
    generate_mesh(family, n)?.retagged(problem.domain.boundary())
}

/// Uniform sequence obtained by regenerating the family at `n0 * 2^j`.
pub fn uniform_sweep(
    problem: &ManufacturedProblem,
    family: MeshFamily,
    n0: usize,
    config: &AdaptConfig,
    mut observer: impl FnMut(&LevelSolution) -> Result<()>,
) -> Result<AdaptTrace> {
    let data = problem.problem_data();
    let exact = problem.exact();
    let mut trace = AdaptTrace::default();
    for level in 0..config.max_levels.max(1) {
        let mesh = problem_mesh(problem, family, n0 << level)?;
        let sol = solve_level(mesh, level, &problem.params, &data, Some(&exact), config.orders, &config.picard, config.estimator)?;
        log::info!("uniform level {level}: dofs {} err {:?} theta {:.4e}", sol.record.dofs, sol.record.err, sol.record.theta());
        observer(&sol)?;
        let dofs = sol.record.dofs;
        trace.levels.push(sol.record);
        if config.dof_budget.is_some_and(|b| dofs >= b) {
            break;
        }
    }
    Ok(trace)
}

/// Paths written by [`run_experiment`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub trace_csv: PathBuf,
    pub indicator_csvs: Vec<PathBuf>,
    pub vtk: Vec<PathBuf>,
    pub svg: Vec<PathBuf>,
}

/// Runs the configured experiment and writes its files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(AdaptTrace, Artifacts)> {
    let problem = config.problem()?;
    let out = PathBuf::from(&config.output);
    fs::create_dir_all(&out)?;
    let mut art = Artifacts::default();
    let exp = config.export.clone();
    let observer = |sol: &LevelSolution, art: &mut Artifacts| -> Result<()> {
        let l = sol.record.level;
        if exp.indicators {
            let p = out.join(format!("indicators_{l:02}.csv"));
            write_indicator_csv(&sol.locals, BufWriter::new(fs::File::create(&p)?))?;
            art.indicator_csvs.push(p);
        }
        if exp.vtk {
            let p = out.join(format!("solution_{l:02}.vtk"));
            write_vtk(&sol.disc, &sol.state, &sol.locals, BufWriter::new(fs::File::create(&p)?))?;
            art.vtk.push(p);
        }
        if exp.svg {
            let p = out.join(format!("mesh_{l:02}.svg"));
            write_svg_mesh(&sol.disc.mesh, &sol.locals, BufWriter::new(fs::File::create(&p)?))?;
            art.svg.push(p);
        }
        Ok(())
    };
    let ac = config.adapt_config();
    let trace = match config.mode {
        RefinementMode::Uniform => uniform_sweep(&problem, config.family, config.n, &ac, |s| observer(s, &mut art))?,
        RefinementMode::Adaptive => {
            let mesh = problem_mesh(&problem, config.family, config.n)?;
            let data = problem.problem_data();
            let exact = problem.exact();
            adapt_loop(mesh, &problem.params, &data, Some(&exact), &ac, |s| observer(s, &mut art))?
        }
    };
    let p = out.join("trace.csv");
    write_trace_csv(&trace, BufWriter::new(fs::File::create(&p)?))?;
    art.trace_csv = p;
    Ok((trace, art))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        let r = convergence_rate(&[100, 400], &[1e-2, 2.5e-3]).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-12);
        let r = convergence_rate(&[100, 200], &[1.0, 1.0]).unwrap();
        assert_eq!(r[0], 0.0);
        let r = convergence_rate(&[100, 200], &[1.0, 0.5]).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-12);
        assert!(matches!(convergence_rate(&[1, 2], &[1.0, 0.0]), Err(VemError::NonPositiveQuantity(_))));
    }
}
