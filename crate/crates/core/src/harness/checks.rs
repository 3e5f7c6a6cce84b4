//! Quick self-checks run before an experiment.

use nalgebra::DMatrix;

use super::config::ExperimentConfig;
use super::problems::patch_problem;
use super::problem_mesh;
use crate::adaptivity::solve_level;
use crate::error::Result;
use crate::geometry::{check_mesh_assumptions, Point2};
use crate::polybasis::polygon_quadrature;
use crate::solver::{Orders, PicardConfig, SystemState};
use crate::estimator::true_error;
use crate::vem_diffusion::LocalDiffusion;
use crate::vem_elasticity::LocalElasticity;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Mesh shape constant below which a cell is flagged.
pub const MIN_RHO: f64 = 0.01;

/// Manufactured data, mobility band, initial mesh shape, projection
/// reproduction and a patch test, all for the configured problem.
pub fn run_self_checks(config: &ExperimentConfig) -> Result<Vec<CheckResult>> {
    let problem = config.problem()?;
    let pr = problem.params;
    let mut out = Vec::new();

    let sc = problem.self_check(200, 7);
    out.push(CheckResult {
        name: "manufactured data",
        pass: sc.passes(),
        detail: format!(
            "momentum {:.1e}, mass {:.1e}, pressure {:.1e}, flux {:.1e}",
            sc.momentum, sc.mass, sc.pressure, sc.flux
        ),
    });

    let (lo, hi) = problem.domain.bounding_box();
    let n = 200;
    let (mut mmin, mut mmax) = (f64::INFINITY, 0.0_f64);
    for i in 0..=n {
        for j in 0..=n {
            let x = Point2::new(
                lo.x + (hi.x - lo.x) * i as f64 / n as f64,
                lo.y + (hi.y - lo.y) * j as f64 / n as f64,
            );
            if !problem.domain.contains(x) {
                continue;
            }
            let d = problem.at(x);
            let m = pr.mobility.raw(d.sigma[0][0] + d.sigma[1][1]);
            mmin = mmin.min(m);
            mmax = mmax.max(m);
        }
    }
    out.push(CheckResult {
        name: "mobility band",
        pass: mmin >= 1.0 / pr.m_bound && mmax <= pr.m_bound,
        detail: format!("sampled m in [{mmin:.6e}, {mmax:.6e}], admissible [{:.3e}, {:.3e}]", 1.0 / pr.m_bound, pr.m_bound),
    });

    let mesh = problem_mesh(&problem, config.family, config.n)?;
    let q = check_mesh_assumptions(&mesh, MIN_RHO);
    let rho = q.iter().map(|c| c.rho()).fold(f64::INFINITY, f64::min);
    out.push(CheckResult {
        name: "mesh shape",
        pass: q.iter().all(|c| c.passes()),
        detail: format!("{} cells, smallest shape constant {rho:.3}", q.len()),
    });

    let orders = Orders::new(config.k1, config.k2);
    let mut worst = 0.0_f64;
    for c in 0..mesh.num_cells() {
        let rule = polygon_quadrature(&mesh, c, orders.quadrature_degree())?;
        let el = LocalElasticity::new(&mesh, c, config.k1, &rule)?;
        let pd = &el.proj_energy * &el.dof_of_poly;
        worst = worst.max((&pd - DMatrix::identity(pd.nrows(), pd.ncols())).amax());
        let dl = LocalDiffusion::new(&mesh, c, config.k2, &rule)?;
        let pd = &dl.proj * &dl.dof_of_poly;
        worst = worst.max((&pd - DMatrix::identity(pd.nrows(), pd.ncols())).amax());
    }
    out.push(CheckResult {
        name: "projections",
        pass: worst <= 1e-10,
        detail: format!("polynomial reproduction error {worst:.1e}"),
    });

    let patch = patch_problem(config.k1, config.k2, 1.0, 10.0, 0.5);
    let pmesh = problem_mesh(&patch, config.family, config.n.max(2))?;
    let data = patch.problem_data();
    let exact = patch.exact();
    let sol = solve_level(
        pmesh,
        0,
        &patch.params,
        &data,
        Some(&exact),
        orders,
        &PicardConfig::default(),
        config.estimator,
    )?;
    let zero = SystemState::zeros(&sol.disc.dofs);
    let scale = true_error(&sol.disc, &patch.params, &zero, Some(&exact))?.total();
    let rel = sol.record.err.unwrap_or(f64::NAN) / scale;
    let rel_theta = sol.record.theta() / scale;
    out.push(CheckResult {
        name: "patch test",
        pass: rel <= 1e-8 && rel_theta <= 1e-8,
        detail: format!("relative error {rel:.1e}, relative estimator {rel_theta:.1e}"),
    });
    Ok(out)
}
