use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assembly::{active_load, elasticity_operator};
use super::{assemble_diffusion, Discretization, ModelParameters, ProblemData, SparseSolver, SystemState};
use crate::error::{Result, VemError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig {
    /// Stop once the relative increment drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Consecutive growing increments that count as divergence.
    pub divergence_window: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 50,
            divergence_window: 3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PicardTrace {
    /// Relative weighted increment after each iteration.
    pub increments: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PicardTrace {
    /// Ratios of successive increments.
    pub fn ratios(&self) -> Vec<f64> {
        self.increments.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Squared product norm
/// `a1(u,u) + (1/2mu + 1/lambda)|p|^2 + a2(z,z) + M |div z|^2 + (1/M + theta)|phi|^2`
/// built from the local matrices.
pub struct IncrementNorm<'a> {
    disc: &'a Discretization,
    params: &'a ModelParameters,
}

impl<'a> IncrementNorm<'a> {
    pub fn new(disc: &'a Discretization, params: &'a ModelParameters) -> Self {
        Self { disc, params }
    }

    pub fn norm_sq(&self, s: &SystemState, a2: &[DMatrix<f64>]) -> f64 {
        let (d, pr) = (self.disc, self.params);
        let wp = 1.0 / (2.0 * pr.mu) + 1.0 / pr.lambda;
        let wphi = 1.0 / pr.m_bound + pr.theta;
        (0..d.num_cells())
            .into_par_iter()
            .map(|c| {
                let cd = &d.cells[c];
                let u = s.local_u(d, c);
                let p = s.p_coeffs(d, c);
                let z = s.local_zeta(d, c);
                let phi = s.phi_coeffs(d, c);
                let dz = s.div_zeta_coeffs(d, c);
                let nd = dz.len();
                let mass = cd.diffusion.c.view((0, 0), (nd, nd));
                u.dot(&(cd.elasticity.a1(pr.mu) * &u))
                    + wp * p.dot(&(&cd.elasticity.c * &p))
                    + z.dot(&(&a2[c] * &z))
                    + pr.m_bound * dz.dot(&(mass * &dz))
                    + wphi * phi.dot(&(&cd.diffusion.c * &phi))
            })
            .sum()
    }
}

fn difference(a: &SystemState, b: &SystemState) -> SystemState {
    SystemState {
        u: &a.u - &b.u,
        p: &a.p - &b.p,
        zeta: &a.zeta - &b.zeta,
        phi: &a.phi - &b.phi,
    }
}

/// Fixed-point iteration between the elasticity and diffusion blocks,
/// starting from the zero state. The elasticity matrix is factored once;
/// the diffusion matrix is refactored each step on a shared symbolic
/// analysis. When the mobility is constant the diffusion block does not
/// see the displacement and is solved first.
pub fn picard_solve(
    disc: &Discretization,
    params: &ModelParameters,
    data: &ProblemData,
    config: &PicardConfig,
) -> Result<(SystemState, PicardTrace)> {
    params.validate()?;
    let d = &disc.dofs;
    let op = elasticity_operator(disc, params, data);
    let ered = op.reduce()?;
    let efact = SparseSolver::new().factor(&ered.matrix)?;
    let mut dsolver = SparseSolver::new();
    let norm = IncrementNorm::new(disc, params);
    let diffusion_first = params.mobility.is_constant();

    let mut state = SystemState::zeros(d);
    let mut trace = PicardTrace::default();
    let mut growing = 0;

    let solve_elasticity = |st: &mut SystemState| -> Result<()> {
        let rhs = &op.rhs + active_load(disc, params, st);
        let x = ered.expand(&efact.solve(&ered.reduce_rhs(&rhs))?);
        st.u = x.rows(0, d.n_u).into_owned();
        st.p = x.rows(d.n_u, d.n_p).into_owned();
        Ok(())
    };
    let mut solve_diffusion = |st: &mut SystemState| -> Result<Vec<DMatrix<f64>>> {
        let (sys, a2) = assemble_diffusion(disc, params, data, st)?;
        let red = sys.reduce()?;
        let y = red.expand(&dsolver.factor(&red.matrix)?.solve(&red.rhs)?);
        st.zeta = y.rows(0, d.n_zeta).into_owned();
        st.phi = y.rows(d.n_zeta, d.n_phi).into_owned();
        Ok(a2)
    };

    for it in 1..=config.max_iterations {
        let mut next = state.clone();
        let a2 = if diffusion_first {
            let a2 = solve_diffusion(&mut next)?;
            solve_elasticity(&mut next)?;
            a2
        } else {
            solve_elasticity(&mut next)?;
            solve_diffusion(&mut next)?
        };
        let inc = norm.norm_sq(&difference(&next, &state), &a2).max(0.0).sqrt();
        let size = norm.norm_sq(&next, &a2).max(0.0).sqrt();
        let rel = if size > 0.0 { inc / size } else if inc == 0.0 { 0.0 } else { f64::INFINITY };
        if !rel.is_finite() {
            return Err(VemError::PicardDiverged { iteration: it });
        }
        log::debug!("picard {it}: relative increment {rel:.3e}");
        if let Some(&prev) = trace.increments.last() {
            growing = if rel > prev { growing + 1 } else { 0 };
        }
        trace.increments.push(rel);
        trace.iterations = it;
        state = next;
        if rel <= config.tolerance {
            trace.converged = true;
            return Ok((state, trace));
        }
        if growing >= config.divergence_window {
            return Err(VemError::PicardDiverged { iteration: it });
        }
    }
    Err(VemError::MaxIterations {
        iterations: config.max_iterations,
    })
}

