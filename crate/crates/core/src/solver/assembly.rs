use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{Discretization, ModelParameters, ProblemData, SystemState};
use crate::error::{Result, VemError};
use crate::geometry::BoundaryTag;
use crate::vem_diffusion::SymTensor;

/// A global block system before essential conditions are applied.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub n: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: DVector<f64>,
    /// Essential DoFs and their prescribed values.
    pub constraints: Vec<(usize, f64)>,
}

/// The system restricted to free DoFs, with the constrained values lifted
/// into the right-hand side.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub n_full: usize,
    pub free: Vec<usize>,
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: DVector<f64>,
    /// Full-length vector holding the prescribed values (zero elsewhere).
    pub fixed: DVector<f64>,
    /// `A_fc * fixed` restricted to free rows.
    pub lift: DVector<f64>,
}

impl BlockSystem {
    pub fn dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.triplets {
            a[(i, j)] += v;
        }
        a
    }

    pub fn reduce(&self) -> Result<ReducedSystem> {
        let mut fixed = DVector::zeros(self.n);
        let mut is_fixed = vec![false; self.n];
        for &(i, v) in &self.constraints {
            if i >= self.n {
                return Err(VemError::DofMismatch(format!("constraint {i} outside system of size {}", self.n)));
            }
            is_fixed[i] = true;
            fixed[i] = v;
        }
        let mut map = vec![usize::MAX; self.n];
        let mut free = Vec::with_capacity(self.n);
        for i in 0..self.n {
            if !is_fixed[i] {
                map[i] = free.len();
                free.push(i);
            }
        }
        let nf = free.len();
        let mut lift = DVector::zeros(nf);
        let mut trip = Vec::with_capacity(self.triplets.len());
        for &(i, j, v) in &self.triplets {
            let ri = map[i];
            if ri == usize::MAX {
                continue;
            }
            if is_fixed[j] {
                lift[ri] += v * fixed[j];
            } else {
                trip.push(Triplet::new(ri, map[j], v));
            }
        }
        let matrix = SparseColMat::try_new_from_triplets(nf, nf, &trip)
            .map_err(|e| VemError::DofMismatch(format!("sparse assembly: {e:?}")))?;
        let rhs = DVector::from_iterator(nf, free.iter().map(|&i| self.rhs[i])) - &lift;
        Ok(ReducedSystem {
            n_full: self.n,
            free,
            matrix,
            rhs,
            fixed,
            lift,
        })
    }
}

impl ReducedSystem {
    /// Reduced right-hand side for another full-length load with the same
    /// constraints.
    pub fn reduce_rhs(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| full[i])) - &self.lift
    }

    pub fn expand(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = self.fixed.clone();
        for (r, &i) in self.free.iter().enumerate() {
            out[i] = x[r];
        }
        out
    }
}

fn scatter(trip: &mut Vec<(usize, usize, f64)>, idx: &[usize], m: &DMatrix<f64>) {
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            let v = m[(a, b)];
            if v != 0.0 {
                trip.push((i, j, v));
            }
        }
    }
}

/// Elasticity matrix, load and Dirichlet data. The active-stress part of
/// the pressure load is evaluated at the concentration in `state`.
pub fn assemble_elasticity(
    disc: &Discretization,
    params: &ModelParameters,
    data: &ProblemData,
    state: &SystemState,
) -> Result<BlockSystem> {
    let mut sys = elasticity_operator(disc, params, data);
    sys.rhs += active_load(disc, params, state);
    Ok(sys)
}

/// Matrix, body force and traction load (no active-stress term).
pub(crate) fn elasticity_operator(
    disc: &Discretization,
    params: &ModelParameters,
    data: &ProblemData,
) -> BlockSystem {
    let d = &disc.dofs;
    let n = d.n_u + d.n_p;
    let degree = disc.orders.quadrature_degree();
    let locals: Vec<_> = disc
        .cells
        .par_iter()
        .enumerate()
        .map(|(c, cd)| {
            let el = &cd.elasticity;
            let nl = el.layout.n_local();
            let np = el.layout.n_pressure;
            let mut m = DMatrix::zeros(nl + np, nl + np);
            m.view_mut((0, 0), (nl, nl)).copy_from(&el.a1(params.mu));
            m.view_mut((nl, 0), (np, nl)).copy_from(&el.b);
            m.view_mut((0, nl), (nl, np)).copy_from(&el.b.transpose());
            m.view_mut((nl, nl), (np, np)).copy_from(&(&el.c * (-1.0 / params.lambda)));
            let mut idx = d.u_local[c].clone();
            idx.extend((0..np).map(|a| d.n_u + d.p_offset[c] + a));
            let f = data.body_force.clone();
            let mut load = el.load(&cd.rule, &move |p| f(p));
            let cell = disc.mesh.cell(c);
            for (i, &e) in cell.edges.iter().enumerate() {
                if disc.mesh.edge(e).tag == BoundaryTag::Neumann {
                    let nrm = cd.frame.edges[i].normal;
                    let t = data.traction.clone();
                    load += el.edge_load(&cd.frame, i, &move |p| t(p, nrm), degree);
                }
            }
            let mut trip = Vec::with_capacity(idx.len() * idx.len());
            scatter(&mut trip, &idx, &m);
            (idx, trip, load)
        })
        .collect();
    let mut triplets = Vec::new();
    let mut rhs = DVector::zeros(n);
    for (idx, trip, load) in locals {
        triplets.extend(trip);
        for (a, &i) in idx.iter().take(load.len()).enumerate() {
            rhs[i] += load[a];
        }
    }
    let constraints = d
        .u_dirichlet
        .iter()
        .map(|&(g, comp, p)| (g, (data.displacement)(p)[comp]))
        .collect();
    BlockSystem {
        n,
        triplets,
        rhs,
        constraints,
    }
}

/// Full-length elasticity load `-(1/lambda) int l(phi_h) q` in the pressure rows.
pub(crate) fn active_load(disc: &Discretization, params: &ModelParameters, state: &SystemState) -> DVector<f64> {
    let d = &disc.dofs;
    let mut rhs = DVector::zeros(d.n_u + d.n_p);
    if params.active.is_zero() {
        return rhs;
    }
    let loads: Vec<DVector<f64>> = disc
        .cells
        .par_iter()
        .enumerate()
        .map(|(c, cd)| {
            let phi = state.phi_coeffs(disc, c);
            let s: Vec<f64> = cd
                .rule
                .points
                .iter()
                .map(|&p| params.active.value(cd.diffusion.basis.value(phi.as_slice(), p)))
                .collect();
            cd.elasticity.pressure_load(&cd.rule, &s, params.lambda)
        })
        .collect();
    for (c, l) in loads.iter().enumerate() {
        rhs.rows_mut(d.n_u + d.p_offset[c], l.len()).copy_from(l);
    }
    rhs
}

/// `M^{-1}` at the quadrature points of cell `c`, evaluated at the stress
/// trace of the current displacement and pressure.
pub fn inverse_mobility_samples(
    disc: &Discretization,
    params: &ModelParameters,
    state: &SystemState,
    c: usize,
) -> Result<Vec<SymTensor>> {
    let cd = &disc.cells[c];
    let npts = cd.rule.points.len();
    if params.mobility.is_constant() {
        let m = params.mobility_at(0.0, cd.frame.centroid)?;
        return Ok(vec![[1.0 / m, 0.0, 1.0 / m]; npts]);
    }
    let div = state.div_u_coeffs(disc, c);
    let p = state.p_coeffs(disc, c);
    let basis = &cd.elasticity.basis;
    cd.rule
        .points
        .iter()
        .map(|&x| {
            let t = params.stress_trace(basis.value(div.as_slice(), x), basis.value(p.as_slice(), x));
            let m = params.mobility_at(t, x)?;
            Ok([1.0 / m, 0.0, 1.0 / m])
        })
        .collect()
}

/// Diffusion block system with the mobility frozen at `state`. Also returns
/// the local `A_2` matrices.
pub fn assemble_diffusion(
    disc: &Discretization,
    params: &ModelParameters,
    data: &ProblemData,
    state: &SystemState,
) -> Result<(BlockSystem, Vec<DMatrix<f64>>)> {
    let d = &disc.dofs;
    let n = d.n_zeta + d.n_phi;
    let degree = disc.orders.quadrature_degree();
    let locals: Vec<_> = disc
        .cells
        .par_iter()
        .enumerate()
        .map(|(c, cd)| -> Result<_> {
            let dl = &cd.diffusion;
            let minv = inverse_mobility_samples(disc, params, state, c)?;
            let a2 = dl.a2(&cd.rule, &minv, c)?;
            let nl = dl.layout.n_local();
            let nc = dl.layout.n_concentration;
            let signs: Vec<f64> = d.zeta_local[c].iter().map(|&(_, s)| s).collect();
            let mut m = DMatrix::zeros(nl + nc, nl + nc);
            m.view_mut((0, 0), (nl, nl)).copy_from(&a2);
            m.view_mut((nl, 0), (nc, nl)).copy_from(&dl.b);
            m.view_mut((0, nl), (nl, nc)).copy_from(&dl.b.transpose());
            m.view_mut((nl, nl), (nc, nc)).copy_from(&(&dl.c * (-params.theta)));
            let mut load = DVector::zeros(nl + nc);
            let cell = disc.mesh.cell(c);
            for (i, &e) in cell.edges.iter().enumerate() {
                if disc.mesh.edge(e).tag == BoundaryTag::Dirichlet {
                    let g = data.concentration.clone();
                    let el = dl.edge_load(&cd.frame, i, &move |p| g(p), degree);
                    let mut top = load.rows_mut(0, nl);
                    top += &el;
                }
            }
            let g = data.source.clone();
            load.rows_mut(nl, nc).copy_from(&dl.source_load(&cd.rule, &move |p| g(p)));
            let sd = DMatrix::from_diagonal(&DVector::from_iterator(
                nl + nc,
                signs.iter().copied().chain(std::iter::repeat_n(1.0, nc)),
            ));
            let m = &sd * m * &sd;
            let load = &sd * load;
            let mut idx: Vec<usize> = d.zeta_local[c].iter().map(|&(g, _)| g).collect();
            idx.extend((0..nc).map(|a| d.n_zeta + d.phi_offset[c] + a));
            let mut trip = Vec::with_capacity(idx.len() * idx.len());
            scatter(&mut trip, &idx, &m);
            Ok((idx, trip, load, a2))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut triplets = Vec::new();
    let mut rhs = DVector::zeros(n);
    let mut a2s = Vec::with_capacity(locals.len());
    for (idx, trip, load, a2) in locals {
        triplets.extend(trip);
        for (a, &i) in idx.iter().enumerate() {
            rhs[i] += load[a];
        }
        a2s.push(a2);
    }
    let constraints = d
        .zeta_neumann
        .iter()
        .map(|&(g, p, nrm)| {
            let z = (data.flux)(p);
            (g, z[0] * nrm.x + z[1] * nrm.y)
        })
        .collect();
    Ok((
        BlockSystem {
            n,
            triplets,
            rhs,
            constraints,
        },
        a2s,
    ))
}
