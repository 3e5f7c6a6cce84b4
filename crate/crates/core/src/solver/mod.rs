//! Global DoF numbering, assembly of the two block systems, sparse direct
//! solves and the Picard loop coupling them.

mod assembly;
mod linear;
mod model;
mod picard;

pub use assembly::{
    assemble_diffusion, assemble_elasticity, inverse_mobility_samples, BlockSystem, ReducedSystem,
};
pub use linear::{solve_linear, Factorization, SparseSolver};
pub use model::{
    ActiveStress, Mobility, ModelParameters, NormalField, ProblemData, ScalarField, VectorField,
};
pub use picard::{picard_solve, IncrementNorm, PicardConfig, PicardTrace};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::element::CellFrame;
use crate::error::Result;
use crate::geometry::{BoundaryTag, Point2, PolyMesh};
use crate::polybasis::{dim, edge_gauss_lobatto, polygon_quadrature, QuadratureRule};
use crate::vem_diffusion::{dof_layout_diffusion, LocalDiffusion};
use crate::vem_elasticity::{dof_layout_elasticity, LocalElasticity};

/// Polynomial orders of the displacement (`k1`) and flux (`k2`) spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orders {
    pub k1: usize,
    pub k2: usize,
}

impl Orders {
    pub const fn new(k1: usize, k2: usize) -> Self {
        Self { k1, k2 }
    }

    /// Quadrature exactness used on cells: `2 k1 + 2` for the elasticity
    /// integrals and `2 k2 + 4` for the nonlinear flux integrals.
    pub fn quadrature_degree(&self) -> usize {
        (2 * self.k1 + 2).max(2 * self.k2 + 4)
    }
}

/// Everything precomputed on one cell.
#[derive(Clone, Debug)]
pub struct CellData {
    pub frame: CellFrame,
    pub rule: QuadratureRule,
    pub elasticity: LocalElasticity,
    pub diffusion: LocalDiffusion,
}

/// Global numbering of all four unknowns and the essential constraints.
#[derive(Clone, Debug)]
pub struct DofMaps {
    pub n_u: usize,
    pub n_p: usize,
    pub n_zeta: usize,
    pub n_phi: usize,
    pub u_local: Vec<Vec<usize>>,
    /// Global index and orientation sign of every local flux DoF.
    pub zeta_local: Vec<Vec<(usize, f64)>>,
    pub p_offset: Vec<usize>,
    pub phi_offset: Vec<usize>,
    /// Dirichlet displacement DoFs: (global index, component, node).
    pub u_dirichlet: Vec<(usize, usize, Point2)>,
    /// Neumann flux DoFs: (global index, node, edge normal).
    pub zeta_neumann: Vec<(usize, Point2, Point2)>,
}

impl DofMaps {
    pub fn new(mesh: &PolyMesh, orders: Orders) -> Result<Self> {
        let (k1, k2) = (orders.k1, orders.k2);
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let mut n_u = 2 * nv + 2 * (k1 - 1) * ne;
        let mut n_zeta = (k2 + 1) * ne;
        let np = dim(k1 as isize - 1);
        let nphi = dim(k2 as isize);
        let mut u_local = Vec::with_capacity(mesh.num_cells());
        let mut zeta_local = Vec::with_capacity(mesh.num_cells());
        for (c, cell) in mesh.cells().iter().enumerate() {
            let el = dof_layout_elasticity(cell, k1)?;
            let dl = dof_layout_diffusion(cell, k2)?;
            let n = cell.len();
            let mut u = vec![0; el.n_local()];
            for i in 0..n {
                let v = cell.vertices[i];
                let node = el.boundary_node(i, 0);
                u[2 * node] = 2 * v;
                u[2 * node + 1] = 2 * v + 1;
                let e = cell.edges[i];
                for l in 1..k1 {
                    let g = if cell.aligned[i] { l - 1 } else { k1 - 1 - l };
                    let base = 2 * nv + 2 * (e * (k1 - 1) + g);
                    let node = el.boundary_node(i, l);
                    u[2 * node] = base;
                    u[2 * node + 1] = base + 1;
                }
            }
            for j in 0..el.n_interior() {
                u[el.div_offset() + j] = n_u + j;
            }
            n_u += el.n_interior();
            u_local.push(u);

            let mut z = vec![(0, 1.0); dl.n_local()];
            for i in 0..n {
                let e = cell.edges[i];
                for l in 0..=k2 {
                    z[dl.edge_dof(i, l)] = if cell.aligned[i] {
                        (e * (k2 + 1) + l, 1.0)
                    } else {
                        (e * (k2 + 1) + k2 - l, -1.0)
                    };
                }
            }
            for j in 0..dl.n_interior() {
                z[dl.grad_offset() + j] = (n_zeta + j, 1.0);
            }
            n_zeta += dl.n_interior();
            zeta_local.push(z);
            debug_assert!(c < mesh.num_cells());
        }

        let (gl1, _) = edge_gauss_lobatto(k1);
        let (gl2, _) = edge_gauss_lobatto(k2);
        let mut u_dirichlet = Vec::new();
        let mut zeta_neumann = Vec::new();
        let mut vertex_done = vec![false; nv];
        for (e, edge) in mesh.edges().iter().enumerate() {
            let [a, b] = edge.vertices;
            let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
            let at = |t: f64| pa + (pb - pa) * (0.5 * (t + 1.0));
            match edge.tag {
                BoundaryTag::Dirichlet => {
                    for v in [a, b] {
                        if !vertex_done[v] {
                            vertex_done[v] = true;
                            u_dirichlet.push((2 * v, 0, mesh.vertex(v)));
                            u_dirichlet.push((2 * v + 1, 1, mesh.vertex(v)));
                        }
                    }
                    for l in 1..k1 {
                        let base = 2 * nv + 2 * (e * (k1 - 1) + l - 1);
                        u_dirichlet.push((base, 0, at(gl1[l])));
                        u_dirichlet.push((base + 1, 1, at(gl1[l])));
                    }
                }
                BoundaryTag::Neumann => {
                    for (l, &t) in gl2.iter().enumerate() {
                        zeta_neumann.push((e * (k2 + 1) + l, at(t), edge.normal));
                    }
                }
                BoundaryTag::Interior => {}
            }
        }
        let nc = mesh.num_cells();
        Ok(Self {
            n_u,
            n_p: np * nc,
            n_zeta,
            n_phi: nphi * nc,
            u_local,
            zeta_local,
            p_offset: (0..nc).map(|c| c * np).collect(),
            phi_offset: (0..nc).map(|c| c * nphi).collect(),
            u_dirichlet,
            zeta_neumann,
        })
    }

    pub fn total(&self) -> usize {
        self.n_u + self.n_p + self.n_zeta + self.n_phi
    }
}

/// A mesh together with its local elements and DoF numbering.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: PolyMesh,
    pub orders: Orders,
    pub cells: Vec<CellData>,
    pub dofs: DofMaps,
}

impl Discretization {
    pub fn new(mesh: PolyMesh, orders: Orders) -> Result<Self> {
        let dofs = DofMaps::new(&mesh, orders)?;
        let degree = orders.quadrature_degree();
        let cells = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let frame = CellFrame::new(&mesh, c);
                let rule = polygon_quadrature(&mesh, c, degree)?;
                let el = dof_layout_elasticity(mesh.cell(c), orders.k1)?;
                let dl = dof_layout_diffusion(mesh.cell(c), orders.k2)?;
                let elasticity = LocalElasticity::from_frame(&frame, el, &rule)?;
                let diffusion = LocalDiffusion::from_frame(&frame, dl, &rule)?;
                Ok(CellData {
                    frame,
                    rule,
                    elasticity,
                    diffusion,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mesh,
            orders,
            cells,
            dofs,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn total_dofs(&self) -> usize {
        self.dofs.total()
    }
}

/// Coefficient vectors of the discrete solution `(u_h, p_h, zeta_h, phi_h)`.
/// Pressure and concentration hold per-cell scaled-monomial coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub u: DVector<f64>,
    pub p: DVector<f64>,
    pub zeta: DVector<f64>,
    pub phi: DVector<f64>,
}

impl SystemState {
    pub fn zeros(d: &DofMaps) -> Self {
        Self {
            u: DVector::zeros(d.n_u),
            p: DVector::zeros(d.n_p),
            zeta: DVector::zeros(d.n_zeta),
            phi: DVector::zeros(d.n_phi),
        }
    }

    pub fn local_u(&self, disc: &Discretization, c: usize) -> DVector<f64> {
        DVector::from_iterator(
            disc.dofs.u_local[c].len(),
            disc.dofs.u_local[c].iter().map(|&g| self.u[g]),
        )
    }

    pub fn local_zeta(&self, disc: &Discretization, c: usize) -> DVector<f64> {
        DVector::from_iterator(
            disc.dofs.zeta_local[c].len(),
            disc.dofs.zeta_local[c].iter().map(|&(g, s)| s * self.zeta[g]),
        )
    }

    pub fn p_coeffs(&self, disc: &Discretization, c: usize) -> DVector<f64> {
        let n = disc.cells[c].elasticity.layout.n_pressure;
        self.p.rows(disc.dofs.p_offset[c], n).into_owned()
    }

    pub fn phi_coeffs(&self, disc: &Discretization, c: usize) -> DVector<f64> {
        let n = disc.cells[c].diffusion.layout.n_concentration;
        self.phi.rows(disc.dofs.phi_offset[c], n).into_owned()
    }

    /// `P_{k1}^2` coefficients of the energy projection of `u_h` on cell `c`.
    pub fn energy_coeffs(&self, disc: &Discretization, c: usize) -> DVector<f64> {
        &disc.cells[c].elasticity.proj_energy * self.local_u(disc, c)
    }

    /// `P_{k2}^2` coefficients of the L2 projection of `zeta_h` on cell `c`.
    pub fn flux_coeffs(&self, disc: &Discretization, c: usize) -> DVector<f64> {
        &disc.cells[c].diffusion.proj * self.local_zeta(disc, c)
    }

    pub fn div_u_coeffs(&self, disc: &Discretization, c: usize) -> DVector<f64> {
        &disc.cells[c].elasticity.div_coeffs * self.local_u(disc, c)
    }

    pub fn div_zeta_coeffs(&self, disc: &Discretization, c: usize) -> DVector<f64> {
        &disc.cells[c].diffusion.div_coeffs * self.local_zeta(disc, c)
    }
}
