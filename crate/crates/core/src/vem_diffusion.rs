//! Mixed virtual element space for the flux and the discontinuous
//! polynomial space for the concentration.
//!
//! Local flux DoFs, in order: outward normal flux at the `k + 1`
//! Gauss-Lobatto nodes of each edge (counter-clockwise); gradient moments
//! `int xi . grad_hat m_a` for `1 <= |a| <= k`; complement moments
//! `int xi . m_perp m_b` for `|b| <= k - 1`. Interior moments are divided
//! by `|E|^{1/2} ||q||_E` of their test polynomial `q` so every DoF is of
//! the size of the field.

use nalgebra::{DMatrix, DVector};

use crate::element::CellFrame;
use crate::error::{Result, VemError};
use crate::geometry::{Point2, PolyCell, PolyMesh};
use crate::polybasis::{
    dim, edge_gauss_lobatto, index_of, mass_matrix, monomials_at, multi_indices, Decomposition,
    QuadratureRule, ScaledMonomialBasis,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiffusionDofLayout {
    pub order: usize,
    pub n_edges: usize,
    pub n_grad: usize,
    pub n_perp: usize,
    pub n_concentration: usize,
}

impl DiffusionDofLayout {
    pub fn nodes_per_edge(&self) -> usize {
        self.order + 1
    }

    pub fn n_edge_dofs(&self) -> usize {
        self.n_edges * self.nodes_per_edge()
    }

    pub fn n_interior(&self) -> usize {
        self.n_grad + self.n_perp
    }

    pub fn n_local(&self) -> usize {
        self.n_edge_dofs() + self.n_interior()
    }

    pub fn edge_dof(&self, i: usize, l: usize) -> usize {
        i * self.nodes_per_edge() + l
    }

    pub fn grad_offset(&self) -> usize {
        self.n_edge_dofs()
    }

    pub fn perp_offset(&self) -> usize {
        self.n_edge_dofs() + self.n_grad
    }
}

pub fn dof_layout_diffusion(cell: &PolyCell, k2: usize) -> Result<DiffusionDofLayout> {
    if k2 < 1 {
        return Err(VemError::OrderTooLow {
            space: "flux",
            order: k2,
            min: 1,
        });
    }
    let k = k2 as isize;
    Ok(DiffusionDofLayout {
        order: k2,
        n_edges: cell.len(),
        n_grad: dim(k) - 1,
        n_perp: dim(k - 1),
        n_concentration: dim(k),
    })
}

/// Symmetric 2x2 tensor field samples stored as `(xx, xy, yy)`.
pub type SymTensor = [f64; 3];

#[derive(Clone, Debug)]
pub struct LocalDiffusion {
    pub layout: DiffusionDofLayout,
    pub basis: ScaledMonomialBasis,
    pub area: f64,
    /// L2 projection onto `P_k^2`.
    pub proj: DMatrix<f64>,
    /// DoFs of each vector monomial of `P_k^2` (columns).
    pub dof_of_poly: DMatrix<f64>,
    /// DoFs to coefficients of `div xi` in `P_k`.
    pub div_coeffs: DMatrix<f64>,
    /// `b_2(xi, m_a) = int m_a div xi`.
    pub b: DMatrix<f64>,
    /// Concentration mass matrix on `P_k`.
    pub c: DMatrix<f64>,
    /// Vector mass matrix on `P_k^2`.
    pub mass_vec: DMatrix<f64>,
    /// `Pi^T M Pi (I - D Pi)` pieces for the stabilization.
    residual: DMatrix<f64>,
    stab_diag: DVector<f64>,
    /// Size of each interior test polynomial (1 for edge DoFs).
    scale: DVector<f64>,
}

impl LocalDiffusion {
    pub fn new(mesh: &PolyMesh, c: usize, k: usize, rule: &QuadratureRule) -> Result<Self> {
        let layout = dof_layout_diffusion(mesh.cell(c), k)?;
        let frame = CellFrame::new(mesh, c);
        Self::from_frame(&frame, layout, rule)
    }

    pub(crate) fn from_frame(
        frame: &CellFrame,
        layout: DiffusionDofLayout,
        rule: &QuadratureRule,
    ) -> Result<Self> {
        let k = layout.order;
        let ki = k as isize;
        let (h, area) = (frame.h, frame.area);
        let basis = ScaledMonomialBasis::new(frame.centroid, h, k);
        let big = ScaledMonomialBasis::new(frame.centroid, h, k + 1);
        let nk = dim(ki);
        let nk1 = dim(ki + 1);
        let np = 2 * nk;
        let ndof = layout.n_local();
        let singular = |what| VemError::SingularLocalSystem {
            cell: frame.cell,
            what,
        };

        let (gl, _) = edge_gauss_lobatto(k);
        // int_{dE} (xi . n) m_a for |a| <= k + 1
        let mut flux_rows = DMatrix::zeros(nk1, ndof);
        let mut vals = vec![0.0; nk1];
        for i in 0..frame.len() {
            for s in frame.edge_samples(i, &gl, 2 * k + 1) {
                let (x, y) = big.scaled(s.point);
                monomials_at(k + 1, x, y, &mut vals);
                for l in 0..=k {
                    let w = s.weight * s.shape[l];
                    for a in 0..nk1 {
                        flux_rows[(a, layout.edge_dof(i, l))] += w * vals[a];
                    }
                }
            }
        }

        let mass_big = mass_matrix(&big, rule);
        let c_mat = mass_big.view((0, 0), (nk, nk)).into_owned();

        let mut div_rows = DMatrix::zeros(nk, ndof);
        for a in 0..nk {
            div_rows.set_row(a, &flux_rows.row(a));
            if a > 0 {
                div_rows[(a, layout.grad_offset() + a - 1)] -= area / h;
            }
        }
        let c_chol = c_mat
            .clone()
            .cholesky()
            .ok_or_else(|| singular("concentration mass"))?;
        let div_coeffs = c_chol.solve(&div_rows);

        // int xi . q for q in P_k^2 through grad_hat M_{k+1} + m_perp M_{k-1}
        let dec = Decomposition::new(k);
        let mut elem_rows = DMatrix::zeros(np, ndof);
        let cross = mass_big.view((0, 0), (nk1, nk)).into_owned();
        let int_div_m = &cross * &div_coeffs;
        for ia in 1..nk1 {
            if ia < nk {
                elem_rows[(ia - 1, layout.grad_offset() + ia - 1)] = area;
            } else {
                let row = (flux_rows.row(ia) - int_div_m.row(ia)) * h;
                elem_rows.set_row(ia - 1, &row);
            }
        }
        for ib in 0..dec.n_perp {
            elem_rows[(dec.n_grad + ib, layout.perp_offset() + ib)] = area;
        }
        let vmom = dec.from_monomial.transpose() * elem_rows;

        let mut mass_vec = DMatrix::zeros(np, np);
        mass_vec.view_mut((0, 0), (nk, nk)).copy_from(&c_mat);
        mass_vec.view_mut((nk, nk), (nk, nk)).copy_from(&c_mat);
        let proj = mass_vec
            .clone()
            .cholesky()
            .ok_or_else(|| singular("flux projection"))?
            .solve(&vmom);

        let mut dof_of_poly = DMatrix::zeros(ndof, np);
        for i in 0..frame.len() {
            let nrm = frame.edges[i].normal;
            for (l, &t) in gl.iter().enumerate() {
                let (x, y) = basis.scaled(frame.edge_point(i, t));
                monomials_at(k, x, y, &mut vals);
                for j in 0..nk {
                    dof_of_poly[(layout.edge_dof(i, l), j)] = vals[j] * nrm.x;
                    dof_of_poly[(layout.edge_dof(i, l), nk + j)] = vals[j] * nrm.y;
                }
            }
        }
        for (ia, m) in multi_indices(k).into_iter().enumerate().skip(1) {
            // grad_hat m_a = (a m_{a-1,b}, b m_{a,b-1})
            for j in 0..nk {
                if m.a > 0 {
                    dof_of_poly[(layout.grad_offset() + ia - 1, j)] =
                        m.a as f64 * c_mat[(j, index_of(m.a - 1, m.b))] / area;
                }
                if m.b > 0 {
                    dof_of_poly[(layout.grad_offset() + ia - 1, nk + j)] =
                        m.b as f64 * c_mat[(j, index_of(m.a, m.b - 1))] / area;
                }
            }
        }
        for (ib, m) in multi_indices(k - 1).into_iter().enumerate() {
            let (iy, ix) = (index_of(m.a, m.b + 1), index_of(m.a + 1, m.b));
            for j in 0..nk {
                dof_of_poly[(layout.perp_offset() + ib, j)] = c_mat[(j, iy)] / area;
                dof_of_poly[(layout.perp_offset() + ib, nk + j)] = -c_mat[(j, ix)] / area;
            }
        }

        let mut scale = DVector::from_element(ndof, 1.0);
        for (ia, m) in multi_indices(k).into_iter().enumerate().skip(1) {
            let mut n2 = 0.0;
            if m.a > 0 {
                let i = index_of(m.a - 1, m.b);
                n2 += (m.a * m.a) as f64 * c_mat[(i, i)];
            }
            if m.b > 0 {
                let i = index_of(m.a, m.b - 1);
                n2 += (m.b * m.b) as f64 * c_mat[(i, i)];
            }
            scale[layout.grad_offset() + ia - 1] = (n2 / area).sqrt();
        }
        for (ib, m) in multi_indices(k - 1).into_iter().enumerate() {
            let (iy, ix) = (index_of(m.a, m.b + 1), index_of(m.a + 1, m.b));
            scale[layout.perp_offset() + ib] = ((c_mat[(iy, iy)] + c_mat[(ix, ix)]) / area).sqrt();
        }
        let proj = proj * DMatrix::from_diagonal(&scale);
        let div_coeffs = div_coeffs * DMatrix::from_diagonal(&scale);
        let div_rows = div_rows * DMatrix::from_diagonal(&scale);
        let dof_of_poly = DMatrix::from_diagonal(&scale.map(|s| 1.0 / s)) * dof_of_poly;

        let residual = DMatrix::identity(ndof, ndof) - &dof_of_poly * &proj;
        let unit = proj.transpose() * &mass_vec * &proj;
        let stab_diag = DVector::from_fn(ndof, |i, _| unit[(i, i)].max(area));

        Ok(Self {
            layout,
            basis,
            area,
            proj,
            dof_of_poly,
            div_coeffs,
            b: div_rows,
            c: c_mat,
            mass_vec,
            residual,
            stab_diag,
            scale,
        })
    }

    /// `int K q_i . q_j` on `P_k^2` for tensor samples `kt` at the rule points.
    pub fn weighted_mass(&self, rule: &QuadratureRule, kt: &[SymTensor]) -> DMatrix<f64> {
        let nk = self.layout.n_concentration;
        let mut m = DMatrix::zeros(2 * nk, 2 * nk);
        let mut vals = vec![0.0; nk];
        for ((p, w), t) in rule.iter().zip(kt) {
            let (x, y) = self.basis.scaled(p);
            monomials_at(self.layout.order, x, y, &mut vals);
            for i in 0..nk {
                for j in 0..nk {
                    let v = w * vals[i] * vals[j];
                    m[(i, j)] += v * t[0];
                    m[(i, nk + j)] += v * t[1];
                    m[(nk + i, j)] += v * t[1];
                    m[(nk + i, nk + j)] += v * t[2];
                }
            }
        }
        m
    }

    /// Cell mean of `tr(K) / 2`.
    pub fn mean_half_trace(&self, rule: &QuadratureRule, kt: &[SymTensor]) -> f64 {
        rule.iter()
            .zip(kt)
            .map(|((_, w), t)| w * 0.5 * (t[0] + t[2]))
            .sum::<f64>()
            / self.area
    }

    /// Stabilization matrix for a given scalar weight.
    pub fn stabilization(&self, weight: f64) -> DMatrix<f64> {
        self.residual.transpose() * DMatrix::from_diagonal(&(&self.stab_diag * weight)) * &self.residual
    }

    /// `A_2^h` for inverse-mobility samples `minv` at the rule points.
    pub fn a2(&self, rule: &QuadratureRule, minv: &[SymTensor], cell: usize) -> Result<DMatrix<f64>> {
        if minv
            .iter()
            .any(|t| !(t[0] > 0.0 && t[0] * t[2] - t[1] * t[1] > 0.0 && t.iter().all(|v| v.is_finite())))
        {
            return Err(VemError::CoefficientNotSpd { cell });
        }
        let mk = self.weighted_mass(rule, minv);
        let cons = self.proj.transpose() * mk * &self.proj;
        Ok(cons + self.stabilization(self.mean_half_trace(rule, minv)))
    }

    /// `S_2^E(xi, xi)` with the given scalar weight.
    pub fn stabilization_energy(&self, v: &DVector<f64>, weight: f64) -> f64 {
        let r = &self.residual * v;
        weight * r.iter().zip(self.stab_diag.iter()).map(|(a, d)| a * a * d).sum::<f64>()
    }

    /// `<phi_D, xi . n>` on local edge `i`.
    pub(crate) fn edge_load(
        &self,
        frame: &CellFrame,
        i: usize,
        phi_d: &dyn Fn(Point2) -> f64,
        degree: usize,
    ) -> DVector<f64> {
        let k = self.layout.order;
        let (gl, _) = edge_gauss_lobatto(k);
        let mut out = DVector::zeros(self.layout.n_local());
        for s in frame.edge_samples(i, &gl, degree) {
            let v = phi_d(s.point);
            for l in 0..=k {
                out[self.layout.edge_dof(i, l)] += s.weight * s.shape[l] * v;
            }
        }
        out
    }

    /// `G_2(m_a) = -int g m_a`.
    pub fn source_load(&self, rule: &QuadratureRule, g: &dyn Fn(Point2) -> f64) -> DVector<f64> {
        let n = self.layout.n_concentration;
        let mut out = DVector::zeros(n);
        let mut vals = vec![0.0; n];
        for (p, w) in rule.iter() {
            let (x, y) = self.basis.scaled(p);
            monomials_at(self.layout.order, x, y, &mut vals);
            let gv = g(p);
            for a in 0..n {
                out[a] -= w * gv * vals[a];
            }
        }
        out
    }

    /// DoFs of a smooth flux field.
    pub fn interpolate(
        &self,
        frame: &CellFrame,
        rule: &QuadratureRule,
        xi: &dyn Fn(Point2) -> [f64; 2],
    ) -> DVector<f64> {
        let l = &self.layout;
        let k = l.order;
        let (gl, _) = edge_gauss_lobatto(k);
        let mut out = DVector::zeros(l.n_local());
        for i in 0..frame.len() {
            let nrm = frame.edges[i].normal;
            for (j, &t) in gl.iter().enumerate() {
                let v = xi(frame.edge_point(i, t));
                out[l.edge_dof(i, j)] = v[0] * nrm.x + v[1] * nrm.y;
            }
        }
        let nk = l.n_concentration;
        let mut vals = vec![0.0; nk];
        let grad_idx = multi_indices(k);
        let perp_idx = multi_indices(k - 1);
        for (p, w) in rule.iter() {
            let (x, y) = self.basis.scaled(p);
            monomials_at(k, x, y, &mut vals);
            let v = xi(p);
            for (ia, m) in grad_idx.iter().enumerate().skip(1) {
                let gx = if m.a > 0 { m.a as f64 * vals[index_of(m.a - 1, m.b)] } else { 0.0 };
                let gy = if m.b > 0 { m.b as f64 * vals[index_of(m.a, m.b - 1)] } else { 0.0 };
                out[l.grad_offset() + ia - 1] += w * (v[0] * gx + v[1] * gy) / self.area;
            }
            for (ib, m) in perp_idx.iter().enumerate() {
                let (iy, ix) = (index_of(m.a, m.b + 1), index_of(m.a + 1, m.b));
                out[l.perp_offset() + ib] += w * (v[0] * vals[iy] - v[1] * vals[ix]) / self.area;
            }
        }
        out.component_div_assign(&self.scale);
        out
    }
}
