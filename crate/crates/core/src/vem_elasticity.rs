//! Stokes-like virtual element space for the displacement and the
//! discontinuous polynomial space for the Herrmann pressure.
//!
//! Local displacement DoFs, in order:
//! boundary nodes (vertex `i`, then the `k - 1` interior Gauss-Lobatto nodes
//! of edge `i`, for each edge in counter-clockwise order), two components
//! each; divergence moments `int div v m_a` for `1 <= |a| <= k - 1`;
//! complement moments `int v . m_perp m_b` for `|b| <= k - 3`. Interior
//! moments are normalized by the size of their test polynomial (times
//! `h_E` for the divergence ones) so every DoF is of the size of the field.

use nalgebra::{DMatrix, DVector};

use crate::element::CellFrame;
use crate::error::{Result, VemError};
use crate::geometry::{Point2, PolyCell, PolyMesh};
use crate::polybasis::{
    dim, dx_hat, dy_hat, edge_gauss_lobatto, index_of, mass_matrix, monomials_at, multi_indices,
    Decomposition, QuadratureRule, ScaledMonomialBasis,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ElasticityDofLayout {
    pub order: usize,
    pub n_edges: usize,
    pub n_div: usize,
    pub n_perp: usize,
    pub n_pressure: usize,
}

impl ElasticityDofLayout {
    pub fn n_boundary_nodes(&self) -> usize {
        self.n_edges * self.order
    }

    pub fn n_interior(&self) -> usize {
        self.n_div + self.n_perp
    }

    pub fn n_local(&self) -> usize {
        2 * self.n_boundary_nodes() + self.n_interior()
    }

    /// Boundary node index of reference node `l` (`0..=k`) on local edge `i`.
    pub fn boundary_node(&self, i: usize, l: usize) -> usize {
        (i * self.order + l) % self.n_boundary_nodes()
    }

    pub fn div_offset(&self) -> usize {
        2 * self.n_boundary_nodes()
    }

    pub fn perp_offset(&self) -> usize {
        self.div_offset() + self.n_div
    }
}

pub fn dof_layout_elasticity(cell: &PolyCell, k1: usize) -> Result<ElasticityDofLayout> {
    if k1 < 2 {
        return Err(VemError::OrderTooLow {
            space: "displacement",
            order: k1,
            min: 2,
        });
    }
    let k = k1 as isize;
    Ok(ElasticityDofLayout {
        order: k1,
        n_edges: cell.len(),
        n_div: dim(k - 1) - 1,
        n_perp: dim(k - 3),
        n_pressure: dim(k - 1),
    })
}

/// Symmetric gradient of the `j`-th vector monomial of `P_k^2` given the
/// physical gradient `g` of its scalar monomial, as `(xx, xy, yy)`.
fn eps_of(j: usize, nk: usize, g: [f64; 2]) -> [f64; 3] {
    if j < nk {
        [g[0], 0.5 * g[1], 0.0]
    } else {
        [0.0, 0.5 * g[0], g[1]]
    }
}

/// Local operators of the displacement/pressure pair on one cell. Matrices
/// that scale with `2 mu` are stored without that factor.
#[derive(Clone, Debug)]
pub struct LocalElasticity {
    pub layout: ElasticityDofLayout,
    pub basis: ScaledMonomialBasis,
    pub area: f64,
    /// Boundary node positions in local node order.
    pub node_points: Vec<Point2>,
    /// Energy projection: DoFs to `P_k^2` coefficients.
    pub proj_energy: DMatrix<f64>,
    /// L2 projection onto `P_{k-2}^2`.
    pub proj_l2: DMatrix<f64>,
    /// DoFs of each vector monomial of `P_k^2` (columns).
    pub dof_of_poly: DMatrix<f64>,
    /// `int eps(m_i) : eps(m_j)` on `P_k^2`.
    pub gram_eps: DMatrix<f64>,
    pub consistency: DMatrix<f64>,
    pub stabilization: DMatrix<f64>,
    /// DoFs to coefficients of `div v` in `P_{k-1}`.
    pub div_coeffs: DMatrix<f64>,
    /// `b_1(v, m_a) = -int m_a div v`.
    pub b: DMatrix<f64>,
    /// Pressure mass matrix on `P_{k-1}`.
    pub c: DMatrix<f64>,
    /// Scalar mass matrix on `P_k`.
    pub mass_k: DMatrix<f64>,
    residual: DMatrix<f64>,
    stab_diag: DVector<f64>,
    scale: DVector<f64>,
}

impl LocalElasticity {
    pub fn new(mesh: &PolyMesh, c: usize, k: usize, rule: &QuadratureRule) -> Result<Self> {
        let layout = dof_layout_elasticity(mesh.cell(c), k)?;
        let frame = CellFrame::new(mesh, c);
        Self::from_frame(&frame, layout, rule)
    }

    pub(crate) fn from_frame(
        frame: &CellFrame,
        layout: ElasticityDofLayout,
        rule: &QuadratureRule,
    ) -> Result<Self> {
        let k = layout.order;
        let ki = k as isize;
        let (h, area) = (frame.h, frame.area);
        let basis = ScaledMonomialBasis::new(frame.centroid, h, k);
        let nk = dim(ki);
        let np = 2 * nk;
        let nkm1 = dim(ki - 1);
        let nkm2 = dim(ki - 2);
        let ndof = layout.n_local();
        let singular = |what| VemError::SingularLocalSystem {
            cell: frame.cell,
            what,
        };

        let (gl, _) = edge_gauss_lobatto(k);
        let mut node_points = Vec::with_capacity(layout.n_boundary_nodes());
        for i in 0..frame.len() {
            for &t in &gl[..k] {
                node_points.push(frame.edge_point(i, t));
            }
        }

        // boundary functionals
        let mut flux_rows = DMatrix::zeros(nkm1, ndof);
        let mut rbm = DMatrix::zeros(3, ndof);
        let mut rbm_poly = DMatrix::zeros(3, np);
        let mut bmat = DMatrix::zeros(np, ndof);
        let mut vals = vec![0.0; nk];
        for i in 0..frame.len() {
            let nrm = frame.edges[i].normal;
            for s in frame.edge_samples(i, &gl, 2 * k + 1) {
                let (x, y) = basis.scaled(s.point);
                monomials_at(k, x, y, &mut vals);
                let grads = basis.eval_grads(s.point);
                let tn: Vec<[f64; 2]> = (0..np)
                    .map(|j| {
                        let e = eps_of(j, nk, grads[j % nk]);
                        [e[0] * nrm.x + e[1] * nrm.y, e[1] * nrm.x + e[2] * nrm.y]
                    })
                    .collect();
                let wp = s.weight / frame.perimeter;
                for l in 0..=k {
                    let node = layout.boundary_node(i, l);
                    let w = s.weight * s.shape[l];
                    for a in 0..nkm1 {
                        flux_rows[(a, 2 * node)] += w * vals[a] * nrm.x;
                        flux_rows[(a, 2 * node + 1)] += w * vals[a] * nrm.y;
                    }
                    let wr = wp * s.shape[l];
                    rbm[(0, 2 * node)] += wr;
                    rbm[(1, 2 * node + 1)] += wr;
                    rbm[(2, 2 * node)] -= wr * y;
                    rbm[(2, 2 * node + 1)] += wr * x;
                    for (j, t) in tn.iter().enumerate() {
                        bmat[(j, 2 * node)] += w * t[0];
                        bmat[(j, 2 * node + 1)] += w * t[1];
                    }
                }
                for j in 0..nk {
                    rbm_poly[(0, j)] += wp * vals[j];
                    rbm_poly[(1, nk + j)] += wp * vals[j];
                    rbm_poly[(2, j)] -= wp * y * vals[j];
                    rbm_poly[(2, nk + j)] += wp * x * vals[j];
                }
            }
        }

        // int v . q for q in P_{k-2}^2, through grad_hat M_{k-1} + m_perp M_{k-3}
        let dec = Decomposition::new(k - 2);
        let mut elem_rows = DMatrix::zeros(dec.n_grad + dec.n_perp, ndof);
        for ia in 1..nkm1 {
            let mut row = flux_rows.row(ia) * h;
            row[layout.div_offset() + ia - 1] -= area;
            elem_rows.set_row(ia - 1, &row);
        }
        for ib in 0..dec.n_perp {
            elem_rows[(dec.n_grad + ib, layout.perp_offset() + ib)] = area;
        }
        let vmom = dec.from_monomial.transpose() * elem_rows;

        // interior part of int eps(v) : eps(p_j) = -int v . div eps(p_j)
        let h2 = h * h;
        for j in 0..np {
            let mut e = vec![0.0; nk];
            e[j % nk] = 1.0;
            let (xx, xy, yy) = {
                let dx = dx_hat(&e, k);
                let dy = dy_hat(&e, k);
                (dx_hat(&dx, k - 1), dy_hat(&dx, k - 1), dy_hat(&dy, k - 1))
            };
            // div eps of (m, 0) = (m_xx + m_yy / 2, m_xy / 2); of (0, m) = (m_xy / 2, m_xx / 2 + m_yy)
            let (c1, c2): (Vec<f64>, Vec<f64>) = if j < nk {
                (
                    (0..nkm2).map(|i| xx[i] + 0.5 * yy[i]).collect(),
                    (0..nkm2).map(|i| 0.5 * xy[i]).collect(),
                )
            } else {
                (
                    (0..nkm2).map(|i| 0.5 * xy[i]).collect(),
                    (0..nkm2).map(|i| 0.5 * xx[i] + yy[i]).collect(),
                )
            };
            for i in 0..nkm2 {
                let r1 = vmom.row(i) * (c1[i] / h2);
                let r2 = vmom.row(nkm2 + i) * (c2[i] / h2);
                let mut row = bmat.row_mut(j);
                row -= r1;
                row -= r2;
            }
        }

        // polynomial Gram matrices
        let mut gram_eps = DMatrix::zeros(np, np);
        let mut dof_of_poly = DMatrix::zeros(ndof, np);
        let mass_k = mass_matrix(&basis, rule);
        let mut eps = vec![[0.0; 3]; np];
        for (p, w) in rule.iter() {
            let (x, y) = basis.scaled(p);
            monomials_at(k, x, y, &mut vals);
            let grads = basis.eval_grads(p);
            for j in 0..np {
                eps[j] = eps_of(j, nk, grads[j % nk]);
            }
            for i in 0..np {
                for j in i..np {
                    let (a, b) = (eps[i], eps[j]);
                    gram_eps[(i, j)] += w * (a[0] * b[0] + 2.0 * a[1] * b[1] + a[2] * b[2]);
                }
            }
            // scaled divergence moments of each vector monomial
            for j in 0..np {
                let dv = grads[j % nk][if j < nk { 0 } else { 1 }];
                for ia in 1..nkm1 {
                    dof_of_poly[(layout.div_offset() + ia - 1, j)] += w * dv * vals[ia] * h / area;
                }
            }
        }
        for i in 0..np {
            for j in 0..i {
                gram_eps[(i, j)] = gram_eps[(j, i)];
            }
        }
        for (node, &p) in node_points.iter().enumerate() {
            let (x, y) = basis.scaled(p);
            monomials_at(k, x, y, &mut vals);
            for j in 0..nk {
                dof_of_poly[(2 * node, j)] = vals[j];
                dof_of_poly[(2 * node + 1, nk + j)] = vals[j];
            }
        }
        for (ib, m) in multi_indices(k.saturating_sub(3)).into_iter().enumerate().take(layout.n_perp) {
            let (iy, ix) = (index_of(m.a, m.b + 1), index_of(m.a + 1, m.b));
            for j in 0..nk {
                dof_of_poly[(layout.perp_offset() + ib, j)] = mass_k[(j, iy)] / area;
                dof_of_poly[(layout.perp_offset() + ib, nk + j)] = -mass_k[(j, ix)] / area;
            }
        }

        // energy projection fixed on rigid motions
        let lhs = &gram_eps + rbm_poly.transpose() * &rbm_poly;
        let rhs = &bmat + rbm_poly.transpose() * &rbm;
        let chol = lhs.cholesky().ok_or_else(|| singular("energy projection"))?;
        let proj_energy = chol.solve(&rhs);

        let mut m0 = DMatrix::zeros(2 * nkm2, 2 * nkm2);
        let m_km2 = mass_k.view((0, 0), (nkm2, nkm2));
        m0.view_mut((0, 0), (nkm2, nkm2)).copy_from(&m_km2);
        m0.view_mut((nkm2, nkm2), (nkm2, nkm2)).copy_from(&m_km2);
        let proj_l2 = m0
            .cholesky()
            .ok_or_else(|| singular("L2 projection"))?
            .solve(&vmom);

        let mut div_rows = DMatrix::zeros(nkm1, ndof);
        div_rows.set_row(0, &flux_rows.row(0));
        for ia in 1..nkm1 {
            div_rows[(ia, layout.div_offset() + ia - 1)] = area / h;
        }
        let c_mat = mass_k.view((0, 0), (nkm1, nkm1)).into_owned();
        let div_coeffs = c_mat
            .clone()
            .cholesky()
            .ok_or_else(|| singular("pressure mass"))?
            .solve(&div_rows);

        let mut scale = DVector::from_element(ndof, 1.0);
        for ia in 1..nkm1 {
            scale[layout.div_offset() + ia - 1] = (mass_k[(ia, ia)] / area).sqrt();
        }
        for (ib, m) in multi_indices(k.saturating_sub(3)).into_iter().enumerate().take(layout.n_perp) {
            let (iy, ix) = (index_of(m.a, m.b + 1), index_of(m.a + 1, m.b));
            scale[layout.perp_offset() + ib] = ((mass_k[(iy, iy)] + mass_k[(ix, ix)]) / area).sqrt();
        }
        let sd = DMatrix::from_diagonal(&scale);
        let proj_energy = proj_energy * &sd;
        let proj_l2 = proj_l2 * &sd;
        let div_coeffs = div_coeffs * &sd;
        let div_rows = div_rows * &sd;
        let dof_of_poly = DMatrix::from_diagonal(&scale.map(|s| 1.0 / s)) * dof_of_poly;

        let consistency = proj_energy.transpose() * &gram_eps * &proj_energy;
        let residual = DMatrix::identity(ndof, ndof) - &dof_of_poly * &proj_energy;
        let diag = DVector::from_fn(ndof, |i, _| consistency[(i, i)].max(1.0));
        let stabilization = residual.transpose() * DMatrix::from_diagonal(&diag) * &residual;

        Ok(Self {
            layout,
            basis,
            area,
            node_points,
            proj_energy,
            proj_l2,
            dof_of_poly,
            gram_eps,
            consistency,
            stabilization,
            div_coeffs,
            b: -div_rows,
            c: c_mat,
            mass_k,
            residual,
            stab_diag: diag,
            scale,
        })
    }

    /// `A_1^h = 2 mu (consistency + stabilization)`.
    pub fn a1(&self, mu: f64) -> DMatrix<f64> {
        (&self.consistency + &self.stabilization) * (2.0 * mu)
    }

    /// `S_1^E(v, v)` for a local DoF vector.
    pub fn stabilization_energy(&self, v: &DVector<f64>, mu: f64) -> f64 {
        let r = &self.residual * v;
        2.0 * mu * r.iter().zip(self.stab_diag.iter()).map(|(a, d)| a * a * d).sum::<f64>()
    }

    /// Moments `int f . q_l` against the vector monomials of `P_{k-2}^2`.
    fn load_moments(&self, rule: &QuadratureRule, f: &dyn Fn(Point2) -> [f64; 2]) -> DVector<f64> {
        let k = self.layout.order;
        let nkm2 = dim(k as isize - 2);
        let mut out = DVector::zeros(2 * nkm2);
        let mut vals = vec![0.0; nkm2];
        for (p, w) in rule.iter() {
            let (x, y) = self.basis.scaled(p);
            monomials_at(k - 2, x, y, &mut vals);
            let fv = f(p);
            for i in 0..nkm2 {
                out[i] += w * fv[0] * vals[i];
                out[nkm2 + i] += w * fv[1] * vals[i];
            }
        }
        out
    }

    /// `int Pi^0_{k-2} f . v_h` for every local DoF.
    pub fn load(&self, rule: &QuadratureRule, f: &dyn Fn(Point2) -> [f64; 2]) -> DVector<f64> {
        self.proj_l2.transpose() * self.load_moments(rule, f)
    }

    /// Coefficients of `Pi^0_{k-2} f` in `P_{k-2}^2`.
    pub fn project_load(&self, rule: &QuadratureRule, f: &dyn Fn(Point2) -> [f64; 2]) -> DVector<f64> {
        let nkm2 = dim(self.layout.order as isize - 2);
        let mut m0 = DMatrix::zeros(2 * nkm2, 2 * nkm2);
        let m = self.mass_k.view((0, 0), (nkm2, nkm2));
        m0.view_mut((0, 0), (nkm2, nkm2)).copy_from(&m);
        m0.view_mut((nkm2, nkm2), (nkm2, nkm2)).copy_from(&m);
        m0.cholesky()
            .expect("mass matrix checked at construction")
            .solve(&self.load_moments(rule, f))
    }

    /// `int_e t . v_h` on local edge `i`.
    pub(crate) fn edge_load(
        &self,
        frame: &CellFrame,
        i: usize,
        t: &dyn Fn(Point2) -> [f64; 2],
        degree: usize,
    ) -> DVector<f64> {
        let k = self.layout.order;
        let (gl, _) = edge_gauss_lobatto(k);
        let mut out = DVector::zeros(self.layout.n_local());
        for s in frame.edge_samples(i, &gl, degree) {
            let tv = t(s.point);
            for l in 0..=k {
                let node = self.layout.boundary_node(i, l);
                out[2 * node] += s.weight * s.shape[l] * tv[0];
                out[2 * node + 1] += s.weight * s.shape[l] * tv[1];
            }
        }
        out
    }

    /// `G_1` contribution `-(1/lambda) int s m_a` for pointwise values of `s`.
    pub fn pressure_load(&self, rule: &QuadratureRule, s: &[f64], lambda: f64) -> DVector<f64> {
        let n = self.layout.n_pressure;
        let mut out = DVector::zeros(n);
        let mut vals = vec![0.0; n];
        for ((p, w), sv) in rule.iter().zip(s) {
            let (x, y) = self.basis.scaled(p);
            monomials_at(self.layout.order - 1, x, y, &mut vals);
            for a in 0..n {
                out[a] -= w * sv * vals[a] / lambda;
            }
        }
        out
    }

    /// DoFs of a smooth field given its values and divergence.
    pub fn interpolate(
        &self,
        rule: &QuadratureRule,
        v: &dyn Fn(Point2) -> [f64; 2],
        div: &dyn Fn(Point2) -> f64,
    ) -> DVector<f64> {
        let l = &self.layout;
        let k = l.order;
        let mut out = DVector::zeros(l.n_local());
        for (node, &p) in self.node_points.iter().enumerate() {
            let val = v(p);
            out[2 * node] = val[0];
            out[2 * node + 1] = val[1];
        }
        let nk = dim(k as isize);
        let mut vals = vec![0.0; nk];
        let h = self.basis.h;
        let perp = multi_indices(k.saturating_sub(3));
        for (p, w) in rule.iter() {
            let (x, y) = self.basis.scaled(p);
            monomials_at(k, x, y, &mut vals);
            let d = div(p);
            for ia in 1..=l.n_div {
                out[l.div_offset() + ia - 1] += w * d * vals[ia] * h / self.area;
            }
            let val = v(p);
            for (ib, m) in perp.iter().enumerate().take(l.n_perp) {
                let (iy, ix) = (index_of(m.a, m.b + 1), index_of(m.a + 1, m.b));
                out[l.perp_offset() + ib] += w * (val[0] * vals[iy] - val[1] * vals[ix]) / self.area;
            }
        }
        out.component_div_assign(&self.scale);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_mesh, MeshFamily};
    use crate::polybasis::polygon_quadrature;

    fn square_element(k: usize) -> (PolyMesh, LocalElasticity) {
        let m = generate_mesh(MeshFamily::Square, 1).unwrap();
        let rule = polygon_quadrature(&m, 0, 2 * k + 2).unwrap();
        let e = LocalElasticity::new(&m, 0, k, &rule).unwrap();
        (m, e)
    }

    #[test]
    fn dof_counts() {
        let sq = generate_mesh(MeshFamily::Square, 1).unwrap();
        let tri = generate_mesh(MeshFamily::Crossed, 1).unwrap();
        assert_eq!(dof_layout_elasticity(sq.cell(0), 2).unwrap().n_local(), 18);
        assert_eq!(dof_layout_elasticity(tri.cell(0), 2).unwrap().n_local(), 14);
        assert_eq!(dof_layout_elasticity(sq.cell(0), 3).unwrap().n_local(), 30);
        assert_eq!(dof_layout_elasticity(sq.cell(0), 2).unwrap().n_pressure, 3);
        assert!(matches!(
            dof_layout_elasticity(sq.cell(0), 1),
            Err(VemError::OrderTooLow { .. })
        ));
    }

    #[test]
    fn projection_reproduces_polynomials() {
        for k in 2..=4 {
            let (_, e) = square_element(k);
            let pd = &e.proj_energy * &e.dof_of_poly;
            let n = pd.nrows();
            assert!((pd - DMatrix::identity(n, n)).amax() < 1e-11, "k={k}");
            let p0d = &e.proj_l2 * &e.dof_of_poly;
            let nk = dim(k as isize);
            let nkm2 = dim(k as isize - 2);
            let m = e.mass_k.view((0, 0), (nkm2, nkm2)).into_owned();
            let cross = e.mass_k.view((0, 0), (nkm2, nk)).into_owned();
            let expect = m.cholesky().unwrap().solve(&cross);
            for c in 0..2 {
                let blk = p0d.view((c * nkm2, c * nk), (nkm2, nk));
                assert!((blk - &expect).amax() < 1e-11, "k={k}");
                let off = p0d.view((c * nkm2, (1 - c) * nk), (nkm2, nk));
                assert!(off.amax() < 1e-11, "k={k}");
            }
        }
    }

    #[test]
    fn rigid_motions_are_in_the_kernel() {
        let (_, e) = square_element(2);
        let a = e.a1(1.0);
        let nk = dim(2);
        let rot = {
            let mut c = DVector::zeros(2 * nk);
            c[2] = -1.0;
            c[nk + 1] = 1.0;
            c
        };
        let v = &e.dof_of_poly * rot;
        assert!((&a * &v).amax() < 1e-12);
        assert!((&e.b * &v).amax() < 1e-12);
    }

    #[test]
    fn b1_of_unit_stretch() {
        let (_, e) = square_element(2);
        let nk = dim(2);
        let mut c = DVector::zeros(2 * nk);
        // v = (x - x_E, 0): scaled monomial times h
        c[1] = e.basis.h;
        let v = &e.dof_of_poly * c;
        let b = &e.b * v;
        assert!((b[0] + 1.0).abs() < 1e-13);
        assert!((e.c[(0, 0)] - 1.0).abs() < 1e-14);
    }
}
