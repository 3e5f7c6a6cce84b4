//! Residual indicators, their weighted sums, the weighted true error and
//! the effectivity index.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::geometry::{BoundaryTag, Point2};
use crate::polybasis::{dx_hat, dy_hat, edge_rule, polygon_quadrature, ScaledMonomialBasis};
use crate::solver::{
    inverse_mobility_samples, Discretization, ModelParameters, ProblemData, ScalarField, SystemState,
    VectorField,
};
use crate::vem_diffusion::SymTensor;

pub type TensorField = Arc<dyn Fn(Point2) -> [[f64; 2]; 2] + Send + Sync>;

/// Exact fields of a manufactured problem. `grad_u[i][j]` is `d u_i / d x_j`.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: VectorField,
    pub grad_u: TensorField,
    pub p: ScalarField,
    pub zeta: VectorField,
    pub div_zeta: ScalarField,
    pub phi: ScalarField,
}

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExactSolution { .. }")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorOptions {
    /// Use `+ p_h / lambda` in the constitutive residual instead of `- p_h / lambda`.
    pub printed_lambda_sign: bool,
    /// Add interior tangential jumps of the proxy gradient to `Xi_2`.
    pub tangential_jumps: bool,
}

/// Squared indicator components on one cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocalIndicators {
    pub cell: usize,
    pub xi1_sq: f64,
    pub xi2_sq: f64,
    pub eta1_sq: f64,
    pub eta2_sq: f64,
    pub lam1_sq: f64,
    pub lam2_sq: f64,
    pub s1_sq: f64,
    pub s2_sq: f64,
    pub theta1_sq: f64,
    pub theta2_sq: f64,
    pub theta_sq: f64,
}

impl LocalIndicators {
    fn finish(mut self, p: &ModelParameters) -> Self {
        let m2 = 2.0 * p.mu;
        self.theta1_sq = self.xi1_sq / m2 + self.eta1_sq / m2 + m2 * self.lam1_sq + self.s1_sq;
        self.theta2_sq = p.m_bound * (self.xi2_sq + self.eta2_sq + self.lam2_sq) + self.s2_sq;
        self.theta_sq = self.theta1_sq + self.theta2_sq;
        self
    }
}

/// Weighted global sums.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GlobalEstimate {
    pub theta_sq: f64,
    pub xi_sq: f64,
    pub eta_sq: f64,
    pub lambda_sq: f64,
    pub s_sq: f64,
    pub effectivity: Option<f64>,
}

impl GlobalEstimate {
    pub fn theta(&self) -> f64 {
        self.theta_sq.sqrt()
    }
}

pub fn global_estimate(locals: &[LocalIndicators], params: &ModelParameters) -> GlobalEstimate {
    let m2 = 2.0 * params.mu;
    let mb = params.m_bound;
    let mut g = GlobalEstimate::default();
    for l in locals {
        g.theta_sq += l.theta_sq;
        g.xi_sq += l.xi1_sq / m2 + mb * l.xi2_sq;
        g.eta_sq += l.eta1_sq / m2 + mb * l.eta2_sq;
        g.lambda_sq += m2 * l.lam1_sq + mb * l.lam2_sq;
        g.s_sq += l.s1_sq + l.s2_sq;
    }
    g
}

pub fn effectivity(theta: f64, err: f64) -> Result<f64> {
    if !(err > 0.0) {
        return Err(VemError::ZeroError);
    }
    Ok(theta / err)
}

/// Polynomial proxies on one cell, in physical derivatives.
struct Proxy {
    ux: [Vec<f64>; 2],
    uy: [Vec<f64>; 2],
    p: Vec<f64>,
    phi: Vec<f64>,
    k: [Vec<f64>; 2],
    minv: Vec<SymTensor>,
    flux: [Vec<f64>; 2],
}

fn deriv(c: &[f64], k: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let s = |v: Vec<f64>| v.into_iter().map(|a| a / h).collect::<Vec<_>>();
    (s(dx_hat(c, k)), s(dy_hat(c, k)))
}

fn build_proxy(
    disc: &Discretization,
    params: &ModelParameters,
    state: &SystemState,
    c: usize,
) -> Result<Proxy> {
    let cd = &disc.cells[c];
    let k1 = disc.orders.k1;
    let eb = &cd.elasticity.basis;
    let uc = state.energy_coeffs(disc, c);
    let nk1 = eb.len();
    let (u1x, u1y) = deriv(&uc.as_slice()[..nk1], k1, eb.h);
    let (u2x, u2y) = deriv(&uc.as_slice()[nk1..], k1, eb.h);
    let minv = inverse_mobility_samples(disc, params, state, c)?;
    let db = &cd.diffusion.basis;
    let nk2 = db.len();
    let zc = state.flux_coeffs(disc, c);
    let (z1, z2) = (&zc.as_slice()[..nk2], &zc.as_slice()[nk2..]);
    let mut mom = [DVector::zeros(nk2), DVector::zeros(nk2)];
    for ((x, w), t) in cd.rule.iter().zip(&minv) {
        let vals = db.eval(x);
        let zv = [dotv(z1, &vals), dotv(z2, &vals)];
        let g = [t[0] * zv[0] + t[1] * zv[1], t[1] * zv[0] + t[2] * zv[1]];
        for a in 0..nk2 {
            mom[0][a] += w * g[0] * vals[a];
            mom[1][a] += w * g[1] * vals[a];
        }
    }
    let chol = cd
        .diffusion
        .c
        .clone()
        .cholesky()
        .ok_or(VemError::SingularLocalSystem { cell: c, what: "proxy flux gradient" })?;
    let kx = chol.solve(&mom[0]).as_slice().to_vec();
    let ky = chol.solve(&mom[1]).as_slice().to_vec();
    Ok(Proxy {
        ux: [u1x, u2x],
        uy: [u1y, u2y],
        p: state.p_coeffs(disc, c).as_slice().to_vec(),
        phi: state.phi_coeffs(disc, c).as_slice().to_vec(),
        k: [kx, ky],
        minv,
        flux: [z1.to_vec(), z2.to_vec()],
    })
}

fn dotv(c: &[f64], vals: &[f64]) -> f64 {
    c.iter().zip(vals).map(|(a, b)| a * b).sum()
}

impl Proxy {
    fn stress(&self, eb: &ScaledMonomialBasis, x: Point2, mu: f64) -> [[f64; 2]; 2] {
        let v = eb.eval(x);
        let e11 = dotv(&self.ux[0], &v);
        let e22 = dotv(&self.uy[1], &v);
        let e12 = 0.5 * (dotv(&self.uy[0], &v) + dotv(&self.ux[1], &v));
        let p = dotv(&self.p, &v);
        [[2.0 * mu * e11 - p, 2.0 * mu * e12], [2.0 * mu * e12, 2.0 * mu * e22 - p]]
    }

    fn proxy_grad(&self, db: &ScaledMonomialBasis, x: Point2) -> [f64; 2] {
        let v = db.eval(x);
        [dotv(&self.k[0], &v), dotv(&self.k[1], &v)]
    }
}

fn matvec(s: &[[f64; 2]; 2], n: Point2) -> [f64; 2] {
    [s[0][0] * n.x + s[0][1] * n.y, s[1][0] * n.x + s[1][1] * n.y]
}

/// Indicators on every cell of the mesh.
pub fn local_indicators(
    disc: &Discretization,
    params: &ModelParameters,
    data: &ProblemData,
    state: &SystemState,
    options: EstimatorOptions,
) -> Result<Vec<LocalIndicators>> {
    let proxies = (0..disc.num_cells())
        .into_par_iter()
        .map(|c| build_proxy(disc, params, state, c))
        .collect::<Result<Vec<_>>>()?;
    (0..disc.num_cells())
        .into_par_iter()
        .map(|c| cell_indicators(disc, params, data, state, &proxies, c, options))
        .collect()
}

fn cell_indicators(
    disc: &Discretization,
    params: &ModelParameters,
    data: &ProblemData,
    state: &SystemState,
    proxies: &[Proxy],
    c: usize,
    options: EstimatorOptions,
) -> Result<LocalIndicators> {
    let cd = &disc.cells[c];
    let (k1, k2) = (disc.orders.k1, disc.orders.k2);
    let mu = params.mu;
    let me = &proxies[c];
    let eb = &cd.elasticity.basis;
    let db = &cd.diffusion.basis;
    let h = cd.frame.h;
    let mut out = LocalIndicators {
        cell: c,
        ..Default::default()
    };

    // elasticity volume terms
    let f = data.body_force.clone();
    let pf = cd.elasticity.project_load(&cd.rule, &move |x| f(x));
    let nkm2 = pf.len() / 2;
    let (pf1, pf2) = (&pf.as_slice()[..nkm2], &pf.as_slice()[nkm2..]);
    let (u1xx, u1xy) = deriv(&me.ux[0], k1 - 1, h);
    let (_, u1yy) = deriv(&me.uy[0], k1 - 1, h);
    let (u2xx, u2xy) = deriv(&me.ux[1], k1 - 1, h);
    let (_, u2yy) = deriv(&me.uy[1], k1 - 1, h);
    let (px, py) = deriv(&me.p, k1 - 1, h);
    let divu = state.div_u_coeffs(disc, c);
    let phi_h = &me.phi;
    let lam_sign = if options.printed_lambda_sign { 1.0 } else { -1.0 };
    for (x, w) in cd.rule.iter() {
        let v = eb.eval(x);
        let div_eps = [
            dotv(&u1xx, &v) + 0.5 * (dotv(&u1yy, &v) + dotv(&u2xy, &v)),
            0.5 * (dotv(&u1xy, &v) + dotv(&u2xx, &v)) + dotv(&u2yy, &v),
        ];
        let pfv = [dotv(pf1, &v), dotv(pf2, &v)];
        let gp = [dotv(&px, &v), dotv(&py, &v)];
        let r = [
            pfv[0] + 2.0 * mu * div_eps[0] - gp[0],
            pfv[1] + 2.0 * mu * div_eps[1] - gp[1],
        ];
        out.xi1_sq += w * h * h * (r[0] * r[0] + r[1] * r[1]);
        let fv = (data.body_force)(x);
        let o = [fv[0] - pfv[0], fv[1] - pfv[1]];
        out.eta1_sq += w * h * h * (o[0] * o[0] + o[1] * o[1]);
        let dv = db.eval(x);
        let phiv = dotv(phi_h, &dv);
        let l1 = params.active.value(phiv) / params.lambda - dotv(divu.as_slice(), &v)
            + lam_sign * dotv(&me.p, &v) / params.lambda;
        out.lam1_sq += w * l1 * l1;
    }
    out.s1_sq = cd.elasticity.stabilization_energy(&state.local_u(disc, c), mu);

    // diffusion volume terms
    let (_, kxy) = deriv(&me.k[0], k2, h);
    let (kyx, _) = deriv(&me.k[1], k2, h);
    let (phx, phy) = deriv(phi_h, k2, h);
    let divz = state.div_zeta_coeffs(disc, c);
    for ((x, w), t) in cd.rule.iter().zip(&me.minv) {
        let v = db.eval(x);
        let kv = [dotv(&me.k[0], &v), dotv(&me.k[1], &v)];
        let gphi = [dotv(&phx, &v), dotv(&phy, &v)];
        let rot = dotv(&kyx, &v) - dotv(&kxy, &v);
        out.xi2_sq += w * h * h * ((kv[0] - gphi[0]).powi(2) + (kv[1] - gphi[1]).powi(2) + rot * rot);
        let zv = [dotv(&me.flux[0], &v), dotv(&me.flux[1], &v)];
        let g = [t[0] * zv[0] + t[1] * zv[1], t[1] * zv[0] + t[2] * zv[1]];
        out.eta2_sq += w * ((g[0] - kv[0]).powi(2) + (g[1] - kv[1]).powi(2));
        let l2 = -(data.source)(x) - dotv(divz.as_slice(), &v) + params.theta * dotv(phi_h, &v);
        out.lam2_sq += w * l2 * l2;
    }
    let weight = cd.diffusion.mean_half_trace(&cd.rule, &me.minv);
    out.s2_sq = cd.diffusion.stabilization_energy(&state.local_zeta(disc, c), weight);

    // edge terms
    let edeg = 2 * k1.max(k2) + 4;
    let cell = disc.mesh.cell(c);
    for (i, &e) in cell.edges.iter().enumerate() {
        let ef = &cd.frame.edges[i];
        let edge = disc.mesh.edge(e);
        let he = ef.length;
        let (rule, _) = edge_rule(ef.a, ef.b, edeg);
        let n = ef.normal;
        let t = ef.tangent;
        match edge.tag {
            BoundaryTag::Neumann => {
                for (x, w) in rule.iter() {
                    let s = matvec(&me.stress(eb, x, mu), n);
                    let tn = (data.traction)(x, n);
                    out.xi1_sq += he * w * ((s[0] - tn[0]).powi(2) + (s[1] - tn[1]).powi(2));
                }
            }
            BoundaryTag::Dirichlet => {
                for (x, w) in rule.iter() {
                    let dphi = (data.concentration)(x) - db.value(phi_h, x);
                    let gd = (data.concentration_grad)(x);
                    let kv = me.proxy_grad(db, x);
                    let tj = (gd[0] - kv[0]) * t.x + (gd[1] - kv[1]) * t.y;
                    out.xi2_sq += he * w * (dphi * dphi + tj * tj);
                }
            }
            BoundaryTag::Interior => {
                let nb = edge.neighbor(c).ok_or(VemError::MissingNeighbor { cell: c, edge: e })?;
                let other = &proxies[nb];
                let ob = &disc.cells[nb].elasticity.basis;
                let odb = &disc.cells[nb].diffusion.basis;
                for (x, w) in rule.iter() {
                    let s1 = matvec(&me.stress(eb, x, mu), n);
                    let s2 = matvec(&other.stress(ob, x, mu), n);
                    out.xi1_sq += he * w * ((s1[0] - s2[0]).powi(2) + (s1[1] - s2[1]).powi(2));
                    if options.tangential_jumps {
                        let a = me.proxy_grad(db, x);
                        let b = other.proxy_grad(odb, x);
                        let j = (a[0] - b[0]) * t.x + (a[1] - b[1]) * t.y;
                        out.xi2_sq += he * w * j * j;
                    }
                }
            }
        }
    }
    Ok(out.finish(params))
}

/// Components of the squared weighted true error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrueError {
    pub displacement: f64,
    pub pressure: f64,
    pub flux: f64,
    pub flux_div: f64,
    pub concentration: f64,
}

impl TrueError {
    pub fn total_sq(&self) -> f64 {
        self.displacement + self.pressure + self.flux + self.flux_div + self.concentration
    }

    pub fn total(&self) -> f64 {
        self.total_sq().sqrt()
    }
}

/// Weighted error between the exact fields and the discrete projections.
/// The flux weight uses the mobility at the exact fields.
pub fn true_error(
    disc: &Discretization,
    params: &ModelParameters,
    state: &SystemState,
    exact: Option<&ExactSolution>,
) -> Result<TrueError> {
    let ex = exact.ok_or(VemError::MissingExactSolution)?;
    let (k1, k2) = (disc.orders.k1, disc.orders.k2);
    let degree = (2 * k1 + 4).max(2 * k2 + 4);
    let parts = (0..disc.num_cells())
        .into_par_iter()
        .map(|c| -> Result<TrueError> {
            let rule = polygon_quadrature(&disc.mesh, c, degree)?;
            let cd = &disc.cells[c];
            let eb = &cd.elasticity.basis;
            let db = &cd.diffusion.basis;
            let nk1 = eb.len();
            let uc = state.energy_coeffs(disc, c);
            let (u1x, u1y) = deriv(&uc.as_slice()[..nk1], k1, eb.h);
            let (u2x, u2y) = deriv(&uc.as_slice()[nk1..], k1, eb.h);
            let p = state.p_coeffs(disc, c);
            let phi = state.phi_coeffs(disc, c);
            let zc = state.flux_coeffs(disc, c);
            let nk2 = db.len();
            let divz = state.div_zeta_coeffs(disc, c);
            let mut t = TrueError::default();
            for (x, w) in rule.iter() {
                let v = eb.eval(x);
                let g = (ex.grad_u)(x);
                let e11 = g[0][0] - dotv(&u1x, &v);
                let e22 = g[1][1] - dotv(&u2y, &v);
                let e12 = 0.5 * (g[0][1] + g[1][0]) - 0.5 * (dotv(&u1y, &v) + dotv(&u2x, &v));
                t.displacement += w * 2.0 * params.mu * (e11 * e11 + e22 * e22 + 2.0 * e12 * e12);
                let pe = (ex.p)(x);
                let dp = pe - dotv(p.as_slice(), &v);
                t.pressure += w * (1.0 / (2.0 * params.mu) + 1.0 / params.lambda) * dp * dp;
                let dv = db.eval(x);
                let z = (ex.zeta)(x);
                let dz = [
                    z[0] - dotv(&zc.as_slice()[..nk2], &dv),
                    z[1] - dotv(&zc.as_slice()[nk2..], &dv),
                ];
                let m = params.mobility_at(params.stress_trace(g[0][0] + g[1][1], pe), x)?;
                t.flux += w * (dz[0] * dz[0] + dz[1] * dz[1]) / m;
                let dd = (ex.div_zeta)(x) - dotv(divz.as_slice(), &dv);
                t.flux_div += w * params.m_bound * dd * dd;
                let df = (ex.phi)(x) - dotv(phi.as_slice(), &dv);
                t.concentration += w * (1.0 / params.m_bound + params.theta) * df * df;
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.iter().fold(TrueError::default(), |a, b| TrueError {
        displacement: a.displacement + b.displacement,
        pressure: a.pressure + b.pressure,
        flux: a.flux + b.flux,
        flux_div: a.flux_div + b.flux_div,
        concentration: a.concentration + b.concentration,
    }))
}

/// Largest Frobenius norm of a symmetric tensor field over an `n x n`
/// sample grid of the box `[lo, hi]`, restricted to points where `inside`
/// holds. Non-finite samples are skipped.
pub fn estimate_m_bound(
    tensor: &(dyn Fn(Point2) -> SymTensor + Sync),
    lo: Point2,
    hi: Point2,
    n: usize,
    inside: &(dyn Fn(Point2) -> bool + Sync),
) -> f64 {
    let n = n.max(2);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0_f64;
            for j in 0..n {
                let x = Point2::new(
                    lo.x + (hi.x - lo.x) * i as f64 / (n - 1) as f64,
                    lo.y + (hi.y - lo.y) * j as f64 / (n - 1) as f64,
                );
                if !inside(x) {
                    continue;
                }
                let t = tensor(x);
                let f = (t[0] * t[0] + 2.0 * t[1] * t[1] + t[2] * t[2]).sqrt();
                if f.is_finite() {
                    best = best.max(f);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

pub const INDICATOR_CSV_HEADER: &str = "cell_id,Xi1sq,Xi2sq,eta1sq,eta2sq,Lam1sq,Lam2sq,S1sq,S2sq,ThetaEsq";

pub fn write_indicator_csv<W: Write>(locals: &[LocalIndicators], mut w: W) -> Result<()> {
    writeln!(w, "{INDICATOR_CSV_HEADER}")?;
    for l in locals {
        writeln!(
            w,
            "{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            l.cell, l.xi1_sq, l.xi2_sq, l.eta1_sq, l.eta2_sq, l.lam1_sq, l.lam2_sq, l.s1_sq, l.s2_sq, l.theta_sq
        )?;
    }
    Ok(())
}
