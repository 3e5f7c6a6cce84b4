use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::jet::Jet;
use crate::estimator::ExactSolution;
use crate::geometry::{l_shape_boundary, unit_square_boundary, BoundaryTag, MeshFamily, Point2};
use crate::solver::{ActiveStress, Mobility, ModelParameters, ProblemData};

/// Jets of `(u_1, u_2)` and `phi` at a point.
pub type FieldJets = Arc<dyn Fn(Point2) -> ([Jet; 2], Jet) + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    UnitSquare,
    LShape,
}

impl Domain {
    pub fn contains(self, p: Point2) -> bool {
        match self {
            Domain::UnitSquare => (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y),
            Domain::LShape => {
                (-1.0..=1.0).contains(&p.x) && (-1.0..=1.0).contains(&p.y) && !(p.x > 0.0 && p.y < 0.0)
            }
        }
    }

    pub fn bounding_box(self) -> (Point2, Point2) {
        match self {
            Domain::UnitSquare => (Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)),
            Domain::LShape => (Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
        }
    }

    pub fn boundary(self) -> fn(Point2) -> BoundaryTag {
        match self {
            Domain::UnitSquare => unit_square_boundary,
            Domain::LShape => l_shape_boundary,
        }
    }

    pub fn default_family(self) -> MeshFamily {
        match self {
            Domain::UnitSquare => MeshFamily::Square,
            Domain::LShape => MeshFamily::LShape,
        }
    }
}

/// Every derived quantity at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointData {
    pub u: [f64; 2],
    pub grad_u: [[f64; 2]; 2],
    pub p: f64,
    pub sigma: [[f64; 2]; 2],
    pub f: [f64; 2],
    pub phi: f64,
    pub grad_phi: [f64; 2],
    pub mobility: f64,
    pub zeta: [f64; 2],
    pub div_zeta: f64,
    pub g: f64,
}

/// Exact `u` and `phi` together with the model; everything else is derived.
#[derive(Clone)]
pub struct ManufacturedProblem {
    pub name: String,
    pub domain: Domain,
    pub params: ModelParameters,
    pub fields: FieldJets,
}

impl std::fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("params", &self.params)
            .finish()
    }
}

impl ManufacturedProblem {
    /// `p = -lambda div u + l(phi)`, `sigma = 2 mu eps(u) - p I`,
    /// `f = -div sigma`, `zeta = M grad phi`, `g = theta phi - div zeta`.
    pub fn at(&self, x: Point2) -> PointData {
        let pr = &self.params;
        let ([u1, u2], phi) = (self.fields)(x);
        let divu = u1.dx + u2.dy;
        let gdivu = [u1.dxx + u2.dxy, u1.dxy + u2.dyy];
        let l = pr.active.value(phi.v);
        let dl = pr.active.derivative(phi.v);
        let p = -pr.lambda * divu + l;
        let gp = [-pr.lambda * gdivu[0] + dl * phi.dx, -pr.lambda * gdivu[1] + dl * phi.dy];
        let e12 = 0.5 * (u1.dy + u2.dx);
        let sigma = [[2.0 * pr.mu * u1.dx - p, 2.0 * pr.mu * e12], [2.0 * pr.mu * e12, 2.0 * pr.mu * u2.dy - p]];
        let div_eps = [
            u1.dxx + 0.5 * (u1.dyy + u2.dxy),
            0.5 * (u1.dxy + u2.dxx) + u2.dyy,
        ];
        let f = [
            -(2.0 * pr.mu * div_eps[0] - gp[0]),
            -(2.0 * pr.mu * div_eps[1] - gp[1]),
        ];
        let tr = pr.stress_trace(divu, p);
        let gtr = [2.0 * pr.mu * gdivu[0] - 2.0 * gp[0], 2.0 * pr.mu * gdivu[1] - 2.0 * gp[1]];
        let m = pr.mobility_at(tr, x).unwrap_or(f64::NAN);
        let dm = pr.mobility_derivative_at(tr);
        let zeta = [m * phi.dx, m * phi.dy];
        let div_zeta = dm * (gtr[0] * phi.dx + gtr[1] * phi.dy) + m * phi.laplacian();
        PointData {
            u: [u1.v, u2.v],
            grad_u: [[u1.dx, u1.dy], [u2.dx, u2.dy]],
            p,
            sigma,
            f,
            phi: phi.v,
            grad_phi: phi.grad(),
            mobility: m,
            zeta,
            div_zeta,
            g: pr.theta * phi.v - div_zeta,
        }
    }

    pub fn problem_data(&self) -> ProblemData {
        let s = Arc::new(self.clone());
        let (a, b, c, d, e, f, g) = (s.clone(), s.clone(), s.clone(), s.clone(), s.clone(), s.clone(), s);
        ProblemData {
            body_force: Arc::new(move |x| a.at(x).f),
            source: Arc::new(move |x| b.at(x).g),
            displacement: Arc::new(move |x| c.at(x).u),
            traction: Arc::new(move |x, n| {
                let s = d.at(x).sigma;
                [s[0][0] * n.x + s[0][1] * n.y, s[1][0] * n.x + s[1][1] * n.y]
            }),
            concentration: Arc::new(move |x| e.at(x).phi),
            concentration_grad: Arc::new(move |x| f.at(x).grad_phi),
            flux: Arc::new(move |x| g.at(x).zeta),
        }
    }

    pub fn exact(&self) -> ExactSolution {
        let s = Arc::new(self.clone());
        let (a, b, c, d, e, f) = (s.clone(), s.clone(), s.clone(), s.clone(), s.clone(), s);
        ExactSolution {
            u: Arc::new(move |x| a.at(x).u),
            grad_u: Arc::new(move |x| b.at(x).grad_u),
            p: Arc::new(move |x| c.at(x).p),
            zeta: Arc::new(move |x| d.at(x).zeta),
            div_zeta: Arc::new(move |x| e.at(x).div_zeta),
            phi: Arc::new(move |x| f.at(x).phi),
        }
    }

    /// Checks the derived data at `n` random interior points: the balance
    /// laws rebuilt from central differences of `sigma` and `zeta`, and the
    /// two constitutive relations.
    pub fn self_check(&self, n: usize, seed: u64) -> SelfCheck {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = self.domain.bounding_box();
        let pr = &self.params;
        let h = 1e-5;
        let mut out = SelfCheck::default();
        let mut count = 0;
        while count < n {
            let x = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            let inner = [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)]
                .iter()
                .all(|&(dx, dy)| self.domain.contains(Point2::new(x.x + 2.0 * dx, x.y + 2.0 * dy)));
            if !inner {
                continue;
            }
            count += 1;
            let d = self.at(x);
            let sx = |dx: f64, dy: f64| self.at(Point2::new(x.x + dx, x.y + dy));
            let (xp, xm, yp, ym) = (sx(h, 0.0), sx(-h, 0.0), sx(0.0, h), sx(0.0, -h));
            let div_sigma = [
                (xp.sigma[0][0] - xm.sigma[0][0] + yp.sigma[0][1] - ym.sigma[0][1]) / (2.0 * h),
                (xp.sigma[1][0] - xm.sigma[1][0] + yp.sigma[1][1] - ym.sigma[1][1]) / (2.0 * h),
            ];
            let div_zeta = (xp.zeta[0] - xm.zeta[0] + yp.zeta[1] - ym.zeta[1]) / (2.0 * h);
            let fs = 1.0 + d.f[0].abs().max(d.f[1].abs()) + d.sigma.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            let r1 = (d.f[0] + div_sigma[0]).abs().max((d.f[1] + div_sigma[1]).abs()) / fs;
            let gs = 1.0 + d.g.abs() + d.div_zeta.abs() + d.zeta[0].abs().max(d.zeta[1].abs());
            let r2 = (pr.theta * d.phi - div_zeta - d.g).abs() / gs;
            let divu = d.grad_u[0][0] + d.grad_u[1][1];
            let r3 = (d.p + pr.lambda * divu - pr.active.value(d.phi)).abs() / (1.0 + d.p.abs());
            let r4 = (d.zeta[0] - d.mobility * d.grad_phi[0])
                .abs()
                .max((d.zeta[1] - d.mobility * d.grad_phi[1]).abs())
                / (1.0 + d.zeta[0].abs().max(d.zeta[1].abs()));
            out.momentum = out.momentum.max(r1);
            out.mass = out.mass.max(r2);
            out.pressure = out.pressure.max(r3);
            out.flux = out.flux.max(r4);
        }
        out
    }
}

/// Largest relative residuals found by [`ManufacturedProblem::self_check`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SelfCheck {
    pub momentum: f64,
    pub mass: f64,
    pub pressure: f64,
    pub flux: f64,
}

impl SelfCheck {
    /// Differences are second-order accurate, so the balance laws are
    /// held to `1e-6`; the constitutive relations are algebraic.
    pub fn passes(&self) -> bool {
        self.momentum < 1e-6 && self.mass < 1e-6 && self.pressure < 1e-10 && self.flux < 1e-10
    }
}

/// Smooth solution on the unit square with `l(phi) = phi` and an
/// exponential stress-dependent mobility.
pub fn example1(mu: f64, lambda: f64, theta: f64) -> ManufacturedProblem {
    ManufacturedProblem {
        name: "example1".into(),
        domain: Domain::UnitSquare,
        params: ModelParameters {
            mu,
            lambda,
            theta,
            m_bound: 12.0,
            mobility: Mobility::ExpTrace { scale: 0.1, rate: -1e-8 },
            active: ActiveStress::Identity,
        },
        fields: Arc::new(|p| {
            let (x, y) = (Jet::x(p.x), Jet::y(p.y));
            let u1 = (x * x + x * x.cos() * y.sin()) * 0.2;
            let u2 = (y * y + x * y.cos() * x.sin()) * 0.2;
            let pi = std::f64::consts::PI;
            let phi = (y * pi).cos() + (x * pi).sin() + x * x + y * y;
            ([u1, u2], phi)
        }),
    }
}

pub const EXAMPLE2_SINGULARITY: Point2 = Point2 { x: 0.1, y: -0.1 };

/// Solution on the L-shape with a pole just outside the domain near the
/// reentrant corner.
pub fn example2() -> ManufacturedProblem {
    ManufacturedProblem {
        name: "example2".into(),
        domain: Domain::LShape,
        params: ModelParameters {
            mu: 1.4286e3,
            lambda: 357.1429,
            theta: 1e-3,
            m_bound: 2.0,
            mobility: Mobility::RationalTrace { eps: 1e-5 },
            active: ActiveStress::Saturating { base: 2.0 },
        },
        fields: Arc::new(|p| {
            let (x, y) = (Jet::x(p.x), Jet::y(p.y));
            let s = EXAMPLE2_SINGULARITY;
            let r2 = (x + (-s.x)).powi(2) + (y + (-s.y)).powi(2);
            let u1 = (x + (-1.0)) * (y + (-1.0)) / r2;
            let u2 = (x + 1.0) * (y + 1.0) / r2;
            let phi = (x + (-1.0)) * (x + 1.0) * (y + (-1.0)) * (y + 1.0) / r2;
            ([u1, u2], phi)
        }),
    }
}

fn monomial(a: i32, b: i32, x: f64, y: f64) -> Jet {
    let pw = |t: f64, n: i32, d: i32| -> f64 {
        if d > n {
            0.0
        } else {
            let c: f64 = ((n - d + 1)..=n).map(|k| k as f64).product();
            c * t.powi(n - d)
        }
    };
    Jet {
        v: pw(x, a, 0) * pw(y, b, 0),
        dx: pw(x, a, 1) * pw(y, b, 0),
        dy: pw(x, a, 0) * pw(y, b, 1),
        dxx: pw(x, a, 2) * pw(y, b, 0),
        dxy: pw(x, a, 1) * pw(y, b, 1),
        dyy: pw(x, a, 0) * pw(y, b, 2),
    }
}

fn full_polynomial(k: usize, shift: f64, x: f64, y: f64) -> Jet {
    let mut out = Jet::constant(0.0);
    for d in 0..=k as i32 {
        for b in 0..=d {
            let a = d - b;
            let c = (1.0 + a as f64 + shift * b as f64) / (2.0 + d as f64) * if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
            out = out + monomial(a, b, x, y).scale(c);
        }
    }
    out
}

/// Polynomial solution reproduced exactly by the discrete spaces: `u` of
/// degree `k1`, `phi` of degree `k2`, identity mobility, no active stress.
pub fn patch_problem(k1: usize, k2: usize, mu: f64, lambda: f64, theta: f64) -> ManufacturedProblem {
    ManufacturedProblem {
        name: format!("patch_{k1}_{k2}"),
        domain: Domain::UnitSquare,
        params: ModelParameters {
            mu,
            lambda,
            theta,
            m_bound: std::f64::consts::SQRT_2,
            mobility: Mobility::Constant { value: 1.0 },
            active: ActiveStress::Zero,
        },
        fields: Arc::new(move |p| {
            let u1 = full_polynomial(k1, 0.5, p.x, p.y);
            let u2 = full_polynomial(k1, -0.75, p.x, p.y);
            let phi = full_polynomial(k2, 1.5, p.x, p.y);
            ([u1, u2], phi)
        }),
    }
}
