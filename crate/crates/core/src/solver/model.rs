use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::geometry::Point2;

/// Isotropic mobility `M = m(tr sigma) I` with `sigma = 2 mu eps(u) - p I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mobility {
    /// `m = value`.
    Constant { value: f64 },
    /// `m = scale * exp(rate * tr sigma)`.
    ExpTrace { scale: f64, rate: f64 },
    /// `m = 1 + eps / tr sigma`.
    RationalTrace { eps: f64 },
}

impl Mobility {
    pub fn is_constant(&self) -> bool {
        matches!(self, Mobility::Constant { .. })
    }

    /// Scalar `m(t)`. `at` only labels the error.
    pub fn value(&self, t: f64, at: Point2) -> Result<f64> {
        let m = match *self {
            Mobility::Constant { value } => value,
            Mobility::ExpTrace { scale, rate } => scale * (rate * t).exp(),
            Mobility::RationalTrace { eps } => {
                if t.abs() < 1e-14 {
                    return Err(VemError::CoefficientSingular {
                        x: at.x,
                        y: at.y,
                        trace: t,
                    });
                }
                1.0 + eps / t
            }
        };
        if !(m > 0.0 && m.is_finite()) {
            return Err(VemError::CoefficientSingular {
                x: at.x,
                y: at.y,
                trace: t,
            });
        }
        Ok(m)
    }

    /// Unguarded `m(t)`; infinite or negative near the pole of the rational law.
    pub fn raw(&self, t: f64) -> f64 {
        match *self {
            Mobility::Constant { value } => value,
            Mobility::ExpTrace { scale, rate } => scale * (rate * t).exp(),
            Mobility::RationalTrace { eps } => 1.0 + eps / t,
        }
    }

    /// `dm/dt`.
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Mobility::Constant { .. } => 0.0,
            Mobility::ExpTrace { scale, rate } => scale * rate * (rate * t).exp(),
            Mobility::RationalTrace { eps } => -eps / (t * t),
        }
    }
}

/// Active stress `l(phi)` entering `p = -lambda div u + l(phi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActiveStress {
    Zero,
    /// `l(phi) = phi`.
    Identity,
    /// `l(phi) = base + phi^2 / (1 + phi^2)`.
    Saturating { base: f64 },
}

impl ActiveStress {
    pub fn value(&self, phi: f64) -> f64 {
        match *self {
            ActiveStress::Zero => 0.0,
            ActiveStress::Identity => phi,
            ActiveStress::Saturating { base } => base + phi * phi / (1.0 + phi * phi),
        }
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        match *self {
            ActiveStress::Zero => 0.0,
            ActiveStress::Identity => 1.0,
            ActiveStress::Saturating { .. } => {
                let d = 1.0 + phi * phi;
                2.0 * phi / (d * d)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ActiveStress::Zero)
    }
}

/// Moduli, the mobility bound `M` and the two nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub mu: f64,
    pub lambda: f64,
    pub theta: f64,
    /// Upper bound `M` for the Frobenius norm of the mobility.
    pub m_bound: f64,
    pub mobility: Mobility,
    pub active: ActiveStress,
}

impl ModelParameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(VemError::Config(s.to_string()));
        if !(self.mu > 0.0) {
            return bad("mu must be positive");
        }
        if !(self.lambda >= 1.0) {
            return bad("lambda must be at least 1");
        }
        if !(self.m_bound > 0.0) {
            return bad("M must be positive");
        }
        if !(self.theta >= 0.0 && self.theta <= 1.0 / self.m_bound * (1.0 + 1e-12)) {
            return bad("theta must lie in [0, 1/M]");
        }
        Ok(())
    }

    /// Mobility at stress trace `t`, clamped to the admissible band `[1/M, M]`.
    pub fn mobility_at(&self, t: f64, at: Point2) -> Result<f64> {
        let m = self.mobility.raw(t);
        if m.is_nan() {
            return Err(VemError::CoefficientSingular {
                x: at.x,
                y: at.y,
                trace: t,
            });
        }
        Ok(m.clamp(1.0 / self.m_bound, self.m_bound))
    }

    /// Derivative of [`Self::mobility_at`]; zero where the clamp is active.
    pub fn mobility_derivative_at(&self, t: f64) -> f64 {
        let m = self.mobility.raw(t);
        if m > 1.0 / self.m_bound && m < self.m_bound {
            self.mobility.derivative(t)
        } else {
            0.0
        }
    }

    /// Trace of `2 mu eps - p I` from `div u` and `p`.
    pub fn stress_trace(&self, div_u: f64, p: f64) -> f64 {
        2.0 * self.mu * div_u - 2.0 * p
    }
}

pub type ScalarField = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point2) -> [f64; 2] + Send + Sync>;
/// Boundary datum depending on the point and the outward unit normal.
pub type NormalField = Arc<dyn Fn(Point2, Point2) -> [f64; 2] + Send + Sync>;

/// Right-hand sides and boundary data of the coupled problem.
#[derive(Clone)]
pub struct ProblemData {
    pub body_force: VectorField,
    pub source: ScalarField,
    /// `u` on the Dirichlet part.
    pub displacement: VectorField,
    /// `sigma n` on the Neumann part.
    pub traction: NormalField,
    /// `phi` on the Dirichlet part.
    pub concentration: ScalarField,
    /// Gradient of the Dirichlet concentration (estimator only).
    pub concentration_grad: VectorField,
    /// The flux vector `zeta` on the Neumann part; only `zeta . n` is used.
    pub flux: VectorField,
}

impl ProblemData {
    /// Homogeneous data.
    pub fn zero() -> Self {
        Self {
            body_force: Arc::new(|_| [0.0; 2]),
            source: Arc::new(|_| 0.0),
            displacement: Arc::new(|_| [0.0; 2]),
            traction: Arc::new(|_, _| [0.0; 2]),
            concentration: Arc::new(|_| 0.0),
            concentration_grad: Arc::new(|_| [0.0; 2]),
            flux: Arc::new(|_| [0.0; 2]),
        }
    }
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ProblemData { .. }")
    }
}
