use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value, gradient and Hessian of a scalar field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Self { v, dx: 0.0, dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 }
    }

    pub const fn x(x: f64) -> Self {
        Self { v: x, dx: 1.0, dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 }
    }

    pub const fn y(y: f64) -> Self {
        Self { v: y, dx: 0.0, dy: 1.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 }
    }

    /// Composition `g(self)` given `g`, `g'` and `g''` at `self.v`.
    pub fn compose(self, g: f64, g1: f64, g2: f64) -> Self {
        Self {
            v: g,
            dx: g1 * self.dx,
            dy: g1 * self.dy,
            dxx: g2 * self.dx * self.dx + g1 * self.dxx,
            dxy: g2 * self.dx * self.dy + g1 * self.dxy,
            dyy: g2 * self.dy * self.dy + g1 * self.dyy,
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose(c, -s, -c)
    }

    pub fn powi(self, n: i32) -> Self {
        let nf = n as f64;
        self.compose(
            self.v.powi(n),
            nf * self.v.powi(n - 1),
            nf * (nf - 1.0) * self.v.powi(n - 2),
        )
    }

    pub fn scale(self, s: f64) -> Self {
        Self {
            v: s * self.v,
            dx: s * self.dx,
            dy: s * self.dy,
            dxx: s * self.dxx,
            dxy: s * self.dxy,
            dyy: s * self.dyy,
        }
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.dx, self.dy]
    }

    pub fn laplacian(&self) -> f64 {
        self.dxx + self.dyy
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, o: f64) -> Jet {
        self.v += o;
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxy: self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            dyy: self.dyy * o.v + 2.0 * self.dy * o.dy + self.v * o.dyy,
        }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.scale(s)
    }
}

impl Div for Jet {
    type Output = Jet;
    /// Quotient rule.
    fn div(self, d: Jet) -> Jet {
        let q = self.v / d.v;
        let qx = (self.dx - q * d.dx) / d.v;
        let qy = (self.dy - q * d.dy) / d.v;
        Jet {
            v: q,
            dx: qx,
            dy: qy,
            dxx: (self.dxx - 2.0 * qx * d.dx - q * d.dxx) / d.v,
            dxy: (self.dxy - qx * d.dy - qy * d.dx - q * d.dxy) / d.v,
            dyy: (self.dyy - 2.0 * qy * d.dy - q * d.dyy) / d.v,
        }
    }
}
