use crate::error::{Result, VemError};
use crate::geometry::{chebyshev_disk, polygon_centroid, polygon_kernel, signed_area, Point2, PolyMesh};

#[derive(Clone, Debug, Default)]
pub struct QuadratureRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point2, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.iter().map(|(p, w)| w * f(p)).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss-Legendre rule on `[-1, 1]`, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss-Lobatto nodes and weights with `k + 1` points on `[-1, 1]`,
/// including both endpoints; exact up to degree `2k - 1`.
pub fn edge_gauss_lobatto(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1);
    let n = k + 1;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let kk = k as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = -(std::f64::consts::PI * i as f64 / kk).cos();
        if i > 0 {
            // interior nodes are the roots of P_k'
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(k, z);
                // P_k'' from the Legendre ODE
                let d2p = (2.0 * z * dp - kk * (kk + 1.0) * p) / (1.0 - z * z);
                let dz = dp / d2p;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
        }
        let (p, _) = legendre_with_derivative(k, z);
        let wi = 2.0 / (kk * (kk + 1.0) * p * p);
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Lagrange basis on `nodes` evaluated at `t`.
pub fn lagrange_basis(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (t - xj) / (nodes[i] - xj))
                .product()
        })
        .collect()
}

/// Derivatives (in `t`) of the Lagrange basis on `nodes` at `t`.
pub fn lagrange_derivatives(nodes: &[f64], t: f64) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for m in 0..n {
                if m == i {
                    continue;
                }
                let mut prod = 1.0 / (nodes[i] - nodes[m]);
                for j in 0..n {
                    if j != i && j != m {
                        prod *= (t - nodes[j]) / (nodes[i] - nodes[j]);
                    }
                }
                s += prod;
            }
            s
        })
        .collect()
}

/// Gauss-Legendre rule on the segment `a -> b`, exact to `degree`. Also
/// returns the reference parameters in `[-1, 1]`.
pub fn edge_rule(a: Point2, b: Point2, degree: usize) -> (QuadratureRule, Vec<f64>) {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * a.dist(b);
    let points = x
        .iter()
        .map(|&t| a + (b - a) * (0.5 * (t + 1.0)))
        .collect();
    let weights = w.iter().map(|wi| wi * half).collect();
    (
        QuadratureRule {
            points,
            weights,
            degree: 2 * n - 1,
        },
        x,
    )
}

/// Collapsed (Duffy) Gauss rule on a triangle, exact to `degree`.
pub fn triangle_rule(a: Point2, b: Point2, c: Point2, degree: usize) -> QuadratureRule {
    let n = (degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    let area = 0.5 * (b - a).cross(c - a);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        let s = 0.5 * (x[i] + 1.0);
        for j in 0..n {
            let t = 0.5 * (x[j] + 1.0);
            points.push(a + (b - a) * s + (c - a) * (t * (1.0 - s)));
            weights.push(0.5 * w[i] * 0.5 * w[j] * (1.0 - s) * 2.0 * area);
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

fn fan(pts: &[Point2], z: Point2, degree: usize) -> Option<QuadratureRule> {
    let n = pts.len();
    let scale = crate::geometry::polygon_diameter(pts);
    let mut rule = QuadratureRule {
        degree,
        ..Default::default()
    };
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        if (a - z).cross(b - z) <= 1e-13 * scale * scale {
            return None;
        }
        let t = triangle_rule(z, a, b, degree);
        rule.points.extend(t.points);
        rule.weights.extend(t.weights);
    }
    Some(rule)
}

/// Quadrature on a counter-clockwise polygon by fanning from the centroid,
/// or from the Chebyshev centre of the kernel if the centroid cannot see
/// every edge. `None` when the polygon is not star-shaped.
pub fn polygon_rule(pts: &[Point2], degree: usize) -> Option<QuadratureRule> {
    debug_assert!(signed_area(pts) > 0.0);
    fan(pts, polygon_centroid(pts), degree).or_else(|| {
        let kernel = polygon_kernel(pts);
        if kernel.len() < 3 {
            return None;
        }
        let (z, _) = chebyshev_disk(&kernel)?;
        fan(pts, z, degree)
    })
}

/// Quadrature rule on cell `c`, exact for polynomials up to `degree`.
pub fn polygon_quadrature(mesh: &PolyMesh, c: usize, degree: usize) -> Result<QuadratureRule> {
    polygon_rule(&mesh.cell_points(c), degree).ok_or(VemError::CentroidOutsideKernel { cell: c })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn lobatto_nodes() {
        let (x, w) = edge_gauss_lobatto(1);
        assert_eq!((x, w), (vec![-1.0, 1.0], vec![1.0, 1.0]));
        let (x, w) = edge_gauss_lobatto(2);
        assert_eq!(x, vec![-1.0, 0.0, 1.0]);
        for (a, b) in w.iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let (x, _) = edge_gauss_lobatto(3);
        assert!((x[1] + 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!((x[2] - 1.0 / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lobatto_exactness() {
        for k in 1..8 {
            let (x, w) = edge_gauss_lobatto(k);
            for d in 0..2 * k {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                let exact = if d % 2 == 0 { 2.0 / (d + 1) as f64 } else { 0.0 };
                assert!((q - exact).abs() < 1e-13, "k={k} d={d}");
            }
        }
    }

    #[test]
    fn legendre_exactness() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for d in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                let exact = if d % 2 == 0 { 2.0 / (d + 1) as f64 } else { 0.0 };
                assert!((q - exact).abs() < 1e-13, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn square_integrals() {
        let r = polygon_rule(&unit_square(), 5).unwrap();
        assert!((r.total_weight() - 1.0).abs() < 1e-14);
        assert!((r.integrate(|p| p.x * p.y) - 0.25).abs() < 1e-14);
        assert!((r.integrate(|p| p.x.powi(3) * p.y.powi(2)) - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_integrals() {
        // int over the reference triangle of x^a y^b = a! b! / (a + b + 2)!
        let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for d in 0..10 {
            let r = triangle_rule(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0), d);
            for a in 0..=d as u32 {
                let b = d as u32 - a;
                let exact = f(a) * f(b) / f(a + b + 2);
                let q = r.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32));
                assert!((q - exact).abs() < 1e-14, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn non_convex_polygon_uses_kernel() {
        // an arrow whose centroid does not see the notch
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(4.0, 1.0),
            Point2::new(0.2, 0.2),
            Point2::new(1.0, 4.0),
            Point2::new(0.0, 4.0),
        ];
        let r = polygon_rule(&pts, 3).unwrap();
        assert!((r.total_weight() - signed_area(&pts)).abs() < 1e-12);
    }

    #[test]
    fn lagrange_derivative_matches_difference() {
        let (nodes, _) = edge_gauss_lobatto(3);
        let t = 0.37;
        let d = lagrange_derivatives(&nodes, t);
        let (p, m) = (lagrange_basis(&nodes, t + 1e-6), lagrange_basis(&nodes, t - 1e-6));
        for i in 0..4 {
            assert!((d[i] - (p[i] - m[i]) / 2e-6).abs() < 1e-7);
        }
    }
}
