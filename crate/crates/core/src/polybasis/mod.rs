//! Scaled monomials `m_a(x) = ((x - x_E) / h_E)^a`, vector polynomial bases
//! and quadrature.
//!
//! Polynomials are stored as coefficient vectors in the graded
//! lexicographic order `1, x, y, x^2, xy, y^2, ...` so a degree-`k`
//! coefficient vector is a prefix of the degree-`k + 1` one. Vector fields
//! in `P_k^2` stack the `x` block first, then the `y` block.

mod quadrature;

pub use quadrature::{
    edge_gauss_lobatto, edge_rule, gauss_legendre, lagrange_basis, lagrange_derivatives,
    polygon_quadrature, polygon_rule, triangle_rule, QuadratureRule,
};

use nalgebra::DMatrix;

use crate::geometry::{Point2, PolyCell};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub a: usize,
    pub b: usize,
}

impl MultiIndex {
    pub fn degree(self) -> usize {
        self.a + self.b
    }
}

/// `dim P_k` in two variables; zero for negative `k`.
pub const fn dim(k: isize) -> usize {
    if k < 0 {
        0
    } else {
        let k = k as usize;
        (k + 1) * (k + 2) / 2
    }
}

/// Position of `x^a y^b` in the graded lexicographic ordering.
pub const fn index_of(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

pub fn multi_indices(k: usize) -> Vec<MultiIndex> {
    (0..=k)
        .flat_map(|d| (0..=d).map(move |b| MultiIndex { a: d - b, b }))
        .collect()
}

/// Raw monomial values `x^a y^b` of degree up to `k` at scaled coordinates.
pub fn monomials_at(k: usize, x: f64, y: f64, out: &mut [f64]) {
    let mut px = [1.0; 16];
    let mut py = [1.0; 16];
    for i in 1..=k {
        px[i] = px[i - 1] * x;
        py[i] = py[i - 1] * y;
    }
    let mut i = 0;
    for d in 0..=k {
        for b in 0..=d {
            out[i] = px[d - b] * py[b];
            i += 1;
        }
    }
}

/// Scaled monomial basis of a cell.
#[derive(Clone, Debug)]
pub struct ScaledMonomialBasis {
    pub center: Point2,
    pub h: f64,
    pub degree: usize,
    pub indices: Vec<MultiIndex>,
}

impl ScaledMonomialBasis {
    pub fn new(center: Point2, h: f64, degree: usize) -> Self {
        Self {
            center,
            h,
            degree,
            indices: multi_indices(degree),
        }
    }

    pub fn for_cell(cell: &PolyCell, degree: usize) -> Self {
        Self::new(cell.centroid, cell.diameter, degree)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn scaled(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.center.x) / self.h, (p.y - self.center.y) / self.h)
    }

    pub fn eval(&self, p: Point2) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let (x, y) = self.scaled(p);
        monomials_at(self.degree, x, y, &mut out);
        out
    }

    /// Physical gradients of every basis monomial.
    pub fn eval_grads(&self, p: Point2) -> Vec<[f64; 2]> {
        let (x, y) = self.scaled(p);
        let low = if self.degree == 0 {
            vec![]
        } else {
            let mut v = vec![0.0; dim(self.degree as isize - 1)];
            monomials_at(self.degree - 1, x, y, &mut v);
            v
        };
        self.indices
            .iter()
            .map(|m| {
                let gx = if m.a > 0 {
                    m.a as f64 * low[index_of(m.a - 1, m.b)]
                } else {
                    0.0
                };
                let gy = if m.b > 0 {
                    m.b as f64 * low[index_of(m.a, m.b - 1)]
                } else {
                    0.0
                };
                [gx / self.h, gy / self.h]
            })
            .collect()
    }

    /// Evaluates `sum_i c_i m_i` at `p`; `c` may be shorter than the basis.
    pub fn value(&self, c: &[f64], p: Point2) -> f64 {
        let vals = self.eval(p);
        c.iter().zip(&vals).map(|(a, b)| a * b).sum()
    }
}

/// Coefficients of `d/dx_hat` of a degree-`k` polynomial (degree `k - 1`).
pub fn dx_hat(c: &[f64], k: usize) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let mut out = vec![0.0; dim(k as isize - 1)];
    for m in multi_indices(k) {
        if m.a > 0 {
            out[index_of(m.a - 1, m.b)] += m.a as f64 * c[index_of(m.a, m.b)];
        }
    }
    out
}

/// Coefficients of `d/dy_hat` of a degree-`k` polynomial.
pub fn dy_hat(c: &[f64], k: usize) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let mut out = vec![0.0; dim(k as isize - 1)];
    for m in multi_indices(k) {
        if m.b > 0 {
            out[index_of(m.a, m.b - 1)] += m.b as f64 * c[index_of(m.a, m.b)];
        }
    }
    out
}

/// Which vector polynomial family a [`VectorPolyBasis`] spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorKind {
    /// All of `P_k^2`.
    Full,
    /// `grad_hat M_{k+1}` without the constant.
    Gradient,
    /// `m_perp M_{k-1}` with `m_perp = (y_hat, -x_hat)`.
    Complement,
}

/// A vector polynomial basis described by its `P_k^2` coefficient columns.
#[derive(Clone, Debug)]
pub struct VectorPolyBasis {
    pub kind: VectorKind,
    pub degree: usize,
    /// Column `j` holds the `P_k^2` coefficients of basis element `j`.
    pub columns: DMatrix<f64>,
}

impl VectorPolyBasis {
    pub fn new(kind: VectorKind, k: usize) -> Self {
        let n = dim(k as isize);
        let cols: Vec<Vec<f64>> = match kind {
            VectorKind::Full => (0..2 * n)
                .map(|j| {
                    let mut v = vec![0.0; 2 * n];
                    v[j] = 1.0;
                    v
                })
                .collect(),
            VectorKind::Gradient => multi_indices(k + 1)
                .into_iter()
                .skip(1)
                .map(|m| {
                    let mut v = vec![0.0; 2 * n];
                    if m.a > 0 {
                        v[index_of(m.a - 1, m.b)] = m.a as f64;
                    }
                    if m.b > 0 {
                        v[n + index_of(m.a, m.b - 1)] = m.b as f64;
                    }
                    v
                })
                .collect(),
            VectorKind::Complement => {
                if k == 0 {
                    Vec::new()
                } else {
                    multi_indices(k - 1)
                        .into_iter()
                        .map(|m| {
                            let mut v = vec![0.0; 2 * n];
                            v[index_of(m.a, m.b + 1)] = 1.0;
                            v[n + index_of(m.a + 1, m.b)] = -1.0;
                            v
                        })
                        .collect()
                }
            }
        };
        let columns = DMatrix::from_fn(2 * n, cols.len(), |i, j| cols[j][i]);
        Self {
            kind,
            degree: k,
            columns,
        }
    }

    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }
}

/// `P_k^2 = grad_hat M_{k+1} (minus constants) + m_perp M_{k-1}` as a change of basis.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub degree: usize,
    pub n_grad: usize,
    pub n_perp: usize,
    /// Columns: gradient elements then complement elements, in `P_k^2` coefficients.
    pub to_monomial: DMatrix<f64>,
    /// Inverse of `to_monomial`: column `j` expresses the `j`-th vector
    /// monomial in the decomposition basis.
    pub from_monomial: DMatrix<f64>,
}

impl Decomposition {
    pub fn new(k: usize) -> Self {
        let g = VectorPolyBasis::new(VectorKind::Gradient, k);
        let c = VectorPolyBasis::new(VectorKind::Complement, k);
        let n = 2 * dim(k as isize);
        let mut t = DMatrix::zeros(n, n);
        t.columns_mut(0, g.len()).copy_from(&g.columns);
        t.columns_mut(g.len(), c.len()).copy_from(&c.columns);
        let from_monomial = t
            .clone()
            .try_inverse()
            .expect("the gradient/complement split of P_k^2 is a basis");
        Self {
            degree: k,
            n_grad: g.len(),
            n_perp: c.len(),
            to_monomial: t,
            from_monomial,
        }
    }
}

/// L2 Gram matrix `int_E m_i m_j` of the degree-`k` scaled monomials.
pub fn mass_matrix(basis: &ScaledMonomialBasis, rule: &QuadratureRule) -> DMatrix<f64> {
    let n = basis.len();
    let mut m = DMatrix::zeros(n, n);
    let mut v = vec![0.0; n];
    for (p, w) in rule.iter() {
        let (x, y) = basis.scaled(p);
        monomials_at(basis.degree, x, y, &mut v);
        for i in 0..n {
            let wi = w * v[i];
            for j in i..n {
                m[(i, j)] += wi * v[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}
