use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;
use nalgebra::DVector;

use crate::error::{Result, VemError};

/// Sparse LU that keeps the symbolic analysis between numeric
/// factorizations of matrices with the same pattern.
#[derive(Default)]
pub struct SparseSolver {
    symbolic: Option<SymbolicLu<usize>>,
    pattern: Option<(usize, usize)>,
}

/// A numeric factorization of the symmetrically equilibrated matrix
/// `S A S`, `S = diag(max_j |a_ij|)^{-1/2}`.
pub struct Factorization {
    lu: Lu<usize, f64>,
    matrix: SparseColMat<usize, f64>,
    scale: DVector<f64>,
    pub tolerance: f64,
}

fn equilibrate(a: &SparseColMat<usize, f64>) -> Result<(SparseColMat<usize, f64>, DVector<f64>)> {
    let n = a.nrows();
    let mut big = vec![0.0_f64; n];
    for j in 0..a.ncols() {
        for (&i, &v) in a.row_idx_of_col_raw(j).iter().zip(a.val_of_col(j)) {
            big[i] = big[i].max(v.abs());
            big[j] = big[j].max(v.abs());
        }
    }
    let scale = DVector::from_iterator(n, big.iter().map(|&b| if b > 0.0 { 1.0 / b.sqrt() } else { 1.0 }));
    let mut trip = Vec::with_capacity(a.compute_nnz());
    for j in 0..a.ncols() {
        for (&i, &v) in a.row_idx_of_col_raw(j).iter().zip(a.val_of_col(j)) {
            trip.push(Triplet::new(i, j, v * scale[i] * scale[j]));
        }
    }
    let scaled = SparseColMat::try_new_from_triplets(n, a.ncols(), &trip).map_err(|_| VemError::SingularSystem)?;
    Ok((scaled, scale))
}

impl SparseSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(&mut self, matrix: &SparseColMat<usize, f64>) -> Result<Factorization> {
        let (matrix, scale) = equilibrate(matrix)?;
        let matrix = &matrix;
        let key = (matrix.nrows(), matrix.compute_nnz());
        if self.pattern != Some(key) {
            self.symbolic = None;
        }
        let sym = match &self.symbolic {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLu::try_new(matrix.symbolic()).map_err(|_| VemError::SingularSystem)?;
                self.symbolic = Some(s.clone());
                self.pattern = Some(key);
                s
            }
        };
        let lu = match Lu::try_new_with_symbolic(sym, matrix.as_ref()) {
            Ok(lu) => lu,
            Err(_) => return Err(VemError::SingularSystem),
        };
        Ok(Factorization {
            lu,
            matrix: matrix.clone(),
            scale,
            tolerance: 1e-10,
        })
    }
}

pub(crate) fn spmv(a: &SparseColMat<usize, f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(a.nrows());
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (&i, &v) in a.row_idx_of_col_raw(j).iter().zip(a.val_of_col(j)) {
            y[i] += v * xj;
        }
    }
    y
}

impl Factorization {
    fn raw_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let rhs = Col::<f64>::from_fn(b.len(), |i| b[i]);
        let x = self.lu.solve(&rhs);
        DVector::from_iterator(b.len(), (0..b.len()).map(|i| x[i]))
    }

    /// Solves `A x = b`, applying up to two steps of iterative refinement
    /// and checking the relative residual of the equilibrated system.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let b = &b.component_mul(&self.scale);
        let bn = b.norm();
        if bn == 0.0 {
            return Ok(DVector::zeros(b.len()));
        }
        let mut x = self.raw_solve(b);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(VemError::SingularSystem);
        }
        let mut r = b - spmv(&self.matrix, &x);
        let mut res = r.norm() / bn;
        for _ in 0..2 {
            if res <= self.tolerance * 1e-2 {
                break;
            }
            let dx = self.raw_solve(&r);
            let xn = &x + dx;
            let rn = b - spmv(&self.matrix, &xn);
            let resn = rn.norm() / bn;
            if !(resn < res) {
                break;
            }
            x = xn;
            r = rn;
            res = resn;
        }
        if !res.is_finite() || x.amax() > 1e14 * (1.0 + bn) {
            return Err(VemError::SingularSystem);
        }
        if res > self.tolerance {
            return Err(VemError::ResidualTooLarge { residual: res });
        }
        Ok(x.component_mul(&self.scale))
    }
}

/// One-shot sparse solve.
pub fn solve_linear(matrix: &SparseColMat<usize, f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    SparseSolver::new().factor(matrix)?.solve(rhs)
}
