//! The block linear system rewritten as the matrix equation
//! `X − Σ_k F^{(k)} X A_kᵀ = φ_M(0) vᵀ` with `x = vec(X)`, plus the
//! singular-value diagnostics of its solution.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::legendre::{eval_basis, CoeffMatrix, DEFAULT_BANDWIDTH_THRESHOLD};
use crate::sparse::SparseMatrix;
use crate::system::{assemble, BlockOperator, SeparableSystem};

/// Default relative threshold for [`numerical_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct MatrixEquationForm {
    pub coeffs: Vec<CoeffMatrix>,
    pub matrices: Vec<SparseMatrix>,
    /// `φ_M(0)`, length `M`.
    pub rhs_left: Vec<f64>,
    /// `b = v`, length `N`.
    pub rhs_right: Vec<Complex64>,
}

pub fn to_matrix_equation(
    sys: &SeparableSystem,
    v: &[Complex64],
    m: usize,
    threshold: f64,
) -> Result<MatrixEquationForm> {
    check_len(sys.dim(), v.len())?;
    let op = assemble(sys, m, threshold)?;
    MatrixEquationForm::from_operator(&op, v)
}

impl MatrixEquationForm {
    /// Shares the (truncated) coefficient matrices of an assembled operator.
    pub fn from_operator(op: &BlockOperator, v: &[Complex64]) -> Result<Self> {
        check_len(op.state_dim(), v.len())?;
        Ok(MatrixEquationForm {
            coeffs: op.coeffs().to_vec(),
            matrices: op.matrices().to_vec(),
            rhs_left: eval_basis(0.0, op.basis_size())?,
            rhs_right: v.to_vec(),
        })
    }

    pub fn from_system(sys: &SeparableSystem, v: &[Complex64], m: usize) -> Result<Self> {
        to_matrix_equation(sys, v, m, DEFAULT_BANDWIDTH_THRESHOLD)
    }

    pub fn basis_size(&self) -> usize {
        self.rhs_left.len()
    }

    pub fn state_dim(&self) -> usize {
        self.rhs_right.len()
    }

    /// `φ_M(0) bᵀ`.
    pub fn rhs_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.basis_size(), self.state_dim(), |r, c| {
            self.rhs_right[c] * self.rhs_left[r]
        })
    }

    /// `X − Σ_k F^{(k)} X A_kᵀ`, in complex dense arithmetic.
    pub fn apply_map(&self, x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        check_len(self.basis_size(), x.nrows())?;
        check_len(self.state_dim(), x.ncols())?;
        let mut out = x.clone();
        for (f, a) in self.coeffs.iter().zip(&self.matrices) {
            let fc = f.entries().map(|v| Complex64::new(v, 0.0));
            let fx = fc * x;
            for (i, j, aij) in a.triplets() {
                let src = fx.column(j).clone_owned();
                out.column_mut(i).axpy(-aij, &src, Complex64::new(1.0, 0.0));
            }
        }
        Ok(out)
    }
}

/// `‖X − Σ F X Aᵀ − φ(0)bᵀ‖_F / ‖φ(0)bᵀ‖_F`.
pub fn residual(form: &MatrixEquationForm, x: &DMatrix<Complex64>) -> Result<f64> {
    let rhs = form.rhs_matrix();
    let lhs = form.apply_map(x)?;
    let denom = rhs.norm();
    if denom == 0.0 {
        return Err(Error::InvalidArgument("right-hand side is zero".into()));
    }
    Ok((lhs - rhs).norm() / denom)
}

/// Column-stacked `M × N` view of a vector of length `MN`.
pub fn unvec(x: &[Complex64], m: usize, n: usize) -> Result<DMatrix<Complex64>> {
    check_len(m * n, x.len())?;
    Ok(DMatrix::from_column_slice(m, n, x))
}

pub fn vec_of(x: &DMatrix<Complex64>) -> Vec<Complex64> {
    x.as_slice().to_vec()
}

/// All `min(M, N)` singular values, sorted descending.
pub fn singular_values(x: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if x.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite("matrix passed to SVD".into()));
    }
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let svd = x.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Number of singular values strictly above `rel_tol · σ₁`.
pub fn numerical_rank(sv: &[f64], rel_tol: f64) -> Result<usize> {
    let first = *sv
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty singular value sequence".into()))?;
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rank tolerance must be positive, got {rel_tol}")));
    }
    let sigma_max = sv.iter().copied().fold(first, f64::max);
    Ok(sv.iter().filter(|&&s| s > rel_tol * sigma_max).count())
}
