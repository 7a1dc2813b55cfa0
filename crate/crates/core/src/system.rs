//! Separable systems `u'(t) = Σ_k f̃_k(t) A_k u(t)` on `[0, 1]`, the block
//! operator `I_{MN} − Σ_k A_k ⊗ F^{(k)}`, and the spectral solve.
//!
//! Vectors of length `MN` are column-stacked `M × N` matrices: entry
//! `i·M + m` is Legendre coefficient `m` of state component `i`. With this
//! convention `(A ⊗ F) vec(X) = vec(F X Aᵀ)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::krylov::{gmres, GmresOptions, LinearOperator, SolveStats};
use crate::legendre::{
    eval_basis, function_coeff_matrix, theta_coeff_matrix, truncate_bandwidth, CoeffMatrix,
    LegendreBasis, DEFAULT_BANDWIDTH_THRESHOLD,
};
use crate::profile::TimeProfile;
use crate::sparse::SparseMatrix;

/// Basis size used when none is given (`M = 1000`).
pub const DEFAULT_BASIS_SIZE: usize = 1000;

/// Largest GMRES residual accepted when the iteration stagnates or runs out
/// of steps before reaching its tolerance.
pub const ACCEPTED_STAGNATION_RESIDUAL: f64 = 1e-10;

/// One term `A_k f̃_k(t)`.
#[derive(Debug, Clone)]
pub struct Term {
    pub matrix: SparseMatrix,
    pub profile: TimeProfile,
}

impl Term {
    pub fn new(matrix: SparseMatrix, profile: TimeProfile) -> Self {
        Term { matrix, profile }
    }
}

/// Physical horizon of a system that was rescaled onto `[0, 1]`:
/// unit time `τ` corresponds to physical time `τ · t_phys`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub t_phys: f64,
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon { t_phys: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SeparableSystem {
    dim: usize,
    terms: Vec<Term>,
    horizon: Horizon,
}

impl SeparableSystem {
    pub fn new(dim: usize, terms: Vec<Term>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument("a system needs at least one term".into()));
        }
        for term in &terms {
            check_len(dim, term.matrix.dim())?;
        }
        Ok(SeparableSystem {
            dim,
            terms,
            horizon: Horizon::default(),
        })
    }

    pub fn with_horizon(mut self, horizon: Horizon) -> Result<Self> {
        if !(horizon.t_phys > 0.0 && horizon.t_phys.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {}",
                horizon.t_phys
            )));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    /// `y ← Ã(t) x`.
    pub fn apply_at(&self, t: f64, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for term in &self.terms {
            let f = term.profile.eval(t);
            if f != 0.0 {
                term.matrix.mul_vec_acc(Complex64::new(f, 0.0), x, y);
            }
        }
    }

    pub fn dense_at(&self, t: f64) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            let f = term.profile.eval(t);
            for (i, j, v) in term.matrix.triplets() {
                out[(i, j)] += v * f;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub m: usize,
    pub gmres: GmresOptions,
    pub bandwidth_threshold: f64,
}

impl SolveOptions {
    pub fn new(m: usize) -> Self {
        SolveOptions {
            m,
            gmres: GmresOptions::default(),
            bandwidth_threshold: DEFAULT_BANDWIDTH_THRESHOLD,
        }
    }
}

/// Matrix-free `L = I_{MN} − Σ_k A_k ⊗ F^{(k)}` with bandwidth-truncated
/// coefficient matrices.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    m: usize,
    n: usize,
    coeffs: Vec<CoeffMatrix>,
    matrices: Vec<SparseMatrix>,
}

/// Builds the block operator of `sys` at truncation order `m`.
pub fn assemble(sys: &SeparableSystem, m: usize, threshold: f64) -> Result<BlockOperator> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("M must be at least 2, got {m}")));
    }
    let basis = LegendreBasis::new(m)?;
    let coeffs = sys
        .terms
        .par_iter()
        .map(|term| {
            if term.profile.is_zero() {
                truncate_bandwidth(&CoeffMatrix::zeros(m), threshold)
            } else {
                let f = function_coeff_matrix(|t| term.profile.eval(t), &basis)?;
                truncate_bandwidth(&f, threshold)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockOperator {
        m,
        n: sys.dim,
        coeffs,
        matrices: sys.terms.iter().map(|t| t.matrix.clone()).collect(),
    })
}

impl BlockOperator {
    /// Operator from explicit coefficient matrices, used as given.
    pub fn from_parts(coeffs: Vec<CoeffMatrix>, matrices: Vec<SparseMatrix>) -> Result<Self> {
        check_len(coeffs.len(), matrices.len())?;
        let m = coeffs
            .first()
            .map(CoeffMatrix::size)
            .ok_or_else(|| Error::InvalidArgument("block operator needs at least one term".into()))?;
        let n = matrices[0].dim();
        for (f, a) in coeffs.iter().zip(&matrices) {
            check_len(m, f.size())?;
            check_len(n, a.dim())?;
        }
        Ok(BlockOperator {
            m,
            n,
            coeffs,
            matrices,
        })
    }

    pub fn basis_size(&self) -> usize {
        self.m
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[CoeffMatrix] {
        &self.coeffs
    }

    pub fn matrices(&self) -> &[SparseMatrix] {
        &self.matrices
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.m * self.n, x.len())?;
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `F X Aᵀ` for one term, as real and imaginary `M × N` parts.
    fn term_product(
        &self,
        f: &CoeffMatrix,
        a: &SparseMatrix,
        xr: &DMatrix<f64>,
        xi: &DMatrix<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let zr = f.entries() * xr;
        let zi = f.entries() * xi;
        let mut outr = DMatrix::zeros(self.m, self.n);
        let mut outi = DMatrix::zeros(self.m, self.n);
        for i in 0..self.n {
            let mut cr = outr.column_mut(i);
            for (j, aij) in a.row(i) {
                cr.axpy(aij.re, &zr.column(j), 1.0);
                cr.axpy(-aij.im, &zi.column(j), 1.0);
            }
            let mut ci = outi.column_mut(i);
            for (j, aij) in a.row(i) {
                ci.axpy(aij.re, &zi.column(j), 1.0);
                ci.axpy(aij.im, &zr.column(j), 1.0);
            }
        }
        (outr, outi)
    }
}

impl LinearOperator for BlockOperator {
    fn dim(&self) -> usize {
        self.m * self.n
    }

    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        let (m, n) = (self.m, self.n);
        let xr = DMatrix::from_fn(m, n, |r, c| x[c * m + r].re);
        let xi = DMatrix::from_fn(m, n, |r, c| x[c * m + r].im);
        let parts: Vec<_> = self
            .coeffs
            .par_iter()
            .zip(self.matrices.par_iter())
            .filter(|(f, a)| !f.is_zero() && a.nnz() > 0)
            .map(|(f, a)| self.term_product(f, a, &xr, &xi))
            .collect();
        y.copy_from_slice(x);
        // Summed in term order so results do not depend on scheduling.
        for (pr, pi) in &parts {
            for (idx, yv) in y.iter_mut().enumerate() {
                let (r, c) = (idx % m, idx / m);
                *yv -= Complex64::new(pr[(r, c)], pi[(r, c)]);
            }
        }
    }
}

/// Spectral approximation `û(t) = (I_N ⊗ φ(t)ᵀ) u_M`.
#[derive(Debug, Clone)]
pub struct SpectralSolution {
    m: usize,
    n: usize,
    /// `u_M = (I_N ⊗ T_M) x`.
    coeffs: Vec<Complex64>,
    /// Solution `x` of the block linear system.
    system_solution: Vec<Complex64>,
    stats: SolveStats,
}

impl SpectralSolution {
    /// Builds `u_M = (I_N ⊗ T_M) x` from a block-system solution.
    ///
    /// `T_M` is used with its last row zeroed: that row couples to the
    /// missing coefficient `x_M`, and keeping it leaves an `O(1)` error at
    /// the endpoints (exactly `1/2` at `t = 0, 1` for zero dynamics).
    pub fn from_system_solution(m: usize, n: usize, x: Vec<Complex64>, stats: SolveStats) -> Result<Self> {
        check_len(m * n, x.len())?;
        let theta = truncate_bandwidth(&theta_coeff_matrix(m)?, DEFAULT_BANDWIDTH_THRESHOLD)?;
        let t = theta.entries();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m * n];
        for c in 0..n {
            let col = &x[c * m..(c + 1) * m];
            let out = &mut coeffs[c * m..(c + 1) * m];
            for (r, o) in out.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                // T_M is tridiagonal.
                for k in r.saturating_sub(1)..(r + 2).min(m) {
                    acc += col[k] * t[(r, k)];
                }
                *o = acc;
            }
        }
        Ok(SpectralSolution {
            m,
            n,
            coeffs,
            system_solution: x,
            stats,
        })
    }

    pub fn basis_size(&self) -> usize {
        self.m
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn system_solution(&self) -> &[Complex64] {
        &self.system_solution
    }

    pub fn stats(&self) -> &SolveStats {
        &self.stats
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|v| *v *= alpha);
        out.system_solution.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn evaluate(&self, t: f64) -> Result<Vec<Complex64>> {
        let phi = eval_basis(t, self.m)?;
        Ok(self
            .coeffs
            .chunks_exact(self.m)
            .map(|col| col.iter().zip(&phi).map(|(u, p)| u * p).sum())
            .collect())
    }

    /// `wᵀ û(t)` (no conjugation).
    pub fn bilinear(&self, w: &[Complex64], t: f64) -> Result<Complex64> {
        check_len(self.n, w.len())?;
        let u = self.evaluate(t)?;
        Ok(w.iter().zip(&u).map(|(a, b)| a * b).sum())
    }
}

/// Right-hand side `v ⊗ φ_M(0) = vec(φ_M(0) vᵀ)`.
pub fn block_rhs(v: &[Complex64], m: usize) -> Result<Vec<Complex64>> {
    let phi0 = eval_basis(0.0, m)?;
    Ok(v.iter()
        .flat_map(|vi| phi0.iter().map(move |p| vi * p))
        .collect())
}

/// Solves `u' = Ã(t)u`, `u(0) = v` on `[0, 1]`.
pub fn solve(sys: &SeparableSystem, v: &[Complex64], opts: &SolveOptions) -> Result<SpectralSolution> {
    check_len(sys.dim(), v.len())?;
    let op = assemble(sys, opts.m, opts.bandwidth_threshold)?;
    solve_assembled(&op, v, &opts.gmres)
}

/// As [`solve`], reusing an assembled operator.
pub fn solve_assembled(op: &BlockOperator, v: &[Complex64], gmres_opts: &GmresOptions) -> Result<SpectralSolution> {
    check_len(op.state_dim(), v.len())?;
    let vnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if !(vnorm > 0.0) {
        return Err(Error::InvalidArgument("initial vector must be nonzero".into()));
    }
    let rhs = block_rhs(v, op.basis_size())?;
    let (x, stats) = gmres(op, &rhs, gmres_opts)?;
    let accepted = stats.converged || stats.final_residual <= ACCEPTED_STAGNATION_RESIDUAL;
    let (residual, iterations) = (stats.final_residual, stats.iterations);
    let sol = SpectralSolution::from_system_solution(op.basis_size(), op.state_dim(), x, stats)?;
    if accepted {
        Ok(sol)
    } else {
        Err(Error::NonConvergence {
            residual,
            iterations,
            partial: Some(Box::new(sol)),
        })
    }
}
