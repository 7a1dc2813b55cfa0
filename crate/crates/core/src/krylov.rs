//! Full (unrestarted) GMRES for matrix-free complex linear operators.

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};

/// A linear map on `ℂⁿ` known only through its action.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `y ← A x`; both slices have length [`dim`](Self::dim).
    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]);
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    func: F,
}

impl<F: Fn(&[Complex64], &mut [Complex64])> FnOperator<F> {
    pub fn new(dim: usize, func: F) -> Self {
        FnOperator { dim, func }
    }
}

impl<F: Fn(&[Complex64], &mut [Complex64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        (self.func)(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-13,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// Relative residual estimates from the Arnoldi least-squares problem;
    /// entry 0 is the initial residual (1.0 for the zero guess).
    pub residual_history: Vec<f64>,
    /// `‖rhs − A x‖ / ‖rhs‖`, recomputed explicitly for the returned `x`.
    pub final_residual: f64,
    pub converged: bool,
    pub stagnated: bool,
}

impl SolveStats {
    pub fn last_estimate(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Relative improvement per step below which an iteration counts as stalled.
const STALL_RATIO: f64 = 1e-3;
/// Consecutive stalled iterations that trigger the stagnation exit.
const STALL_COUNT: usize = 3;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Solves `A x = rhs` from the zero initial guess.
///
/// Arnoldi uses modified Gram–Schmidt with one reorthogonalization pass
/// whenever orthogonalization shrinks the candidate by more than `1/√2`.
/// Iteration stops on convergence, on a happy breakdown (exact solution in
/// the Krylov space, reported as converged), after `max_iter` steps, or
/// when three consecutive steps each reduce the residual by less than 0.1%
/// (`stagnated`). The last iterate is always returned since GMRES residuals
/// are nonincreasing.
pub fn gmres<A: LinearOperator + ?Sized>(
    op: &A,
    rhs: &[Complex64],
    opts: &GmresOptions,
) -> Result<(Vec<Complex64>, SolveStats)> {
    let n = op.dim();
    check_len(n, rhs.len())?;
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidArgument(
            "GMRES needs tol > 0 and max_iter > 0".into(),
        ));
    }
    let beta = norm(rhs);
    if !beta.is_finite() {
        return Err(Error::NonFinite("GMRES right-hand side".into()));
    }
    if beta == 0.0 {
        return Err(Error::InvalidArgument("GMRES right-hand side is zero".into()));
    }

    let zero = Complex64::new(0.0, 0.0);
    let max_iter = opts.max_iter.min(n);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(max_iter + 1);
    basis.push(rhs.iter().map(|v| v / beta).collect());
    // Hessenberg columns after Givens rotation, i.e. the upper triangle R.
    let mut r_cols: Vec<Vec<Complex64>> = Vec::with_capacity(max_iter);
    let mut rotations: Vec<(f64, Complex64)> = Vec::with_capacity(max_iter);
    let mut g = vec![Complex64::new(beta, 0.0)];

    let mut history = vec![1.0];
    let mut converged = false;
    let mut stagnated = false;
    let mut stalls = 0;
    let mut w = vec![zero; n];

    for j in 0..max_iter {
        op.apply_into(&basis[j], &mut w);
        if w.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("operator output in GMRES".into()));
        }
        let norm_before = norm(&w);
        let mut h = vec![zero; j + 2];
        for (i, v) in basis.iter().enumerate() {
            let c = dot(v, &w);
            h[i] = c;
            axpy(-c, v, &mut w);
        }
        let mut h_next = norm(&w);
        if h_next < norm_before / std::f64::consts::SQRT_2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(v, &w);
                h[i] += c;
                axpy(-c, v, &mut w);
            }
            h_next = norm(&w);
        }
        h[j + 1] = Complex64::new(h_next, 0.0);

        for (i, &(c, s)) in rotations.iter().enumerate() {
            let (a, b) = (h[i], h[i + 1]);
            h[i] = c * a + s * b;
            h[i + 1] = -s.conj() * a + c * b;
        }
        let (c, s) = givens(h[j], h[j + 1]);
        h[j] = c * h[j] + s * h[j + 1];
        h[j + 1] = zero;
        rotations.push((c, s));
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s.conj() * gj);
        h.truncate(j + 1);
        r_cols.push(h);

        let res = g[j + 1].norm() / beta;
        let prev = *history.last().unwrap();
        history.push(res.min(prev));

        let breakdown = h_next <= f64::EPSILON * norm_before;
        if res <= opts.tol || breakdown {
            converged = true;
            break;
        }
        if res > (1.0 - STALL_RATIO) * prev {
            stalls += 1;
            if stalls >= STALL_COUNT {
                stagnated = true;
                break;
            }
        } else {
            stalls = 0;
        }
        if j + 1 < max_iter {
            basis.push(w.iter().map(|v| v / h_next).collect());
        }
    }

    let k = r_cols.len();
    let y = back_substitute(&r_cols, &g[..k]);
    let mut x = vec![zero; n];
    for (yi, v) in y.iter().zip(&basis) {
        axpy(*yi, v, &mut x);
    }

    op.apply_into(&x, &mut w);
    let true_res = rhs
        .iter()
        .zip(&w)
        .map(|(b, ax)| (b - ax).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / beta;

    Ok((
        x,
        SolveStats {
            iterations: k,
            residual_history: history,
            final_residual: true_res,
            converged,
            stagnated,
        },
    ))
}

/// Complex Givens rotation `(c, s)` with `c` real, annihilating `b` in
/// `[c s; −s̄ c]·[a; b]`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let t = an.hypot(bn);
    (an / t, (a / an) * b.conj() / t)
}

fn back_substitute(r_cols: &[Vec<Complex64>], g: &[Complex64]) -> Vec<Complex64> {
    let k = g.len();
    let mut y = g.to_vec();
    for i in (0..k).rev() {
        for j in i + 1..k {
            let rij = r_cols[j][i];
            y[i] = y[i] - rij * y[j];
        }
        y[i] /= r_cols[i][i];
    }
    y
}
