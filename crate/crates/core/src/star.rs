//! Discrete ⋆-algebra on coefficient matrices.
//!
//! After expansion in the shifted Legendre basis the ⋆-product of two
//! kernels becomes an ordinary matrix product, the Dirac identity becomes
//! `I_M`, and the ⋆-resolvent `(1⋆ − f)^{−⋆}` becomes `(I_M − F_M)^{−1}`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::legendre::{eval_basis, gauss_legendre_rule, CoeffMatrix};

/// Reciprocal condition number below which the resolvent is refused.
pub const RESOLVENT_MIN_RCOND: f64 = 1e-15;

/// Discrete `δ(t − s)`, the two-sided unit of [`star_product`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StarIdentity {
    pub m: usize,
}

impl StarIdentity {
    pub fn new(m: usize) -> Self {
        StarIdentity { m }
    }

    pub fn matrix(&self) -> CoeffMatrix {
        CoeffMatrix::new(DMatrix::identity(self.m, self.m)).expect("identity is finite")
    }
}

fn same_size(f: &CoeffMatrix, g: &CoeffMatrix) -> Result<()> {
    if f.size() == g.size() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: f.size(),
            found: g.size(),
        })
    }
}

pub fn star_product(f: &CoeffMatrix, g: &CoeffMatrix) -> Result<CoeffMatrix> {
    same_size(f, g)?;
    CoeffMatrix::new(f.entries() * g.entries())
}

pub fn star_sum(f: &CoeffMatrix, g: &CoeffMatrix) -> Result<CoeffMatrix> {
    same_size(f, g)?;
    CoeffMatrix::new(f.entries() + g.entries())
}

/// `(I_M − F)^{−1}` by pivoted LU.
pub fn star_resolvent(f: &CoeffMatrix) -> Result<CoeffMatrix> {
    let m = f.size();
    let lhs = DMatrix::<f64>::identity(m, m) - f.entries();
    let lhs_norm = norm_one(&lhs);
    let inv = lhs
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::Singular { rcond: 0.0 })?;
    let rcond = 1.0 / (lhs_norm * norm_one(&inv));
    if !(rcond >= RESOLVENT_MIN_RCOND) {
        return Err(Error::Singular { rcond });
    }
    CoeffMatrix::new(inv)
}

fn norm_one(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Coefficient matrix of `f ⋆ g` for `f = f̃(t)Θ(t−s)`, `g = g̃(t)Θ(t−s)`,
/// computed directly from the continuous product
/// `(f ⋆ g)(t, s) = f̃(t) Θ(t − s) ∫ₛᵗ g̃(τ) dτ` by nested Gauss–Legendre
/// quadrature with `q` points per level.
///
/// Test oracle for [`star_product`]; cost is `O(q³ + q²M)`.
pub fn continuous_star_oracle(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    m: usize,
    q: usize,
) -> Result<CoeffMatrix> {
    if m < 1 {
        return Err(Error::Domain("basis size must be at least 1".into()));
    }
    let rule = gauss_legendre_rule(q)?;
    let mut out = DMatrix::<f64>::zeros(m, m);
    let mut inner = vec![0.0; m];
    for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
        let ft = f(t);
        if !ft.is_finite() {
            return Err(Error::NonFinite(format!("f at t = {t}")));
        }
        // inner[ℓ] = ∫₀ᵗ (∫ₛᵗ g) p_ℓ(s) ds
        inner.iter_mut().for_each(|v| *v = 0.0);
        for (&xs, &ws) in rule.nodes.iter().zip(&rule.weights) {
            let s = t * xs;
            let g_int = rule.integrate_on(s, t, &g);
            if !g_int.is_finite() {
                return Err(Error::NonFinite(format!("g on [{s}, {t}]")));
            }
            let p = eval_basis(s, m)?;
            let scale = t * ws * g_int;
            for (acc, pl) in inner.iter_mut().zip(&p) {
                *acc += scale * pl;
            }
        }
        let pt = eval_basis(t, m)?;
        for k in 0..m {
            let a = wt * ft * pt[k];
            for l in 0..m {
                out[(k, l)] += a * inner[l];
            }
        }
    }
    CoeffMatrix::new(out)
}
