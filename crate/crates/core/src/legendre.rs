//! Shifted orthonormal Legendre polynomials on `[0, 1]`, Gauss–Legendre
//! quadrature, and Legendre coefficient matrices of kernels
//! `f̃(t)·Θ(t − s)`.
//!
//! Coefficient matrices use row index `k` for the `t`-frequency and column
//! index `ℓ` for the `s`-frequency, so that a kernel is recovered as
//! `φ(t)ᵀ F φ(s)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default relative threshold for numerical bandwidth detection.
pub const DEFAULT_BANDWIDTH_THRESHOLD: f64 = 1e-13;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Classical Legendre values `P_0(x), …, P_{n−1}(x)` into `out`.
fn legendre_classical(x: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = 1.0;
    if n > 1 {
        out[1] = x;
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
    }
}

fn check_unit_interval(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("t = {t} outside [0, 1]")))
    }
}

/// `[p_0(t), …, p_{M−1}(t)]` with `p_k(t) = √(2k+1)·P_k(2t − 1)`.
pub fn eval_basis(t: f64, m: usize) -> Result<Vec<f64>> {
    check_unit_interval(t)?;
    if m < 1 {
        return Err(Error::Domain("basis size must be at least 1".into()));
    }
    let mut out = vec![0.0; m];
    fill_basis(t, &mut out);
    Ok(out)
}

fn fill_basis(t: f64, out: &mut [f64]) {
    legendre_classical(2.0 * t - 1.0, out);
    for (k, v) in out.iter_mut().enumerate() {
        *v *= ((2 * k + 1) as f64).sqrt();
    }
}

/// Antiderivatives `q_ℓ(t) = ∫₀ᵗ p_ℓ` for `ℓ < M`, from the identity
/// `∫ P_ℓ = (P_{ℓ+1} − P_{ℓ−1}) / (2ℓ + 1)`.
pub fn eval_antiderivatives(t: f64, m: usize) -> Result<Vec<f64>> {
    check_unit_interval(t)?;
    if m < 1 {
        return Err(Error::Domain("basis size must be at least 1".into()));
    }
    let mut scratch = vec![0.0; m + 1];
    let mut out = vec![0.0; m];
    fill_antiderivatives(t, &mut scratch, &mut out);
    Ok(out)
}

fn fill_antiderivatives(t: f64, scratch: &mut [f64], out: &mut [f64]) {
    debug_assert_eq!(scratch.len(), out.len() + 1);
    legendre_classical(2.0 * t - 1.0, scratch);
    out[0] = t;
    for l in 1..out.len() {
        out[l] = (scratch[l + 1] - scratch[l - 1]) / (2.0 * ((2 * l + 1) as f64).sqrt());
    }
}

/// Gauss–Legendre rule mapped to `[0, 1]`; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Integral over `[a, b]` by affine mapping of the rule.
    pub fn integrate_on(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let len = b - a;
        len * self.integrate(|x| f(a + len * x))
    }
}

/// `Q`-point Gauss–Legendre rule on `[0, 1]`, exact for degree `2Q − 1`.
///
/// Roots of `P_Q` are found by Newton iteration from the Chebyshev-like
/// guesses `cos(π(i + 3/4)/(Q + 1/2))`; the rule is symmetrized about 1/2.
pub fn gauss_legendre_rule(q: usize) -> Result<GaussLegendre> {
    if q < 1 {
        return Err(Error::Domain("quadrature order must be at least 1".into()));
    }
    let qf = q as f64;
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                break;
            }
        }
        // Derivative at the converged root.
        let (_, d) = legendre_with_derivative(q, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 1.0 / ((1.0 - x) * (1.0 + x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[q - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.5;
    }
    Ok(GaussLegendre { nodes, weights })
}

/// `(P_n(x), P_n'(x))` for `|x| < 1`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Truncation order `M` together with a quadrature rule and the basis and
/// antiderivative values tabulated at its nodes.
#[derive(Debug, Clone)]
pub struct LegendreBasis {
    m: usize,
    rule: GaussLegendre,
    /// `M × Q`, entry `(k, i)` = `p_k(τ_i)`.
    basis_at_nodes: DMatrix<f64>,
    /// `M × Q`, entry `(ℓ, i)` = `q_ℓ(τ_i)`.
    antider_at_nodes: DMatrix<f64>,
}

impl LegendreBasis {
    /// Basis of size `M` with the default quadrature order `Q = 2M`.
    pub fn new(m: usize) -> Result<Self> {
        Self::with_quadrature(m, 2 * m)
    }

    pub fn with_quadrature(m: usize, q: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::Domain("basis size must be at least 1".into()));
        }
        let rule = gauss_legendre_rule(q)?;
        let mut basis_at_nodes = DMatrix::zeros(m, q);
        let mut antider_at_nodes = DMatrix::zeros(m, q);
        let mut col = vec![0.0; m];
        let mut scratch = vec![0.0; m + 1];
        for (i, &t) in rule.nodes.iter().enumerate() {
            fill_basis(t, &mut col);
            basis_at_nodes.column_mut(i).copy_from_slice(&col);
            fill_antiderivatives(t, &mut scratch, &mut col);
            antider_at_nodes.column_mut(i).copy_from_slice(&col);
        }
        Ok(LegendreBasis {
            m,
            rule,
            basis_at_nodes,
            antider_at_nodes,
        })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn quadrature_order(&self) -> usize {
        self.rule.order()
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        eval_basis(t, self.m)
    }
}

/// Dense `M × M` Legendre coefficient matrix of a kernel `f̃(t)Θ(t − s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    entries: DMatrix<f64>,
    bandwidth: Option<usize>,
}

impl CoeffMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient matrix entry".into()));
        }
        Ok(CoeffMatrix {
            entries,
            bandwidth: None,
        })
    }

    pub fn zeros(m: usize) -> Self {
        CoeffMatrix {
            entries: DMatrix::zeros(m, m),
            bandwidth: None,
        }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn bandwidth(&self) -> Option<usize> {
        self.bandwidth
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }
}

impl std::ops::Index<(usize, usize)> for CoeffMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.entries[idx]
    }
}

/// Coefficient matrix `T_M` of `Θ(t − s)`, in closed form.
///
/// Expanding `q_ℓ` in the basis gives a tridiagonal matrix:
/// `t₀₀ = 1/2`, `t₁₀ = 1/(2√3)`, and for `ℓ ≥ 1`
/// `t_{ℓ+1,ℓ} = 1/(2√((2ℓ+1)(2ℓ+3)))`, `t_{ℓ−1,ℓ} = −1/(2√((2ℓ−1)(2ℓ+1)))`.
pub fn theta_coeff_matrix(m: usize) -> Result<CoeffMatrix> {
    if m < 1 {
        return Err(Error::Domain("basis size must be at least 1".into()));
    }
    let mut t = DMatrix::zeros(m, m);
    t[(0, 0)] = 0.5;
    if m > 1 {
        t[(1, 0)] = 0.5 / 3f64.sqrt();
    }
    for l in 1..m {
        let lf = l as f64;
        t[(l - 1, l)] = -0.5 / ((2.0 * lf - 1.0) * (2.0 * lf + 1.0)).sqrt();
        if l + 1 < m {
            t[(l + 1, l)] = 0.5 / ((2.0 * lf + 1.0) * (2.0 * lf + 3.0)).sqrt();
        }
    }
    Ok(CoeffMatrix {
        entries: t,
        bandwidth: None,
    })
}

/// Coefficient matrix of `f̃(t)Θ(t − s)`:
/// `f_{k,ℓ} = ∫₀¹ f̃(τ) p_k(τ) q_ℓ(τ) dτ`, one Gauss–Legendre sum per entry.
pub fn function_coeff_matrix(f: impl Fn(f64) -> f64, basis: &LegendreBasis) -> Result<CoeffMatrix> {
    let rule = basis.rule();
    let mut weighted = basis.basis_at_nodes.clone();
    for (i, (&t, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let fv = f(t);
        if !fv.is_finite() {
            return Err(Error::NonFinite(format!("time profile at quadrature node t = {t}")));
        }
        weighted.column_mut(i).scale_mut(w * fv);
    }
    let entries = weighted * basis.antider_at_nodes.transpose();
    CoeffMatrix::new(entries)
}

/// Detects the numerical lower bandwidth `b` (largest `k − ℓ ≥ 0` with an
/// entry above `threshold · max|F|`) and zeroes the last `b` rows.
pub fn truncate_bandwidth(f: &CoeffMatrix, threshold: f64) -> Result<CoeffMatrix> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth threshold must be positive, got {threshold}"
        )));
    }
    let m = f.size();
    let cutoff = threshold * f.max_abs();
    let mut b = 0;
    if cutoff > 0.0 {
        for l in 0..m {
            for k in (l + b + 1..m).rev() {
                if f.entries[(k, l)].abs() > cutoff {
                    b = k - l;
                    break;
                }
            }
        }
    }
    let mut entries = f.entries.clone();
    for k in m - b..m {
        entries.row_mut(k).fill(0.0);
    }
    Ok(CoeffMatrix {
        entries,
        bandwidth: Some(b),
    })
}
