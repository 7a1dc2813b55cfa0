//! Verification problems: closed-form systems and a synthetic
//! magic-angle-spinning spin chain `H̃(t) = D + B(cos 2πνt + cos 4πνt)`.
//!
//! The spin-chain surrogate uses
//! `D = Σ_j ω_j Z_j` with `ω_j = (−1)^j · 1000 · (1 + j/k)` Hz and a
//! Heisenberg coupling `B = J Σ_j (X_j X_{j+1} + Y_j Y_{j+1} + Z_j Z_{j+1})`
//! with `J = 500` Hz. Site `j` is the `j`-th Kronecker factor, i.e. bit
//! `k − 1 − j` of the basis-state index.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::profile::TimeProfile;
use crate::sparse::SparseMatrix;
use crate::system::{Horizon, SeparableSystem, Term};

pub const MAS_MAX_SPINS: usize = 12;
pub const MAS_ZEEMAN_SCALE: f64 = 1000.0;
pub const MAS_COUPLING: f64 = 500.0;

/// Spin-chain problem data in physical units (Hz, seconds).
#[derive(Debug, Clone)]
pub struct MasProblem {
    pub spins: usize,
    pub dim: usize,
    pub zeeman: SparseMatrix,
    pub coupling: SparseMatrix,
    pub nu: f64,
    pub t_phys: f64,
    pub seed: u64,
    pub initial: Vec<f64>,
}

impl MasProblem {
    /// `ω_j` for `j < k`.
    pub fn site_frequency(j: usize, k: usize) -> f64 {
        let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * MAS_ZEEMAN_SCALE * (1.0 + j as f64 / k as f64)
    }

    /// `H̃(t)` at physical time `t` as a sparse matrix.
    pub fn hamiltonian_at(&self, t: f64) -> SparseMatrix {
        let g = (2.0 * PI * self.nu * t).cos() + (4.0 * PI * self.nu * t).cos();
        let trip: Vec<_> = self
            .zeeman
            .triplets()
            .chain(self.coupling.triplets().map(|(i, j, v)| (i, j, v * g)))
            .collect();
        SparseMatrix::from_triplets(self.dim, &trip).expect("indices come from valid matrices")
    }

    /// `y ← −2πi H̃(t) x` at physical time `t` (unscaled dynamics).
    pub fn physical_rhs(&self, t: f64, x: &[Complex64], y: &mut [Complex64]) {
        let g = (2.0 * PI * self.nu * t).cos() + (4.0 * PI * self.nu * t).cos();
        let factor = Complex64::new(0.0, -2.0 * PI);
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        self.zeeman.mul_vec_acc(factor, x, y);
        self.coupling.mul_vec_acc(factor * g, x, y);
    }

    pub fn initial_complex(&self) -> Vec<Complex64> {
        self.initial.iter().map(|&v| Complex64::new(v, 0.0)).collect()
    }
}

fn spin_bit(state: usize, site: usize, k: usize) -> usize {
    (state >> (k - 1 - site)) & 1
}

fn spin_sign(state: usize, site: usize, k: usize) -> f64 {
    1.0 - 2.0 * spin_bit(state, site, k) as f64
}

/// Builds the spin-chain problem on `[0, T]` and its rescaling to `[0, 1]`:
/// `Ã(τ) = −2πi T (D + B(cos(2πνTτ) + cos(4πνTτ)))` as three separable
/// terms with profiles `1`, `cos(2πνTτ)`, `cos(4πνTτ)`.
pub fn build_mas(k: usize, nu: f64, t_phys: f64, seed: u64) -> Result<(SeparableSystem, MasProblem)> {
    if !(1..=MAS_MAX_SPINS).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "spin count must be in 1..={MAS_MAX_SPINS}, got {k}"
        )));
    }
    if !(t_phys > 0.0 && t_phys.is_finite() && nu.is_finite()) {
        return Err(Error::InvalidArgument("horizon must be positive and frequency finite".into()));
    }
    let n = 1usize << k;

    let diag: Vec<Complex64> = (0..n)
        .map(|s| {
            let e: f64 = (0..k).map(|j| MasProblem::site_frequency(j, k) * spin_sign(s, j, k)).sum();
            Complex64::new(e, 0.0)
        })
        .collect();
    let zeeman = SparseMatrix::from_diagonal(&diag);

    let mut trip = Vec::new();
    for j in 0..k.saturating_sub(1) {
        let mask = (1usize << (k - 1 - j)) | (1usize << (k - 2 - j));
        for s in 0..n {
            let zz = spin_sign(s, j, k) * spin_sign(s, j + 1, k);
            trip.push((s, s, Complex64::new(MAS_COUPLING * zz, 0.0)));
            // XX + YY = 2(σ⁺σ⁻ + σ⁻σ⁺): flips antiparallel pairs.
            if spin_bit(s, j, k) != spin_bit(s, j + 1, k) {
                trip.push((s ^ mask, s, Complex64::new(2.0 * MAS_COUPLING, 0.0)));
            }
        }
    }
    let coupling = SparseMatrix::from_triplets(n, &trip)?;

    let scale = Complex64::new(0.0, -2.0 * PI * t_phys);
    let terms = vec![
        Term::new(zeeman.scaled(scale), TimeProfile::Constant(1.0)),
        Term::new(coupling.scaled(scale), TimeProfile::Cos { freq: nu * t_phys, phase: 0.0 }),
        Term::new(coupling.scaled(scale), TimeProfile::Cos { freq: 2.0 * nu * t_phys, phase: 0.0 }),
    ];
    let system = SeparableSystem::new(n, terms)?.with_horizon(Horizon { t_phys })?;
    let problem = MasProblem {
        spins: k,
        dim: n,
        zeeman,
        coupling,
        nu,
        t_phys,
        seed,
        initial: random_unit_box_vector(n, seed),
    };
    Ok((system, problem))
}

/// SplitMix64 stream: state advances by the golden-ratio increment and
/// each output is the finalizer of the state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

pub fn random_unit_box_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| rng.next_f64()).collect()
}

pub type ExactSolution = Arc<dyn Fn(f64) -> Vec<Complex64> + Send + Sync>;

/// A system on `[0, 1]` with a known solution.
#[derive(Clone)]
pub struct ClosedFormProblem {
    pub name: &'static str,
    pub system: SeparableSystem,
    pub initial: Vec<Complex64>,
    pub exact: ExactSolution,
}

impl std::fmt::Debug for ClosedFormProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClosedFormProblem")
            .field("name", &self.name)
            .field("system", &self.system)
            .field("initial", &self.initial)
            .finish_non_exhaustive()
    }
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn rotation_generator() -> SparseMatrix {
    SparseMatrix::from_triplets(2, &[(0, 1, re(1.0)), (1, 0, re(-1.0))]).expect("valid 2x2")
}

/// `exp(α A₀) v` with `A₀ = [[0, 1], [−1, 0]]`.
fn rotate(alpha: f64, v: [f64; 2]) -> Vec<Complex64> {
    let (s, c) = alpha.sin_cos();
    vec![re(c * v[0] + s * v[1]), re(-s * v[0] + c * v[1])]
}

/// `u' = λu`, `u(0) = 1`.
pub fn exponential_problem(lambda: f64) -> ClosedFormProblem {
    let a = SparseMatrix::from_diagonal(&[re(lambda)]);
    ClosedFormProblem {
        name: "expstep",
        system: SeparableSystem::new(1, vec![Term::new(a, TimeProfile::Constant(1.0))]).expect("valid"),
        initial: vec![re(1.0)],
        exact: Arc::new(move |t| vec![re((lambda * t).exp())]),
    }
}

/// `u' = cos(ωt)u`, `u(0) = 1`, so `u = exp(sin(ωt)/ω)`.
pub fn cosine_problem(omega: f64) -> ClosedFormProblem {
    let a = SparseMatrix::from_diagonal(&[re(1.0)]);
    let profile = TimeProfile::Cos {
        freq: omega / (2.0 * PI),
        phase: 0.0,
    };
    ClosedFormProblem {
        name: "cosexp",
        system: SeparableSystem::new(1, vec![Term::new(a, profile)]).expect("valid"),
        initial: vec![re(1.0)],
        exact: Arc::new(move |t| vec![re(((omega * t).sin() / omega).exp())]),
    }
}

/// `u' = [[0, 1], [−1, 0]]u`, `u(0) = (1, 0)`, so `u = (cos t, −sin t)`.
pub fn rotation_problem() -> ClosedFormProblem {
    ClosedFormProblem {
        name: "rotation",
        system: SeparableSystem::new(2, vec![Term::new(rotation_generator(), TimeProfile::Constant(1.0))])
            .expect("valid"),
        initial: vec![re(1.0), re(0.0)],
        exact: Arc::new(|t| rotate(t, [1.0, 0.0])),
    }
}

/// `u' = (1 + 2t)A₀u`: a commuting family, solved by `exp((t + t²)A₀)v`.
pub fn commuting_problem() -> ClosedFormProblem {
    let v = [1.0, 0.5];
    ClosedFormProblem {
        name: "commuting",
        system: SeparableSystem::new(2, vec![Term::new(rotation_generator(), TimeProfile::Poly(vec![1.0, 2.0]))])
            .expect("valid"),
        initial: vec![re(v[0]), re(v[1])],
        exact: Arc::new(move |t| rotate(t + t * t, v)),
    }
}

/// `u' = 0`.
pub fn zero_problem(v: Vec<Complex64>) -> ClosedFormProblem {
    let n = v.len();
    let v_exact = v.clone();
    ClosedFormProblem {
        name: "zero",
        system: SeparableSystem::new(n, vec![Term::new(SparseMatrix::zeros(n), TimeProfile::Constant(0.0))])
            .expect("valid"),
        initial: v,
        exact: Arc::new(move |_| v_exact.clone()),
    }
}

pub fn closed_form_suite() -> Vec<ClosedFormProblem> {
    vec![
        exponential_problem(1.0),
        cosine_problem(4.0 * PI),
        rotation_problem(),
        commuting_problem(),
        zero_problem(vec![re(0.25), re(-1.0), re(0.5)]),
    ]
}

pub fn closed_form_by_name(name: &str) -> Option<ClosedFormProblem> {
    closed_form_suite().into_iter().find(|p| p.name == name)
}
