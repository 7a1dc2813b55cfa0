//! JSON run configuration.

use std::path::Path;

use serde::Deserialize;
use starsolve_core::problems::closed_form_by_name;
use starsolve_core::{
    build_mas, random_unit_box_vector, ClosedFormProblem, Complex64, GmresOptions, SeparableSystem,
    SolveOptions, SparseMatrix, Term, TimeProfile, DEFAULT_BANDWIDTH_THRESHOLD,
};

use crate::CliError;

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_ORACLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSpec,
    #[serde(rename = "M", default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub gmres_tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub bandwidth_threshold: Option<f64>,
    #[serde(default)]
    pub samples: Option<Samples>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Basis sizes swept by the `convergence` command.
    #[serde(default)]
    pub m_values: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    /// A closed-form problem by name: `expstep`, `cosexp`, `rotation`,
    /// `commuting`, `zero`.
    Named(String),
    Mas { mas: MasConfig },
    Inline(InlineSystem),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasConfig {
    pub k: usize,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_t_phys")]
    pub t_phys: f64,
}

fn default_nu() -> f64 {
    1e4
}

fn default_t_phys() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSystem {
    pub dim: usize,
    pub terms: Vec<InlineTerm>,
    /// Initial vector; random in `[0, 1]` from `seed` when absent.
    #[serde(default)]
    pub initial: Option<Vec<Scalar>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineTerm {
    /// Nonzeros as `[row, col, re]` or `[row, col, re, im]`.
    pub entries: Vec<Vec<f64>>,
    pub profile: ProfileSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant { c: f64 },
    Cos {
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    Poly { coeffs: Vec<f64> },
}

impl From<&ProfileSpec> for TimeProfile {
    fn from(p: &ProfileSpec) -> Self {
        match p {
            ProfileSpec::Constant { c } => TimeProfile::Constant(*c),
            ProfileSpec::Cos { freq, phase } => TimeProfile::Cos {
                freq: *freq,
                phase: *phase,
            },
            ProfileSpec::Poly { coeffs } => TimeProfile::Poly(coeffs.clone()),
        }
    }
}

/// A real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Scalar> for Complex64 {
    fn from(s: Scalar) -> Self {
        match s {
            Scalar::Real(r) => Complex64::new(r, 0.0),
            Scalar::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Samples {
    Count(usize),
    Times(Vec<f64>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Components,
    Bilinear,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_oracle_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_oracle_tol")]
    pub abs_tol: f64,
}

fn default_oracle_tol() -> f64 {
    DEFAULT_ORACLE_TOL
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            rel_tol: DEFAULT_ORACLE_TOL,
            abs_tol: DEFAULT_ORACLE_TOL,
        }
    }
}

/// A fully built problem ready to solve.
pub struct Problem {
    pub label: String,
    pub system: SeparableSystem,
    pub initial: Vec<Complex64>,
    /// Known solution on `[0, 1]`, used instead of the RK45 oracle.
    pub exact: Option<ClosedFormProblem>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(m) = self.m {
            check_m(m)?;
        }
        if let Some(tol) = self.gmres_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(config_err(format!("gmres_tol must be positive, got {tol}")));
            }
        }
        if self.max_iter == Some(0) {
            return Err(config_err("max_iter must be positive"));
        }
        if let Some(th) = self.bandwidth_threshold {
            if !(th >= 0.0 && th.is_finite()) {
                return Err(config_err(format!("bandwidth_threshold must be nonnegative, got {th}")));
            }
        }
        if let Some(Samples::Times(ts)) = &self.samples {
            if ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(config_err("sample times must lie in [0, 1]"));
            }
            if ts.windows(2).any(|w| w[1] < w[0]) {
                return Err(config_err("sample times must be nondecreasing"));
            }
        }
        for tol in [self.oracle.rel_tol, self.oracle.abs_tol] {
            if !(tol >= starsolve_core::oracle::MIN_TOLERANCE) {
                return Err(config_err(format!(
                    "oracle tolerances must be at least {:e}",
                    starsolve_core::oracle::MIN_TOLERANCE
                )));
            }
        }
        if let Some(ms) = &self.m_values {
            for &m in ms {
                check_m(m)?;
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn basis_size(&self) -> usize {
        self.m.unwrap_or(starsolve_core::system::DEFAULT_BASIS_SIZE)
    }

    pub fn solve_options(&self, m: usize) -> SolveOptions {
        let defaults = GmresOptions::default();
        SolveOptions {
            m,
            gmres: GmresOptions {
                tol: self.gmres_tol.unwrap_or(defaults.tol),
                max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            },
            bandwidth_threshold: self.bandwidth_threshold.unwrap_or(DEFAULT_BANDWIDTH_THRESHOLD),
        }
    }

    pub fn sample_times(&self) -> Vec<f64> {
        match &self.samples {
            None => uniform_grid(DEFAULT_SAMPLES),
            Some(Samples::Count(n)) => uniform_grid(*n),
            Some(Samples::Times(ts)) => ts.clone(),
        }
    }

    pub fn build_problem(&self) -> Result<Problem, CliError> {
        match &self.problem {
            ProblemSpec::Named(name) => {
                let p = closed_form_by_name(name).ok_or_else(|| config_err(format!("unknown problem '{name}'")))?;
                Ok(Problem {
                    label: name.clone(),
                    system: p.system.clone(),
                    initial: p.initial.clone(),
                    exact: Some(p),
                })
            }
            ProblemSpec::Mas { mas } => {
                let (system, info) =
                    build_mas(mas.k, mas.nu, mas.t_phys, self.seed()).map_err(|e| config_err(e.to_string()))?;
                Ok(Problem {
                    label: format!("mas k={}", mas.k),
                    system,
                    initial: info.initial_complex(),
                    exact: None,
                })
            }
            ProblemSpec::Inline(inline) => self.build_inline(inline),
        }
    }

    fn build_inline(&self, inline: &InlineSystem) -> Result<Problem, CliError> {
        let n = inline.dim;
        let mut terms = Vec::with_capacity(inline.terms.len());
        for (k, term) in inline.terms.iter().enumerate() {
            let mut trip = Vec::with_capacity(term.entries.len());
            for e in &term.entries {
                let (re, im) = match e.as_slice() {
                    [_, _, re] => (*re, 0.0),
                    [_, _, re, im] => (*re, *im),
                    _ => return Err(config_err(format!("term {k}: entries must be [row, col, re] or [row, col, re, im]"))),
                };
                let index = |x: f64| -> Result<usize, CliError> {
                    if x >= 0.0 && x.fract() == 0.0 {
                        Ok(x as usize)
                    } else {
                        Err(config_err(format!("term {k}: invalid index {x}")))
                    }
                };
                trip.push((index(e[0])?, index(e[1])?, Complex64::new(re, im)));
            }
            let matrix = SparseMatrix::from_triplets(n, &trip).map_err(|e| config_err(format!("term {k}: {e}")))?;
            terms.push(Term::new(matrix, TimeProfile::from(&term.profile)));
        }
        let system = SeparableSystem::new(n, terms).map_err(|e| config_err(e.to_string()))?;
        let initial: Vec<Complex64> = match &inline.initial {
            Some(v) => v.iter().map(|&s| s.into()).collect(),
            None => random_unit_box_vector(n, self.seed())
                .into_iter()
                .map(|x| Complex64::new(x, 0.0))
                .collect(),
        };
        if initial.len() != n {
            return Err(config_err(format!("initial vector has length {}, expected {n}", initial.len())));
        }
        Ok(Problem {
            label: "inline".into(),
            system,
            initial,
            exact: None,
        })
    }
}

fn check_m(m: usize) -> Result<(), CliError> {
    if m < 2 {
        Err(config_err(format!("M must be at least 2, got {m}")))
    } else {
        Ok(())
    }
}

/// `n` uniformly spaced points covering `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}
