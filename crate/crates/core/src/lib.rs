//! Spectral solver for non-autonomous linear ODE systems
//! `u'(t) = Ã(t) u(t)`, `u(0) = v`, on `[0, 1]`.
//!
//! The time-ordered exponential is written through the ⋆-resolvent of the
//! kernel `Ã(t)Θ(t − s)`. Expanding kernels in shifted orthonormal Legendre
//! polynomials turns ⋆-products into matrix products, so the ODE becomes a
//! single structured linear system `(I − Σ_k A_k ⊗ F^{(k)}) x = v ⊗ φ(0)`
//! that is solved matrix-free with GMRES.

pub mod error;
pub mod krylov;
pub mod legendre;
pub mod matrix_equation;
pub mod oracle;
pub mod problems;
pub mod profile;
pub mod sparse;
pub mod star;
pub mod system;

pub use error::{Error, Result};
pub use krylov::{gmres, FnOperator, GmresOptions, LinearOperator, SolveStats};
pub use legendre::{
    eval_antiderivatives, eval_basis, function_coeff_matrix, gauss_legendre_rule, theta_coeff_matrix,
    truncate_bandwidth, CoeffMatrix, GaussLegendre, LegendreBasis, DEFAULT_BANDWIDTH_THRESHOLD,
};
pub use matrix_equation::{
    numerical_rank, residual, singular_values, to_matrix_equation, unvec, vec_of, MatrixEquationForm,
    DEFAULT_RANK_TOL,
};
pub use oracle::{rk45_solve, Dopri5Options};
pub use problems::{build_mas, closed_form_suite, random_unit_box_vector, ClosedFormProblem, MasProblem};
pub use profile::TimeProfile;
pub use sparse::SparseMatrix;
pub use star::{continuous_star_oracle, star_product, star_resolvent, star_sum, StarIdentity};
pub use system::{
    assemble, solve, solve_assembled, BlockOperator, Horizon, SeparableSystem, SolveOptions,
    SpectralSolution, Term,
};

pub use num_complex::Complex64;
