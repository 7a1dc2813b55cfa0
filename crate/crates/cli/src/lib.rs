//! Command implementations for the `starsolve` binary.

pub mod config;
pub mod output;

use std::path::Path;
use std::time::Instant;

use starsolve_core::{
    numerical_rank, rk45_solve, singular_values, solve, unvec, Complex64, SpectralSolution, DEFAULT_RANK_TOL,
};
use thiserror::Error;

use crate::config::{Config, Mode, Problem};
use crate::output::{fmt_f64, CsvTable};

pub const THREADS_ENV: &str = "STARSOLVE_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error(transparent)]
    Solver(starsolve_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<starsolve_core::Error> for CliError {
    fn from(e: starsolve_core::Error) -> Self {
        match e {
            starsolve_core::Error::NonConvergence { residual, iterations, .. } => {
                CliError::NonConvergence { residual, iterations }
            }
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    /// 1 for configuration errors, 2 for non-convergence, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::NonConvergence { .. } => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
        }
    }
}

/// Diagnostics on standard error. `quiet` silences everything but warnings.
#[derive(Debug, Clone, Copy, Default)]
pub struct Reporter {
    pub quiet: bool,
}

impl Reporter {
    pub fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn warn(&self, msg: impl AsRef<str>) {
        eprintln!("warning: {}", msg.as_ref());
    }
}

/// Reads `STARSOLVE_THREADS` and sizes the global thread pool.
pub fn configure_threads() -> Result<Option<usize>, CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    // Fails only if the pool was already built, in which case it stays as is.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}

fn run_solve(problem: &Problem, cfg: &Config, m: usize, rep: &Reporter) -> Result<SpectralSolution, CliError> {
    let sol = solve(&problem.system, &problem.initial, &cfg.solve_options(m))?;
    let stats = sol.stats();
    rep.info(format!(
        "{}: M={m}, GMRES iterations {}, final residual {:e}",
        problem.label, stats.iterations, stats.final_residual
    ));
    if !stats.converged {
        rep.warn(format!(
            "GMRES {} at relative residual {:e} (accepted)",
            if stats.stagnated { "stagnated" } else { "stopped" },
            stats.final_residual
        ));
    }
    Ok(sol)
}

/// Reference states at the sample times: the closed form when known,
/// otherwise the RK45 oracle.
fn reference(problem: &Problem, cfg: &Config, ts: &[f64]) -> Result<Vec<Vec<Complex64>>, CliError> {
    match &problem.exact {
        Some(p) => Ok(ts.iter().map(|&t| (p.exact)(t)).collect()),
        None => Ok(rk45_solve(&problem.system, &problem.initial, ts, cfg.oracle.rel_tol, cfg.oracle.abs_tol)?),
    }
}

fn transpose_dot(w: &[Complex64], u: &[Complex64]) -> Complex64 {
    w.iter().zip(u).map(|(a, b)| a * b).sum()
}

fn max_abs(u: &[Complex64]) -> f64 {
    u.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Absolute and relative error of one sample, in the configured mode.
fn sample_error(mode: Mode, v: &[Complex64], approx: &[Complex64], exact: &[Complex64]) -> (f64, f64) {
    let (abs, scale) = match mode {
        Mode::Bilinear => {
            let e = transpose_dot(v, exact);
            ((transpose_dot(v, approx) - e).norm(), e.norm())
        }
        Mode::Components => {
            let diff: Vec<Complex64> = approx.iter().zip(exact).map(|(a, b)| a - b).collect();
            (max_abs(&diff), max_abs(exact))
        }
    };
    let rel = if scale > 0.0 { abs / scale } else { abs };
    (abs, rel)
}

pub fn cmd_solve(cfg: &Config, output: &Path, rep: &Reporter) -> Result<(), CliError> {
    let problem = cfg.build_problem()?;
    let m = cfg.basis_size();
    let sol = run_solve(&problem, cfg, m, rep)?;
    let ts = cfg.sample_times();
    let n = problem.system.dim();
    let table = match cfg.mode {
        Mode::Components => {
            let mut header = vec!["t".to_string()];
            header.extend((0..n).map(|i| format!("re_{i}")));
            header.extend((0..n).map(|i| format!("im_{i}")));
            let mut table = CsvTable::new(header);
            for &t in &ts {
                let u = sol.evaluate(t)?;
                let mut row = vec![fmt_f64(t)];
                row.extend(u.iter().map(|z| fmt_f64(z.re)));
                row.extend(u.iter().map(|z| fmt_f64(z.im)));
                table.push(row);
            }
            table
        }
        Mode::Bilinear => {
            let refs = reference(&problem, cfg, &ts)?;
            let mut table = CsvTable::new(["t", "re_vTu", "im_vTu", "abs_err", "rel_err"]);
            for (&t, exact) in ts.iter().zip(&refs) {
                let u = sol.evaluate(t)?;
                let vtu = transpose_dot(&problem.initial, &u);
                let (abs, rel) = sample_error(Mode::Bilinear, &problem.initial, &u, exact);
                table.push(vec![fmt_f64(t), fmt_f64(vtu.re), fmt_f64(vtu.im), fmt_f64(abs), fmt_f64(rel)]);
            }
            table
        }
    };
    table.write_atomic(output)?;
    Ok(())
}

pub fn cmd_svd(cfg: &Config, output: &Path, rep: &Reporter) -> Result<usize, CliError> {
    let problem = cfg.build_problem()?;
    let m = cfg.basis_size();
    let sol = run_solve(&problem, cfg, m, rep)?;
    let x = unvec(sol.system_solution(), m, problem.system.dim())?;
    let sv = singular_values(&x)?;
    let rank = numerical_rank(&sv, DEFAULT_RANK_TOL)?;
    rep.info(format!(
        "numerical rank {rank} of {} (relative threshold {DEFAULT_RANK_TOL:e})",
        sv.len()
    ));
    let mut table = CsvTable::new(["index", "sigma"]);
    for (j, s) in sv.iter().enumerate() {
        table.push(vec![(j + 1).to_string(), fmt_f64(*s)]);
    }
    table.write_atomic(output)?;
    Ok(rank)
}

pub fn cmd_convergence(cfg: &Config, output: &Path, rep: &Reporter) -> Result<(), CliError> {
    let ms = cfg
        .m_values
        .clone()
        .filter(|ms| !ms.is_empty())
        .ok_or_else(|| CliError::Config("convergence needs a nonempty m_values list".into()))?;
    let problem = cfg.build_problem()?;
    let ts = cfg.sample_times();
    let refs = reference(&problem, cfg, &ts)?;
    let mut table = CsvTable::new(["M", "max_abs_err", "max_rel_err", "gmres_iters", "wall_time_ms"]);
    for m in ms {
        let start = Instant::now();
        let sol = run_solve(&problem, cfg, m, rep)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        let (mut max_abs_err, mut max_rel_err) = (0.0f64, 0.0f64);
        for (&t, exact) in ts.iter().zip(&refs) {
            let u = sol.evaluate(t)?;
            let (abs, rel) = sample_error(cfg.mode, &problem.initial, &u, exact);
            max_abs_err = max_abs_err.max(abs);
            max_rel_err = max_rel_err.max(rel);
        }
        table.push(vec![
            m.to_string(),
            fmt_f64(max_abs_err),
            fmt_f64(max_rel_err),
            sol.stats().iterations.to_string(),
            fmt_f64(elapsed),
        ]);
    }
    table.write_atomic(output)?;
    Ok(())
}
