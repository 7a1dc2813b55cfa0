//! Dormand–Prince 5(4) integrator with dense output, used as the reference
//! solution for the spectral solver.

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::system::SeparableSystem;

/// Smallest tolerance accepted by [`rk45_solve`].
pub const MIN_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5Options {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Absolute step size below which integration aborts.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Dopri5Options {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Dopri5Options {
            rel_tol,
            abs_tol,
            h_min: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Dopri5Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Shampine's continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

type Vector = Vec<Complex64>;

fn combine(y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])], out: &mut [Complex64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o = y[i] + acc * h;
    }
}

fn scaled_rms(err: &[Complex64], y0: &[Complex64], y1: &[Complex64], opts: &Dopri5Options) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sk = opts.abs_tol + opts.rel_tol * a.norm().max(b.norm());
            (e.norm() / sk).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrates `y' = f(t, y)` from `(t0, y0)` and returns `y` at each
/// sample time (nondecreasing, all `≥ t0`), interpolated with the
/// fourth-order dense output of each accepted step.
pub fn integrate<F>(
    mut rhs: F,
    y0: &[Complex64],
    t0: f64,
    samples: &[f64],
    opts: &Dopri5Options,
) -> Result<(Vec<Vector>, Dopri5Stats)>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    if samples.iter().any(|&s| !(s >= t0) || !s.is_finite()) {
        return Err(Error::Domain(format!("sample times must be finite and ≥ {t0}")));
    }
    if samples.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("sample times must be nondecreasing".into()));
    }
    let n = y0.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut stats = Dopri5Stats::default();
    let mut out = Vec::with_capacity(samples.len());
    let mut next = 0;
    while next < samples.len() && samples[next] == t0 {
        out.push(y0.to_vec());
        next += 1;
    }
    let Some(&t_end) = samples.last() else {
        return Ok((out, stats));
    };
    if next == samples.len() {
        return Ok((out, stats));
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![zero; n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut err = vec![zero; n];
    let origin = vec![zero; n];

    rhs(t, &y, &mut k1);
    stats.evaluations += 1;
    let mut h = initial_step(&mut rhs, t, &y, &k1, t_end - t, opts, &mut stats);
    let mut last_rejected = false;

    while next < samples.len() {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::InvalidArgument(format!("exceeded {} steps", opts.max_steps)));
        }
        if h < opts.h_min {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let final_step = t + h >= t_end || (t_end - (t + h)) < 1e-14 * t_end.abs().max(1.0);
        if final_step {
            h = t_end - t;
        }

        combine(&y, h, &[(A21, &k1)], &mut stage);
        rhs(t + C2 * h, &stage, &mut k2);
        combine(&y, h, &[(A31, &k1), (A32, &k2)], &mut stage);
        rhs(t + C3 * h, &stage, &mut k3);
        combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)], &mut stage);
        rhs(t + C4 * h, &stage, &mut k4);
        combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], &mut stage);
        rhs(t + C5 * h, &stage, &mut k5);
        combine(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], &mut stage);
        rhs(t + h, &stage, &mut k6);
        combine(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], &mut y_new);
        rhs(t + h, &y_new, &mut k7);
        stats.evaluations += 6;

        combine(
            &origin,
            h,
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
            &mut err,
        );
        let err_norm = scaled_rms(&err, &y, &y_new, opts);
        if !err_norm.is_finite() {
            return Err(Error::NonFinite(format!("RK45 error estimate at t = {t}")));
        }
        let fac11 = err_norm.powf(0.2 - BETA * 0.75);

        if err_norm <= 1.0 {
            let t_new = if final_step { t_end } else { t + h };
            // Dense output for samples in (t, t_new].
            if next < samples.len() && samples[next] <= t_new {
                let mut r5 = vec![zero; n];
                combine(
                    &origin,
                    h,
                    &[(D1, &k1), (D3, &k3), (D4, &k4), (D5, &k5), (D6, &k6), (D7, &k7)],
                    &mut r5,
                );
                while next < samples.len() && samples[next] <= t_new {
                    let theta = if samples[next] == t_new { 1.0 } else { (samples[next] - t) / h };
                    let theta1 = 1.0 - theta;
                    let v: Vector = (0..n)
                        .map(|i| {
                            let ydiff = y_new[i] - y[i];
                            let bspl = k1[i] * h - ydiff;
                            let r4 = ydiff - k7[i] * h - bspl;
                            y[i] + (ydiff + (bspl + (r4 + r5[i] * theta1) * theta) * theta1) * theta
                        })
                        .collect();
                    out.push(v);
                    next += 1;
                }
            }
            stats.accepted += 1;
            let fac_old = err_norm.max(1e-4);
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            h = h_new;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
        }
    }
    Ok((out, stats))
}

fn initial_step<F>(
    rhs: &mut F,
    t: f64,
    y: &[Complex64],
    f0: &[Complex64],
    span: f64,
    opts: &Dopri5Options,
    stats: &mut Dopri5Stats,
) -> f64
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y.len().max(1) as f64;
    let norm = |v: &[Complex64]| {
        let s: f64 = v
            .iter()
            .zip(y)
            .map(|(a, yi)| (a.norm() / (opts.abs_tol + opts.rel_tol * yi.norm())).powi(2))
            .sum();
        (s / n).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vector = y.iter().zip(f0).map(|(a, b)| a + b * h0).collect();
    let mut f1 = vec![Complex64::new(0.0, 0.0); y.len()];
    rhs(t + h0, &y1, &mut f1);
    stats.evaluations += 1;
    let diff: Vector = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Reference solution of `u' = Ã(t)u`, `u(0) = v` at the given sample
/// times in `[0, 1]`.
pub fn rk45_solve(
    sys: &SeparableSystem,
    v: &[Complex64],
    t_samples: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Vec<Vector>> {
    check_len(sys.dim(), v.len())?;
    if rel_tol < MIN_TOLERANCE || abs_tol < MIN_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "tolerances below {MIN_TOLERANCE:e} are not attainable"
        )));
    }
    if t_samples.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::Domain("sample times must lie in [0, 1]".into()));
    }
    let opts = Dopri5Options::new(rel_tol, abs_tol);
    let (out, _) = integrate(|t, x, y| sys.apply_at(t, x, y), v, 0.0, t_samples, &opts)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{closed_form_suite, exponential_problem, rotation_problem, zero_problem};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn uniform(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    fn max_err(out: &[Vector], exact: &dyn Fn(f64) -> Vector, ts: &[f64]) -> f64 {
        ts.iter()
            .zip(out)
            .map(|(&t, u)| {
                exact(t)
                    .iter()
                    .zip(u)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_dynamics_exact() {
        let p = zero_problem(vec![c(0.3), c(-2.0)]);
        let ts = uniform(10);
        let out = rk45_solve(&p.system, &p.initial, &ts, 1e-10, 1e-10).unwrap();
        for u in out {
            assert_eq!(u, p.initial);
        }
    }

    #[test]
    fn exponential_within_tolerance() {
        let p = exponential_problem(1.0);
        let ts = uniform(20);
        for &tol in &[1e-8, 1e-10, 1e-12] {
            let out = rk45_solve(&p.system, &p.initial, &ts, tol, tol).unwrap();
            let e = max_err(&out, &*p.exact, &ts);
            assert!(e <= 10.0 * tol * std::f64::consts::E, "tol {tol}: err {e}");
        }
    }

    #[test]
    fn rotation_within_tolerance() {
        let p = rotation_problem();
        let ts = uniform(25);
        let tol = 1e-11;
        let out = rk45_solve(&p.system, &p.initial, &ts, tol, tol).unwrap();
        assert!(max_err(&out, &*p.exact, &ts) <= 10.0 * tol);
    }

    #[test]
    fn error_decreases_with_tolerance() {
        for p in closed_form_suite() {
            let ts = uniform(16);
            let mut prev = f64::INFINITY;
            for &tol in &[1e-6, 1e-8, 1e-10] {
                let out = rk45_solve(&p.system, &p.initial, &ts, tol, tol).unwrap();
                let e = max_err(&out, &*p.exact, &ts);
                assert!(e <= prev || e < 1e-14, "{}: {e} after {prev}", p.name);
                prev = e;
            }
        }
    }

    #[test]
    fn input_validation() {
        let p = exponential_problem(1.0);
        assert!(rk45_solve(&p.system, &p.initial, &[0.5], 1e-14, 1e-10).is_err());
        assert!(rk45_solve(&p.system, &p.initial, &[1.5], 1e-10, 1e-10).is_err());
        assert!(rk45_solve(&p.system, &p.initial, &[0.5, 0.2], 1e-10, 1e-10).is_err());
        assert!(rk45_solve(&p.system, &[c(1.0), c(1.0)], &[0.5], 1e-10, 1e-10).is_err());
        assert!(rk45_solve(&p.system, &p.initial, &[], 1e-10, 1e-10).unwrap().is_empty());
    }

    #[test]
    fn step_underflow_reported() {
        // Finite-time blow-up of y' = y²: the step size collapses near t = 1.
        let opts = Dopri5Options::new(1e-10, 1e-10);
        let res = integrate(
            |_, y, dy| dy[0] = y[0] * y[0],
            &[c(1.0)],
            0.0,
            &[2.0],
            &opts,
        );
        assert!(matches!(res, Err(Error::StepSizeUnderflow { .. }) | Err(Error::NonFinite(_))), "{res:?}");
    }
}
