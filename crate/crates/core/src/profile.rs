//! Scalar time profiles `f̃(t)` multiplying the constant matrices of a
//! separable system.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

#[derive(Clone)]
pub enum TimeProfile {
    Constant(f64),
    /// `cos(2π·freq·t + phase)`, `freq` in cycles per unit time.
    Cos { freq: f64, phase: f64 },
    /// Polynomial with ascending coefficients `c₀ + c₁t + c₂t² + …`.
    Poly(Vec<f64>),
    Custom {
        label: String,
        func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl TimeProfile {
    pub fn custom(label: impl Into<String>, func: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeProfile::Custom {
            label: label.into(),
            func: Arc::new(func),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant(c) => *c,
            TimeProfile::Cos { freq, phase } => (2.0 * PI * freq * t + phase).cos(),
            TimeProfile::Poly(coeffs) => coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c),
            TimeProfile::Custom { func, .. } => func(t),
        }
    }

    /// True when the profile vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            TimeProfile::Constant(c) => *c == 0.0,
            TimeProfile::Poly(coeffs) => coeffs.iter().all(|&c| c == 0.0),
            _ => false,
        }
    }
}

impl fmt::Debug for TimeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeProfile::Constant(c) => write!(f, "constant({c})"),
            TimeProfile::Cos { freq, phase } => write!(f, "cos(freq={freq}, phase={phase})"),
            TimeProfile::Poly(c) => write!(f, "poly({c:?})"),
            TimeProfile::Custom { label, .. } => write!(f, "custom({label})"),
        }
    }
}
