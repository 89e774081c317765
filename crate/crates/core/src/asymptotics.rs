//! Limiting Type I error of the classic Pearson and G tests for the 2x2
//! independence family with cell probabilities `p², p(1-p), p(1-p), (1-p)²`
//! and `p = λ / √n`.
//!
//! As `n → ∞` the top-left count converges to `Z ~ Poisson(λ²)` while the
//! remaining terms of each statistic converge to constants, so
//! Pearson's statistic behaves like `(Z - λ²)² / λ²` and the G statistic like
//! `2 Z log(Z / λ²) - 2 (Z - λ²)`. The asymptotic size is the Poisson mass of
//! the set where the limit exceeds the chi-squared(1) critical value.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Result, UspError};
use crate::numerics::{chi2_quantile, poisson_tail_mass};

/// Default λ grid: 500 points on `[0.05, 5]`.
pub const DEFAULT_LAMBDA_RANGE: (f64, f64, usize) = (0.05, 5.0, 500);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicTest {
    Pearson,
    G,
}

impl ClassicTest {
    pub fn name(self) -> &'static str {
        match self {
            ClassicTest::Pearson => "pearson",
            ClassicTest::G => "g",
        }
    }

    /// Limiting statistic as a function of the Poisson count `z`.
    pub fn limit_statistic(self, z: u64, lambda: f64) -> f64 {
        let mu = lambda * lambda;
        let z = z as f64;
        match self {
            ClassicTest::Pearson => (z - mu).powi(2) / mu,
            ClassicTest::G => {
                let log_term = if z == 0.0 { 0.0 } else { 2.0 * z * (z / mu).ln() };
                log_term - 2.0 * (z - mu)
            }
        }
    }
}

impl fmt::Display for ClassicTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassicTest {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(ClassicTest::Pearson),
            "g" => Ok(ClassicTest::G),
            other => Err(format!("unknown test `{other}` (expected pearson or g)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SizeCurvePoint {
    pub lambda: f64,
    pub alpha: f64,
    pub asymptotic_size: f64,
    pub test: ClassicTest,
}

fn check_args(lambda: f64, alpha: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(UspError::DomainError(format!("lambda must be > 0, got {lambda}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(UspError::DomainError(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `P(limit statistic > c_α)` with `Z ~ Poisson(λ²)` and `c_α` the
/// `1 - α` quantile of chi-squared(1). The inequality is strict.
pub fn asymptotic_size(test: ClassicTest, lambda: f64, alpha: f64) -> Result<f64> {
    check_args(lambda, alpha)?;
    let c = chi2_quantile(1.0 - alpha, 1.0)?;
    poisson_tail_mass(|z| test.limit_statistic(z, lambda) > c, lambda * lambda)
}

pub fn pearson_asymptotic_size(lambda: f64, alpha: f64) -> Result<f64> {
    asymptotic_size(ClassicTest::Pearson, lambda, alpha)
}

pub fn g_asymptotic_size(lambda: f64, alpha: f64) -> Result<f64> {
    asymptotic_size(ClassicTest::G, lambda, alpha)
}

/// Evaluates the asymptotic size at each grid point, in grid order.
pub fn size_curve(test: ClassicTest, alpha: f64, lambda_grid: &[f64]) -> Result<Vec<SizeCurvePoint>> {
    lambda_grid
        .iter()
        .map(|&lambda| {
            Ok(SizeCurvePoint {
                lambda,
                alpha,
                asymptotic_size: asymptotic_size(test, lambda, alpha)?,
                test,
            })
        })
        .collect()
}

/// `k` evenly spaced points from `lo` to `hi` inclusive (`k = 1` gives `lo`).
pub fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..k)
            .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
            .collect(),
    }
}
