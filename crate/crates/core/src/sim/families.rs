use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::asymptotics::linspace;
use crate::error::{Result, UspError};
use crate::table::JointDistribution;

fn infeasible(epsilon: f64, reason: impl Into<String>) -> UspError {
    UspError::InfeasibleEpsilon {
        epsilon,
        reason: reason.into(),
    }
}

/// Geometric-margin product distribution `p_ij ∝ 2^{-(i+j)}` perturbed by
/// `+ε` at (1,1), (2,2) and `-ε` at (1,2), (2,1). Margins do not depend on ε
/// and `D = 4ε²`.
pub fn sparse_family(rows: usize, cols: usize, epsilon: f64) -> Result<JointDistribution> {
    if rows < 2 || cols < 2 {
        return Err(UspError::ShapeMismatch(
            "sparse family needs at least 2 rows and 2 columns".into(),
        ));
    }
    if !(epsilon >= 0.0) {
        return Err(infeasible(epsilon, "epsilon must be non-negative"));
    }
    let margin = |k: usize| -> Vec<f64> {
        let norm = 1.0 - 0.5f64.powi(k as i32);
        (1..=k).map(|i| 0.5f64.powi(i as i32) / norm).collect()
    };
    let q = margin(rows);
    let r = margin(cols);
    let mut probs: Vec<f64> = q
        .iter()
        .flat_map(|&qi| r.iter().map(move |&rj| qi * rj))
        .collect();
    for (i, j, sign) in [(0, 0, 1.0), (1, 1, 1.0), (0, 1, -1.0), (1, 0, -1.0)] {
        let p = &mut probs[i * cols + j];
        *p += sign * epsilon;
        if !(0.0..=1.0).contains(p) {
            return Err(infeasible(
                epsilon,
                format!("cell ({}, {}) leaves [0, 1]", i + 1, j + 1),
            ));
        }
    }
    JointDistribution::new(rows, cols, probs)
}

/// Checkerboard perturbation of the uniform distribution,
/// `p_ij = 1/(IJ) + (-1)^{i+j} ε`, with `D = IJ ε²`.
pub fn dense_family(rows: usize, cols: usize, epsilon: f64) -> Result<JointDistribution> {
    if rows == 0 || cols == 0 {
        return Err(UspError::EmptyTable);
    }
    let cells = (rows * cols) as f64;
    if !(epsilon >= 0.0) || epsilon > 1.0 / cells {
        return Err(infeasible(epsilon, format!("need 0 <= epsilon <= 1/{}", rows * cols)));
    }
    if epsilon > 0.0 && rows % 2 == 1 && cols % 2 == 1 {
        return Err(infeasible(
            epsilon,
            "checkerboard with odd rows and odd columns does not sum to one",
        ));
    }
    let probs = (1..=rows)
        .flat_map(|i| {
            (1..=cols).map(move |j| {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                (1.0 / cells + sign * epsilon).max(0.0)
            })
        })
        .collect();
    JointDistribution::new(rows, cols, probs)
}

/// 4x4 family `p_ij = (1 + (-1)^{i+j} ε) / (C_ε 2^{i+j})`.
pub fn multiplicative_family(epsilon: f64) -> Result<JointDistribution> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(infeasible(epsilon, "need 0 <= epsilon <= 1"));
    }
    let raw: Vec<f64> = (1..=4)
        .flat_map(|i| {
            (1..=4).map(move |j| {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                (1.0 + sign * epsilon) / 2f64.powi(i + j)
            })
        })
        .collect();
    let c: f64 = raw.iter().sum();
    JointDistribution::new(4, 4, raw.into_iter().map(|p| p / c).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Sparse,
    Dense,
    Multiplicative,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Sparse => "sparse",
            FamilyKind::Dense => "dense",
            FamilyKind::Multiplicative => "multiplicative",
        }
    }

    /// Shape used when none is given.
    pub fn default_shape(self) -> (usize, usize) {
        match self {
            FamilyKind::Sparse => (5, 8),
            FamilyKind::Dense => (6, 8),
            FamilyKind::Multiplicative => (4, 4),
        }
    }

    /// 11 evenly spaced ε values spanning the interesting power range.
    pub fn default_grid(self, rows: usize, cols: usize) -> Vec<f64> {
        let hi = match self {
            FamilyKind::Sparse => 0.075,
            FamilyKind::Dense => 1.0 / (rows * cols) as f64,
            FamilyKind::Multiplicative => 0.9,
        };
        linspace(0.0, hi, 11)
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sparse" => Ok(FamilyKind::Sparse),
            "dense" => Ok(FamilyKind::Dense),
            "multiplicative" | "mult" => Ok(FamilyKind::Multiplicative),
            other => Err(format!(
                "unknown family `{other}` (expected sparse, dense or multiplicative)"
            )),
        }
    }
}

/// One member of an alternative family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlternativeFamily {
    pub kind: FamilyKind,
    pub rows: usize,
    pub cols: usize,
    pub epsilon: f64,
}

impl AlternativeFamily {
    pub fn new(kind: FamilyKind, rows: usize, cols: usize, epsilon: f64) -> Self {
        Self {
            kind,
            rows,
            cols,
            epsilon,
        }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn distribution(&self) -> Result<JointDistribution> {
        match self.kind {
            FamilyKind::Sparse => sparse_family(self.rows, self.cols, self.epsilon),
            FamilyKind::Dense => dense_family(self.rows, self.cols, self.epsilon),
            FamilyKind::Multiplicative => {
                if (self.rows, self.cols) != (4, 4) {
                    return Err(UspError::ShapeMismatch(
                        "multiplicative family is 4x4".into(),
                    ));
                }
                multiplicative_family(self.epsilon)
            }
        }
    }
}
