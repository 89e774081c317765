//! Population dependence measures and the test statistics built on them.
//!
//! The USP statistic and the unbiased estimator of `D` are evaluated through
//! exact integer sums of the table (`Σ o_ij²` and `Σ o_ij o_i+ o_+j`), so two
//! tables sharing margins produce bitwise-equal values whenever their exact
//! values agree. Permutation ranks and ties rely on this.

use serde::Serialize;

use crate::error::{Result, UspError};
use crate::table::{ContingencyTable, JointDistribution};

/// Largest sample the brute-force kernel average accepts.
pub const BRUTEFORCE_MAX_N: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticKind {
    Pearson,
    G,
    Usp,
    Dhat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StatisticValue {
    pub value: f64,
    pub kind: StatisticKind,
}

impl StatisticValue {
    fn new(kind: StatisticKind, value: f64) -> Self {
        Self { value, kind }
    }
}

/// Evaluates the statistic of the given kind.
pub fn statistic(kind: StatisticKind, table: &ContingencyTable) -> Result<f64> {
    let v = match kind {
        StatisticKind::Pearson => pearson_statistic(table)?,
        StatisticKind::G => g_statistic(table)?,
        StatisticKind::Usp => usp_statistic(table)?,
        StatisticKind::Dhat => dhat_statistic(table)?,
    };
    Ok(v.value)
}

fn check_same_shape(p: &JointDistribution, q: &JointDistribution) -> Result<()> {
    if p.rows() != q.rows() || p.cols() != q.cols() {
        return Err(UspError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            p.rows(),
            p.cols(),
            q.rows(),
            q.cols()
        )));
    }
    Ok(())
}

/// `Σ (p_ij - p'_ij)² / p'_ij`. Cells where both are zero contribute nothing.
pub fn chi2_divergence(p: &JointDistribution, reference: &JointDistribution) -> Result<f64> {
    check_same_shape(p, reference)?;
    let mut total = 0.0;
    for i in 0..p.rows() {
        for j in 0..p.cols() {
            let (a, b) = (p.get(i, j), reference.get(i, j));
            if b == 0.0 {
                if a > 0.0 {
                    return Err(UspError::DivergenceUndefined { row: i, col: j });
                }
                continue;
            }
            total += (a - b).powi(2) / b;
        }
    }
    Ok(total)
}

/// `D = Σ (p_ij - q_i r_j)²`, zero exactly under independence.
pub fn dependence_measure(p: &JointDistribution) -> f64 {
    let q = p.row_margins();
    let r = p.col_margins();
    let mut total = 0.0;
    for (i, qi) in q.iter().enumerate() {
        for (j, rj) in r.iter().enumerate() {
            total += (p.get(i, j) - qi * rj).powi(2);
        }
    }
    total
}

fn check_margins(table: &ContingencyTable) -> Result<()> {
    if table.n() == 0 {
        return Err(UspError::UndefinedStatistic("table has no observations".into()));
    }
    if let Some(i) = table.row_totals().iter().position(|&r| r == 0) {
        return Err(UspError::UndefinedStatistic(format!("row {i} has no observations")));
    }
    if let Some(j) = table.col_totals().iter().position(|&c| c == 0) {
        return Err(UspError::UndefinedStatistic(format!("column {j} has no observations")));
    }
    Ok(())
}

/// Pearson's `Σ (o - e)² / e`.
pub fn pearson_statistic(table: &ContingencyTable) -> Result<StatisticValue> {
    check_margins(table)?;
    let n = table.n() as f64;
    let mut total = 0.0;
    for (i, &r) in table.row_totals().iter().enumerate() {
        for (j, &c) in table.col_totals().iter().enumerate() {
            let e = r as f64 * c as f64 / n;
            let d = table.get(i, j) as f64 - e;
            total += d * d / e;
        }
    }
    Ok(StatisticValue::new(StatisticKind::Pearson, total))
}

/// Likelihood-ratio statistic `2 Σ o log(o / e)`, with `0 log 0 = 0`.
pub fn g_statistic(table: &ContingencyTable) -> Result<StatisticValue> {
    check_margins(table)?;
    let n = table.n() as f64;
    let mut total = 0.0;
    for (i, &r) in table.row_totals().iter().enumerate() {
        for (j, &c) in table.col_totals().iter().enumerate() {
            let o = table.get(i, j);
            if o == 0 {
                continue;
            }
            let e = r as f64 * c as f64 / n;
            total += o as f64 * (o as f64 / e).ln();
        }
    }
    Ok(StatisticValue::new(StatisticKind::G, (2.0 * total).max(0.0)))
}

/// Exact integer summaries that determine both U-hat and D-hat.
struct TableSums {
    n: u64,
    /// `(n - 2) Σ o² - 2 Σ o o_i+ o_+j`, the only table-dependent part.
    core: i128,
    /// `Σ o_i+²`
    row_sq: u128,
    /// `Σ o_+j²`
    col_sq: u128,
}

impl TableSums {
    fn new(table: &ContingencyTable) -> Result<Self> {
        let n = table.n();
        if n < 4 {
            return Err(UspError::SampleTooSmall { n, min: 4 });
        }
        let mut sq = 0u128;
        let mut cross = 0u128;
        for (i, &r) in table.row_totals().iter().enumerate() {
            for (j, &c) in table.col_totals().iter().enumerate() {
                let o = table.get(i, j) as u128;
                sq += o * o;
                cross += o * r as u128 * c as u128;
            }
        }
        let row_sq = table.row_totals().iter().map(|&r| (r as u128).pow(2)).sum();
        let col_sq = table.col_totals().iter().map(|&c| (c as u128).pow(2)).sum();
        let core = (n as i128 - 2) * sq as i128 - 2 * cross as i128;
        Ok(Self {
            n,
            core,
            row_sq,
            col_sq,
        })
    }

    fn usp(&self) -> f64 {
        let n = self.n as f64;
        let table_part = self.core as f64 / (n * (n - 2.0) * (n - 3.0));
        let margin_part = (self.row_sq as f64 * self.col_sq as f64) / (n * n * n * (n - 3.0));
        table_part + margin_part
    }

    fn margin_only_terms(&self) -> f64 {
        let n = self.n as f64;
        let (r2, c2) = (self.row_sq as f64, self.col_sq as f64);
        (r2 + c2) / (n * (n - 1.0) * (n - 3.0))
            + (3.0 * n - 2.0) * r2 * c2 / (n.powi(3) * (n - 1.0) * (n - 2.0) * (n - 3.0))
            - n / ((n - 1.0) * (n - 3.0))
    }
}

/// The USP test statistic
/// `Σ (o - e)² / (n(n-3)) - 4 Σ o e / (n(n-2)(n-3))`, defined for `n >= 4`
/// including tables with empty rows or columns.
pub fn usp_statistic(table: &ContingencyTable) -> Result<StatisticValue> {
    let sums = TableSums::new(table)?;
    Ok(StatisticValue::new(StatisticKind::Usp, sums.usp()))
}

/// Unbiased (fourth-order U-statistic) estimator of `D`: the USP statistic
/// plus three terms that depend only on the margins.
pub fn dhat_statistic(table: &ContingencyTable) -> Result<StatisticValue> {
    let sums = TableSums::new(table)?;
    Ok(StatisticValue::new(
        StatisticKind::Dhat,
        sums.usp() + sums.margin_only_terms(),
    ))
}

fn kernel(obs: [(usize, usize); 4], rows: usize, cols: usize) -> f64 {
    let [(x1, y1), (x2, y2), (x3, y3), (_, y4)] = obs;
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    let mut h = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            h += ind(x1 == i && y1 == j) * ind(x2 == i && y2 == j)
                - 2.0 * ind(x1 == i && y1 == j) * ind(x2 == i) * ind(y3 == j)
                + ind(x1 == i) * ind(y2 == j) * ind(x3 == i) * ind(y4 == j);
        }
    }
    h
}

/// Average of the fourth-order kernel over all ordered 4-tuples of distinct
/// observations. Cost is `O(n^4 I J)`; intended as a reference for small `n`.
pub fn dhat_bruteforce(pairs: &[(usize, usize)]) -> Result<f64> {
    let n = pairs.len();
    if n < 4 {
        return Err(UspError::SampleTooSmall { n: n as u64, min: 4 });
    }
    if n > BRUTEFORCE_MAX_N {
        return Err(UspError::SampleTooLargeForOracle {
            n,
            max: BRUTEFORCE_MAX_N,
        });
    }
    let rows = pairs.iter().map(|p| p.0).max().unwrap_or(0) + 1;
    let cols = pairs.iter().map(|p| p.1).max().unwrap_or(0) + 1;
    let mut total = 0.0;
    let mut count = 0u64;
    for a in 0..n {
        for b in 0..n {
            if b == a {
                continue;
            }
            for c in 0..n {
                if c == a || c == b {
                    continue;
                }
                for d in 0..n {
                    if d == a || d == b || d == c {
                        continue;
                    }
                    total += kernel([pairs[a], pairs[b], pairs[c], pairs[d]], rows, cols);
                    count += 1;
                }
            }
        }
    }
    Ok(total / count as f64)
}
