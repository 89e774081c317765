//! Contingency tables, joint distributions, and sampling between them.

use rand::Rng;
use serde::Serialize;

use crate::error::{Result, UspError};
use crate::numerics::sampling::{binomial, hypergeometric};

/// Absolute tolerance on the total mass of a [`JointDistribution`].
pub const PROB_SUM_TOL: f64 = 1e-12;

/// An `I x J` table of non-negative integer cell counts.
///
/// Margins and the total are computed at construction; the table is immutable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    #[serde(skip)]
    row_totals: Vec<u64>,
    #[serde(skip)]
    col_totals: Vec<u64>,
    #[serde(skip)]
    n: u64,
}

impl ContingencyTable {
    /// Builds a table from row-major counts.
    pub fn from_counts(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(UspError::EmptyTable);
        }
        if counts.len() != rows * cols {
            return Err(UspError::ShapeMismatch(format!(
                "{} counts supplied for a {rows}x{cols} table",
                counts.len()
            )));
        }
        let mut row_totals = vec![0u64; rows];
        let mut col_totals = vec![0u64; cols];
        for i in 0..rows {
            for j in 0..cols {
                let c = counts[i * cols + j];
                row_totals[i] += c;
                col_totals[j] += c;
            }
        }
        let n = row_totals.iter().sum();
        Ok(Self {
            rows,
            cols,
            counts,
            row_totals,
            col_totals,
            n,
        })
    }

    /// Validates a rectangular matrix of (possibly signed) integers.
    pub fn from_rows<R: AsRef<[i64]>>(raw: &[R]) -> Result<Self> {
        let rows = raw.len();
        if rows == 0 {
            return Err(UspError::EmptyTable);
        }
        let cols = raw[0].as_ref().len();
        if cols == 0 {
            return Err(UspError::EmptyTable);
        }
        let mut counts = Vec::with_capacity(rows * cols);
        for (i, row) in raw.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(UspError::RaggedTable {
                    row: i,
                    expected: cols,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v < 0 {
                    return Err(UspError::NegativeCount {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                counts.push(v as u64);
            }
        }
        Self::from_counts(rows, cols, counts)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::from_counts(rows, cols, vec![0; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Total number of observations.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    /// Row-major cell counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn row_totals(&self) -> &[u64] {
        &self.row_totals
    }

    pub fn col_totals(&self) -> &[u64] {
        &self.col_totals
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    pub fn has_empty_margin(&self) -> bool {
        self.row_totals.contains(&0) || self.col_totals.contains(&0)
    }

    /// Copy of the table without its all-zero rows and columns.
    ///
    /// Returns `None` when every cell is zero.
    pub fn drop_empty(&self) -> Option<Self> {
        let keep_r: Vec<usize> = (0..self.rows).filter(|&i| self.row_totals[i] > 0).collect();
        let keep_c: Vec<usize> = (0..self.cols).filter(|&j| self.col_totals[j] > 0).collect();
        if keep_r.is_empty() || keep_c.is_empty() {
            return None;
        }
        let counts = keep_r
            .iter()
            .flat_map(|&i| keep_c.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Self::from_counts(keep_r.len(), keep_c.len(), counts).ok()
    }

    /// Expected counts under independence, `e_ij = o_i+ o_+j / n`.
    pub fn expected_counts(&self) -> Result<Vec<Vec<f64>>> {
        if self.n == 0 {
            return Err(UspError::EmptySample);
        }
        let n = self.n as f64;
        Ok(self
            .row_totals
            .iter()
            .map(|&r| {
                self.col_totals
                    .iter()
                    .map(|&c| r as f64 * c as f64 / n)
                    .collect()
            })
            .collect())
    }

    /// Expands the table into one `(row, column)` pair per observation,
    /// in row-major cell order.
    pub fn to_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::with_capacity(self.n as usize);
        for i in 0..self.rows {
            for j in 0..self.cols {
                for _ in 0..self.get(i, j) {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Tabulates observation pairs into an `rows x cols` table.
    pub fn from_pairs(rows: usize, cols: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut counts = vec![0u64; rows * cols];
        for &(i, j) in pairs {
            if i >= rows || j >= cols {
                return Err(UspError::ShapeMismatch(format!(
                    "pair ({i}, {j}) outside a {rows}x{cols} table"
                )));
            }
            counts[i * cols + j] += 1;
        }
        Self::from_counts(rows, cols, counts)
    }
}

/// Free-function form of [`ContingencyTable::from_rows`].
pub fn validate_table<R: AsRef<[i64]>>(raw: &[R]) -> Result<ContingencyTable> {
    ContingencyTable::from_rows(raw)
}

/// Cell probabilities of a pair of categorical variables.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    rows: usize,
    cols: usize,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(rows: usize, cols: usize, probs: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(UspError::EmptyTable);
        }
        if probs.len() != rows * cols {
            return Err(UspError::ShapeMismatch(format!(
                "{} probabilities supplied for a {rows}x{cols} distribution",
                probs.len()
            )));
        }
        for (k, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(UspError::InvalidDistribution(format!(
                    "cell ({}, {}) has probability {p}",
                    k / cols,
                    k % cols
                )));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(UspError::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { rows, cols, probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
            return Err(UspError::RaggedTable {
                row: i,
                expected: c,
                found: row.len(),
            });
        }
        Self::new(r, c, rows.concat())
    }

    /// Product distribution with the given margins.
    pub fn product(row_margins: &[f64], col_margins: &[f64]) -> Result<Self> {
        let probs = row_margins
            .iter()
            .flat_map(|&q| col_margins.iter().map(move |&r| q * r))
            .collect();
        Self::new(row_margins.len(), col_margins.len(), probs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.cols + j]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Row margins `q_i`.
    pub fn row_margins(&self) -> Vec<f64> {
        self.probs.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    /// Column margins `r_j`.
    pub fn col_margins(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// Draws a multinomial table of size `n` by sequential conditional
    /// binomials over the cells in row-major order.
    pub fn sample_table<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> ContingencyTable {
        let k = self.probs.len();
        let mut tail = vec![0.0; k + 1];
        for idx in (0..k).rev() {
            tail[idx] = tail[idx + 1] + self.probs[idx];
        }
        let mut counts = vec![0u64; k];
        let mut remaining = n;
        let mut last_positive = None;
        for idx in 0..k {
            if remaining == 0 {
                break;
            }
            let p = self.probs[idx];
            if p <= 0.0 {
                continue;
            }
            last_positive = Some(idx);
            let cond = if tail[idx] > 0.0 { p / tail[idx] } else { 1.0 };
            let draw = binomial(rng, remaining, cond.min(1.0));
            counts[idx] = draw;
            remaining -= draw;
        }
        if remaining > 0 {
            // Rounding left mass unassigned; it belongs to the last cell in support.
            let idx = last_positive.unwrap_or(k - 1);
            counts[idx] += remaining;
        }
        ContingencyTable::from_counts(self.rows, self.cols, counts)
            .expect("shape inherited from a valid distribution")
    }
}

/// Free-function form of [`JointDistribution::sample_table`].
pub fn sample_table<R: Rng + ?Sized>(
    dist: &JointDistribution,
    n: u64,
    rng: &mut R,
) -> ContingencyTable {
    dist.sample_table(n, rng)
}

/// Draws `m` of the table's `n` observations without replacement and
/// tabulates them (sequential multivariate hypergeometric over cells).
pub fn subsample<R: Rng + ?Sized>(
    table: &ContingencyTable,
    m: u64,
    rng: &mut R,
) -> Result<ContingencyTable> {
    let n = table.n();
    if m > n {
        return Err(UspError::SubsampleTooLarge { m, n });
    }
    let mut population = n;
    let mut remaining = m;
    let counts = table
        .counts()
        .iter()
        .map(|&c| {
            let x = hypergeometric(rng, population, c, remaining);
            population -= c;
            remaining -= x;
            x
        })
        .collect();
    ContingencyTable::from_counts(table.rows(), table.cols(), counts)
}

/// Draws `m` observations with replacement from the table's empirical
/// distribution and tabulates them.
pub fn resample<R: Rng + ?Sized>(
    table: &ContingencyTable,
    m: u64,
    rng: &mut R,
) -> Result<ContingencyTable> {
    if table.n() == 0 {
        return Err(UspError::EmptySample);
    }
    let mut mass_left = table.n();
    let mut remaining = m;
    let counts = table
        .counts()
        .iter()
        .map(|&c| {
            let x = if mass_left == 0 || c == 0 {
                0
            } else if c == mass_left {
                remaining
            } else {
                binomial(rng, remaining, c as f64 / mass_left as f64)
            };
            mass_left -= c;
            remaining -= x;
            x
        })
        .collect();
    ContingencyTable::from_counts(table.rows(), table.cols(), counts)
}
