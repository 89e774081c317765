//! Permutation tests driven directly by cell counts.
//!
//! A permuted table is what one obtains by pairing the row labels of the data
//! with a uniformly random permutation of the column labels. Its law is the
//! multivariate hypergeometric law over tables with the observed margins, and
//! it is sampled here row by row without materialising individual labels.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, UspError};
use crate::estimators::{statistic, StatisticKind};
use crate::numerics::sampling::hypergeometric;
use crate::numerics::{chi2_sf, RandomStream};
use crate::table::ContingencyTable;

/// Relative tolerance under which two statistic values count as tied.
pub const TIE_RTOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Usp,
    Pearson,
    G,
}

impl Method {
    pub fn kind(self) -> StatisticKind {
        match self {
            Method::Usp => StatisticKind::Usp,
            Method::Pearson => StatisticKind::Pearson,
            Method::G => StatisticKind::G,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Usp => "usp",
            Method::Pearson => "pearson",
            Method::G => "g",
        }
    }

    pub fn statistic(self, table: &ContingencyTable) -> Result<f64> {
        statistic(self.kind(), table)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "usp" => Ok(Method::Usp),
            "pearson" | "chi2" => Ok(Method::Pearson),
            "g" | "gtest" | "g-test" => Ok(Method::G),
            other => Err(format!("unknown method `{other}` (expected usp, pearson or g)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Permutation,
    Classic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Permutation => "permutation",
            Mode::Classic => "classic",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "permutation" | "perm" => Ok(Mode::Permutation),
            "classic" | "asymptotic" => Ok(Mode::Classic),
            other => Err(format!("unknown mode `{other}` (expected permutation or classic)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Ties with the observed value are broken uniformly at random.
    #[default]
    Randomized,
    /// Every tie counts against the observed value.
    Conservative,
}

impl FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "randomized" | "random" => Ok(TiePolicy::Randomized),
            "conservative" => Ok(TiePolicy::Conservative),
            other => Err(format!("unknown tie policy `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PermutationConfig {
    /// Number of permuted tables `B`.
    pub permutations: u64,
    pub alpha: f64,
    pub seed: u64,
    pub tie_policy: TiePolicy,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self {
            permutations: 999,
            alpha: 0.05,
            seed: 0,
            tie_policy: TiePolicy::Randomized,
        }
    }
}

impl PermutationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 {
            return Err(UspError::InvalidConfig("B must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(UspError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// False when `alpha (B + 1) < 1`, i.e. the smallest attainable p-value
    /// already exceeds `alpha` and the test can never reject.
    pub fn can_reject(&self) -> bool {
        self.alpha * (self.permutations as f64 + 1.0) >= 1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub method: Method,
    pub mode: Mode,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub permutations: Option<u64>,
    pub df: Option<u64>,
    pub seed: u64,
}

/// Samples a table with the same margins as `table`, distributed as the
/// table of a uniformly random re-pairing of row and column labels.
pub fn permuted_table<R: Rng + ?Sized>(table: &ContingencyTable, rng: &mut R) -> ContingencyTable {
    let (rows, cols) = (table.rows(), table.cols());
    let mut col_left: Vec<u64> = table.col_totals().to_vec();
    let mut counts = vec![0u64; rows * cols];
    let mut pool: u64 = table.n();
    let last_row = (0..rows).rev().find(|&i| table.row_totals()[i] > 0);
    for i in 0..rows {
        let r = table.row_totals()[i];
        if r == 0 {
            continue;
        }
        let row = &mut counts[i * cols..(i + 1) * cols];
        if Some(i) == last_row {
            row.copy_from_slice(&col_left);
            break;
        }
        let mut draws = r;
        let mut population = pool;
        for j in 0..cols {
            if draws == 0 {
                break;
            }
            let x = hypergeometric(rng, population, col_left[j], draws);
            population -= col_left[j];
            row[j] = x;
            draws -= x;
        }
        for j in 0..cols {
            col_left[j] -= row[j];
        }
        pool -= r;
    }
    ContingencyTable::from_counts(rows, cols, counts).expect("shape preserved")
}

/// Reference implementation of [`permuted_table`] that shuffles the column
/// label of every observation. `O(n)` per table.
pub fn permuted_table_by_shuffle<R: Rng + ?Sized>(
    table: &ContingencyTable,
    rng: &mut R,
) -> ContingencyTable {
    let pairs = table.to_pairs();
    let mut ys: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    ys.shuffle(rng);
    let shuffled: Vec<(usize, usize)> = pairs.iter().zip(ys).map(|(p, y)| (p.0, y)).collect();
    ContingencyTable::from_pairs(table.rows(), table.cols(), &shuffled).expect("labels in range")
}

/// The `B` permuted tables used by a test with the given stream; table `b`
/// (1-based) is drawn from `stream.derive(b)`.
pub fn permuted_tables(
    table: &ContingencyTable,
    permutations: u64,
    stream: &RandomStream,
) -> Vec<ContingencyTable> {
    (1..=permutations)
        .into_par_iter()
        .map(|b| permuted_table(table, &mut stream.derive(b)))
        .collect()
}

fn ties(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= TIE_RTOL * a.abs().max(b.abs())
}

/// p-value of `observed` against permutation replicates `null`.
///
/// Randomized: `(1 + #{T_b > T_0} + U) / (B + 1)` with `U` uniform on
/// `{0, ..., #ties}`. Conservative: `(1 + #{T_b >= T_0}) / (B + 1)`.
pub fn pvalue_from_replicates<R: Rng + ?Sized>(
    observed: f64,
    null: &[f64],
    policy: TiePolicy,
    rng: &mut R,
) -> f64 {
    let mut above = 0u64;
    let mut tied = 0u64;
    for &t in null {
        if ties(t, observed) {
            tied += 1;
        } else if t > observed {
            above += 1;
        }
    }
    let extra = match policy {
        TiePolicy::Randomized => rng.random_range(0..=tied),
        TiePolicy::Conservative => tied,
    };
    (1 + above + extra) as f64 / (null.len() as f64 + 1.0)
}

/// Computes the statistic on the data and on `B` permuted tables and returns
/// `(observed statistic, p-value)`.
///
/// Permuted table `b` uses `stream.derive(b)`; the tie-break draw uses
/// `stream.derive(0)`. The result does not depend on the number of threads.
pub fn permutation_pvalue<F>(
    table: &ContingencyTable,
    stat: F,
    config: &PermutationConfig,
    stream: &RandomStream,
) -> Result<(f64, f64)>
where
    F: Fn(&ContingencyTable) -> Result<f64> + Sync,
{
    config.validate()?;
    let observed = stat(table)?;
    let null: Vec<f64> = (1..=config.permutations)
        .into_par_iter()
        .map(|b| stat(&permuted_table(table, &mut stream.derive(b))))
        .collect::<Result<_>>()?;
    let p = pvalue_from_replicates(observed, &null, config.tie_policy, &mut stream.derive(0));
    Ok((observed, p))
}

/// Runs a test with the stream `RandomStream::new(config.seed, 0)`.
pub fn run_test(
    table: &ContingencyTable,
    method: Method,
    mode: Mode,
    config: &PermutationConfig,
) -> Result<TestResult> {
    run_test_with_stream(table, method, mode, config, &RandomStream::new(config.seed, 0))
}

pub fn run_test_with_stream(
    table: &ContingencyTable,
    method: Method,
    mode: Mode,
    config: &PermutationConfig,
    stream: &RandomStream,
) -> Result<TestResult> {
    config.validate()?;
    match mode {
        Mode::Classic => {
            if method == Method::Usp {
                return Err(UspError::InvalidMode(
                    "the USP statistic has no chi-squared reference distribution; use permutation mode"
                        .into(),
                ));
            }
            let df = ((table.rows() - 1) * (table.cols() - 1)) as u64;
            if df == 0 {
                return Err(UspError::InvalidMode(
                    "classic tests need at least two rows and two columns".into(),
                ));
            }
            let value = method.statistic(table)?;
            let p_value = chi2_sf(value, df as f64)?;
            Ok(TestResult {
                method,
                mode,
                statistic: value,
                p_value,
                reject: p_value <= config.alpha,
                alpha: config.alpha,
                permutations: None,
                df: Some(df),
                seed: config.seed,
            })
        }
        Mode::Permutation => {
            let (value, p_value) =
                permutation_pvalue(table, |t| method.statistic(t), config, stream)?;
            Ok(TestResult {
                method,
                mode,
                statistic: value,
                p_value,
                reject: p_value <= config.alpha,
                alpha: config.alpha,
                permutations: Some(config.permutations),
                df: None,
                seed: config.seed,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{eyecolour, marital};
    use crate::numerics::chi2_sf;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn t(rows: &[&[i64]]) -> ContingencyTable {
        ContingencyTable::from_rows(rows).unwrap()
    }

    fn frequency_of(
        table: &ContingencyTable,
        target: &ContingencyTable,
        reps: u64,
        seed: u64,
    ) -> f64 {
        let root = RandomStream::new(seed, 0);
        let hits = (0..reps)
            .filter(|&r| permuted_table(table, &mut root.derive(r)) == *target)
            .count();
        hits as f64 / reps as f64
    }

    #[test]
    fn single_row_is_fixed() {
        let tab = t(&[&[0, 0, 0], &[3, 1, 4], &[0, 0, 0]]);
        let mut s = RandomStream::new(1, 0);
        for _ in 0..50 {
            assert_eq!(permuted_table(&tab, &mut s), tab);
        }
    }

    #[test]
    fn identity_two_by_two_is_fair_coin() {
        let tab = t(&[&[1, 0], &[0, 1]]);
        let reps = 100_000;
        let f = frequency_of(&tab, &tab, reps, 3);
        let se = (0.25 / reps as f64).sqrt();
        assert!((f - 0.5).abs() < 3.0 * se, "{f}");
    }

    #[test]
    fn diagonal_two_two_hypergeometric() {
        // C(2,1) C(2,1) / C(4,2) = 2/3
        let tab = t(&[&[2, 0], &[0, 2]]);
        let reps = 100_000;
        let f = frequency_of(&tab, &t(&[&[1, 1], &[1, 1]]), reps, 4);
        let p = 2.0 / 3.0;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((f - p).abs() < 3.0 * se, "{f}");
    }

    #[test]
    fn matches_label_shuffle_in_distribution() {
        // Compare the law of cell (0, 0) and (1, 2) under both generators on a
        // 3x3 table via a two-sample chi-squared homogeneity test.
        let tab = t(&[&[4, 2, 1], &[0, 3, 5], &[2, 2, 1]]);
        let reps = 40_000u64;
        let root = RandomStream::new(99, 0);
        let mut a: HashMap<(u64, u64), f64> = HashMap::new();
        let mut b: HashMap<(u64, u64), f64> = HashMap::new();
        for r in 0..reps {
            let x = permuted_table(&tab, &mut root.derive(2 * r));
            let y = permuted_table_by_shuffle(&tab, &mut root.derive(2 * r + 1));
            *a.entry((x.get(0, 0), x.get(1, 2))).or_default() += 1.0;
            *b.entry((y.get(0, 0), y.get(1, 2))).or_default() += 1.0;
        }
        let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).copied().collect();
        let mut stat = 0.0;
        let mut cells = 0;
        let mut pooled_small = (0.0, 0.0);
        for k in keys {
            let (oa, ob) = (*a.get(&k).unwrap_or(&0.0), *b.get(&k).unwrap_or(&0.0));
            if oa + ob < 20.0 {
                pooled_small.0 += oa;
                pooled_small.1 += ob;
                continue;
            }
            let e = (oa + ob) / 2.0;
            stat += (oa - e).powi(2) / e + (ob - e).powi(2) / e;
            cells += 1;
        }
        if pooled_small.0 + pooled_small.1 > 0.0 {
            let e = (pooled_small.0 + pooled_small.1) / 2.0;
            stat += (pooled_small.0 - e).powi(2) / e + (pooled_small.1 - e).powi(2) / e;
            cells += 1;
        }
        let p = chi2_sf(stat, (cells - 1) as f64).unwrap();
        assert!(p > 0.001, "homogeneity p = {p} over {cells} cells");
    }

    #[test]
    fn constant_statistic_gives_uniform_pvalues() {
        let tab = marital();
        let config = PermutationConfig {
            permutations: 9,
            ..Default::default()
        };
        let reps = 10_000u64;
        let mut counts = [0f64; 10];
        let root = RandomStream::new(17, 0);
        for r in 0..reps {
            let (_, p) = permutation_pvalue(&tab, |_| Ok(0.0), &config, &root.derive(r)).unwrap();
            let k = (p * 10.0).round() as usize;
            assert!((1..=10).contains(&k));
            counts[k - 1] += 1.0;
        }
        let e = reps as f64 / 10.0;
        let stat: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
        assert!(chi2_sf(stat, 9.0).unwrap() > 0.001, "{counts:?}");
    }

    #[test]
    fn conservative_counts_all_ties() {
        let tab = marital();
        let config = PermutationConfig {
            permutations: 9,
            tie_policy: TiePolicy::Conservative,
            ..Default::default()
        };
        let (_, p) = permutation_pvalue(&tab, |_| Ok(1.0), &config, &RandomStream::new(0, 0)).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn classic_table_one() {
        let cfg = PermutationConfig::default();
        let r = run_test(&marital(), Method::Pearson, Mode::Classic, &cfg).unwrap();
        assert!((r.p_value - 0.0235).abs() <= 5e-4);
        assert!(r.reject);
        assert_eq!(r.df, Some(12));
        let strict = PermutationConfig { alpha: 0.01, ..cfg };
        assert!(!run_test(&marital(), Method::Pearson, Mode::Classic, &strict).unwrap().reject);
        let g = run_test(&marital(), Method::G, Mode::Classic, &cfg).unwrap();
        assert!((g.p_value - 0.0205).abs() <= 5e-4, "{}", g.p_value);
    }

    #[test]
    fn usp_classic_is_invalid() {
        let err = run_test(&marital(), Method::Usp, Mode::Classic, &PermutationConfig::default());
        assert!(matches!(err, Err(UspError::InvalidMode(_))));
    }

    #[test]
    fn zero_margin_original_is_undefined_for_classic_statistics() {
        let tab = t(&[&[3, 0, 2], &[1, 0, 4]]);
        let cfg = PermutationConfig { permutations: 19, ..Default::default() };
        assert!(matches!(
            run_test(&tab, Method::Pearson, Mode::Permutation, &cfg),
            Err(UspError::UndefinedStatistic(_))
        ));
        assert!(run_test(&tab, Method::Usp, Mode::Permutation, &cfg).is_ok());
    }

    #[test]
    fn permutation_result_shape_and_determinism() {
        let cfg = PermutationConfig { permutations: 199, seed: 5, ..Default::default() };
        let a = run_test(&eyecolour(), Method::Usp, Mode::Permutation, &cfg).unwrap();
        let b = run_test(&eyecolour(), Method::Usp, Mode::Permutation, &cfg).unwrap();
        assert_eq!(a, b);
        let k = a.p_value * 200.0;
        assert!((k - k.round()).abs() < 1e-9);
        assert_eq!(a.reject, a.p_value <= cfg.alpha);
        assert_eq!(a.permutations, Some(199));
        assert_eq!(a.df, None);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = PermutationConfig { permutations: 299, seed: 11, ..Default::default() };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_test(&marital(), Method::G, Mode::Permutation, &cfg).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn config_validation() {
        let bad_b = PermutationConfig { permutations: 0, ..Default::default() };
        assert!(bad_b.validate().is_err());
        let bad_alpha = PermutationConfig { alpha: 1.0, ..Default::default() };
        assert!(bad_alpha.validate().is_err());
        let tiny = PermutationConfig { permutations: 9, alpha: 0.05, ..Default::default() };
        assert!(!tiny.can_reject());
        assert!(PermutationConfig::default().can_reject());
    }

    fn table_strategy() -> impl Strategy<Value = ContingencyTable> {
        (1usize..5, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(0u64..12, r * c)
                .prop_map(move |v| ContingencyTable::from_counts(r, c, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn permuted_tables_keep_margins(tab in table_strategy(), seed: u64) {
            let p = permuted_table(&tab, &mut RandomStream::new(seed, 1));
            prop_assert_eq!(p.row_totals(), tab.row_totals());
            prop_assert_eq!(p.col_totals(), tab.col_totals());
        }

        #[test]
        fn usp_and_dhat_decisions_agree(tab in table_strategy(), seed: u64) {
            prop_assume!(tab.n() >= 4);
            let cfg = PermutationConfig { permutations: 39, seed, ..Default::default() };
            let stream = RandomStream::new(seed, 0);
            let (_, pu) = permutation_pvalue(&tab, |t| statistic(StatisticKind::Usp, t), &cfg, &stream).unwrap();
            let (_, pd) = permutation_pvalue(&tab, |t| statistic(StatisticKind::Dhat, t), &cfg, &stream).unwrap();
            prop_assert_eq!(pu, pd);
        }
    }
}
