//! Monte Carlo power, estimation and subsampling studies.
//!
//! Every replicate owns a stream keyed by its indices, so results are
//! identical for any number of worker threads.
//!
//! Pearson and G statistics are undefined on tables with an empty row or
//! column, which multinomial draws from skewed families produce often. The
//! harness evaluates those two statistics on the table with its empty rows and
//! columns removed; a table that collapses to a single row or column counts as
//! a non-rejection.

mod families;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

pub use families::{
    dense_family, multiplicative_family, sparse_family, AlternativeFamily, FamilyKind,
};

use crate::error::{Result, UspError};
use crate::estimators::dhat_statistic;
use crate::numerics::RandomStream;
use crate::perm::{run_test_with_stream, Method, Mode, PermutationConfig};
use crate::table::{resample, subsample, ContingencyTable};

/// A method paired with the way its critical value is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TestSpec {
    pub method: Method,
    pub mode: Mode,
}

impl TestSpec {
    pub const USP: TestSpec = TestSpec::new(Method::Usp, Mode::Permutation);
    pub const PEARSON_PERM: TestSpec = TestSpec::new(Method::Pearson, Mode::Permutation);
    pub const G_PERM: TestSpec = TestSpec::new(Method::G, Mode::Permutation);
    pub const PEARSON_CLASSIC: TestSpec = TestSpec::new(Method::Pearson, Mode::Classic);
    pub const G_CLASSIC: TestSpec = TestSpec::new(Method::G, Mode::Classic);

    /// The three permutation tests.
    pub const PERMUTATION_TESTS: [TestSpec; 3] =
        [TestSpec::USP, TestSpec::PEARSON_PERM, TestSpec::G_PERM];

    pub const fn new(method: Method, mode: Mode) -> Self {
        Self { method, mode }
    }

    pub fn label(&self) -> String {
        match (self.method, self.mode) {
            (Method::Usp, _) => "usp".into(),
            (m, Mode::Permutation) => format!("{m}-perm"),
            (m, Mode::Classic) => format!("{m}-classic"),
        }
    }
}

impl fmt::Display for TestSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for TestSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let (method, mode) = match s.rsplit_once('-') {
            Some((m, "perm")) | Some((m, "permutation")) => (m, Mode::Permutation),
            Some((m, "classic")) => (m, Mode::Classic),
            _ => (s.as_str(), Mode::Permutation),
        };
        let method: Method = method.parse()?;
        if method == Method::Usp && mode == Mode::Classic {
            return Err("usp has no classic mode".into());
        }
        Ok(TestSpec::new(method, mode))
    }
}

/// Parses a comma-separated list such as `usp,pearson-perm,g-classic`.
pub fn parse_test_list(s: &str) -> std::result::Result<Vec<TestSpec>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestRate {
    pub test: TestSpec,
    pub rejection_rate: f64,
    pub std_err: f64,
}

impl TestRate {
    fn from_count(test: TestSpec, rejections: u64, reps: u64) -> Self {
        let r = rejections as f64 / reps as f64;
        Self {
            test,
            rejection_rate: r,
            std_err: (r * (1.0 - r) / reps as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerCurvePoint {
    pub epsilon: f64,
    pub n: u64,
    pub reps: u64,
    pub rates: Vec<TestRate>,
}

impl PowerCurvePoint {
    pub fn rate(&self, test: TestSpec) -> Option<&TestRate> {
        self.rates.iter().find(|r| r.test == test)
    }
}

/// Runs one test on one table and reports whether it rejects.
pub fn rejects(
    test: TestSpec,
    table: &ContingencyTable,
    config: &PermutationConfig,
    stream: &RandomStream,
) -> Result<bool> {
    let target = match test.method {
        Method::Usp => table.clone(),
        Method::Pearson | Method::G => match table.drop_empty() {
            Some(t) if t.rows() >= 2 && t.cols() >= 2 => t,
            _ => return Ok(false),
        },
    };
    Ok(run_test_with_stream(&target, test.method, test.mode, config, stream)?.reject)
}

fn check_reps(reps: u64) -> Result<()> {
    if reps == 0 {
        return Err(UspError::InvalidConfig("reps must be at least 1".into()));
    }
    Ok(())
}

/// Rejection rate of each test over `reps` multinomial tables of size `n`
/// for every ε in the grid.
///
/// Replicate `r` at grid index `e` samples its table from
/// `root.derive(e).derive(r).derive(0)` and runs test `k` with
/// `.derive(k + 1)`, where `root = RandomStream::new(config.seed, 0)`.
pub fn power_curve(
    family: AlternativeFamily,
    eps_grid: &[f64],
    n: u64,
    reps: u64,
    tests: &[TestSpec],
    config: &PermutationConfig,
) -> Result<Vec<PowerCurvePoint>> {
    check_reps(reps)?;
    config.validate()?;
    let root = RandomStream::new(config.seed, 0);
    eps_grid
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            let dist = family.with_epsilon(eps).distribution()?;
            let eps_stream = root.derive(e as u64);
            let decisions: Vec<Vec<bool>> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let rep = eps_stream.derive(r);
                    let table = dist.sample_table(n, &mut rep.derive(0));
                    tests
                        .iter()
                        .enumerate()
                        .map(|(k, &t)| rejects(t, &table, config, &rep.derive(k as u64 + 1)))
                        .collect::<Result<Vec<bool>>>()
                })
                .collect::<Result<_>>()?;
            let rates = tests
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    let hits = decisions.iter().filter(|d| d[k]).count() as u64;
                    TestRate::from_count(t, hits, reps)
                })
                .collect();
            Ok(PowerCurvePoint {
                epsilon: eps,
                n,
                reps,
                rates,
            })
        })
        .collect()
}

/// `reps` independent values of the unbiased estimator of `D` on multinomial
/// tables of size `n`; replicate `r` uses `RandomStream::new(seed, 0).derive(r)`.
pub fn dhat_samples(family: AlternativeFamily, n: u64, reps: u64, seed: u64) -> Result<Vec<f64>> {
    check_reps(reps)?;
    if n < 4 {
        return Err(UspError::SampleTooSmall { n, min: 4 });
    }
    let dist = family.distribution()?;
    let root = RandomStream::new(seed, 0);
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let table = dist.sample_table(n, &mut root.derive(r));
            Ok(dhat_statistic(&table)?.value)
        })
        .collect()
}

/// How observations are drawn from a table in a subsampling study.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingScheme {
    #[default]
    WithoutReplacement,
    /// Bootstrap draws from the empirical distribution of the table.
    WithReplacement,
}

/// Rejection proportion of each test over `reps` subsamples of size `m`
/// drawn without replacement from `table`.
pub fn subsample_study(
    table: &ContingencyTable,
    m: u64,
    reps: u64,
    tests: &[TestSpec],
    config: &PermutationConfig,
) -> Result<Vec<TestRate>> {
    subsample_study_with(table, m, reps, tests, config, SamplingScheme::WithoutReplacement)
}

/// [`subsample_study`] with a choice of sampling scheme. Replicate `r` draws
/// its sample from `root.derive(r).derive(0)` and runs test `k` with
/// `.derive(k + 1)`, where `root = RandomStream::new(config.seed, 0)`.
pub fn subsample_study_with(
    table: &ContingencyTable,
    m: u64,
    reps: u64,
    tests: &[TestSpec],
    config: &PermutationConfig,
    scheme: SamplingScheme,
) -> Result<Vec<TestRate>> {
    check_reps(reps)?;
    config.validate()?;
    if scheme == SamplingScheme::WithoutReplacement && m > table.n() {
        return Err(UspError::SubsampleTooLarge { m, n: table.n() });
    }
    if m < 4 {
        return Err(UspError::SampleTooSmall { n: m, min: 4 });
    }
    let root = RandomStream::new(config.seed, 0);
    let decisions: Vec<Vec<bool>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let rep = root.derive(r);
            let mut draw = rep.derive(0);
            let sub = match scheme {
                SamplingScheme::WithoutReplacement => subsample(table, m, &mut draw)?,
                SamplingScheme::WithReplacement => resample(table, m, &mut draw)?,
            };
            tests
                .iter()
                .enumerate()
                .map(|(k, &t)| rejects(t, &sub, config, &rep.derive(k as u64 + 1)))
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<_>>()?;
    Ok(tests
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let hits = decisions.iter().filter(|d| d[k]).count() as u64;
            TestRate::from_count(t, hits, reps)
        })
        .collect())
}
