//! Independence testing for two-way contingency tables.
//!
//! The main test is a permutation test built on the U-statistic `Û`, an
//! unbiased estimator of the squared L2 distance between a joint distribution
//! and the product of its margins. Pearson's chi-squared test and the G-test
//! are provided as baselines, each with a chi-squared or a permutation
//! reference distribution.
//!
//! ```
//! use usp::{datasets, run_test, Method, Mode, PermutationConfig};
//!
//! let cfg = PermutationConfig { permutations: 999, seed: 1, ..Default::default() };
//! let res = run_test(&datasets::marital(), Method::Usp, Mode::Permutation, &cfg).unwrap();
//! assert!(res.p_value <= 0.01);
//! ```

pub mod asymptotics;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod estimators;
pub mod numerics;
pub mod perm;
pub mod sim;
pub mod table;

pub use asymptotics::{asymptotic_size, g_asymptotic_size, pearson_asymptotic_size, ClassicTest};
pub use datasets::EmbeddedDataset;
pub use error::{Result, UspError};
pub use estimators::{
    dhat_bruteforce, dhat_statistic, g_statistic, pearson_statistic, usp_statistic, StatisticKind,
    StatisticValue,
};
pub use numerics::RandomStream;
pub use perm::{run_test, run_test_with_stream, Method, Mode, PermutationConfig, TestResult, TiePolicy};
pub use table::{ContingencyTable, JointDistribution};
