//! Special functions and seeded random streams.

mod rng;
pub(crate) mod sampling;
mod special;

pub use rng::RandomStream;
pub use special::{
    chi2_cdf, chi2_quantile, chi2_sf, ln_factorial, ln_gamma, poisson_pmf, poisson_tail_mass,
    reg_lower_gamma, reg_upper_gamma,
};
