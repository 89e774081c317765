//! Scalar discrete samplers shared by table sampling and permutation.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};

pub(crate) fn binomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, p: f64) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    Binomial::new(trials, p)
        .expect("binomial parameters checked above")
        .sample(rng)
}

/// Number of marked items in `draws` taken without replacement from a
/// population of `population` items of which `marked` are marked.
pub(crate) fn hypergeometric<R: Rng + ?Sized>(
    rng: &mut R,
    population: u64,
    marked: u64,
    draws: u64,
) -> u64 {
    debug_assert!(marked <= population && draws <= population);
    if draws == 0 || marked == 0 {
        return 0;
    }
    if marked == population {
        return draws;
    }
    if draws == population {
        return marked;
    }
    Hypergeometric::new(population, marked, draws)
        .expect("hypergeometric parameters checked above")
        .sample(rng)
}
