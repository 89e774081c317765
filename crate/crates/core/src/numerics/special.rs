use crate::error::{Result, UspError};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const SERIES_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `ln(z!)`. Exact products are used while they fit in an `f64`.
pub fn ln_factorial(z: u64) -> f64 {
    if z < 2 {
        return 0.0;
    }
    if z <= 170 {
        let mut p = 1.0f64;
        for k in 2..=z {
            p *= k as f64;
        }
        p.ln()
    } else {
        ln_gamma(z as f64 + 1.0)
    }
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(UspError::DomainError(format!("gamma shape must be > 0, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(UspError::DomainError(format!("gamma argument must be >= 0, got {x}")));
    }
    Ok(())
}

// Power series for P(a, x); converges fast for x < a + 1.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * SERIES_EPS {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

// Lentz continued fraction for Q(a, x); used for x >= a + 1.
fn upper_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / CF_TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = b + an / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < SERIES_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized lower incomplete gamma function P(a, x).
pub fn reg_lower_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let p = if x < a + 1.0 {
        lower_series(a, x)
    } else {
        1.0 - upper_cf(a, x)
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x).
pub fn reg_upper_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let q = if x < a + 1.0 {
        1.0 - lower_series(a, x)
    } else {
        upper_cf(a, x)
    };
    Ok(q.clamp(0.0, 1.0))
}

fn check_df(k: f64) -> Result<()> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(UspError::DomainError(format!(
            "chi-squared degrees of freedom must be >= 1, got {k}"
        )));
    }
    Ok(())
}

/// CDF of the chi-squared distribution with `k` degrees of freedom.
pub fn chi2_cdf(x: f64, k: f64) -> Result<f64> {
    check_df(k)?;
    if x.is_nan() {
        return Err(UspError::DomainError("chi-squared argument is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    reg_lower_gamma(k / 2.0, x / 2.0)
}

/// Upper tail `1 - cdf`, computed without cancellation.
pub fn chi2_sf(x: f64, k: f64) -> Result<f64> {
    check_df(k)?;
    if x.is_nan() {
        return Err(UspError::DomainError("chi-squared argument is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    reg_upper_gamma(k / 2.0, x / 2.0)
}

/// Inverse of [`chi2_cdf`] by bracketed bisection.
pub fn chi2_quantile(p: f64, k: f64) -> Result<f64> {
    check_df(k)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(UspError::DomainError(format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    let mut lo = 0.0f64;
    let mut hi = k.max(1.0);
    while chi2_cdf(hi, k)? < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi2_cdf(mid, k)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(UspError::DomainError(format!("Poisson mean must be > 0, got {mu}")));
    }
    Ok(())
}

/// Poisson probability mass `e^{-mu} mu^z / z!`, evaluated in log space.
pub fn poisson_pmf(z: u64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok((z as f64 * mu.ln() - mu - ln_factorial(z)).exp())
}

/// Total Poisson(mu) mass of the set `{z : pred(z)}`.
///
/// Summation stops once the cumulative mass visited reaches `1 - 1e-12`.
pub fn poisson_tail_mass<F>(pred: F, mu: f64) -> Result<f64>
where
    F: Fn(u64) -> bool,
{
    check_mu(mu)?;
    const COVERAGE: f64 = 1.0 - 1e-12;
    let mut visited = 0.0;
    let mut mass = 0.0;
    let mut z = 0u64;
    // Hard cap well past any mass that could matter.
    let cap = (mu + 60.0 * mu.sqrt() + 200.0) as u64;
    while visited < COVERAGE && z <= cap {
        let pz = poisson_pmf(z, mu)?;
        visited += pz;
        if pred(z) {
            mass += pz;
        }
        z += 1;
    }
    Ok(mass.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Composite Simpson oracle for P(a, x) with a >= 1.
    // Simpson's rule after t = u², which removes the t^(a-1) kink at zero.
    fn lower_gamma_quadrature(a: f64, x: f64) -> f64 {
        let n = 20_000;
        let upper = x.sqrt();
        let h = upper / n as f64;
        let f = |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                2.0 * ((2.0 * a - 1.0) * u.ln() - u * u - ln_gamma(a)).exp()
            }
        };
        let mut s = f(0.0) + f(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(11.0), 3_628_800f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn lower_gamma_at_zero_is_zero() {
        for a in [0.1, 0.5, 1.0, 3.7, 50.0] {
            assert_eq!(reg_lower_gamma(a, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn lower_gamma_half_matches_erf() {
        // P(1/2, x) = erf(sqrt(x)); erf(sqrt(0.5)) = 0.6826894921370859 (one-sigma mass).
        // Substituting t = u^2 removes the endpoint singularity: P(1/2, x) = 2/sqrt(pi) ∫_0^sqrt(x) e^{-u^2} du.
        let upper = 0.5f64.sqrt();
        let n = 10_000;
        let h = upper / n as f64;
        let f = |u: f64| (-u * u).exp();
        let mut s = f(0.0) + f(upper);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        let oracle = s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt();
        let got = reg_lower_gamma(0.5, 0.5).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 0.682_689_492_137_085_9, epsilon = 1e-12);
    }

    #[test]
    fn lower_gamma_exponential_case() {
        for x in [0.01, 0.5, 1.0, 2.0, 7.5, 30.0] {
            let want = 1.0 - (-x as f64).exp();
            assert_abs_diff_eq!(reg_lower_gamma(1.0, x).unwrap(), want, epsilon = 1e-13);
        }
    }

    #[test]
    fn lower_gamma_matches_quadrature() {
        for &(a, x) in &[(1.5, 0.7), (2.0, 3.0), (3.5, 2.2), (6.0, 9.0), (12.0, 8.0)] {
            let got = reg_lower_gamma(a, x).unwrap();
            assert_abs_diff_eq!(got, lower_gamma_quadrature(a, x), epsilon = 1e-10);
        }
    }

    #[test]
    fn gamma_domain_errors() {
        assert!(reg_lower_gamma(0.0, 1.0).is_err());
        assert!(reg_lower_gamma(-1.0, 1.0).is_err());
        assert!(reg_lower_gamma(1.0, -0.1).is_err());
    }

    #[test]
    fn chi2_quantile_one_df_95() {
        assert_abs_diff_eq!(chi2_quantile(0.95, 1.0).unwrap(), 3.84146, epsilon = 1e-4);
    }

    #[test]
    fn chi2_round_trip() {
        for k in 1..=30 {
            for i in 1..=99 {
                let p = i as f64 / 100.0;
                let q = chi2_quantile(p, k as f64).unwrap();
                let back = chi2_cdf(q, k as f64).unwrap();
                assert!((back - p).abs() <= 1e-9, "k={k} p={p} back={back}");
            }
        }
    }

    #[test]
    fn chi2_upper_tail_table_one() {
        let p = chi2_sf(23.6, 12.0).unwrap();
        assert!((p - 0.0235).abs() <= 5e-4, "p = {p}");
    }

    #[test]
    fn chi2_cdf_monotone() {
        for k in [1.0, 2.0, 5.0, 12.0, 40.0] {
            let mut prev = 0.0;
            for i in 0..2000 {
                let c = chi2_cdf(i as f64 * 0.05, k).unwrap();
                assert!(c >= prev);
                prev = c;
            }
        }
    }

    #[test]
    fn chi2_domain_errors() {
        assert!(chi2_quantile(0.0, 1.0).is_err());
        assert!(chi2_quantile(1.0, 1.0).is_err());
        assert!(chi2_cdf(1.0, 0.0).is_err());
    }

    #[test]
    fn poisson_normalization() {
        for mu in [0.25, 1.0, 9.0] {
            let total = poisson_tail_mass(|_| true, mu).unwrap();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn poisson_pmf_values() {
        assert_abs_diff_eq!(poisson_pmf(0, 1.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        for mu in [0.5, 1.0, 4.0, 17.0, 30.0] {
            let mut direct = (-mu as f64).exp();
            for z in 0..=30u64 {
                if z > 0 {
                    direct *= mu / z as f64;
                }
                let lp = poisson_pmf(z, mu).unwrap();
                assert!(((lp - direct) / direct).abs() <= 1e-12, "z={z} mu={mu}");
            }
        }
    }

    #[test]
    fn poisson_tail_at_least_three() {
        let want = 1.0 - (-1.0f64).exp() * 2.5;
        assert_abs_diff_eq!(poisson_tail_mass(|z| z >= 3, 1.0).unwrap(), want, epsilon = 1e-12);
        assert_abs_diff_eq!(want, 0.080_301, epsilon = 1e-6);
    }

    #[test]
    fn poisson_domain_error() {
        assert!(poisson_pmf(1, 0.0).is_err());
        assert!(poisson_tail_mass(|_| true, -2.0).is_err());
    }
}
