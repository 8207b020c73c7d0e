//! Log densities of the distributions appearing in the prior ladders.
//!
//! Gamma uses the shape/rate parameterization, inverse gamma shape/scale.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const LN_PI: f64 = 1.1447298858494002;

fn support(ok: bool, what: &str, x: f64) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::OutOfSupport(format!("{what} = {x}")))
    }
}

/// Half-Cauchy(0, scale) on x > 0: 2 / (pi scale (1 + (x/scale)^2)).
pub fn ln_half_cauchy(x: f64, scale: f64) -> Result<f64> {
    support(x > 0.0 && x.is_finite(), "half-cauchy variate", x)?;
    Ok(2.0_f64.ln() - LN_PI - scale.ln() - (1.0 + (x / scale).powi(2)).ln())
}

/// Gamma(shape, rate) on x > 0.
pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> Result<f64> {
    support(x > 0.0 && x.is_finite(), "gamma variate", x)?;
    Ok(shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x)
}

/// InverseGamma(shape, scale) on x > 0.
pub fn ln_inv_gamma(x: f64, shape: f64, scale: f64) -> Result<f64> {
    support(x > 0.0 && x.is_finite(), "inverse-gamma variate", x)?;
    Ok(shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x)
}

/// Exponential(rate) on x > 0.
pub fn ln_exp(x: f64, rate: f64) -> Result<f64> {
    support(x > 0.0 && x.is_finite(), "exponential variate", x)?;
    Ok(rate.ln() - rate * x)
}

/// BetaPrime(a, b) on x > 0: x^(a-1) (1+x)^(-a-b) / B(a, b).
pub fn ln_beta_prime(x: f64, a: f64, b: f64) -> Result<f64> {
    support(x > 0.0 && x.is_finite(), "beta-prime variate", x)?;
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    Ok((a - 1.0) * x.ln() - (a + b) * (1.0 + x).ln() - ln_beta)
}

/// Symmetric Dirichlet(a, ..., a) over the open simplex.
pub fn ln_dirichlet_symmetric(phi: &[f64], a: f64) -> Result<f64> {
    let p = phi.len() as f64;
    let total: f64 = phi.iter().sum();
    if phi.iter().any(|&v| !(v > 0.0)) || (total - 1.0).abs() > 1e-8 {
        return Err(Error::OutOfSupport(format!(
            "dirichlet weights (sum = {total})"
        )));
    }
    let norm = ln_gamma(a * p) - p * ln_gamma(a);
    Ok(norm + phi.iter().map(|&v| (a - 1.0) * v.ln()).sum::<f64>())
}

/// Half Student-t(nu, scale = eta) on x > 0.
pub fn ln_half_student_t(x: f64, nu: f64, eta: f64) -> Result<f64> {
    support(x > 0.0 && x.is_finite(), "half-t variate", x)?;
    let z = x / eta;
    Ok(2.0_f64.ln() + ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - eta.ln()
        - (nu + 1.0) / 2.0 * (1.0 + z * z / nu).ln())
}

/// N(mean, sd^2).
pub fn ln_normal(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln() - 0.5 * z * z
}

/// Half-Cauchy(0, scale) CDF, for goodness-of-fit tests.
pub fn half_cauchy_cdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        2.0 / std::f64::consts::PI * (x / scale).atan()
    }
}

/// BetaPrime(a, 1) CDF: (x / (1 + x))^a.
pub fn beta_prime_b1_cdf(x: f64, a: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (x / (1.0 + x)).powf(a)
    }
}
