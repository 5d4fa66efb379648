//! Negative binomial log-PMF, loss, and analytic gradients.
//!
//! Parameterized by mean μ and dispersion φ; variance is μ + μ²/φ, and the
//! Poisson distribution is recovered as 1/φ → 0.

use serde::{Deserialize, Serialize};

use crate::error::{CannError, Result};
use crate::special::{digamma, ln_gamma};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegBinParams {
    pub mu: f64,
    pub phi: f64,
}

impl NegBinParams {
    pub fn new(mu: f64, phi: f64) -> Result<Self> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(CannError::domain(format!(
                "negbin mean must be finite and > 0, got {mu}"
            )));
        }
        if !phi.is_finite() || phi <= 0.0 {
            return Err(CannError::domain(format!(
                "negbin dispersion must be finite and > 0, got {phi}"
            )));
        }
        Ok(NegBinParams { mu, phi })
    }
}

/// ln P(Y = y) = ln Γ(y+φ) − ln Γ(y+1) − ln Γ(φ) + φ·ln(φ/(φ+μ)) + y·ln(μ/(μ+φ)).
///
/// The φ·ln(φ/(φ+μ)) term is computed as −φ·ln1p(μ/φ), which stays accurate
/// in the large-φ (Poisson) limit.
pub fn log_pmf(y: u64, p: &NegBinParams) -> Result<f64> {
    let yf = y as f64;
    let ln_coeff = ln_gamma(yf + p.phi)? - ln_gamma(yf + 1.0)? - ln_gamma(p.phi)?;
    let phi_term = -p.phi * (p.mu / p.phi).ln_1p();
    let y_term = yf * (p.mu.ln() - (p.mu + p.phi).ln());
    Ok(ln_coeff + phi_term + y_term)
}

/// Negative log-likelihood of one observation and its partials in μ and φ.
pub fn loss_grad(y: u64, p: &NegBinParams) -> Result<(f64, f64, f64)> {
    let yf = y as f64;
    let loss = -log_pmf(y, p)?;
    let d_mu = (p.phi + yf) / (p.phi + p.mu) - yf / p.mu;
    let d_phi = -(digamma(yf + p.phi)? - digamma(p.phi)?
        - (p.mu / p.phi).ln_1p()
        + 1.0
        - (yf + p.phi) / (p.mu + p.phi));
    Ok((loss, d_mu, d_phi))
}
