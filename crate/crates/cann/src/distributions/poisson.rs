//! Poisson log-PMF, loss, and gradient.

use serde::{Deserialize, Serialize};

use crate::error::{CannError, Result};
use crate::special::ln_gamma;

/// Conditional mean (and variance) of the Poisson claim count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonParams {
    pub mu: f64,
}

impl PoissonParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(CannError::domain(format!(
                "poisson mean must be finite and > 0, got {mu}"
            )));
        }
        Ok(PoissonParams { mu })
    }
}

/// ln P(Y = y) = y·ln μ − μ − ln Γ(y+1).
pub fn log_pmf(y: u64, p: &PoissonParams) -> Result<f64> {
    let yf = y as f64;
    Ok(yf * p.mu.ln() - p.mu - ln_gamma(yf + 1.0)?)
}

/// Negative log-likelihood of one observation and its derivative in μ.
pub fn loss_grad(y: u64, p: &PoissonParams) -> Result<(f64, f64)> {
    let loss = -log_pmf(y, p)?;
    let d_mu = 1.0 - y as f64 / p.mu;
    Ok((loss, d_mu))
}
