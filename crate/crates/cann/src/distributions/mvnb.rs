//! Conditional distribution of a claim count given the vehicle's history
//! under the multivariate negative binomial (negative multinomial) model.
//!
//! Given history sums Σ⁽ʸ⁾ and Σ⁽μ⁾, the count is negative binomial with
//! shape α = φ + Σ⁽ʸ⁾ and rate-like parameter γ = φ + Σ⁽μ⁾; the first
//! contract of a vehicle (empty history) reduces to the ordinary negative
//! binomial.

use serde::{Deserialize, Serialize};

use crate::distributions::HistoryState;
use crate::error::{CannError, Result};
use crate::special::{digamma, ln_gamma};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvnbCondParams {
    pub mu: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl MvnbCondParams {
    pub fn new(mu: f64, alpha: f64, gamma: f64) -> Result<Self> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(CannError::domain(format!(
                "mvnb mean must be finite and > 0, got {mu}"
            )));
        }
        if !alpha.is_finite() || alpha <= 0.0 || !gamma.is_finite() || gamma <= 0.0 {
            return Err(CannError::domain(format!(
                "mvnb alpha/gamma must be finite and > 0, got alpha={alpha}, gamma={gamma}"
            )));
        }
        Ok(MvnbCondParams { mu, alpha, gamma })
    }

    /// α = φ + Σ⁽ʸ⁾, γ = φ + Σ⁽μ⁾.
    pub fn from_history(mu: f64, phi: f64, h: &HistoryState) -> Result<Self> {
        if !phi.is_finite() || phi <= 0.0 {
            return Err(CannError::domain(format!(
                "mvnb dispersion must be finite and > 0, got {phi}"
            )));
        }
        MvnbCondParams::new(mu, phi + h.sum_past_claims as f64, phi + h.sum_past_mu)
    }
}

/// ln P(Y = y | history) = ln Γ(y+α) − ln Γ(y+1) − ln Γ(α) + α·ln(γ/(γ+μ)) + y·ln(μ/(μ+γ)).
pub fn cond_log_pmf(y: u64, p: &MvnbCondParams) -> Result<f64> {
    let yf = y as f64;
    let ln_coeff = ln_gamma(yf + p.alpha)? - ln_gamma(yf + 1.0)? - ln_gamma(p.alpha)?;
    let alpha_term = -p.alpha * (p.mu / p.gamma).ln_1p();
    let y_term = yf * (p.mu.ln() - (p.mu + p.gamma).ln());
    Ok(ln_coeff + alpha_term + y_term)
}

/// Negative conditional log-likelihood and partials in μ and φ.
///
/// The history sums are treated as constants: α and γ both move one-for-one
/// with φ, but Σ⁽μ⁾ is a per-epoch snapshot, not differentiated through.
/// The φ partial groups α(1/γ − 1/(γ+μ)) − y/(γ+μ) as α/γ − (y+α)/(μ+γ),
/// which reduces bit-exactly to the plain negative binomial partial when
/// the history is empty (α = γ = φ).
pub fn loss_grad(y: u64, mu: f64, phi: f64, h: &HistoryState) -> Result<(f64, f64, f64)> {
    let p = MvnbCondParams::from_history(mu, phi, h)?;
    let yf = y as f64;
    let loss = -cond_log_pmf(y, &p)?;
    let d_mu = (p.alpha + yf) / (p.gamma + mu) - yf / mu;
    let d_phi = -(digamma(yf + p.alpha)? - digamma(p.alpha)?
        - (mu / p.gamma).ln_1p()
        + p.alpha / p.gamma
        - (yf + p.alpha) / (mu + p.gamma));
    Ok((loss, d_mu, d_phi))
}

/// Predictive mean given history: μ·(φ + Σ⁽ʸ⁾)/(φ + Σ⁽μ⁾).
pub fn predictive_mean(mu: f64, phi: f64, h: &HistoryState) -> Result<f64> {
    let p = MvnbCondParams::from_history(mu, phi, h)?;
    Ok(mu * (p.alpha / p.gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::negbin;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn first_contract_equals_negbin() {
        let (y, mu, phi) = (2u64, 1.3, 2.0);
        let mv = cond_log_pmf(y, &MvnbCondParams::from_history(mu, phi, &HistoryState::EMPTY).unwrap())
            .unwrap();
        let nb = negbin::log_pmf(y, &negbin::NegBinParams::new(mu, phi).unwrap()).unwrap();
        assert_abs_diff_eq!(mv, nb, epsilon = 1e-13);
    }

    #[test]
    fn cond_log_pmf_known_value() {
        // y=0: α·ln(γ/(γ+μ)) = 2 ln(2/3)
        let p = MvnbCondParams::new(1.0, 2.0, 2.0).unwrap();
        assert_abs_diff_eq!(
            cond_log_pmf(0, &p).unwrap(),
            -0.810_930_216_216_328_76,
            epsilon = 1e-13
        );
    }

    #[test]
    fn empty_history_gradients_match_negbin() {
        for &(y, mu, phi) in &[(0u64, 0.4, 1.7), (1, 1.0, 3.0), (5, 2.0, 0.5)] {
            let (l_mv, dmu_mv, dphi_mv) = loss_grad(y, mu, phi, &HistoryState::EMPTY).unwrap();
            let (l_nb, dmu_nb, dphi_nb) =
                negbin::loss_grad(y, &negbin::NegBinParams::new(mu, phi).unwrap()).unwrap();
            assert_abs_diff_eq!(l_mv, l_nb, epsilon = 1e-12);
            assert_abs_diff_eq!(dmu_mv, dmu_nb, epsilon = 1e-12);
            assert_abs_diff_eq!(dphi_mv, dphi_nb, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = HistoryState::new(1, 0.5).unwrap();
        let (y, mu, phi) = (1u64, 0.8, 2.0);
        let eps = 1e-6;
        let (_, d_mu, d_phi) = loss_grad(y, mu, phi, &h).unwrap();
        let fd_mu =
            (loss_grad(y, mu + eps, phi, &h).unwrap().0 - loss_grad(y, mu - eps, phi, &h).unwrap().0)
                / (2.0 * eps);
        let fd_phi =
            (loss_grad(y, mu, phi + eps, &h).unwrap().0 - loss_grad(y, mu, phi - eps, &h).unwrap().0)
                / (2.0 * eps);
        assert_abs_diff_eq!(d_mu, fd_mu, epsilon = 1e-6);
        assert_abs_diff_eq!(d_phi, fd_phi, epsilon = 1e-6);
    }

    #[test]
    fn loss_positive_for_improbable_outcome() {
        let h = HistoryState::new(3, 0.9).unwrap();
        let (loss, _, _) = loss_grad(0, 0.1, 5.0, &h).unwrap();
        assert!(loss.is_finite() && loss > 0.0);
    }

    #[test]
    fn predictive_mean_values() {
        let h = HistoryState::new(1, 0.3).unwrap();
        assert_relative_eq!(
            predictive_mean(0.1, 2.0, &h).unwrap(),
            0.130_434_782_6,
            max_relative = 1e-9
        );
        // No history: mean is unchanged.
        assert_eq!(predictive_mean(0.7, 1.3, &HistoryState::EMPTY).unwrap(), 0.7);
        // Credibility vanishes as φ → ∞.
        let h = HistoryState::new(4, 0.1).unwrap();
        assert_abs_diff_eq!(predictive_mean(0.2, 1e9, &h).unwrap(), 0.2, epsilon = 1e-8);
    }

    #[test]
    fn predictive_mean_monotonicity() {
        let mu = 0.5;
        let phi = 2.0;
        // Increasing in past claims.
        let mut prev = predictive_mean(mu, phi, &HistoryState::new(0, 1.0).unwrap()).unwrap();
        for k in 1..6 {
            let m = predictive_mean(mu, phi, &HistoryState::new(k, 1.0).unwrap()).unwrap();
            assert!(m > prev);
            prev = m;
        }
        // Decreasing in past fitted means.
        let mut prev = predictive_mean(mu, phi, &HistoryState::new(2, 0.0).unwrap()).unwrap();
        for s in [0.5, 1.0, 2.0, 4.0] {
            let m = predictive_mean(mu, phi, &HistoryState::new(2, s).unwrap()).unwrap();
            assert!(m < prev);
            prev = m;
        }
    }
}
