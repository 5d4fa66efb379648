//! Log-PMFs, per-observation losses, and analytic gradients for the claim
//! count families, behind a common head trait.
//!
//! Each family (Poisson, negative binomial, multivariate negative binomial)
//! is a [`CountHead`] strategy registered by name; training, fitting, and
//! scoring code selects one at runtime. The concrete math lives in
//! [`poisson`], [`negbin`], and [`mvnb`] as free functions so each route can
//! be tested against the others.

pub mod mvnb;
pub mod negbin;
pub mod poisson;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CannError, Result};

/// Per-contract claim history: the number of past claims Σ⁽ʸ⁾ and the sum of
/// past fitted means Σ⁽μ⁾ within the same vehicle, both zero for a vehicle's
/// first contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryState {
    pub sum_past_claims: u64,
    pub sum_past_mu: f64,
}

impl HistoryState {
    pub const EMPTY: HistoryState = HistoryState {
        sum_past_claims: 0,
        sum_past_mu: 0.0,
    };

    pub fn new(sum_past_claims: u64, sum_past_mu: f64) -> Result<Self> {
        if !sum_past_mu.is_finite() || sum_past_mu < 0.0 {
            return Err(CannError::domain(format!(
                "sum_past_mu must be finite and >= 0, got {sum_past_mu}"
            )));
        }
        Ok(HistoryState {
            sum_past_claims,
            sum_past_mu,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.sum_past_claims == 0 && self.sum_past_mu == 0.0
    }
}

impl Default for HistoryState {
    fn default() -> Self {
        HistoryState::EMPTY
    }
}

/// Per-observation loss (negative log-likelihood) and its partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub d_mu: f64,
    /// Zero for the Poisson head, which has no dispersion parameter.
    pub d_phi: f64,
}

/// The three claim count families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Poisson,
    NegBin,
    Mvnb,
}

impl HeadKind {
    pub const ALL: [HeadKind; 3] = [HeadKind::Poisson, HeadKind::NegBin, HeadKind::Mvnb];

    pub fn name(&self) -> &'static str {
        match self {
            HeadKind::Poisson => "poisson",
            HeadKind::NegBin => "negbin",
            HeadKind::Mvnb => "mvnb",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = CannError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(HeadKind::Poisson),
            "negbin" => Ok(HeadKind::NegBin),
            "mvnb" => Ok(HeadKind::Mvnb),
            other => Err(CannError::config(format!(
                "unknown head '{other}' (expected poisson|negbin|mvnb)"
            ))),
        }
    }
}

/// A claim count distribution head: one interchangeable strategy for the
/// per-observation loss, its gradients, the predictive log-PMF, and the
/// predictive mean.
///
/// `phi` is required by the negative binomial and MVNB heads and ignored by
/// the Poisson head; `history` only matters to the MVNB head.
pub trait CountHead: Send + Sync {
    fn kind(&self) -> HeadKind;

    fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// Whether this head carries a dispersion parameter φ.
    fn has_dispersion(&self) -> bool;

    /// Whether this head conditions on per-vehicle claim history.
    fn uses_history(&self) -> bool;

    /// Predictive log-PMF at `y`.
    fn log_pmf(&self, y: u64, mu: f64, phi: Option<f64>, history: &HistoryState) -> Result<f64>;

    /// Per-observation negative log-likelihood and partials w.r.t. μ and φ.
    fn loss_grad(
        &self,
        y: u64,
        mu: f64,
        phi: Option<f64>,
        history: &HistoryState,
    ) -> Result<LossGrad>;

    /// Predictive mean given history (the history-corrected mean for MVNB,
    /// plain μ otherwise).
    fn predictive_mean(&self, mu: f64, phi: Option<f64>, history: &HistoryState) -> Result<f64>;
}

struct PoissonHead;
struct NegBinHead;
struct MvnbHead;

fn require_phi(phi: Option<f64>, head: &str) -> Result<f64> {
    phi.ok_or_else(|| CannError::domain(format!("{head} head requires a dispersion parameter")))
}

impl CountHead for PoissonHead {
    fn kind(&self) -> HeadKind {
        HeadKind::Poisson
    }

    fn has_dispersion(&self) -> bool {
        false
    }

    fn uses_history(&self) -> bool {
        false
    }

    fn log_pmf(&self, y: u64, mu: f64, _phi: Option<f64>, _history: &HistoryState) -> Result<f64> {
        poisson::log_pmf(y, &poisson::PoissonParams::new(mu)?)
    }

    fn loss_grad(
        &self,
        y: u64,
        mu: f64,
        _phi: Option<f64>,
        _history: &HistoryState,
    ) -> Result<LossGrad> {
        let (loss, d_mu) = poisson::loss_grad(y, &poisson::PoissonParams::new(mu)?)?;
        Ok(LossGrad {
            loss,
            d_mu,
            d_phi: 0.0,
        })
    }

    fn predictive_mean(&self, mu: f64, _phi: Option<f64>, _history: &HistoryState) -> Result<f64> {
        poisson::PoissonParams::new(mu).map(|p| p.mu)
    }
}

impl CountHead for NegBinHead {
    fn kind(&self) -> HeadKind {
        HeadKind::NegBin
    }

    fn has_dispersion(&self) -> bool {
        true
    }

    fn uses_history(&self) -> bool {
        false
    }

    fn log_pmf(&self, y: u64, mu: f64, phi: Option<f64>, _history: &HistoryState) -> Result<f64> {
        let phi = require_phi(phi, "negbin")?;
        negbin::log_pmf(y, &negbin::NegBinParams::new(mu, phi)?)
    }

    fn loss_grad(
        &self,
        y: u64,
        mu: f64,
        phi: Option<f64>,
        _history: &HistoryState,
    ) -> Result<LossGrad> {
        let phi = require_phi(phi, "negbin")?;
        let (loss, d_mu, d_phi) = negbin::loss_grad(y, &negbin::NegBinParams::new(mu, phi)?)?;
        Ok(LossGrad { loss, d_mu, d_phi })
    }

    fn predictive_mean(&self, mu: f64, phi: Option<f64>, _history: &HistoryState) -> Result<f64> {
        require_phi(phi, "negbin")?;
        negbin::NegBinParams::new(mu, phi.unwrap()).map(|p| p.mu)
    }
}

impl CountHead for MvnbHead {
    fn kind(&self) -> HeadKind {
        HeadKind::Mvnb
    }

    fn has_dispersion(&self) -> bool {
        true
    }

    fn uses_history(&self) -> bool {
        true
    }

    fn log_pmf(&self, y: u64, mu: f64, phi: Option<f64>, history: &HistoryState) -> Result<f64> {
        let phi = require_phi(phi, "mvnb")?;
        mvnb::cond_log_pmf(y, &mvnb::MvnbCondParams::from_history(mu, phi, history)?)
    }

    fn loss_grad(
        &self,
        y: u64,
        mu: f64,
        phi: Option<f64>,
        history: &HistoryState,
    ) -> Result<LossGrad> {
        let phi = require_phi(phi, "mvnb")?;
        let (loss, d_mu, d_phi) = mvnb::loss_grad(y, mu, phi, history)?;
        Ok(LossGrad { loss, d_mu, d_phi })
    }

    fn predictive_mean(&self, mu: f64, phi: Option<f64>, history: &HistoryState) -> Result<f64> {
        let phi = require_phi(phi, "mvnb")?;
        mvnb::predictive_mean(mu, phi, history)
    }
}

static POISSON_HEAD: PoissonHead = PoissonHead;
static NEGBIN_HEAD: NegBinHead = NegBinHead;
static MVNB_HEAD: MvnbHead = MvnbHead;

/// Look up the head strategy for a family.
pub fn head(kind: HeadKind) -> &'static dyn CountHead {
    match kind {
        HeadKind::Poisson => &POISSON_HEAD,
        HeadKind::NegBin => &NEGBIN_HEAD,
        HeadKind::Mvnb => &MVNB_HEAD,
    }
}

/// Look up a head by its registered name (`poisson`, `negbin`, `mvnb`).
pub fn head_by_name(name: &str) -> Result<&'static dyn CountHead> {
    HeadKind::from_str(name).map(head)
}

/// All registered heads, in declaration order.
pub fn all_heads() -> [&'static dyn CountHead; 3] {
    [&POISSON_HEAD, &NEGBIN_HEAD, &MVNB_HEAD]
}
