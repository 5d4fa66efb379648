//! Log-linear benchmark estimators for all three heads: μ = exp(⟨x, β⟩),
//! with the dispersion parameter (when present) optimized jointly in the
//! log domain.
//!
//! The objective is the family's average cross-entropy, which is convex for
//! the log-linear link; a BFGS quasi-Newton loop with backtracking line
//! search drives the maximum-|gradient| below `grad_tol`. MVNB fitting
//! alternates between recomputing the per-contract sums of past fitted means
//! and optimizing with those sums held fixed, until the sums stabilize.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::VehicleGroups;
use crate::distributions::{self, HeadKind, HistoryState};
use crate::error::{CannError, Result};
use crate::special::ln_gamma;

/// Linear predictor bound beyond which a trial point is rejected as
/// overflow-prone rather than evaluated.
const ETA_LIMIT: f64 = 690.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignMatrix {
    /// Column names; the first is always `intercept`.
    pub names: Vec<String>,
    pub x: Array2<f64>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, x: Array2<f64>) -> Result<Self> {
        if names.len() != x.ncols() {
            return Err(CannError::shape(format!(
                "{} names for {} columns",
                names.len(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CannError::data("design matrix has non-finite entries"));
        }
        if x.ncols() == 0 || x.column(0).iter().any(|&v| v != 1.0) {
            return Err(CannError::data("first design column must be the intercept"));
        }
        Ok(DesignMatrix { names, x })
    }

    /// Prepend an intercept column to raw covariates.
    pub fn with_intercept(names: &[String], covariates: &Array2<f64>) -> Result<Self> {
        let n = covariates.nrows();
        let mut x = Array2::ones((n, covariates.ncols() + 1));
        x.slice_mut(ndarray::s![.., 1..]).assign(covariates);
        let mut all_names = vec!["intercept".to_string()];
        all_names.extend_from_slice(names);
        DesignMatrix::new(all_names, x)
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlmOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub initial_phi: f64,
    /// Starting coefficients; zeros when absent.
    pub init_beta: Option<Vec<f64>>,
    /// Abort when any coefficient magnitude exceeds this (separation guard).
    pub divergence_bound: f64,
    /// Outer alternation rounds for the MVNB history sums.
    pub max_history_rounds: usize,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions {
            max_iters: 500,
            grad_tol: 1e-8,
            initial_phi: 1.0,
            init_beta: None,
            divergence_bound: 50.0,
            max_history_rounds: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlmFit {
    pub family: HeadKind,
    /// Coefficient names, aligned with `beta`.
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    /// Dispersion estimate; absent for the Poisson family.
    pub phi: Option<f64>,
    pub converged: bool,
    pub final_loss: f64,
    pub iterations: usize,
}

/// Fit a log-linear model of the requested family.
///
/// `groups` carries the per-vehicle chronological row order and is required
/// for (and only consulted by) the MVNB family.
pub fn fit_log_linear(
    design: &DesignMatrix,
    y: &[u64],
    groups: Option<&VehicleGroups>,
    family: HeadKind,
    options: &GlmOptions,
) -> Result<GlmFit> {
    if y.len() != design.n_rows() {
        return Err(CannError::shape(format!(
            "{} responses for {} rows",
            y.len(),
            design.n_rows()
        )));
    }
    if design.n_rows() == 0 {
        return Err(CannError::data("cannot fit on an empty dataset"));
    }
    let p = design.n_cols();
    let mut start = match &options.init_beta {
        Some(b) => {
            if b.len() != p {
                return Err(CannError::shape(format!(
                    "init_beta has {} entries for {} columns",
                    b.len(),
                    p
                )));
            }
            Array1::from_vec(b.clone())
        }
        None => Array1::zeros(p),
    };
    let ln_y_fact: Vec<f64> = y.iter().map(|&yi| ln_gamma(yi as f64 + 1.0).unwrap()).collect();

    match family {
        HeadKind::Poisson => {
            let objective = |theta: &Array1<f64>| poisson_loss_grad(design, y, &ln_y_fact, theta);
            let m = bfgs(&objective, start, options)?;
            Ok(GlmFit {
                family,
                names: design.names.clone(),
                beta: m.x.to_vec(),
                phi: None,
                converged: m.converged,
                final_loss: m.loss,
                iterations: m.iterations,
            })
        }
        HeadKind::NegBin => {
            let mut theta0 = Array1::zeros(p + 1);
            theta0.slice_mut(ndarray::s![..p]).assign(&start);
            theta0[p] = options.initial_phi.ln();
            let zeros = vec![HistoryState::EMPTY; y.len()];
            let objective =
                |theta: &Array1<f64>| dispersed_loss_grad(design, y, &zeros, theta, HeadKind::NegBin);
            let m = bfgs(&objective, theta0, options)?;
            Ok(GlmFit {
                family,
                names: design.names.clone(),
                beta: m.x.slice(ndarray::s![..p]).to_vec(),
                phi: Some(m.x[p].exp()),
                converged: m.converged,
                final_loss: m.loss,
                iterations: m.iterations,
            })
        }
        HeadKind::Mvnb => {
            let groups = groups.ok_or_else(|| {
                CannError::config("mvnb fitting requires per-vehicle row groups")
            })?;
            groups.validate(y.len())?;
            let sigma_y = groups.sigma_y(y);
            let mut theta = Array1::zeros(p + 1);
            theta.slice_mut(ndarray::s![..p]).assign(&start);
            theta[p] = options.initial_phi.ln();
            start = theta;

            let mut sigma_mu = vec![0.0; y.len()];
            let mut iterations = 0usize;
            let mut converged = false;
            let mut last = None;
            for _round in 0..options.max_history_rounds {
                let histories: Vec<HistoryState> = sigma_y
                    .iter()
                    .zip(&sigma_mu)
                    .map(|(&c, &m)| HistoryState {
                        sum_past_claims: c,
                        sum_past_mu: m,
                    })
                    .collect();
                let objective = |theta: &Array1<f64>| {
                    dispersed_loss_grad(design, y, &histories, theta, HeadKind::Mvnb)
                };
                let m = bfgs(&objective, start.clone(), options)?;
                iterations += m.iterations;
                start = m.x.clone();
                let beta = m.x.slice(ndarray::s![..p]).to_owned();
                let mu = mean_vector(design, &beta)?;
                let new_sigma = groups.sigma_mu(&mu);
                let sup_change = sigma_mu
                    .iter()
                    .zip(&new_sigma)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                sigma_mu = new_sigma;
                last = Some(m);
                if sup_change < 1e-8 {
                    converged = last.as_ref().unwrap().converged;
                    break;
                }
            }
            let m = last.expect("at least one alternation round");
            let beta = m.x.slice(ndarray::s![..p]).to_owned();
            // Report the loss at the stabilized history sums.
            let histories: Vec<HistoryState> = sigma_y
                .iter()
                .zip(&sigma_mu)
                .map(|(&c, &mm)| HistoryState {
                    sum_past_claims: c,
                    sum_past_mu: mm,
                })
                .collect();
            let (final_loss, _) = dispersed_loss_grad(design, y, &histories, &m.x, HeadKind::Mvnb)?;
            Ok(GlmFit {
                family,
                names: design.names.clone(),
                beta: beta.to_vec(),
                phi: Some(m.x[p].exp()),
                converged,
                final_loss,
                iterations,
            })
        }
    }
}

/// exp(Xβ) for every row.
pub fn predict_mu(fit: &GlmFit, design: &DesignMatrix) -> Result<Array1<f64>> {
    if design.n_cols() != fit.beta.len() {
        return Err(CannError::shape(format!(
            "design has {} columns, fit has {} coefficients",
            design.n_cols(),
            fit.beta.len()
        )));
    }
    let beta = Array1::from_vec(fit.beta.clone());
    let eta = design.x.dot(&beta);
    Ok(eta.mapv(f64::exp))
}

/// exp(Xβ) corrected by the history credibility factor (φ+Σ⁽ʸ⁾)/(φ+Σ⁽μ⁾);
/// only meaningful for the MVNB family.
pub fn predict_mu_with_history(
    fit: &GlmFit,
    design: &DesignMatrix,
    histories: &[HistoryState],
) -> Result<Array1<f64>> {
    let phi = fit.phi.ok_or_else(|| {
        CannError::config("history-adjusted prediction requires a dispersion parameter")
    })?;
    if histories.len() != design.n_rows() {
        return Err(CannError::shape("one history state per row required"));
    }
    let mut mu = predict_mu(fit, design)?;
    for (m, h) in mu.iter_mut().zip(histories) {
        *m = distributions::mvnb::predictive_mean(*m, phi, h)?;
    }
    Ok(mu)
}

fn mean_vector(design: &DesignMatrix, beta: &Array1<f64>) -> Result<Vec<f64>> {
    let eta = design.x.dot(beta);
    if eta.iter().any(|e| e.abs() > ETA_LIMIT) {
        return Err(CannError::Diverged(
            "linear predictor overflow while recomputing history sums".into(),
        ));
    }
    Ok(eta.mapv(f64::exp).to_vec())
}

/// Mean Poisson cross-entropy and gradient in β.
fn poisson_loss_grad(
    design: &DesignMatrix,
    y: &[u64],
    ln_y_fact: &[f64],
    beta: &Array1<f64>,
) -> Result<(f64, Array1<f64>)> {
    let n = y.len() as f64;
    let eta = design.x.dot(beta);
    if eta.iter().any(|e| *e > ETA_LIMIT) {
        return Ok((f64::INFINITY, Array1::zeros(beta.len())));
    }
    let mut loss = 0.0;
    let mut d_eta = Array1::zeros(y.len());
    for (i, &yi) in y.iter().enumerate() {
        let mu = eta[i].exp();
        loss += mu - yi as f64 * eta[i] + ln_y_fact[i];
        d_eta[i] = (mu - yi as f64) / n;
    }
    let grad = design.x.t().dot(&d_eta);
    Ok((loss / n, grad))
}

/// Mean cross-entropy and gradient in (β, s = ln φ) for the NB and MVNB
/// families; `histories` is all-empty for NB.
fn dispersed_loss_grad(
    design: &DesignMatrix,
    y: &[u64],
    histories: &[HistoryState],
    theta: &Array1<f64>,
    family: HeadKind,
) -> Result<(f64, Array1<f64>)> {
    let p = design.n_cols();
    let n = y.len() as f64;
    let beta = theta.slice(ndarray::s![..p]);
    let s = theta[p];
    if !(-300.0..=300.0).contains(&s) {
        return Ok((f64::INFINITY, Array1::zeros(theta.len())));
    }
    let phi = s.exp();
    let eta = design.x.dot(&beta);
    if eta.iter().any(|e| e.abs() > ETA_LIMIT) {
        return Ok((f64::INFINITY, Array1::zeros(theta.len())));
    }
    let head = distributions::head(family);
    let mut loss = 0.0;
    let mut d_eta = Array1::zeros(y.len());
    let mut d_s = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let mu = eta[i].exp();
        let lg = head.loss_grad(yi, mu, Some(phi), &histories[i])?;
        loss += lg.loss;
        d_eta[i] = lg.d_mu * mu / n;
        d_s += lg.d_phi * phi / n;
    }
    let mut grad = Array1::zeros(p + 1);
    grad.slice_mut(ndarray::s![..p])
        .assign(&design.x.t().dot(&d_eta));
    grad[p] = d_s;
    Ok((loss / n, grad))
}

struct Minimized {
    x: Array1<f64>,
    loss: f64,
    iterations: usize,
    converged: bool,
}

/// Dense BFGS with backtracking Armijo line search. The objective must
/// return `INFINITY` (not an error) for overflow-prone trial points so the
/// line search can retreat.
fn bfgs<F>(objective: &F, x0: Array1<f64>, options: &GlmOptions) -> Result<Minimized>
where
    F: Fn(&Array1<f64>) -> Result<(f64, Array1<f64>)>,
{
    const C1: f64 = 1e-4;
    let d = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = objective(&x)?;
    if !fx.is_finite() {
        return Err(CannError::Diverged(
            "objective is not finite at the starting point".into(),
        ));
    }
    let mut h = Array2::eye(d);
    let mut iterations = 0usize;
    let mut converged = false;

    while iterations < options.max_iters {
        let g_inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if g_inf < options.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut direction = -h.dot(&g);
        let mut slope = g.dot(&direction);
        if slope >= 0.0 {
            // Curvature information went bad; restart from steepest descent.
            h = Array2::eye(d);
            direction = -g.clone();
            slope = g.dot(&direction);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &(&direction * t);
            let (ft, gt) = objective(&trial)?;
            if ft.is_finite() && ft <= fx + C1 * t * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // Line search stalled: the gradient is numerically flat.
            break;
        };

        if x_new.iter().any(|v| v.abs() > options.divergence_bound) {
            return Err(CannError::Diverged(format!(
                "coefficient magnitude exceeded {} (possible separation)",
                options.divergence_bound
            )));
        }

        let step = &x_new - &x;
        let y_vec = &g_new - &g;
        let sy = step.dot(&y_vec);
        if sy > 1e-12 * step.dot(&step).sqrt() * y_vec.dot(&y_vec).sqrt() {
            let rho = 1.0 / sy;
            let hy = h.dot(&y_vec);
            let yhy = y_vec.dot(&hy);
            let s_col = step.view().insert_axis(ndarray::Axis(1));
            let hy_col = hy.view().insert_axis(ndarray::Axis(1));
            let s_hy = s_col.dot(&hy_col.t());
            h = &h - &(&s_hy * rho) - &(s_hy.t().to_owned() * rho)
                + &(s_col.dot(&s_col.t()) * (rho * (1.0 + rho * yhy)));
        } else {
            h = Array2::eye(d);
        }

        x = x_new;
        fx = f_new;
        g = g_new;
    }
    if !converged {
        let g_inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        converged = g_inf < options.grad_tol;
    }
    Ok(Minimized {
        x,
        loss: fx,
        iterations,
        converged,
    })
}
