//! Training loop for the combined model.
//!
//! The log-linear part starts at the maximum-likelihood coefficients of the
//! matching log-linear model (the MVNB coefficients in fixed-β mode) and the
//! dispersion weight at the softplus-inverse of the fitted dispersion, so
//! the initial predictions coincide with the classical model. Per epoch:
//! for the longitudinal head, recompute every contract's sum of past fitted
//! means in eval mode; shuffle; run mini-batches with Adam; at epoch end
//! evaluate the validation loss in eval mode, advance the plateau scheduler,
//! and track the best epoch for early stopping.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::distributions::{self, HeadKind, HistoryState};
use crate::error::{CannError, Result};
use crate::glm::{self, DesignMatrix, GlmFit, GlmOptions};
use crate::model::{CannParameters, ModelData, TrainConfig};
use crate::nn::{AdamState, MlpConfig, MlpParams, PlateauScheduler};
use crate::seeding;
use crate::special::{sigmoid, softplus, softplus_inv};

const SALT_INIT: u64 = 0x11;
const SALT_EPOCH: u64 = 0x22;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub valid_loss: f64,
}

/// Per-epoch snapshots for the state-consistency checks (debug only).
#[derive(Debug, Clone)]
pub struct EpochDebug {
    pub epoch: usize,
    pub params_at_start: CannParameters,
    pub train_sigma_mu: Vec<f64>,
    pub valid_sigma_mu: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainDebug {
    pub epochs: Vec<EpochDebug>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedCann {
    pub head: HeadKind,
    pub config: TrainConfig,
    /// Parameters at the best epoch under early stopping, else final.
    pub params: CannParameters,
    pub best_epoch: usize,
    pub trace: Vec<EpochRecord>,
    pub lin_names: Vec<String>,
    pub mlp_names: Vec<String>,
    /// The log-linear fit used for initialization.
    pub glm_init: GlmFit,
    #[serde(skip)]
    pub debug: Option<TrainDebug>,
}

impl TrainedCann {
    /// Trace entry with the lowest validation loss (first on ties).
    pub fn trace_minimum(&self) -> &EpochRecord {
        self.trace
            .iter()
            .min_by(|a, b| {
                a.valid_loss
                    .partial_cmp(&b.valid_loss)
                    .expect("finite losses")
            })
            .expect("nonempty trace")
    }
}

/// Per-row history states for a split: claim sums come from the data, μ sums
/// from an eval-mode pass snapshot (all-zero for cross-sectional heads).
fn histories(sigma_y: &[u64], sigma_mu: &[f64]) -> Vec<HistoryState> {
    sigma_y
        .iter()
        .zip(sigma_mu)
        .map(|(&c, &m)| HistoryState {
            sum_past_claims: c,
            sum_past_mu: m,
        })
        .collect()
}

/// Eval-mode mean loss of a split under the given history sums.
fn eval_loss(
    data: &ModelData,
    params: &CannParameters,
    head: HeadKind,
    sigma_y: &[u64],
    sigma_mu: &[f64],
) -> Result<f64> {
    let mu = params.forward_eval(&data.x_lin, &data.x_mlp)?;
    let phi = params.phi();
    let h = distributions::head(head);
    let mut acc = 0.0;
    for (i, &yi) in data.y.iter().enumerate() {
        let state = HistoryState {
            sum_past_claims: sigma_y[i],
            sum_past_mu: sigma_mu[i],
        };
        acc += h.loss_grad(yi, mu[i], phi, &state)?.loss;
    }
    Ok(acc / data.y.len() as f64)
}

/// Eval-mode per-row means, used for the per-epoch history snapshot.
fn eval_mu(data: &ModelData, params: &CannParameters) -> Result<Vec<f64>> {
    Ok(params.forward_eval(&data.x_lin, &data.x_mlp)?.to_vec())
}

fn gather(matrix: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    matrix.select(Axis(0), rows)
}

pub fn train_cann(train: &ModelData, valid: &ModelData, cfg: &TrainConfig) -> Result<TrainedCann> {
    cfg.validate()?;
    if train.n_rows() < 2 {
        return Err(CannError::data("training split needs at least 2 rows"));
    }
    if cfg.early_stopping && valid.n_rows() == 0 {
        return Err(CannError::config(
            "early stopping requires a nonempty validation split",
        ));
    }
    if train.lin_names != valid.lin_names || train.mlp_names != valid.mlp_names {
        return Err(CannError::shape("train/validation schemas differ"));
    }
    let head = cfg.head;
    let uses_history = distributions::head(head).uses_history();
    let has_phi = distributions::head(head).has_dispersion();

    // Log-linear initialization: match the head's family, except fixed-β
    // mode which takes the MVNB coefficients.
    let init_family = if cfg.fixed_beta { HeadKind::Mvnb } else { head };
    let design = DesignMatrix::new(train.lin_names.clone(), train.x_lin.clone())?;
    let glm_groups = train.groups.clone();
    let glm_init = glm::fit_log_linear(
        &design,
        &train.y,
        (init_family == HeadKind::Mvnb).then_some(&glm_groups),
        init_family,
        &GlmOptions::default(),
    )?;

    let w_phi = if has_phi {
        // Start the dispersion weight at the fitted GLM dispersion; fall
        // back to φ = 1 when the initializing family has none (Poisson).
        let phi0 = glm_init.phi.unwrap_or(1.0);
        Some(softplus_inv(phi0)?)
    } else {
        None
    };
    let mut init_rng = seeding::rng(seeding::mix(cfg.seed, SALT_INIT));
    let mlp_cfg = MlpConfig {
        input_width: train.x_mlp.ncols(),
        layer_widths: cfg.hidden.clone(),
        dropout_p: cfg.dropout_p,
        batchnorm_momentum: cfg.batchnorm_momentum,
    };
    let mut params = CannParameters {
        beta: Array1::from_vec(glm_init.beta.clone()),
        theta: MlpParams::init(&mlp_cfg, &mut init_rng)?,
        w_phi,
        beta_trainable: !cfg.fixed_beta,
    };

    // Optimizer state over the trainable tensors, in a fixed order:
    // MLP tensors, then β (if trainable), then w_φ (if present).
    let mut tensor_lengths = params.theta.tensor_lengths();
    if params.beta_trainable {
        tensor_lengths.push(params.beta.len());
    }
    if params.w_phi.is_some() {
        tensor_lengths.push(1);
    }
    let mut adam = AdamState::new(&tensor_lengths);
    let mut scheduler = PlateauScheduler::new(cfg.lr_start, cfg.factor);

    let train_sigma_y = train.groups.sigma_y(&train.y);
    let valid_sigma_y = valid.groups.sigma_y(&valid.y);
    let zeros_train = vec![0.0; train.n_rows()];
    let zeros_valid = vec![0.0; valid.n_rows()];

    // Epoch 0: the freshly initialized model, before any gradient step.
    let (sigma_mu_train0, sigma_mu_valid0) = if uses_history {
        (
            train.groups.sigma_mu(&eval_mu(train, &params)?),
            valid.groups.sigma_mu(&eval_mu(valid, &params)?),
        )
    } else {
        (zeros_train.clone(), zeros_valid.clone())
    };
    let mut trace = vec![EpochRecord {
        epoch: 0,
        lr: cfg.lr_start,
        train_loss: eval_loss(train, &params, head, &train_sigma_y, &sigma_mu_train0)?,
        valid_loss: if valid.n_rows() > 0 {
            eval_loss(valid, &params, head, &valid_sigma_y, &sigma_mu_valid0)?
        } else {
            f64::NAN
        },
    }];
    let mut best_epoch = 0usize;
    let mut best_loss = trace[0].valid_loss;
    let mut best_params = params.clone();
    let mut debug = cfg.record_epoch_state.then(TrainDebug::default);

    let n_rows = train.n_rows();
    for epoch in 1..=cfg.max_epochs {
        // One history snapshot per epoch, from the parameters current at the
        // epoch's start, in eval mode.
        let (sigma_mu_train, sigma_mu_valid) = if uses_history {
            (
                train.groups.sigma_mu(&eval_mu(train, &params)?),
                valid.groups.sigma_mu(&eval_mu(valid, &params)?),
            )
        } else {
            (zeros_train.clone(), zeros_valid.clone())
        };
        if let Some(dbg) = debug.as_mut() {
            dbg.epochs.push(EpochDebug {
                epoch,
                params_at_start: params.clone(),
                train_sigma_mu: sigma_mu_train.clone(),
                valid_sigma_mu: sigma_mu_valid.clone(),
            });
        }
        let train_h = histories(&train_sigma_y, &sigma_mu_train);

        let mut epoch_rng = seeding::rng(seeding::mix2(cfg.seed, SALT_EPOCH, epoch as u64));
        let mut order: Vec<usize> = (0..n_rows).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut epoch_rng);

        let lr = scheduler.lr();
        let mut loss_acc = 0.0;
        let mut batch_start = 0usize;
        let mut batch_index = 0usize;
        while batch_start < n_rows {
            let mut batch_end = (batch_start + cfg.batch_size).min(n_rows);
            // A trailing single row cannot feed batch norm; fold it in.
            if n_rows - batch_end == 1 {
                batch_end = n_rows;
            }
            let rows = &order[batch_start..batch_end];
            let m = rows.len() as f64;

            let x_lin_b = gather(&train.x_lin, rows);
            let x_mlp_b = gather(&train.x_mlp, rows);
            let masks = params.theta.sample_masks(rows.len(), &mut epoch_rng);
            let (net, cache) = params.theta.forward_train(&x_mlp_b, &masks)?;
            let lin = x_lin_b.dot(&params.beta);
            let eta = &lin + &net;
            let mu = eta.mapv(softplus);
            let phi = params.phi();

            let h = distributions::head(head);
            let mut batch_loss = 0.0;
            let mut d_eta = Array1::zeros(rows.len());
            let mut d_phi_acc = 0.0;
            for (k, &row) in rows.iter().enumerate() {
                let lg = h.loss_grad(train.y[row], mu[k], phi, &train_h[row])?;
                batch_loss += lg.loss;
                d_eta[k] = lg.d_mu * sigmoid(eta[k]) / m;
                d_phi_acc += lg.d_phi / m;
            }
            batch_loss /= m;
            if !batch_loss.is_finite() {
                return Err(CannError::Diverged(format!(
                    "non-finite loss in epoch {epoch}, batch {batch_index}"
                )));
            }
            loss_acc += batch_loss * m;

            let (grads, _) = params.theta.backward(&cache, &d_eta)?;
            let d_beta = params
                .beta_trainable
                .then(|| x_lin_b.t().dot(&d_eta));
            let d_w_phi = params
                .w_phi
                .map(|w| d_phi_acc * sigmoid(w));

            let theta = &mut params.theta;
            let beta = &mut params.beta;
            let w_phi = &mut params.w_phi;
            let beta_trainable = params.beta_trainable;
            adam.step(lr, |update| {
                let mut pending: Result<()> = Ok(());
                let mut grads_iter = Vec::new();
                grads.visit_tensors(|g| grads_iter.push(g.to_vec()));
                let mut idx = 0usize;
                theta.visit_tensors_mut(|p| {
                    if pending.is_ok() {
                        pending = update(p, &grads_iter[idx]);
                    }
                    idx += 1;
                });
                pending?;
                if beta_trainable {
                    let g = d_beta.as_ref().expect("gradient for trainable beta");
                    update(
                        beta.as_slice_mut().expect("contiguous beta"),
                        g.as_slice().expect("contiguous gradient"),
                    )?;
                }
                if let Some(w) = w_phi.as_mut() {
                    let g = [d_w_phi.expect("gradient for dispersion weight")];
                    let mut slot = [*w];
                    update(&mut slot, &g)?;
                    *w = slot[0];
                }
                Ok(())
            })?;

            batch_start = batch_end;
            batch_index += 1;
        }

        let train_loss = loss_acc / n_rows as f64;
        let valid_loss = if valid.n_rows() > 0 {
            eval_loss(valid, &params, head, &valid_sigma_y, &sigma_mu_valid)?
        } else {
            f64::NAN
        };
        if valid_loss.is_finite() {
            scheduler.step(valid_loss);
        }
        trace.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            valid_loss,
        });
        if valid_loss.is_finite() && valid_loss < best_loss {
            best_loss = valid_loss;
            best_epoch = epoch;
            best_params = params.clone();
        }
    }

    // best_epoch always names the validation-loss argmin; without early
    // stopping the returned parameters are simply the final ones.
    if cfg.early_stopping {
        params = best_params;
    }
    Ok(TrainedCann {
        head,
        config: cfg.clone(),
        params,
        best_epoch,
        trace,
        lin_names: train.lin_names.clone(),
        mlp_names: train.mlp_names.clone(),
        glm_init,
        debug,
    })
}
