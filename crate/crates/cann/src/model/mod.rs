//! The combined model: a log-linear part over the traditional covariates
//! plus an MLP over traditional and telematics inputs, added in preactivation
//! space and passed through softplus, with one of the three count heads on
//! top.

pub mod grid;
pub mod train;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::VehicleGroups;
use crate::distributions::HeadKind;
use crate::error::{CannError, Result};
use crate::features::io::FeatureTable;
use crate::nn::MlpParams;
use crate::special::softplus;

pub use grid::{format_table, grid_search, CellResult, GridCell, GridOutcome, GridSpec};
pub use train::{train_cann, EpochDebug, EpochRecord, TrainDebug, TrainedCann};

/// All trainable state of a combined model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CannParameters {
    /// Log-linear coefficients over intercept + traditional covariates.
    pub beta: Array1<f64>,
    /// The MLP body over the network inputs.
    pub theta: MlpParams,
    /// Raw dispersion weight; φ = softplus(w_φ). Absent for the Poisson head.
    pub w_phi: Option<f64>,
    pub beta_trainable: bool,
}

impl CannParameters {
    pub fn phi(&self) -> Option<f64> {
        self.w_phi.map(softplus)
    }

    /// Linear-part preactivation ⟨x, β⟩ per row.
    pub fn linear_term(&self, x_lin: &Array2<f64>) -> Result<Array1<f64>> {
        if x_lin.ncols() != self.beta.len() {
            return Err(CannError::shape(format!(
                "linear part has {} columns, beta has {}",
                x_lin.ncols(),
                self.beta.len()
            )));
        }
        Ok(x_lin.dot(&self.beta))
    }

    /// Eval-mode mean: μ = ζ(⟨x, β⟩ + a⁽ᴸ⁻¹⁾(x)).
    pub fn forward_eval(&self, x_lin: &Array2<f64>, x_mlp: &Array2<f64>) -> Result<Array1<f64>> {
        let lin = self.linear_term(x_lin)?;
        let net = self.theta.forward_eval(x_mlp)?;
        Ok((&lin + &net).mapv(softplus))
    }
}

/// Training configuration for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub head: HeadKind,
    pub lr_start: f64,
    pub factor: f64,
    pub dropout_p: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stopping: bool,
    pub seed: u64,
    pub fixed_beta: bool,
    pub hidden: Vec<usize>,
    pub batchnorm_momentum: f64,
    /// Record per-epoch parameter snapshots and history sums for the
    /// state-consistency checks. Off by default; memory-heavy.
    pub record_epoch_state: bool,
}

impl TrainConfig {
    pub fn new(head: HeadKind, seed: u64) -> Self {
        TrainConfig {
            head,
            lr_start: 1e-4,
            factor: 0.3,
            dropout_p: 0.2,
            batch_size: 256,
            max_epochs: 30,
            early_stopping: true,
            seed,
            fixed_beta: false,
            hidden: vec![128, 64, 32],
            batchnorm_momentum: 0.1,
            record_epoch_state: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lr_start.is_finite() || self.lr_start < 0.0 {
            return Err(CannError::config("lr_start must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.factor) || self.factor == 0.0 {
            return Err(CannError::config("factor must be in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(CannError::config("dropout_p must be in [0, 1)"));
        }
        if self.batch_size < 2 {
            return Err(CannError::config("batch_size must be at least 2"));
        }
        if self.hidden.is_empty() || self.hidden.iter().any(|&w| w == 0) {
            return Err(CannError::config("hidden widths must be positive"));
        }
        Ok(())
    }
}

/// One split of model-ready data: the linear-part design, the network input
/// block, responses, and the per-vehicle chronological row grouping.
#[derive(Debug, Clone)]
pub struct ModelData {
    pub lin_names: Vec<String>,
    pub mlp_names: Vec<String>,
    pub x_lin: Array2<f64>,
    pub x_mlp: Array2<f64>,
    pub y: Vec<u64>,
    pub groups: VehicleGroups,
}

impl ModelData {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    /// Assemble model inputs from a feature table. The linear part always
    /// gets intercept + traditional columns; the network gets the
    /// traditional block plus, with `telematics`, the telematics vector.
    pub fn from_table(table: &FeatureTable, telematics: bool) -> Result<Self> {
        let bundle = &table.bundle;
        let n = bundle.x.nrows();
        if table.vins.len() != n || table.y.len() != n || table.contract_index.len() != n {
            return Err(CannError::shape("feature table columns do not align"));
        }

        let trad = bundle.trad_range();
        let tele = bundle.tele_range();

        let mut lin_names = vec!["intercept".to_string()];
        lin_names.extend_from_slice(&bundle.names[trad.clone()]);
        let mut x_lin = Array2::ones((n, trad.len() + 1));
        x_lin
            .slice_mut(ndarray::s![.., 1..])
            .assign(&bundle.x.slice(ndarray::s![.., trad.clone()]));

        let mut mlp_names: Vec<String> = bundle.names[trad.clone()].to_vec();
        let x_mlp = if telematics {
            mlp_names.extend_from_slice(&bundle.names[tele.clone()]);
            let mut m = Array2::zeros((n, trad.len() + tele.len()));
            m.slice_mut(ndarray::s![.., ..trad.len()])
                .assign(&bundle.x.slice(ndarray::s![.., trad.clone()]));
            m.slice_mut(ndarray::s![.., trad.len()..])
                .assign(&bundle.x.slice(ndarray::s![.., tele.clone()]));
            m
        } else {
            bundle.x.slice(ndarray::s![.., trad.clone()]).to_owned()
        };

        let groups = VehicleGroups::from_ids(&table.vins, &table.contract_index)?;

        Ok(ModelData {
            lin_names,
            mlp_names,
            x_lin,
            x_mlp,
            y: table.y.clone(),
            groups,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpConfig;
    use crate::seeding;
    use rand::Rng;

    fn toy_params(seed: u64, lin_cols: usize, mlp_cols: usize) -> CannParameters {
        let mut rng = seeding::rng(seed);
        let cfg = MlpConfig::new(mlp_cols).with_layer_widths(&[6, 3]);
        let mut theta = MlpParams::init(&cfg, &mut rng).unwrap();
        theta.visit_tensors_mut(|t| {
            for v in t {
                *v += rng.gen_range(-0.2..0.2);
            }
        });
        CannParameters {
            beta: Array1::from_shape_fn(lin_cols, |_| rng.gen_range(-0.5..0.5)),
            theta,
            w_phi: Some(0.3),
            beta_trainable: true,
        }
    }

    /// Plain scalar re-implementation of the combined regression function,
    /// independent of the batched ndarray path.
    fn scalar_forward(p: &CannParameters, x_lin: &[f64], x_mlp: &[f64]) -> f64 {
        let bn_eval = |bn: &crate::nn::mlp::BatchNorm, x: &[f64]| -> Vec<f64> {
            x.iter()
                .enumerate()
                .map(|(j, &v)| {
                    (v - bn.running_mean[j]) / (bn.running_var[j] + 1e-5).sqrt() * bn.scale[j]
                        + bn.shift[j]
                })
                .collect()
        };
        let mut z = bn_eval(&p.theta.input_bn, x_mlp);
        for layer in &p.theta.hidden {
            let width = layer.dense.b.len();
            let mut a = vec![0.0; width];
            for (k, slot) in a.iter_mut().enumerate() {
                let mut acc = layer.dense.b[k];
                for (j, &zj) in z.iter().enumerate() {
                    acc += zj * layer.dense.w[(j, k)];
                }
                *slot = acc;
            }
            z = bn_eval(&layer.bn, &a).into_iter().map(|v| v.max(0.0)).collect();
        }
        let mut net = p.theta.output.b[0];
        for (j, &zj) in z.iter().enumerate() {
            net += zj * p.theta.output.w[(j, 0)];
        }
        let mut lin = 0.0;
        for (j, &xj) in x_lin.iter().enumerate() {
            lin += xj * p.beta[j];
        }
        let a = lin + net;
        // softplus via its definition
        if a > 0.0 {
            a + (1.0 + (-a).exp()).ln()
        } else {
            (1.0 + a.exp()).ln()
        }
    }

    #[test]
    fn forward_matches_scalar_reimplementation() {
        let p = toy_params(1, 4, 9);
        let mut rng = seeding::rng(2);
        let n = 100;
        let x_lin = Array2::from_shape_fn((n, 4), |(_, j)| if j == 0 { 1.0 } else { rng.gen_range(-2.0..2.0) });
        let x_mlp = Array2::from_shape_fn((n, 9), |_| rng.gen_range(-2.0..2.0));
        let mu = p.forward_eval(&x_lin, &x_mlp).unwrap();
        for i in 0..n {
            let expected = scalar_forward(
                &p,
                x_lin.row(i).as_slice().unwrap(),
                x_mlp.row(i).as_slice().unwrap(),
            );
            assert!(
                (mu[i] - expected).abs() < 1e-12,
                "row {i}: {} vs {expected}",
                mu[i]
            );
            assert!(mu[i] > 0.0);
        }
    }

    #[test]
    fn zero_network_reduces_to_softplus_of_linear_part() {
        let mut p = toy_params(3, 5, 7);
        // Zero output layer only: the network contribution is exactly 0.
        p.theta.output.w.fill(0.0);
        p.theta.output.b.fill(0.0);
        let mut rng = seeding::rng(4);
        let x_lin =
            Array2::from_shape_fn((40, 5), |(_, j)| if j == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) });
        let x_mlp = Array2::from_shape_fn((40, 7), |_| rng.gen_range(-1.0..1.0));
        let mu = p.forward_eval(&x_lin, &x_mlp).unwrap();
        let lin = x_lin.dot(&p.beta);
        for i in 0..40 {
            assert_eq!(mu[i].to_bits(), softplus(lin[i]).to_bits());
        }
    }

    #[test]
    fn zero_everything_gives_ln_two() {
        let mut p = toy_params(5, 3, 4);
        p.beta.fill(0.0);
        p.theta.output.w.fill(0.0);
        p.theta.output.b.fill(0.0);
        let x_lin = Array2::ones((2, 3));
        let x_mlp = Array2::zeros((2, 4));
        let mu = p.forward_eval(&x_lin, &x_mlp).unwrap();
        assert!((mu[0] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let p = toy_params(6, 4, 9);
        let x_lin = Array2::ones((3, 5));
        let x_mlp = Array2::zeros((3, 9));
        assert!(p.forward_eval(&x_lin, &x_mlp).is_err());
        let x_lin = Array2::ones((3, 4));
        let x_mlp = Array2::zeros((3, 8));
        assert!(p.forward_eval(&x_lin, &x_mlp).is_err());
    }

    #[test]
    fn phi_is_softplus_of_weight() {
        let p = toy_params(7, 2, 3);
        assert!((p.phi().unwrap() - softplus(0.3)).abs() < 1e-15);
    }
}
