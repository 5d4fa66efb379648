//! The MLP body: input batch norm, then per hidden layer
//! affine → batch norm → ReLU → dropout, and a single linear output unit
//! producing the preactivation that the combined model adds to its
//! log-linear term.
//!
//! Train-mode forward returns a cache holding everything the backward pass
//! needs (batch statistics, normalized activations, ReLU and dropout masks);
//! eval mode uses running statistics, applies no dropout, and is a pure
//! function of (parameters, input).

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CannError, Result};

const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_width: usize,
    pub layer_widths: Vec<usize>,
    pub dropout_p: f64,
    pub batchnorm_momentum: f64,
}

impl MlpConfig {
    pub fn new(input_width: usize) -> Self {
        MlpConfig {
            input_width,
            layer_widths: vec![128, 64, 32],
            dropout_p: 0.0,
            batchnorm_momentum: 0.1,
        }
    }

    pub fn with_layer_widths(mut self, widths: &[usize]) -> Self {
        self.layer_widths = widths.to_vec();
        self
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_p = p;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.layer_widths.iter().any(|&w| w == 0) {
            return Err(CannError::config("layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(CannError::config(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if !(0.0..=1.0).contains(&self.batchnorm_momentum) {
            return Err(CannError::config("batchnorm momentum must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dense {
    /// (fan_in, fan_out); a batch is multiplied as `x.dot(&w) + b`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchNorm {
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
}

impl BatchNorm {
    fn identity(width: usize, momentum: f64) -> Self {
        BatchNorm {
            scale: Array1::ones(width),
            shift: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
            momentum,
        }
    }

    fn forward_eval(&self, x: &Array2<f64>) -> Array2<f64> {
        let inv_std = self.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let mut out = x - &self.running_mean;
        out *= &inv_std;
        out *= &self.scale;
        out += &self.shift;
        out
    }

    /// Normalizes with batch statistics (biased variance) and updates the
    /// running statistics (unbiased variance, torch convention).
    fn forward_train(&mut self, x: &Array2<f64>) -> (Array2<f64>, BnCache) {
        let n = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).expect("nonempty batch");
        let centered = x - &mean;
        let var_biased = centered.mapv(|c| c * c).mean_axis(Axis(0)).expect("nonempty");
        let inv_std = var_biased.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let xhat = &centered * &inv_std;
        let mut out = &xhat * &self.scale;
        out += &self.shift;

        let m = self.momentum;
        let var_unbiased = var_biased.mapv(|v| v * n / (n - 1.0));
        self.running_mean = &self.running_mean * (1.0 - m) + &mean * m;
        self.running_var = &self.running_var * (1.0 - m) + &var_unbiased * m;

        (out, BnCache { xhat, inv_std })
    }

    /// Gradients of the batch-mean loss through the normalization, for the
    /// batch statistics realized in the cache.
    fn backward(&self, cache: &BnCache, d_out: &Array2<f64>) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
        let n = d_out.nrows() as f64;
        let d_scale = (d_out * &cache.xhat).sum_axis(Axis(0));
        let d_shift = d_out.sum_axis(Axis(0));
        let d_xhat = d_out * &self.scale;
        let sum_d_xhat = d_xhat.sum_axis(Axis(0));
        let sum_d_xhat_xhat = (&d_xhat * &cache.xhat).sum_axis(Axis(0));
        let mut d_x = d_xhat * n;
        d_x -= &sum_d_xhat;
        d_x -= &(&cache.xhat * &sum_d_xhat_xhat);
        d_x *= &cache.inv_std.mapv(|s| s / n);
        (d_x, d_scale, d_shift)
    }
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpParams {
    pub input_bn: BatchNorm,
    pub hidden: Vec<HiddenLayer>,
    pub output: Dense,
    pub dropout_p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HiddenLayer {
    pub dense: Dense,
    pub bn: BatchNorm,
}

/// Per-layer inverted-dropout masks; entries are 0 or 1/(1−p).
#[derive(Debug, Clone)]
pub struct DropoutMasks {
    pub per_layer: Vec<Array2<f64>>,
}

/// Everything the backward pass needs from a train-mode forward pass.
pub struct ForwardCache {
    input_bn: BnCache,
    /// Per hidden layer: input to the dense map, BN cache, ReLU mask,
    /// dropout mask (cloned from the masks used).
    layers: Vec<LayerCache>,
    /// Input to the output affine map.
    last_hidden: Array2<f64>,
}

struct LayerCache {
    dense_input: Array2<f64>,
    bn: BnCache,
    relu_mask: Array2<f64>,
    dropout_mask: Array2<f64>,
}

/// Gradients mirroring [`MlpParams`] (trainable tensors only).
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub input_bn_scale: Array1<f64>,
    pub input_bn_shift: Array1<f64>,
    pub hidden: Vec<HiddenGrads>,
    pub output_w: Array2<f64>,
    pub output_b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct HiddenGrads {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub bn_scale: Array1<f64>,
    pub bn_shift: Array1<f64>,
}

fn he_uniform(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound))
}

impl MlpParams {
    /// He-uniform hidden layers; the output layer starts at exactly zero so
    /// the initial network contribution is 0 and the combined model's first
    /// predictions coincide with its log-linear part.
    pub fn init(cfg: &MlpConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let mut hidden = Vec::with_capacity(cfg.layer_widths.len());
        let mut fan_in = cfg.input_width;
        for &width in &cfg.layer_widths {
            hidden.push(HiddenLayer {
                dense: Dense {
                    w: he_uniform(rng, fan_in, width),
                    b: Array1::zeros(width),
                },
                bn: BatchNorm::identity(width, cfg.batchnorm_momentum),
            });
            fan_in = width;
        }
        Ok(MlpParams {
            input_bn: BatchNorm::identity(cfg.input_width, cfg.batchnorm_momentum),
            hidden,
            output: Dense {
                w: Array2::zeros((fan_in, 1)),
                b: Array1::zeros(1),
            },
            dropout_p: cfg.dropout_p,
        })
    }

    pub fn input_width(&self) -> usize {
        self.input_bn.scale.len()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(CannError::shape(format!(
                "batch has {} columns, network expects {}",
                x.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Sample inverted-dropout masks for a batch.
    pub fn sample_masks(&self, batch_rows: usize, rng: &mut impl Rng) -> DropoutMasks {
        let p = self.dropout_p;
        let keep = 1.0 - p;
        let per_layer = self
            .hidden
            .iter()
            .map(|layer| {
                let width = layer.dense.b.len();
                if p == 0.0 {
                    Array2::ones((batch_rows, width))
                } else {
                    Array2::from_shape_fn((batch_rows, width), |_| {
                        if rng.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                }
            })
            .collect();
        DropoutMasks { per_layer }
    }

    /// Eval-mode forward: running statistics, no dropout. Pure in
    /// (parameters, input); returns the single output preactivation per row.
    pub fn forward_eval(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        let mut z = self.input_bn.forward_eval(x);
        for layer in &self.hidden {
            let a = z.dot(&layer.dense.w) + &layer.dense.b;
            let bn = layer.bn.forward_eval(&a);
            z = bn.mapv(|v| v.max(0.0));
        }
        let out = z.dot(&self.output.w) + &self.output.b;
        Ok(out.column(0).to_owned())
    }

    /// Train-mode forward with the given dropout masks. Updates batch-norm
    /// running statistics and returns the cache for [`MlpParams::backward`].
    pub fn forward_train(
        &mut self,
        x: &Array2<f64>,
        masks: &DropoutMasks,
    ) -> Result<(Array1<f64>, ForwardCache)> {
        self.check_input(x)?;
        if x.nrows() < 2 {
            return Err(CannError::shape(
                "train-mode batch needs at least 2 rows for batch statistics",
            ));
        }
        if masks.per_layer.len() != self.hidden.len() {
            return Err(CannError::shape("dropout masks do not match layer count"));
        }
        let (mut z, input_bn) = self.input_bn.forward_train(x);
        let mut layers = Vec::with_capacity(self.hidden.len());
        for (layer, mask) in self.hidden.iter_mut().zip(&masks.per_layer) {
            if mask.dim() != (x.nrows(), layer.dense.b.len()) {
                return Err(CannError::shape("dropout mask shape mismatch"));
            }
            let dense_input = z;
            let a = dense_input.dot(&layer.dense.w) + &layer.dense.b;
            let (bn_out, bn) = layer.bn.forward_train(&a);
            let relu_mask = bn_out.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            let activated = bn_out.mapv(|v| v.max(0.0));
            z = &activated * mask;
            layers.push(LayerCache {
                dense_input,
                bn,
                relu_mask,
                dropout_mask: mask.clone(),
            });
        }
        let out = z.dot(&self.output.w) + &self.output.b;
        let cache = ForwardCache {
            input_bn,
            layers,
            last_hidden: z,
        };
        Ok((out.column(0).to_owned(), cache))
    }

    /// Exact reverse-mode gradients for the realized dropout masks and batch
    /// statistics. `d_out` is the loss gradient w.r.t. the output
    /// preactivation, one entry per batch row. Also returns the gradient
    /// w.r.t. the network input.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array1<f64>) -> Result<(MlpGrads, Array2<f64>)> {
        let n = cache.last_hidden.nrows();
        if d_out.len() != n {
            return Err(CannError::shape(format!(
                "upstream gradient has {} rows, cache has {n}",
                d_out.len()
            )));
        }
        let d_out_col = d_out.view().insert_axis(Axis(1));
        let output_w = cache.last_hidden.t().dot(&d_out_col);
        let output_b = Array1::from_elem(1, d_out.sum());
        let mut d_z = d_out_col.dot(&self.output.w.t());

        let mut hidden_grads = vec![
            HiddenGrads {
                w: Array2::zeros((0, 0)),
                b: Array1::zeros(0),
                bn_scale: Array1::zeros(0),
                bn_shift: Array1::zeros(0),
            };
            self.hidden.len()
        ];
        for (idx, (layer, lc)) in self.hidden.iter().zip(&cache.layers).enumerate().rev() {
            let d_activated = &d_z * &lc.dropout_mask;
            let d_bn_out = &d_activated * &lc.relu_mask;
            let (d_a, bn_scale, bn_shift) = layer.bn.backward(&lc.bn, &d_bn_out);
            let w = lc.dense_input.t().dot(&d_a);
            let b = d_a.sum_axis(Axis(0));
            d_z = d_a.dot(&layer.dense.w.t());
            hidden_grads[idx] = HiddenGrads {
                w,
                b,
                bn_scale,
                bn_shift,
            };
        }
        let (d_input, input_bn_scale, input_bn_shift) =
            self.input_bn.backward(&cache.input_bn, &d_z);
        Ok((
            MlpGrads {
                input_bn_scale,
                input_bn_shift,
                hidden: hidden_grads,
                output_w,
                output_b,
            },
            d_input,
        ))
    }

    /// Visit every trainable tensor as a flat slice, in a fixed order.
    pub fn visit_tensors_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        f(self.input_bn.scale.as_slice_mut().expect("contiguous"));
        f(self.input_bn.shift.as_slice_mut().expect("contiguous"));
        for layer in &mut self.hidden {
            f(layer.dense.w.as_slice_mut().expect("contiguous"));
            f(layer.dense.b.as_slice_mut().expect("contiguous"));
            f(layer.bn.scale.as_slice_mut().expect("contiguous"));
            f(layer.bn.shift.as_slice_mut().expect("contiguous"));
        }
        f(self.output.w.as_slice_mut().expect("contiguous"));
        f(self.output.b.as_slice_mut().expect("contiguous"));
    }

    /// Tensor lengths in the same order as [`MlpParams::visit_tensors_mut`].
    pub fn tensor_lengths(&self) -> Vec<usize> {
        let mut lens = vec![self.input_bn.scale.len(), self.input_bn.shift.len()];
        for layer in &self.hidden {
            lens.push(layer.dense.w.len());
            lens.push(layer.dense.b.len());
            lens.push(layer.bn.scale.len());
            lens.push(layer.bn.shift.len());
        }
        lens.push(self.output.w.len());
        lens.push(self.output.b.len());
        lens
    }
}

impl MlpGrads {
    /// Visit gradient tensors in the same fixed order as
    /// [`MlpParams::visit_tensors_mut`].
    pub fn visit_tensors(&self, mut f: impl FnMut(&[f64])) {
        f(self.input_bn_scale.as_slice().expect("contiguous"));
        f(self.input_bn_shift.as_slice().expect("contiguous"));
        for layer in &self.hidden {
            f(layer.w.as_slice().expect("contiguous"));
            f(layer.b.as_slice().expect("contiguous"));
            f(layer.bn_scale.as_slice().expect("contiguous"));
            f(layer.bn_shift.as_slice().expect("contiguous"));
        }
        f(self.output_w.as_slice().expect("contiguous"));
        f(self.output_b.as_slice().expect("contiguous"));
    }
}
