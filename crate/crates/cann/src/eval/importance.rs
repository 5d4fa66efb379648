//! Permutation feature importance: shuffle one input column, rescore, and
//! record the increase in the model's average cross-entropy.

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CannError, Result};
use crate::eval::{predictive, EvalData, Model};
use crate::seeding;

const SALT_FI: u64 = 0x46;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceResult {
    pub inputs: Vec<String>,
    /// `scores[j]` holds one FI value per repetition for `inputs[j]`.
    pub scores: Vec<Vec<f64>>,
    pub original_loss: f64,
}

impl ImportanceResult {
    pub fn median(&self, input: &str) -> Option<f64> {
        let j = self.inputs.iter().position(|n| n == input)?;
        let mut v = self.scores[j].clone();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        })
    }
}

/// Average cross-entropy with one column replaced by a row permutation of
/// itself. The permutation is given explicitly so the identity case is
/// exactly the original loss.
fn permuted_loss(model: &Model, data: &EvalData, col: usize, perm: &[usize]) -> Result<f64> {
    let mut x = data.x.clone();
    let original = data.x.column(col);
    let shuffled: Array1<f64> = perm.iter().map(|&i| original[i]).collect();
    x.column_mut(col).assign(&shuffled);
    let permuted = EvalData {
        names: data.names.clone(),
        x,
        y: data.y.clone(),
        groups: data.groups.clone(),
    };
    let (_, log_pmf) = predictive(model, &permuted)?;
    Ok(-log_pmf.iter().sum::<f64>() / log_pmf.len() as f64)
}

fn cross_entropy(model: &Model, data: &EvalData) -> Result<f64> {
    let (_, log_pmf) = predictive(model, data)?;
    Ok(-log_pmf.iter().sum::<f64>() / log_pmf.len() as f64)
}

/// FI of each requested input over `repetitions` shuffles. Repetition `r` of
/// input column `j` draws its permutation from the sub-seed (seed, j, r), so
/// results are reproducible and pairs can run in parallel.
pub fn permutation_importance(
    model: &Model,
    data: &EvalData,
    inputs: &[String],
    repetitions: usize,
    seed: u64,
) -> Result<ImportanceResult> {
    if data.n_rows() == 0 {
        return Err(CannError::data("cannot permute an empty split"));
    }
    let cols: Vec<usize> = inputs
        .iter()
        .map(|name| {
            data.names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| CannError::data(format!("unknown input '{name}'")))
        })
        .collect::<Result<_>>()?;
    let original_loss = cross_entropy(model, data)?;

    let pairs: Vec<(usize, usize)> = (0..cols.len())
        .flat_map(|j| (0..repetitions).map(move |r| (j, r)))
        .collect();
    let fi: Vec<((usize, usize), f64)> = pairs
        .par_iter()
        .map(|&(j, r)| {
            let col = cols[j];
            let mut rng =
                seeding::rng(seeding::mix2(seeding::mix(seed, SALT_FI), col as u64, r as u64));
            let mut perm: Vec<usize> = (0..data.n_rows()).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut rng);
            let loss = permuted_loss(model, data, col, &perm)?;
            Ok(((j, r), loss - original_loss))
        })
        .collect::<Result<_>>()?;

    let mut scores = vec![vec![0.0; repetitions]; cols.len()];
    for ((j, r), v) in fi {
        scores[j][r] = v;
    }
    Ok(ImportanceResult {
        inputs: inputs.to_vec(),
        scores,
        original_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VehicleGroups;
    use crate::glm::GlmFit;
    use ndarray::Array2;
    use rand::Rng;

    fn toy_model_and_data() -> (Model, EvalData) {
        let fit = GlmFit {
            family: crate::distributions::HeadKind::Poisson,
            names: vec!["intercept".into(), "a".into(), "b".into()],
            beta: vec![-1.0, 0.8, 0.0],
            phi: None,
            converged: true,
            final_loss: 0.0,
            iterations: 0,
        };
        let mut rng = crate::seeding::rng(3);
        let n = 60;
        let x = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0));
        let y = (0..n).map(|i| (i % 3 == 0) as u64).collect();
        (
            Model::Glm(fit),
            EvalData {
                names: vec!["a".into(), "b".into()],
                x,
                y,
                groups: VehicleGroups::singletons(n),
            },
        )
    }

    #[test]
    fn identity_permutation_gives_exactly_zero() {
        let (model, data) = toy_model_and_data();
        let original = cross_entropy(&model, &data).unwrap();
        let identity: Vec<usize> = (0..data.n_rows()).collect();
        let same = permuted_loss(&model, &data, 0, &identity).unwrap();
        assert_eq!(same.to_bits(), original.to_bits());
    }

    #[test]
    fn ignored_input_has_zero_importance() {
        // Coefficient on "b" is exactly zero.
        let (model, data) = toy_model_and_data();
        let result =
            permutation_importance(&model, &data, &["b".to_string()], 25, 7).unwrap();
        for v in &result.scores[0] {
            assert!(v.abs() < 1e-12, "FI of ignored input was {v}");
        }
        // The informative input moves the loss.
        let result =
            permutation_importance(&model, &data, &["a".to_string()], 25, 7).unwrap();
        assert!(result.median("a").unwrap() > 0.0);
    }

    #[test]
    fn importance_is_seed_reproducible() {
        let (model, data) = toy_model_and_data();
        let inputs = vec!["a".to_string(), "b".to_string()];
        let a = permutation_importance(&model, &data, &inputs, 10, 11).unwrap();
        let b = permutation_importance(&model, &data, &inputs, 10, 11).unwrap();
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.scores[0].len(), 10);
        let c = permutation_importance(&model, &data, &inputs, 10, 12).unwrap();
        assert_ne!(a.scores, c.scores);
    }

    #[test]
    fn unknown_input_is_rejected() {
        let (model, data) = toy_model_and_data();
        assert!(
            permutation_importance(&model, &data, &["nope".to_string()], 3, 1).is_err()
        );
    }
}
