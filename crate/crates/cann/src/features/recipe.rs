//! Preprocessing recipe: rare-category grouping, dummy encoding, median
//! imputation, and centering/scaling. All statistics come from the training
//! split; applying a fitted recipe never changes it.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CannError, Result};
use crate::features::handcrafted::{HandcraftedFeatures, HANDCRAFTED_NAMES};
use crate::features::records::{ContractRecord, CATEGORICAL_VARIABLES, NUMERIC_VARIABLES};
use crate::features::telvector::{TelematicsVector, TELE_DIM};

pub const RECIPE_SCHEMA_VERSION: u32 = 1;

/// Share at or below which a category is grouped into "others".
const RARE_SHARE: f64 = 0.05;
const OTHERS: &str = "others";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalEncoder {
    pub variable: String,
    /// Original level → mapped level (identity, or "others" for rare ones).
    pub mapping: BTreeMap<String, String>,
    /// Most frequent mapped level; encoded as all-zero dummies.
    pub reference: String,
    /// Mapped levels with a dummy column each, in column order.
    pub dummies: Vec<String>,
}

impl CategoricalEncoder {
    fn fit(variable: &str, values: impl Iterator<Item = String>, n_rows: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for v in values {
            *counts.entry(v).or_insert(0) += 1;
        }
        let mut mapping = BTreeMap::new();
        let mut mapped_counts: BTreeMap<String, usize> = BTreeMap::new();
        for (level, count) in &counts {
            let share = *count as f64 / n_rows as f64;
            let mapped = if share <= RARE_SHARE {
                OTHERS.to_string()
            } else {
                level.clone()
            };
            mapping.insert(level.clone(), mapped.clone());
            *mapped_counts.entry(mapped).or_insert(0) += count;
        }
        // Most frequent mapped level; ties break to the lexicographically
        // smallest because of the BTreeMap iteration order.
        let reference = mapped_counts
            .iter()
            .max_by_key(|(_, &c)| c)
            .map(|(l, _)| l.clone())
            .expect("at least one level");
        let dummies: Vec<String> = mapped_counts
            .keys()
            .filter(|l| **l != reference)
            .cloned()
            .collect();
        CategoricalEncoder {
            variable: variable.to_string(),
            mapping,
            reference,
            dummies,
        }
    }

    /// Mapped level for a raw value; unseen values map to "others".
    fn map(&self, value: &str) -> &str {
        self.mapping.get(value).map(String::as_str).unwrap_or(OTHERS)
    }

    fn column_names(&self) -> Vec<String> {
        self.dummies
            .iter()
            .map(|l| format!("{}_{}", self.variable, l))
            .collect()
    }

    fn encode_into(&self, value: &str, out: &mut [f64]) {
        let mapped = self.map(value);
        for (slot, level) in out.iter_mut().zip(&self.dummies) {
            *slot = if level == mapped { 1.0 } else { 0.0 };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation; zero marks a constant column that is only
    /// centered, never divided.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessingRecipe {
    pub schema_version: u32,
    pub encoders: Vec<CategoricalEncoder>,
    pub commute_median: f64,
    pub scalers: Vec<ColumnScaler>,
    /// Width of the traditional block (numerics + dummies); handcrafted and
    /// telematics blocks follow.
    pub n_trad: usize,
}

/// Encoded and scaled per-contract feature rows with named columns.
#[derive(Debug, Clone)]
pub struct FeatureBundle {
    pub names: Vec<String>,
    pub x: Array2<f64>,
    pub n_trad: usize,
}

impl FeatureBundle {
    pub fn trad_range(&self) -> std::ops::Range<usize> {
        0..self.n_trad
    }

    pub fn hand_range(&self) -> std::ops::Range<usize> {
        self.n_trad..self.n_trad + HANDCRAFTED_NAMES.len()
    }

    pub fn tele_range(&self) -> std::ops::Range<usize> {
        let start = self.n_trad + HANDCRAFTED_NAMES.len();
        start..start + TELE_DIM
    }

    /// Recover the traditional-block width from a name list whose trailing
    /// columns must be the handcrafted and telematics blocks.
    pub fn trad_width_from_names(names: &[String]) -> Result<usize> {
        let fixed = HANDCRAFTED_NAMES.len() + TELE_DIM;
        if names.len() < fixed {
            return Err(CannError::data("feature header is too short"));
        }
        let n_trad = names.len() - fixed;
        let expected: Vec<String> = HANDCRAFTED_NAMES
            .iter()
            .map(|s| s.to_string())
            .chain(TelematicsVector::names())
            .collect();
        for (got, want) in names[n_trad..].iter().zip(&expected) {
            if got != want {
                return Err(CannError::data(format!(
                    "unexpected feature column '{got}' where '{want}' belongs"
                )));
            }
        }
        Ok(n_trad)
    }
}

fn check_aligned(
    contracts: &[ContractRecord],
    hand: &[HandcraftedFeatures],
    tele: &[TelematicsVector],
) -> Result<()> {
    if contracts.is_empty() {
        return Err(CannError::data("no contracts to preprocess"));
    }
    if contracts.len() != hand.len() || contracts.len() != tele.len() {
        return Err(CannError::shape(
            "contracts, handcrafted features, and telematics vectors must align",
        ));
    }
    Ok(())
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Raw (unscaled) encoded matrix plus its column names.
fn encode_unscaled(
    encoders: &[CategoricalEncoder],
    commute_median: f64,
    contracts: &[ContractRecord],
    hand: &[HandcraftedFeatures],
    tele: &[TelematicsVector],
) -> (Vec<String>, Array2<f64>) {
    let mut names: Vec<String> = NUMERIC_VARIABLES.iter().map(|s| s.to_string()).collect();
    for enc in encoders {
        names.extend(enc.column_names());
    }
    names.extend(HANDCRAFTED_NAMES.iter().map(|s| s.to_string()));
    names.extend(TelematicsVector::names());

    let n_cols = names.len();
    let mut x = Array2::zeros((contracts.len(), n_cols));
    for (r, c) in contracts.iter().enumerate() {
        let mut col = 0usize;
        for value in c.numeric_values() {
            x[(r, col)] = value.unwrap_or(commute_median);
            col += 1;
        }
        for (enc, value) in encoders.iter().zip(c.categorical_values()) {
            let width = enc.dummies.len();
            let mut buf = vec![0.0; width];
            enc.encode_into(value, &mut buf);
            for (k, v) in buf.into_iter().enumerate() {
                x[(r, col + k)] = v;
            }
            col += width;
        }
        for v in hand[r].to_vec() {
            x[(r, col)] = v;
            col += 1;
        }
        for v in tele[r].to_vec() {
            x[(r, col)] = v;
            col += 1;
        }
    }
    (names, x)
}

/// Fit a recipe on the training split only.
pub fn fit_recipe(
    contracts: &[ContractRecord],
    hand: &[HandcraftedFeatures],
    tele: &[TelematicsVector],
) -> Result<PreprocessingRecipe> {
    check_aligned(contracts, hand, tele)?;
    let commute: Vec<f64> = contracts
        .iter()
        .filter_map(|c| c.commute_distance)
        .collect();
    if commute.is_empty() {
        return Err(CannError::data(
            "commute_distance is missing for every training contract",
        ));
    }
    let commute_median = median_of(commute);

    let n = contracts.len();
    let encoders: Vec<CategoricalEncoder> = CATEGORICAL_VARIABLES
        .iter()
        .enumerate()
        .map(|(k, variable)| {
            CategoricalEncoder::fit(
                variable,
                contracts.iter().map(|c| c.categorical_values()[k].to_string()),
                n,
            )
        })
        .collect();

    let (names, x) = encode_unscaled(&encoders, commute_median, contracts, hand, tele);
    let n_trad = NUMERIC_VARIABLES.len()
        + encoders.iter().map(|e| e.dummies.len()).sum::<usize>();

    let nf = n as f64;
    let scalers = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = x.column(j);
            let mean = col.sum() / nf;
            let sd = if n > 1 {
                (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0)).sqrt()
            } else {
                0.0
            };
            ColumnScaler {
                name: name.clone(),
                mean,
                sd,
            }
        })
        .collect();

    Ok(PreprocessingRecipe {
        schema_version: RECIPE_SCHEMA_VERSION,
        encoders,
        commute_median,
        scalers,
        n_trad,
    })
}

/// Encode and scale contracts with a fitted recipe.
pub fn apply_recipe(
    recipe: &PreprocessingRecipe,
    contracts: &[ContractRecord],
    hand: &[HandcraftedFeatures],
    tele: &[TelematicsVector],
) -> Result<FeatureBundle> {
    check_aligned(contracts, hand, tele)?;
    let (names, mut x) = encode_unscaled(
        &recipe.encoders,
        recipe.commute_median,
        contracts,
        hand,
        tele,
    );
    if names.len() != recipe.scalers.len() {
        return Err(CannError::shape(
            "recipe scaler count does not match encoded column count",
        ));
    }
    for (j, scaler) in recipe.scalers.iter().enumerate() {
        if names[j] != scaler.name {
            return Err(CannError::data(format!(
                "column order mismatch: '{}' vs recipe '{}'",
                names[j], scaler.name
            )));
        }
        let mut col = x.column_mut(j);
        if scaler.sd > 0.0 {
            col.mapv_inplace(|v| (v - scaler.mean) / scaler.sd);
        } else {
            col.mapv_inplace(|v| v - scaler.mean);
        }
    }
    Ok(FeatureBundle {
        names,
        x,
        n_trad: recipe.n_trad,
    })
}
