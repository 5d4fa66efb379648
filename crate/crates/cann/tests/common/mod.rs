//! Shared helpers for the integration and acceptance suites: synthetic
//! fixtures, model-data assembly, adaptive PMF normalization oracles, and
//! finite-difference utilities.

#![allow(dead_code)]

use cann::features::io::FeatureTable;
use cann::features::prepare::{prepare, PreparedSplits};
use cann::model::ModelData;
use cann::synth::{generate, GeneratedData, GeneratorConfig};

pub struct Fixture {
    pub data: GeneratedData,
    pub prepared: PreparedSplits,
    pub train: ModelData,
    pub valid: ModelData,
    pub test: ModelData,
}

pub fn build_fixture(config: &GeneratorConfig, split_seed: u64, telematics: bool) -> Fixture {
    let data = generate(config).expect("synthetic generation");
    let prepared =
        prepare(&data.contracts, &data.trips, (0.6, 0.2, 0.2), split_seed).expect("prepare");
    let train = ModelData::from_table(&prepared.train, telematics).expect("train data");
    let valid = ModelData::from_table(&prepared.valid, telematics).expect("valid data");
    let test = ModelData::from_table(&prepared.test, telematics).expect("test data");
    Fixture {
        data,
        prepared,
        train,
        valid,
        test,
    }
}

pub fn table_of<'a>(f: &'a Fixture, split: &str) -> &'a FeatureTable {
    match split {
        "train" => &f.prepared.train,
        "valid" => &f.prepared.valid,
        "test" => &f.prepared.test,
        other => panic!("unknown split {other}"),
    }
}

/// Adaptive sum of exp(log_pmf) over y = 0, 1, ... until the remaining tail
/// mass is provably below `tail_bound`, using the geometric bound
/// tail ≤ pmf(y)·q/(1−q) with q an upper bound on all subsequent pmf
/// ratios. `ratio_bound(y)` must upper-bound pmf(y+1)/pmf(y) for all y' ≥ y
/// and tend below 1.
pub fn adaptive_pmf_sum(
    log_pmf: impl Fn(u64) -> f64,
    ratio_bound: impl Fn(u64) -> f64,
    tail_bound: f64,
) -> f64 {
    let mut total = 0.0;
    let mut y = 0u64;
    loop {
        let p = log_pmf(y).exp();
        total += p;
        let q = ratio_bound(y);
        if q < 1.0 && p * q / (1.0 - q) < tail_bound {
            return total;
        }
        y += 1;
        assert!(y < 5_000_000, "adaptive support failed to terminate");
    }
}

/// Poisson pmf ratio bound: pmf(y+1)/pmf(y) = μ/(y+1), decreasing in y.
pub fn poisson_ratio_bound(mu: f64) -> impl Fn(u64) -> f64 {
    move |y| mu / (y + 1) as f64
}

/// Negative-binomial-type ratio: pmf(y+1)/pmf(y) = (y+α)/(y+1) · μ/(μ+γ).
/// The first factor is monotone in y toward 1, so the bound is its maximum
/// over y' ≥ y (evaluated at y for α ≥ 1, at the limit 1 otherwise).
pub fn negbin_ratio_bound(alpha: f64, mu: f64, gamma: f64) -> impl Fn(u64) -> f64 {
    move |y| {
        let shape = (y as f64 + alpha) / (y as f64 + 1.0);
        shape.max(1.0) * mu / (mu + gamma)
    }
}

/// Relative error with a floor for near-zero gradients.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
