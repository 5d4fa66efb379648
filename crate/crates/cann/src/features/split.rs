//! Vehicle-disjoint train/validation/test splitting: vehicles are shuffled
//! with the seed and partitioned, so every contract of a vehicle lands in
//! exactly one split.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{CannError, Result};
use crate::features::records::ContractRecord;
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn split_of(&self, vin: &str) -> Option<&'static str> {
        if self.train.iter().any(|v| v == vin) {
            Some("train")
        } else if self.valid.iter().any(|v| v == vin) {
            Some("valid")
        } else if self.test.iter().any(|v| v == vin) {
            Some("test")
        } else {
            None
        }
    }
}

pub fn split_by_vehicle(
    contracts: &[ContractRecord],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<SplitAssignment> {
    let (f_train, f_valid, f_test) = fractions;
    if f_train < 0.0 || f_valid < 0.0 || f_test < 0.0 {
        return Err(CannError::config("split fractions must be nonnegative"));
    }
    if (f_train + f_valid + f_test - 1.0).abs() > 1e-9 {
        return Err(CannError::config("split fractions must sum to 1"));
    }
    let vins: BTreeSet<&str> = contracts.iter().map(|c| c.vin.as_str()).collect();
    let n = vins.len();
    let n_splits = [f_train, f_valid, f_test].iter().filter(|&&f| f > 0.0).count();
    if n < n_splits {
        return Err(CannError::data(format!(
            "{n} vehicles cannot fill {n_splits} splits"
        )));
    }
    let mut shuffled: Vec<&str> = vins.into_iter().collect();
    shuffled.shuffle(&mut seeding::rng(seed));

    let n_train = (f_train * n as f64).floor() as usize;
    let n_valid = (f_valid * n as f64).floor() as usize;
    let own = |s: &[&str]| s.iter().map(|v| v.to_string()).collect::<Vec<_>>();
    Ok(SplitAssignment {
        train: own(&shuffled[..n_train]),
        valid: own(&shuffled[n_train..n_train + n_valid]),
        test: own(&shuffled[n_train + n_valid..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::records::testutil::contract;

    fn fleet(n: usize) -> Vec<ContractRecord> {
        (0..n)
            .flat_map(|i| {
                vec![
                    contract(&format!("V{i:03}"), "2017-01-01", "2017-12-31"),
                    contract(&format!("V{i:03}"), "2018-01-01", "2018-12-31"),
                ]
            })
            .collect()
    }

    #[test]
    fn ten_vehicles_split_six_two_two() {
        let contracts = fleet(10);
        let s = split_by_vehicle(&contracts, (0.6, 0.2, 0.2), 7).unwrap();
        assert_eq!(s.train.len(), 6);
        assert_eq!(s.valid.len(), 2);
        assert_eq!(s.test.len(), 2);
    }

    #[test]
    fn same_seed_reproduces_partition() {
        let contracts = fleet(25);
        let a = split_by_vehicle(&contracts, (0.6, 0.2, 0.2), 42).unwrap();
        let b = split_by_vehicle(&contracts, (0.6, 0.2, 0.2), 42).unwrap();
        assert_eq!(a, b);
        let c = split_by_vehicle(&contracts, (0.6, 0.2, 0.2), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn splits_partition_the_fleet() {
        let contracts = fleet(17);
        let s = split_by_vehicle(&contracts, (0.6, 0.2, 0.2), 3).unwrap();
        let mut all: Vec<String> = s
            .train
            .iter()
            .chain(&s.valid)
            .chain(&s.test)
            .cloned()
            .collect();
        all.sort();
        let mut expected: Vec<String> = (0..17).map(|i| format!("V{i:03}")).collect();
        expected.sort();
        assert_eq!(all.len(), 17);
        assert_eq!(all, expected);
    }

    #[test]
    fn too_few_vehicles_is_an_error() {
        let contracts = fleet(2);
        assert!(split_by_vehicle(&contracts, (0.6, 0.2, 0.2), 1).is_err());
        assert!(split_by_vehicle(&contracts, (0.5, 0.5, 0.1), 1).is_err());
    }
}
