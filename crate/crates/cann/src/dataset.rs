//! Row/vehicle bookkeeping shared by the fitting, training, and scoring
//! code: which rows belong to which vehicle, in chronological order, and the
//! per-row history sums derived from that ordering.

use serde::{Deserialize, Serialize};

use crate::distributions::HistoryState;
use crate::error::{CannError, Result};

/// Row indices grouped by vehicle, each group in chronological contract
/// order. A cross-sectional dataset is the special case of all-singleton
/// groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleGroups {
    pub groups: Vec<Vec<usize>>,
}

impl VehicleGroups {
    pub fn new(groups: Vec<Vec<usize>>) -> Self {
        VehicleGroups { groups }
    }

    pub fn singletons(n_rows: usize) -> Self {
        VehicleGroups {
            groups: (0..n_rows).map(|i| vec![i]).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    /// Every row index in `0..n_rows` must appear exactly once.
    pub fn validate(&self, n_rows: usize) -> Result<()> {
        let mut seen = vec![false; n_rows];
        for g in &self.groups {
            for &i in g {
                if i >= n_rows || seen[i] {
                    return Err(CannError::data(format!(
                        "vehicle groups are not a partition of 0..{n_rows} (row {i})"
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(CannError::data("vehicle groups omit some rows"))
        }
    }

    /// Per-row sum of earlier claims within the vehicle (Σ⁽ʸ⁾).
    pub fn sigma_y(&self, y: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; y.len()];
        for g in &self.groups {
            let mut acc = 0u64;
            for &i in g {
                out[i] = acc;
                acc += y[i];
            }
        }
        out
    }

    /// Per-row sum of earlier fitted means within the vehicle (Σ⁽μ⁾), for
    /// the given per-row μ values.
    pub fn sigma_mu(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; mu.len()];
        for g in &self.groups {
            let mut acc = 0.0;
            for &i in g {
                out[i] = acc;
                acc += mu[i];
            }
        }
        out
    }

    /// Assemble per-row [`HistoryState`] from claim counts and fitted means.
    pub fn histories(&self, y: &[u64], mu: &[f64]) -> Result<Vec<HistoryState>> {
        let sy = self.sigma_y(y);
        let sm = self.sigma_mu(mu);
        sy.iter()
            .zip(&sm)
            .map(|(&c, &m)| HistoryState::new(c, m))
            .collect()
    }

    /// Group rows by vehicle id, ordering each vehicle's rows by its
    /// chronological contract index. Vehicles keep first-appearance order.
    pub fn from_ids(vins: &[String], contract_index: &[u32]) -> Result<VehicleGroups> {
        if vins.len() != contract_index.len() {
            return Err(CannError::shape("vins and contract indices must align"));
        }
        let mut order: Vec<Vec<usize>> = Vec::new();
        let mut seen: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
        for (i, vin) in vins.iter().enumerate() {
            match seen.get(vin.as_str()) {
                Some(&slot) => order[slot].push(i),
                None => {
                    seen.insert(vin.as_str(), order.len());
                    order.push(vec![i]);
                }
            }
        }
        for rows in &mut order {
            rows.sort_by_key(|&i| contract_index[i]);
        }
        let groups = VehicleGroups::new(order);
        groups.validate(vins.len())?;
        Ok(groups)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_sums_follow_group_order() {
        let groups = VehicleGroups::new(vec![vec![2, 0, 3], vec![1]]);
        groups.validate(4).unwrap();
        let y = [5u64, 7, 1, 2];
        let sy = groups.sigma_y(&y);
        // Vehicle A order: rows 2 (y=1), 0 (y=5), 3 (y=2).
        assert_eq!(sy, vec![1, 0, 0, 6]);
        let mu = [0.5, 0.25, 0.1, 0.75];
        let sm = groups.sigma_mu(&mu);
        assert_eq!(sm, vec![0.1, 0.0, 0.0, 0.6]);
    }

    #[test]
    fn validation_rejects_non_partitions() {
        assert!(VehicleGroups::new(vec![vec![0, 0]]).validate(2).is_err());
        assert!(VehicleGroups::new(vec![vec![0]]).validate(2).is_err());
        assert!(VehicleGroups::new(vec![vec![0, 2]]).validate(2).is_err());
        VehicleGroups::singletons(3).validate(3).unwrap();
    }
}
