//! End-to-end feature preparation: link trips, build per-contract features,
//! split by vehicle, fit the recipe on the training split only, and emit
//! model-ready feature tables for all three splits.

use rayon::prelude::*;

use crate::error::Result;
use crate::features::handcrafted::{build_handcrafted, HandcraftedFeatures};
use crate::features::io::FeatureTable;
use crate::features::link::link_trips;
use crate::features::recipe::{apply_recipe, fit_recipe, PreprocessingRecipe};
use crate::features::records::{ContractRecord, TripRecord};
use crate::features::split::{split_by_vehicle, SplitAssignment};
use crate::features::telvector::{build_telematics_vector, TelematicsVector};

#[derive(Debug, Clone)]
pub struct PreparedSplits {
    pub recipe: PreprocessingRecipe,
    pub assignment: SplitAssignment,
    pub train: FeatureTable,
    pub valid: FeatureTable,
    pub test: FeatureTable,
    pub discarded_trips: usize,
}

/// Indices of `contracts` ordered by (vin, start date) and restricted to the
/// given vehicle set, with the 1-based chronological index per vehicle.
fn ordered_rows(contracts: &[ContractRecord], vins: &[String]) -> Vec<(usize, u32)> {
    let member: std::collections::BTreeSet<&str> = vins.iter().map(String::as_str).collect();
    let mut rows: Vec<usize> = (0..contracts.len())
        .filter(|&i| member.contains(contracts[i].vin.as_str()))
        .collect();
    rows.sort_by(|&a, &b| {
        contracts[a]
            .vin
            .cmp(&contracts[b].vin)
            .then(contracts[a].start_date.cmp(&contracts[b].start_date))
    });
    let mut out = Vec::with_capacity(rows.len());
    let mut t = 0u32;
    let mut prev: Option<&str> = None;
    for &i in &rows {
        t = if prev == Some(contracts[i].vin.as_str()) {
            t + 1
        } else {
            1
        };
        prev = Some(contracts[i].vin.as_str());
        out.push((i, t));
    }
    out
}

pub fn prepare(
    contracts: &[ContractRecord],
    trips: &[TripRecord],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<PreparedSplits> {
    let linked = link_trips(contracts, trips)?;

    // Per-contract feature construction is independent across contracts.
    let features: Vec<(HandcraftedFeatures, TelematicsVector)> = contracts
        .par_iter()
        .enumerate()
        .map(|(i, contract)| {
            let refs: Vec<&TripRecord> =
                linked.per_contract[i].iter().map(|&k| &trips[k]).collect();
            (
                build_handcrafted(&refs, contract),
                build_telematics_vector(&refs),
            )
        })
        .collect();

    let assignment = split_by_vehicle(contracts, fractions, seed)?;

    let make_table = |vins: &[String], recipe: Option<&PreprocessingRecipe>| -> Result<(FeatureTable, Option<PreprocessingRecipe>)> {
        let rows = ordered_rows(contracts, vins);
        let split_contracts: Vec<ContractRecord> =
            rows.iter().map(|&(i, _)| contracts[i].clone()).collect();
        let hand: Vec<HandcraftedFeatures> =
            rows.iter().map(|&(i, _)| features[i].0.clone()).collect();
        let tele: Vec<TelematicsVector> =
            rows.iter().map(|&(i, _)| features[i].1.clone()).collect();
        let (recipe_out, bundle) = match recipe {
            Some(r) => (None, apply_recipe(r, &split_contracts, &hand, &tele)?),
            None => {
                let fitted = fit_recipe(&split_contracts, &hand, &tele)?;
                let bundle = apply_recipe(&fitted, &split_contracts, &hand, &tele)?;
                (Some(fitted), bundle)
            }
        };
        Ok((
            FeatureTable {
                vins: split_contracts.iter().map(|c| c.vin.clone()).collect(),
                contract_index: rows.iter().map(|&(_, t)| t).collect(),
                y: split_contracts.iter().map(|c| c.nb_claims).collect(),
                bundle,
            },
            recipe_out,
        ))
    };

    let (train, recipe) = make_table(&assignment.train, None)?;
    let recipe = recipe.expect("recipe fitted on the training split");
    let (valid, _) = make_table(&assignment.valid, Some(&recipe))?;
    let (test, _) = make_table(&assignment.test, Some(&recipe))?;

    Ok(PreparedSplits {
        recipe,
        assignment,
        train,
        valid,
        test,
        discarded_trips: linked.discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GeneratorConfig};

    #[test]
    fn prepared_splits_are_vehicle_disjoint_and_ordered() {
        let data = generate(&GeneratorConfig {
            n_vehicles: 60,
            trips_per_contract: 8.0,
            seed: 21,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let prepared = prepare(&data.contracts, &data.trips, (0.6, 0.2, 0.2), 5).unwrap();
        assert_eq!(prepared.discarded_trips, 0);
        let total_rows = prepared.train.y.len() + prepared.valid.y.len() + prepared.test.y.len();
        assert_eq!(total_rows, data.contracts.len());

        for table in [&prepared.train, &prepared.valid, &prepared.test] {
            // contract_index restarts at 1 per vehicle and increments.
            for w in table.vins.windows(2).zip(table.contract_index.windows(2)) {
                let (vins, idx) = w;
                if vins[0] == vins[1] {
                    assert_eq!(idx[1], idx[0] + 1);
                } else {
                    assert_eq!(idx[1], 1);
                }
            }
        }

        // No vehicle appears in two splits.
        let train_set: std::collections::BTreeSet<&String> = prepared.train.vins.iter().collect();
        for vin in prepared.valid.vins.iter().chain(&prepared.test.vins) {
            assert!(!train_set.contains(vin));
        }
    }

    #[test]
    fn recipe_is_a_pure_function_of_the_training_rows() {
        let data = generate(&GeneratorConfig {
            n_vehicles: 50,
            trips_per_contract: 6.0,
            seed: 31,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let prepared = prepare(&data.contracts, &data.trips, (0.6, 0.2, 0.2), 9).unwrap();

        // Rebuild the recipe from the training rows alone; mutating
        // validation/test rows can never reach it.
        let linked = link_trips(&data.contracts, &data.trips).unwrap();
        let rows = ordered_rows(&data.contracts, &prepared.assignment.train);
        let train_contracts: Vec<ContractRecord> =
            rows.iter().map(|&(i, _)| data.contracts[i].clone()).collect();
        let hand: Vec<HandcraftedFeatures> = rows
            .iter()
            .map(|&(i, _)| {
                let refs: Vec<&TripRecord> = linked.per_contract[i]
                    .iter()
                    .map(|&k| &data.trips[k])
                    .collect();
                build_handcrafted(&refs, &data.contracts[i])
            })
            .collect();
        let tele: Vec<TelematicsVector> = rows
            .iter()
            .map(|&(i, _)| {
                let refs: Vec<&TripRecord> = linked.per_contract[i]
                    .iter()
                    .map(|&k| &data.trips[k])
                    .collect();
                build_telematics_vector(&refs)
            })
            .collect();
        let independent = fit_recipe(&train_contracts, &hand, &tele).unwrap();
        assert_eq!(
            serde_json::to_string(&independent).unwrap(),
            serde_json::to_string(&prepared.recipe).unwrap()
        );
    }
}
