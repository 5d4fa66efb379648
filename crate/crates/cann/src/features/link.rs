//! Trip-to-contract linking.
//!
//! A trip belongs to the same-VIN contract whose [start, end] date interval
//! (inclusive) contains the trip's departure date. When two consecutive
//! contracts share a boundary date, the later contract wins. Trips matching
//! no contract are counted and discarded.

use std::collections::HashMap;

use crate::error::{CannError, Result};
use crate::features::records::{ContractRecord, TripRecord};

#[derive(Debug, Clone)]
pub struct LinkedTrips {
    /// For each contract (input order), the indices of its trips.
    pub per_contract: Vec<Vec<usize>>,
    pub discarded: usize,
}

pub fn link_trips(contracts: &[ContractRecord], trips: &[TripRecord]) -> Result<LinkedTrips> {
    for c in contracts {
        c.validate()?;
    }
    for t in trips {
        t.validate()?;
    }

    // Contract indices per VIN, sorted by start date.
    let mut by_vin: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, c) in contracts.iter().enumerate() {
        by_vin.entry(c.vin.as_str()).or_default().push(i);
    }
    for (vin, idxs) in by_vin.iter_mut() {
        idxs.sort_by_key(|&i| contracts[i].start_date);
        for pair in idxs.windows(2) {
            let (a, b) = (&contracts[pair[0]], &contracts[pair[1]]);
            if b.start_date < a.end_date {
                return Err(CannError::data(format!(
                    "overlapping contracts for vin {vin}: [{}, {}] and [{}, {}]",
                    a.start_date, a.end_date, b.start_date, b.end_date
                )));
            }
        }
    }

    let mut per_contract = vec![Vec::new(); contracts.len()];
    let mut discarded = 0usize;
    for (t_idx, trip) in trips.iter().enumerate() {
        let date = trip.departure.date();
        let assigned = by_vin.get(trip.vin.as_str()).and_then(|idxs| {
            // Last contract starting on or before the departure date; with
            // non-overlapping intervals this is also the later contract on a
            // shared boundary date.
            let pos = idxs.partition_point(|&i| contracts[i].start_date <= date);
            if pos == 0 {
                return None;
            }
            let i = idxs[pos - 1];
            (date <= contracts[i].end_date).then_some(i)
        });
        match assigned {
            Some(i) => per_contract[i].push(t_idx),
            None => discarded += 1,
        }
    }
    Ok(LinkedTrips {
        per_contract,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::records::testutil::{contract, trip};

    #[test]
    fn boundary_dates_are_inclusive_and_later_contract_wins() {
        let contracts = vec![
            contract("A", "2017-01-01", "2018-01-01"),
            contract("A", "2018-01-01", "2018-12-31"),
        ];
        let trips = vec![
            // On the first contract's start date.
            trip("A", 1, "2017-01-01 08:00:00", "2017-01-01 08:30:00", 10.0, 70.0),
            // On the shared boundary date: later contract wins.
            trip("A", 2, "2018-01-01 09:00:00", "2018-01-01 09:20:00", 5.0, 60.0),
        ];
        let linked = link_trips(&contracts, &trips).unwrap();
        assert_eq!(linked.per_contract[0], vec![0]);
        assert_eq!(linked.per_contract[1], vec![1]);
        assert_eq!(linked.discarded, 0);
    }

    #[test]
    fn unmatched_trips_are_counted_and_dropped() {
        let contracts = vec![contract("A", "2017-01-01", "2017-12-31")];
        let trips = vec![
            trip("A", 1, "2016-12-31 10:00:00", "2016-12-31 10:30:00", 3.0, 40.0),
            trip("A", 2, "2018-01-05 10:00:00", "2018-01-05 10:30:00", 3.0, 40.0),
            trip("B", 1, "2017-06-01 10:00:00", "2017-06-01 10:30:00", 3.0, 40.0),
        ];
        let linked = link_trips(&contracts, &trips).unwrap();
        assert!(linked.per_contract[0].is_empty());
        assert_eq!(linked.discarded, 3);
    }

    #[test]
    fn overlapping_contracts_are_rejected() {
        let contracts = vec![
            contract("A", "2017-01-01", "2017-12-31"),
            contract("A", "2017-06-01", "2018-05-31"),
        ];
        assert!(link_trips(&contracts, &[]).is_err());
    }

    #[test]
    fn known_fixture_assignment() {
        let contracts = vec![
            contract("A", "2017-01-01", "2017-12-31"),
            contract("A", "2018-01-02", "2018-12-31"),
            contract("B", "2017-03-01", "2018-02-28"),
        ];
        let trips = vec![
            trip("A", 1, "2017-02-01 07:00:00", "2017-02-01 07:30:00", 5.0, 50.0),
            trip("A", 2, "2017-11-30 18:00:00", "2017-11-30 18:40:00", 8.0, 90.0),
            trip("A", 3, "2018-01-02 08:00:00", "2018-01-02 08:30:00", 5.0, 50.0),
            trip("A", 4, "2018-06-15 12:00:00", "2018-06-15 12:45:00", 20.0, 110.0),
            trip("A", 5, "2019-01-01 12:00:00", "2019-01-01 12:45:00", 20.0, 110.0),
            trip("B", 1, "2017-03-01 09:00:00", "2017-03-01 09:10:00", 2.0, 35.0),
            trip("B", 2, "2018-02-28 09:00:00", "2018-02-28 09:10:00", 2.0, 35.0),
            trip("B", 3, "2018-03-01 09:00:00", "2018-03-01 09:10:00", 2.0, 35.0),
            trip("C", 1, "2017-03-01 09:00:00", "2017-03-01 09:10:00", 2.0, 35.0),
            trip("A", 6, "2018-01-01 09:00:00", "2018-01-01 09:10:00", 2.0, 35.0),
        ];
        let linked = link_trips(&contracts, &trips).unwrap();
        assert_eq!(linked.per_contract[0], vec![0, 1]);
        assert_eq!(linked.per_contract[1], vec![2, 3]);
        assert_eq!(linked.per_contract[2], vec![5, 6]);
        // Trip 5 (after all A contracts), trip B3 (after B's contract),
        // trip C1 (unknown vin), trip A6 (gap day) are discarded.
        assert_eq!(linked.discarded, 4);
    }
}
