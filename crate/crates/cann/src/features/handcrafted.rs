//! The 13 handcrafted telematics features used by the benchmark log-linear
//! models: trip-count intensity, duration-weighted time-window fractions,
//! per-trip medians and maxima, and the long-trip proportion.

use serde::{Deserialize, Serialize};

use crate::features::records::{ContractRecord, TripRecord};
use crate::features::telvector::{average_speed_kmh, time_allocation};

pub const HANDCRAFTED_NAMES: [&str; 13] = [
    "avg_daily_nb_trips",
    "frac_expo_evening",
    "frac_expo_fri_sat",
    "frac_expo_mon_to_thu",
    "frac_expo_night",
    "frac_expo_noon",
    "frac_expo_peak_evening",
    "frac_expo_peak_morning",
    "max_trip_max_speed",
    "med_trip_avg_speed",
    "med_trip_distance",
    "med_trip_max_speed",
    "prop_long_trip",
];

const ALL_DAYS: [usize; 7] = [0, 1, 2, 3, 4, 5, 6];
const MON_TO_FRI: [usize; 5] = [0, 1, 2, 3, 4];
const MON_TO_THU: [usize; 4] = [0, 1, 2, 3];
const FRI_SAT: [usize; 2] = [4, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandcraftedFeatures {
    pub avg_daily_nb_trips: f64,
    /// 20h-0h, any day.
    pub frac_expo_evening: f64,
    pub frac_expo_fri_sat: f64,
    pub frac_expo_mon_to_thu: f64,
    /// 0h-6h, any day.
    pub frac_expo_night: f64,
    /// 11h-14h, any day.
    pub frac_expo_noon: f64,
    /// 17h-20h, Monday to Friday.
    pub frac_expo_peak_evening: f64,
    /// 7h-9h, Monday to Friday.
    pub frac_expo_peak_morning: f64,
    pub max_trip_max_speed: f64,
    pub med_trip_avg_speed: f64,
    pub med_trip_distance: f64,
    pub med_trip_max_speed: f64,
    /// Fraction of trips longer than 100 km.
    pub prop_long_trip: f64,
    /// False when the contract has no linked trips (all features zero).
    pub has_trips: bool,
}

impl HandcraftedFeatures {
    pub fn zeros() -> Self {
        HandcraftedFeatures {
            avg_daily_nb_trips: 0.0,
            frac_expo_evening: 0.0,
            frac_expo_fri_sat: 0.0,
            frac_expo_mon_to_thu: 0.0,
            frac_expo_night: 0.0,
            frac_expo_noon: 0.0,
            frac_expo_peak_evening: 0.0,
            frac_expo_peak_morning: 0.0,
            max_trip_max_speed: 0.0,
            med_trip_avg_speed: 0.0,
            med_trip_distance: 0.0,
            med_trip_max_speed: 0.0,
            prop_long_trip: 0.0,
            has_trips: false,
        }
    }

    /// Values in [`HANDCRAFTED_NAMES`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.avg_daily_nb_trips,
            self.frac_expo_evening,
            self.frac_expo_fri_sat,
            self.frac_expo_mon_to_thu,
            self.frac_expo_night,
            self.frac_expo_noon,
            self.frac_expo_peak_evening,
            self.frac_expo_peak_morning,
            self.max_trip_max_speed,
            self.med_trip_avg_speed,
            self.med_trip_distance,
            self.med_trip_max_speed,
            self.prop_long_trip,
        ]
    }
}

fn median(values: &mut Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn build_handcrafted(trips: &[&TripRecord], contract: &ContractRecord) -> HandcraftedFeatures {
    if trips.is_empty() {
        return HandcraftedFeatures::zeros();
    }
    let alloc = time_allocation(trips);
    let n = trips.len() as f64;

    let mut avg_speeds: Vec<f64> = trips.iter().map(|t| average_speed_kmh(t)).collect();
    let mut distances: Vec<f64> = trips.iter().map(|t| t.distance).collect();
    let mut max_speeds: Vec<f64> = trips.iter().map(|t| t.max_speed).collect();

    HandcraftedFeatures {
        avg_daily_nb_trips: n / (contract.expo * 365.25),
        frac_expo_evening: alloc.window_fraction(20..24, &ALL_DAYS),
        frac_expo_fri_sat: alloc.window_fraction(0..24, &FRI_SAT),
        frac_expo_mon_to_thu: alloc.window_fraction(0..24, &MON_TO_THU),
        frac_expo_night: alloc.window_fraction(0..6, &ALL_DAYS),
        frac_expo_noon: alloc.window_fraction(11..14, &ALL_DAYS),
        frac_expo_peak_evening: alloc.window_fraction(17..20, &MON_TO_FRI),
        frac_expo_peak_morning: alloc.window_fraction(7..9, &MON_TO_FRI),
        max_trip_max_speed: max_speeds.iter().copied().fold(0.0, f64::max),
        med_trip_avg_speed: median(&mut avg_speeds),
        med_trip_distance: median(&mut distances),
        med_trip_max_speed: median(&mut max_speeds),
        prop_long_trip: trips.iter().filter(|t| t.distance > 100.0).count() as f64 / n,
        has_trips: true,
    }
}
