//! Descriptor vectors: per-contract driving fractions over hour-of-day (24),
//! weekday (7), average-speed slots (14), maximum-speed slots (16), and
//! distance slots (10), concatenated into a 71-dimensional vector.
//!
//! Hour and weekday blocks are duration-weighted (fraction of driving time),
//! distributing each trip's duration across the hour bins it overlaps and
//! wrapping midnight. Speed and distance blocks are unweighted trip
//! fractions. Bins are half-open [lower, upper) with an open-ended last bin.

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::features::records::TripRecord;

pub const H_BINS: usize = 24;
pub const D_BINS: usize = 7;
pub const A_BINS: usize = 14;
pub const M_BINS: usize = 16;
pub const K_BINS: usize = 10;
pub const TELE_DIM: usize = H_BINS + D_BINS + A_BINS + M_BINS + K_BINS;

/// Floor applied to a trip's duration when computing its average speed, and
/// substituted for zero-duration trips in the time-allocation blocks.
pub const MIN_DURATION_SECS: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelematicsVector {
    pub hours: Vec<f64>,
    pub weekdays: Vec<f64>,
    pub avg_speed: Vec<f64>,
    pub max_speed: Vec<f64>,
    pub distance: Vec<f64>,
}

impl TelematicsVector {
    pub fn zeros() -> Self {
        TelematicsVector {
            hours: vec![0.0; H_BINS],
            weekdays: vec![0.0; D_BINS],
            avg_speed: vec![0.0; A_BINS],
            max_speed: vec![0.0; M_BINS],
            distance: vec![0.0; K_BINS],
        }
    }

    /// Concatenated 71-dimensional vector in block order h, d, a, m, k.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(TELE_DIM);
        out.extend_from_slice(&self.hours);
        out.extend_from_slice(&self.weekdays);
        out.extend_from_slice(&self.avg_speed);
        out.extend_from_slice(&self.max_speed);
        out.extend_from_slice(&self.distance);
        out
    }

    /// Column names in export order: h_1..h_24, p_1..p_7, vmo_1..vmo_14,
    /// vma_1..vma_16, d_1..d_10.
    pub fn names() -> Vec<String> {
        let mut names = Vec::with_capacity(TELE_DIM);
        names.extend((1..=H_BINS).map(|j| format!("h_{j}")));
        names.extend((1..=D_BINS).map(|j| format!("p_{j}")));
        names.extend((1..=A_BINS).map(|j| format!("vmo_{j}")));
        names.extend((1..=M_BINS).map(|j| format!("vma_{j}")));
        names.extend((1..=K_BINS).map(|j| format!("d_{j}")));
        names
    }
}

/// Driving seconds per (hour of day, weekday) cell accumulated over trips,
/// shared by the descriptor vector and the handcrafted time-window features.
#[derive(Debug, Clone)]
pub(crate) struct TimeAllocation {
    /// `cells[hour][weekday]`, Monday = 0.
    pub cells: [[f64; D_BINS]; H_BINS],
    pub total_secs: f64,
}

impl TimeAllocation {
    fn new() -> Self {
        TimeAllocation {
            cells: [[0.0; D_BINS]; H_BINS],
            total_secs: 0.0,
        }
    }

    fn add_trip(&mut self, departure: NaiveDateTime, duration_secs: f64) {
        let mut t = departure;
        let mut remaining = duration_secs;
        while remaining > 0.0 {
            let into_hour = (t.minute() * 60 + t.second()) as f64;
            let to_boundary = 3600.0 - into_hour;
            let chunk = remaining.min(to_boundary);
            let hour = t.hour() as usize;
            let weekday = t.weekday().num_days_from_monday() as usize;
            self.cells[hour][weekday] += chunk;
            self.total_secs += chunk;
            remaining -= chunk;
            t += chrono::Duration::seconds(chunk.ceil() as i64);
        }
    }

    pub fn window_fraction(&self, hours: impl Iterator<Item = usize> + Clone, weekdays: &[usize]) -> f64 {
        if self.total_secs == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for h in hours {
            for &d in weekdays {
                acc += self.cells[h][d];
            }
        }
        acc / self.total_secs
    }
}

/// Effective duration for time allocation: zero-duration trips contribute
/// the floored minimum instead of vanishing.
fn allocation_secs(trip: &TripRecord) -> f64 {
    let d = trip.duration_secs();
    if d == 0.0 {
        MIN_DURATION_SECS
    } else {
        d
    }
}

/// Average speed in km/h with the duration floored at [`MIN_DURATION_SECS`].
pub fn average_speed_kmh(trip: &TripRecord) -> f64 {
    trip.distance * 3600.0 / trip.duration_secs().max(MIN_DURATION_SECS)
}

fn binned(value: f64, width: f64, bins: usize) -> usize {
    ((value / width).floor() as usize).min(bins - 1)
}

pub(crate) fn time_allocation(trips: &[&TripRecord]) -> TimeAllocation {
    let mut alloc = TimeAllocation::new();
    for trip in trips {
        alloc.add_trip(trip.departure, allocation_secs(trip));
    }
    alloc
}

/// Build the descriptor vector of one contract from its linked trips.
/// A contract with no trips gets all-zero blocks.
pub fn build_telematics_vector(trips: &[&TripRecord]) -> TelematicsVector {
    if trips.is_empty() {
        return TelematicsVector::zeros();
    }
    let mut v = TelematicsVector::zeros();

    let alloc = time_allocation(trips);
    for h in 0..H_BINS {
        for d in 0..D_BINS {
            v.hours[h] += alloc.cells[h][d];
            v.weekdays[d] += alloc.cells[h][d];
        }
    }
    for x in v.hours.iter_mut().chain(v.weekdays.iter_mut()) {
        *x /= alloc.total_secs;
    }

    let n = trips.len() as f64;
    for trip in trips {
        v.avg_speed[binned(average_speed_kmh(trip), 10.0, A_BINS)] += 1.0;
        v.max_speed[binned(trip.max_speed, 10.0, M_BINS)] += 1.0;
        v.distance[binned(trip.distance, 5.0, K_BINS)] += 1.0;
    }
    for x in v
        .avg_speed
        .iter_mut()
        .chain(v.max_speed.iter_mut())
        .chain(v.distance.iter_mut())
    {
        *x /= n;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::records::testutil::trip;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_trip_lands_in_expected_bins() {
        // Monday 2017-05-01, 10:00-11:00, 30 km, max 80 km/h.
        let t = trip("A", 1, "2017-05-01 10:00:00", "2017-05-01 11:00:00", 30.0, 80.0);
        let v = build_telematics_vector(&[&t]);
        assert_abs_diff_eq!(v.hours[10], 1.0, epsilon = 1e-12); // h_11
        assert_abs_diff_eq!(v.weekdays[0], 1.0, epsilon = 1e-12); // Monday
        // 30 km/h average: half-open bins put it in [30, 40), i.e. vmo_4.
        assert_abs_diff_eq!(v.avg_speed[3], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.max_speed[8], 1.0, epsilon = 1e-12); // [80,90) = vma_9
        // 30 km: [30, 35) = d_7.
        assert_abs_diff_eq!(v.distance[6], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn observed_trip_average_speed_bin() {
        // 25.0 km in 1209 s -> 74.44 km/h -> [70, 80) = vmo_8.
        let t = trip("A", 1, "2017-05-02 19:04:15", "2017-05-02 19:24:24", 25.0, 104.0);
        assert_eq!(t.duration_secs(), 1209.0);
        assert_abs_diff_eq!(average_speed_kmh(&t), 25.0 * 3600.0 / 1209.0, epsilon = 1e-12);
        let v = build_telematics_vector(&[&t]);
        assert_abs_diff_eq!(v.avg_speed[7], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_duration_trip_uses_floored_duration() {
        // Departure equals arrival: 6.4 km at a floored 60 s is 384 km/h,
        // which lands in the open-ended top average-speed bin.
        let t = trip("A", 2, "2017-05-02 21:31:29", "2017-05-02 21:31:29", 6.4, 66.0);
        let v = build_telematics_vector(&[&t]);
        assert_abs_diff_eq!(v.avg_speed[A_BINS - 1], 1.0, epsilon = 1e-12);
        // Its floored 60 s still count as driving time in hour 21.
        assert_abs_diff_eq!(v.hours[21], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn duration_splits_across_hours_and_midnight() {
        // Saturday 23:30 to Sunday 00:30.
        let t = trip("A", 1, "2017-05-06 23:30:00", "2017-05-07 00:30:00", 20.0, 90.0);
        let v = build_telematics_vector(&[&t]);
        assert_abs_diff_eq!(v.hours[23], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v.hours[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v.weekdays[5], 0.5, epsilon = 1e-12); // Saturday
        assert_abs_diff_eq!(v.weekdays[6], 0.5, epsilon = 1e-12); // Sunday
    }

    #[test]
    fn allocation_preserves_total_duration() {
        let trips = vec![
            trip("A", 1, "2017-05-06 23:30:00", "2017-05-08 01:15:00", 100.0, 110.0),
            trip("A", 2, "2017-05-09 07:12:34", "2017-05-09 09:01:07", 40.0, 100.0),
            trip("A", 3, "2017-05-10 11:00:00", "2017-05-10 11:00:00", 1.0, 30.0),
        ];
        let refs: Vec<&TripRecord> = trips.iter().collect();
        let alloc = time_allocation(&refs);
        let expected: f64 = trips
            .iter()
            .map(|t| if t.duration_secs() == 0.0 { 60.0 } else { t.duration_secs() })
            .sum();
        assert_abs_diff_eq!(alloc.total_secs, expected, epsilon = 1e-6);
        let cell_sum: f64 = alloc.cells.iter().flatten().sum();
        assert_abs_diff_eq!(cell_sum, expected, epsilon = 1e-6);
    }

    #[test]
    fn blocks_sum_to_one_with_trips_and_zero_without() {
        let trips = vec![
            trip("A", 1, "2017-05-01 08:00:00", "2017-05-01 09:10:00", 42.0, 120.0),
            trip("A", 2, "2017-05-03 22:40:00", "2017-05-04 00:05:00", 60.0, 145.0),
            trip("A", 3, "2017-05-05 12:00:00", "2017-05-05 12:05:00", 2.0, 35.0),
        ];
        let refs: Vec<&TripRecord> = trips.iter().collect();
        let v = build_telematics_vector(&refs);
        for block in [&v.hours, &v.weekdays, &v.avg_speed, &v.max_speed, &v.distance] {
            let s: f64 = block.iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
            assert!(block.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        let empty = build_telematics_vector(&[]);
        assert!(empty.to_vec().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn names_match_block_layout() {
        let names = TelematicsVector::names();
        assert_eq!(names.len(), TELE_DIM);
        assert_eq!(names[0], "h_1");
        assert_eq!(names[23], "h_24");
        assert_eq!(names[24], "p_1");
        assert_eq!(names[31], "vmo_1");
        assert_eq!(names[45], "vma_1");
        assert_eq!(names[60], "vma_16");
        assert_eq!(names[61], "d_1");
        assert_eq!(names[70], "d_10");
    }
}
