//! Contract and trip records with their file representations.
//!
//! Contracts: one row per insurance contract with the traditional risk
//! factors and the claim count. Trips: one row per telematics trip summary
//! (departure/arrival datetimes, distance in km, maximum speed in km/h).
//! Dates are ISO-8601; trip datetimes accept both the `T` and space
//! separators and are written with a space.

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{CannError, Result};

pub const CATEGORICAL_VARIABLES: [&str; 4] = ["gender", "marital_status", "pmt_plan", "veh_use"];
pub const NUMERIC_VARIABLES: [&str; 7] = [
    "annual_distance",
    "commute_distance",
    "conv_count_3_yrs_minor",
    "distance",
    "expo",
    "veh_age",
    "years_licensed",
];

/// One telematics trip summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub vin: String,
    pub trip_id: u64,
    #[serde(with = "datetime_format")]
    pub departure: NaiveDateTime,
    #[serde(with = "datetime_format")]
    pub arrival: NaiveDateTime,
    pub distance: f64,
    pub max_speed: f64,
}

impl TripRecord {
    pub fn validate(&self) -> Result<()> {
        if self.arrival < self.departure {
            return Err(CannError::data(format!(
                "trip {} of {} arrives before it departs",
                self.trip_id, self.vin
            )));
        }
        if !self.distance.is_finite() || self.distance < 0.0 {
            return Err(CannError::data(format!(
                "trip {} of {} has invalid distance {}",
                self.trip_id, self.vin, self.distance
            )));
        }
        if !self.max_speed.is_finite() || self.max_speed < 0.0 {
            return Err(CannError::data(format!(
                "trip {} of {} has invalid max speed {}",
                self.trip_id, self.vin, self.max_speed
            )));
        }
        Ok(())
    }

    /// Trip duration in whole seconds.
    pub fn duration_secs(&self) -> f64 {
        (self.arrival - self.departure).num_seconds() as f64
    }
}

/// One insurance contract with its traditional risk factors and claim count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractRecord {
    pub vin: String,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub annual_distance: f64,
    /// Distance to the place of work; may be missing.
    pub commute_distance: Option<f64>,
    pub conv_count_3_yrs_minor: f64,
    pub distance: f64,
    pub expo: f64,
    pub gender: String,
    pub marital_status: String,
    pub pmt_plan: String,
    pub veh_age: f64,
    pub veh_use: String,
    pub years_licensed: f64,
    pub nb_claims: u64,
}

impl ContractRecord {
    pub fn validate(&self) -> Result<()> {
        if self.end_date < self.start_date {
            return Err(CannError::data(format!(
                "contract of {} starting {} ends before it starts",
                self.vin, self.start_date
            )));
        }
        if !self.expo.is_finite() || self.expo <= 0.0 {
            return Err(CannError::data(format!(
                "contract of {} starting {} has invalid exposure {}",
                self.vin, self.start_date, self.expo
            )));
        }
        Ok(())
    }

    /// Numeric traditional covariates in [`NUMERIC_VARIABLES`] order, with
    /// the (possibly missing) commute distance as `None`.
    pub fn numeric_values(&self) -> [Option<f64>; 7] {
        [
            Some(self.annual_distance),
            self.commute_distance,
            Some(self.conv_count_3_yrs_minor),
            Some(self.distance),
            Some(self.expo),
            Some(self.veh_age),
            Some(self.years_licensed),
        ]
    }

    /// Categorical traditional covariates in [`CATEGORICAL_VARIABLES`] order.
    pub fn categorical_values(&self) -> [&str; 4] {
        [
            &self.gender,
            &self.marital_status,
            &self.pmt_plan,
            &self.veh_use,
        ]
    }
}

mod datetime_format {
    use chrono::NaiveDateTime;
    use serde::{self, Deserialize, Deserializer, Serializer};

    const WRITE_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

    pub fn serialize<S: Serializer>(dt: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&dt.format(WRITE_FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let raw = String::deserialize(d)?;
        NaiveDateTime::parse_from_str(&raw, WRITE_FORMAT)
            .or_else(|_| NaiveDateTime::parse_from_str(&raw, "%Y-%m-%dT%H:%M:%S"))
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use chrono::NaiveDate;

    pub fn trip(vin: &str, id: u64, dep: &str, arr: &str, distance: f64, max_speed: f64) -> TripRecord {
        let parse = |s: &str| {
            NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").expect("test datetime")
        };
        TripRecord {
            vin: vin.to_string(),
            trip_id: id,
            departure: parse(dep),
            arrival: parse(arr),
            distance,
            max_speed,
        }
    }

    pub fn contract(vin: &str, start: &str, end: &str) -> ContractRecord {
        let parse = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("test date");
        ContractRecord {
            vin: vin.to_string(),
            start_date: parse(start),
            end_date: parse(end),
            annual_distance: 15_000.0,
            commute_distance: Some(10.0),
            conv_count_3_yrs_minor: 0.0,
            distance: 12_000.0,
            expo: 1.0,
            gender: "F".into(),
            marital_status: "Single".into(),
            pmt_plan: "Annual".into(),
            veh_age: 5.0,
            veh_use: "Commute".into(),
            years_licensed: 10.0,
            nb_claims: 0,
        }
    }
}
