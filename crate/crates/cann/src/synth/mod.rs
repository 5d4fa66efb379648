//! Seeded synthetic portfolio generator with known ground truth.
//!
//! Vehicles carry a gamma random effect ψ with mean 1 and variance 1/φ*;
//! claim counts are Poisson with mean λ·ψ, where λ = exp(⟨x, β*⟩ + g(tele))
//! uses the contract's raw-scale traditional covariates and the telematics
//! vector realized from its own synthesized trips. The emitted contract and
//! trip tables use the same file formats as real data, and a ground-truth
//! table carries λ and ψ per contract so estimator-consistency tests can
//! compare against the generating values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, LogNormal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CannError, Result};
use crate::features::records::{ContractRecord, TripRecord};
use crate::features::telvector::{build_telematics_vector, TelematicsVector};
use crate::seeding;

/// Smooth nonlinear effect of the top-speed block on the log mean:
/// g(s) = a·s + b·s² with s the fraction of trips reaching over 130 km/h
/// (the three highest maximum-speed bins).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelematicsEffect {
    pub linear: f64,
    pub quadratic: f64,
}

impl TelematicsEffect {
    pub const ZERO: TelematicsEffect = TelematicsEffect {
        linear: 0.0,
        quadratic: 0.0,
    };

    pub fn high_speed_share(tele: &TelematicsVector) -> f64 {
        tele.max_speed[13] + tele.max_speed[14] + tele.max_speed[15]
    }

    pub fn evaluate(&self, tele: &TelematicsVector) -> f64 {
        let s = Self::high_speed_share(tele);
        self.linear * s + self.quadratic * s * s
    }
}

/// True raw-scale coefficients of the generating log-linear model. Category
/// effects are relative to the reference levels F / Married / Annual /
/// Commute; `commute_distance` has no effect by default and doubles as the
/// pure-noise column in importance tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueBeta {
    pub intercept: f64,
    pub annual_distance: f64,
    pub commute_distance: f64,
    pub conv_count_3_yrs_minor: f64,
    pub distance: f64,
    pub expo: f64,
    pub veh_age: f64,
    pub years_licensed: f64,
    pub gender_m: f64,
    pub marital_single: f64,
    pub marital_other: f64,
    pub pmt_monthly: f64,
    pub pmt_biannual: f64,
    pub veh_use_pleasure: f64,
    pub veh_use_business: f64,
}

impl Default for TrueBeta {
    fn default() -> Self {
        TrueBeta {
            intercept: -3.8,
            annual_distance: 2.0e-5,
            commute_distance: 0.0,
            conv_count_3_yrs_minor: 0.10,
            distance: 2.0e-4,
            expo: 0.6,
            veh_age: -0.015,
            years_licensed: -0.005,
            gender_m: 0.08,
            marital_single: 0.06,
            marital_other: 0.03,
            pmt_monthly: 0.10,
            pmt_biannual: 0.03,
            veh_use_pleasure: -0.06,
            veh_use_business: 0.12,
        }
    }
}

impl TrueBeta {
    fn eta(&self, c: &ContractRecord, commute_true: f64) -> f64 {
        let mut eta = self.intercept
            + self.annual_distance * c.annual_distance
            + self.commute_distance * commute_true
            + self.conv_count_3_yrs_minor * c.conv_count_3_yrs_minor
            + self.distance * c.distance
            + self.expo * c.expo
            + self.veh_age * c.veh_age
            + self.years_licensed * c.years_licensed;
        if c.gender == "M" {
            eta += self.gender_m;
        }
        match c.marital_status.as_str() {
            "Single" => eta += self.marital_single,
            "Other" => eta += self.marital_other,
            _ => {}
        }
        match c.pmt_plan.as_str() {
            "Monthly" => eta += self.pmt_monthly,
            "BiAnnual" => eta += self.pmt_biannual,
            _ => {}
        }
        match c.veh_use.as_str() {
            "Pleasure" => eta += self.veh_use_pleasure,
            "Business" => eta += self.veh_use_business,
            _ => {}
        }
        eta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_vehicles: usize,
    /// Weights for 1..=7 contracts per vehicle.
    pub contract_count_weights: [f64; 7],
    pub beta: TrueBeta,
    /// Precision of the gamma random effect (mean 1, variance 1/φ*).
    pub phi_star: f64,
    pub telematics_effect: TelematicsEffect,
    /// Expected trips per year of exposure.
    pub trips_per_contract: f64,
    /// Fraction of contracts with the commute distance reported missing.
    pub commute_missing_rate: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_vehicles: 1000,
            contract_count_weights: [0.42, 0.22, 0.13, 0.09, 0.06, 0.05, 0.03],
            beta: TrueBeta::default(),
            phi_star: 2.0,
            telematics_effect: TelematicsEffect {
                linear: 1.0,
                quadratic: 1.2,
            },
            trips_per_contract: 50.0,
            commute_missing_rate: 0.15,
            seed: 0,
        }
    }
}

/// Cap on the portfolio-mean generating frequency; keeps the synthetic data
/// in the sparse claim regime the losses are designed for.
const MAX_MEAN_FREQUENCY: f64 = 0.3;

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_vehicles == 0 {
            return Err(CannError::config("n_vehicles must be positive"));
        }
        if !self.phi_star.is_finite() || self.phi_star <= 0.0 {
            return Err(CannError::config("phi_star must be finite and > 0"));
        }
        if self.contract_count_weights.iter().any(|&w| w < 0.0)
            || self.contract_count_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(CannError::config(
                "contract count weights must be nonnegative and not all zero",
            ));
        }
        if self.trips_per_contract < 0.0 {
            return Err(CannError::config("trips_per_contract must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.commute_missing_rate) {
            return Err(CannError::config("commute_missing_rate must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Per-contract generating values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub vin: String,
    pub contract_index: u32,
    pub lambda: f64,
    pub psi: f64,
}

#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub contracts: Vec<ContractRecord>,
    pub trips: Vec<TripRecord>,
    pub truth: Vec<GroundTruth>,
}

/// Latent per-vehicle driving style.
struct DriverProfile {
    gender: &'static str,
    marital: &'static str,
    pmt: &'static str,
    veh_use: &'static str,
    years_licensed0: f64,
    veh_age0: f64,
    annual_distance: f64,
    commute_true: f64,
    night_share: f64,
    weekend_share: f64,
    speeding: f64,
    median_trip_km: f64,
}

fn pick<'a>(rng: &mut ChaCha8Rng, levels: &[(&'a str, f64)]) -> &'a str {
    let total: f64 = levels.iter().map(|(_, w)| w).sum();
    let mut u = rng.gen::<f64>() * total;
    for (level, w) in levels {
        u -= w;
        if u <= 0.0 {
            return level;
        }
    }
    levels.last().expect("nonempty levels").0
}

fn draw_profile(rng: &mut ChaCha8Rng) -> DriverProfile {
    let annual = LogNormal::new(15_000f64.ln(), 0.45).expect("valid lognormal");
    let commute = LogNormal::new(8f64.ln(), 0.8).expect("valid lognormal");
    let median_km = LogNormal::new(7f64.ln(), 0.35).expect("valid lognormal");
    DriverProfile {
        gender: pick(rng, &[("F", 0.45), ("M", 0.55)]),
        marital: pick(rng, &[("Single", 0.30), ("Married", 0.55), ("Other", 0.15)]),
        pmt: pick(rng, &[("Annual", 0.40), ("Monthly", 0.45), ("BiAnnual", 0.15)]),
        veh_use: pick(rng, &[("Commute", 0.50), ("Pleasure", 0.35), ("Business", 0.15)]),
        years_licensed0: rng.gen_range(1..=45) as f64,
        veh_age0: rng.gen_range(0..=15) as f64,
        annual_distance: annual.sample(rng).clamp(2_000.0, 60_000.0),
        commute_true: commute.sample(rng).clamp(0.5, 120.0),
        night_share: Beta::new(2.0, 8.0).expect("valid beta").sample(rng),
        weekend_share: Beta::new(2.2, 5.0).expect("valid beta").sample(rng),
        speeding: Beta::new(1.2, 6.0).expect("valid beta").sample(rng),
        median_trip_km: median_km.sample(rng).clamp(2.0, 30.0),
    }
}

fn draw_hour(rng: &mut ChaCha8Rng, profile: &DriverProfile) -> u32 {
    let normal = |rng: &mut ChaCha8Rng, mean: f64, sd: f64| {
        rand_distr::Normal::new(mean, sd).expect("valid normal").sample(rng)
    };
    let h = if rng.gen::<f64>() < profile.night_share {
        normal(rng, 2.0, 2.0)
    } else {
        let u = rng.gen::<f64>();
        if u < 0.3 {
            normal(rng, 8.5, 1.5)
        } else if u < 0.7 {
            normal(rng, 17.5, 2.0)
        } else {
            normal(rng, 13.0, 3.0)
        }
    };
    (h.rem_euclid(24.0)).floor() as u32 % 24
}

fn draw_weekday(rng: &mut ChaCha8Rng, profile: &DriverProfile) -> u32 {
    if rng.gen::<f64>() < profile.weekend_share {
        5 + rng.gen_range(0..2u32)
    } else {
        rng.gen_range(0..5u32)
    }
}

/// ψ ~ Gamma with mean 1 and variance 1/φ*.
pub fn draw_random_effect(rng: &mut ChaCha8Rng, phi_star: f64) -> f64 {
    Gamma::new(phi_star, 1.0 / phi_star)
        .expect("valid gamma")
        .sample(rng)
}

/// y ~ Poisson(λψ).
pub fn draw_claim_count(rng: &mut ChaCha8Rng, lambda: f64, psi: f64) -> u64 {
    Poisson::new((lambda * psi).max(1e-12))
        .expect("valid poisson")
        .sample(rng) as u64
}

struct VehicleData {
    contracts: Vec<ContractRecord>,
    trips: Vec<TripRecord>,
    truth: Vec<GroundTruth>,
}

fn generate_vehicle(config: &GeneratorConfig, index: usize) -> VehicleData {
    let mut rng = seeding::rng(seeding::mix(config.seed, index as u64));
    let vin = format!("SYN{index:07}");
    let profile = draw_profile(&mut rng);
    let psi = draw_random_effect(&mut rng, config.phi_star);

    let total_w: f64 = config.contract_count_weights.iter().sum();
    let mut u = rng.gen::<f64>() * total_w;
    let mut n_contracts = 7usize;
    for (k, &w) in config.contract_count_weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            n_contracts = k + 1;
            break;
        }
    }

    let base = NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date");
    let mut start = base + Duration::days(rng.gen_range(0..365));
    let mut contracts = Vec::with_capacity(n_contracts);
    let mut trips: Vec<TripRecord> = Vec::new();
    let mut truth = Vec::with_capacity(n_contracts);

    for t in 0..n_contracts {
        // Durations vary well beyond a year so the exposure effect stays
        // identifiable in moderate samples.
        let expo: f64 = rng.gen_range(0.3..1.9);
        let duration_days = (expo * 365.25).round() as i64;
        let end = start + Duration::days(duration_days.max(1));

        let n_trips = Poisson::new((config.trips_per_contract * expo).max(1e-9))
            .expect("valid poisson")
            .sample(&mut rng) as usize;
        let mut contract_trips = Vec::with_capacity(n_trips);
        for _ in 0..n_trips {
            contract_trips.push(draw_trip(&mut rng, &profile, start, duration_days));
        }
        contract_trips.sort_by_key(|t| t.departure);

        let distance_total: f64 = contract_trips.iter().map(|t| t.distance).sum();
        let mut contract = ContractRecord {
            vin: vin.clone(),
            start_date: start,
            end_date: end,
            annual_distance: (profile.annual_distance * rng.gen_range(0.9..1.1)).round(),
            commute_distance: if rng.gen::<f64>() < config.commute_missing_rate {
                None
            } else {
                Some((profile.commute_true * 10.0).round() / 10.0)
            },
            conv_count_3_yrs_minor: Poisson::new(0.25)
                .expect("valid poisson")
                .sample(&mut rng),
            distance: (distance_total * 10.0).round() / 10.0,
            expo: (expo * 1000.0).round() / 1000.0,
            gender: profile.gender.to_string(),
            marital_status: profile.marital.to_string(),
            pmt_plan: profile.pmt.to_string(),
            veh_age: profile.veh_age0 + t as f64,
            veh_use: profile.veh_use.to_string(),
            years_licensed: profile.years_licensed0 + t as f64,
            nb_claims: 0,
        };

        let refs: Vec<&TripRecord> = contract_trips.iter().collect();
        let tele = build_telematics_vector(&refs);
        let eta = config.beta.eta(&contract, profile.commute_true)
            + config.telematics_effect.evaluate(&tele);
        let lambda = eta.exp();
        contract.nb_claims = draw_claim_count(&mut rng, lambda, psi);

        truth.push(GroundTruth {
            vin: vin.clone(),
            contract_index: (t + 1) as u32,
            lambda,
            psi,
        });
        contracts.push(contract);
        trips.extend(contract_trips);
        start = end + Duration::days(1);
    }

    // Sequential per-vehicle trip ids, ascending with departure time.
    for (k, trip) in trips.iter_mut().enumerate() {
        trip.trip_id = (k + 1) as u64;
    }

    VehicleData {
        contracts,
        trips,
        truth,
    }
}

fn draw_trip(
    rng: &mut ChaCha8Rng,
    profile: &DriverProfile,
    start: NaiveDate,
    duration_days: i64,
) -> TripRecord {
    let day_offset = rng.gen_range(0..=duration_days.max(0));
    let mut date = start + Duration::days(day_offset);
    // Re-draw the weekday by shifting within the week that contains the date.
    let target_weekday = draw_weekday(rng, profile) as i64;
    let current = date.format("%u").to_string().parse::<i64>().unwrap() - 1;
    let shifted = date + Duration::days(target_weekday - current);
    if shifted >= start && shifted <= start + Duration::days(duration_days) {
        date = shifted;
    }

    let hour = draw_hour(rng, profile);
    let departure = date
        .and_hms_opt(hour, rng.gen_range(0..60), rng.gen_range(0..60))
        .expect("valid time");

    let distance = LogNormal::new(profile.median_trip_km.ln(), 0.9)
        .expect("valid lognormal")
        .sample(rng)
        .clamp(0.1, 180.0);
    let distance = (distance * 10.0).round() / 10.0;
    let avg_speed = (14.0 + 9.0 * (1.0 + distance).ln() + rng.gen_range(-6.0..6.0))
        .clamp(6.0, 110.0);

    let zero_duration = rng.gen::<f64>() < 0.005;
    let duration_secs = if zero_duration {
        0
    } else {
        (distance / avg_speed * 3600.0).round().max(1.0) as i64
    };
    let arrival = departure + Duration::seconds(duration_secs);

    let mut max_speed = avg_speed * rng.gen_range(1.25..1.6);
    if rng.gen::<f64>() < profile.speeding {
        max_speed = max_speed.max(rng.gen_range(132.0..185.0));
    }
    let max_speed = max_speed.clamp(avg_speed + 3.0, 200.0).round();

    TripRecord {
        vin: String::new(), // assigned below
        trip_id: 0,
        departure,
        arrival,
        distance,
        max_speed,
    }
}

/// Generate the synthetic portfolio. Deterministic in the seed; vehicles are
/// generated independently (in parallel) from per-vehicle sub-seeds and
/// emitted in vehicle order.
pub fn generate(config: &GeneratorConfig) -> Result<GeneratedData> {
    config.validate()?;
    let per_vehicle: Vec<VehicleData> = (0..config.n_vehicles)
        .into_par_iter()
        .map(|i| {
            let mut v = generate_vehicle(config, i);
            let vin = v.contracts[0].vin.clone();
            for t in &mut v.trips {
                t.vin = vin.clone();
            }
            v
        })
        .collect();

    let mut data = GeneratedData {
        contracts: Vec::new(),
        trips: Vec::new(),
        truth: Vec::new(),
    };
    for v in per_vehicle {
        data.contracts.extend(v.contracts);
        data.trips.extend(v.trips);
        data.truth.extend(v.truth);
    }

    let mean_lambda: f64 =
        data.truth.iter().map(|t| t.lambda).sum::<f64>() / data.truth.len() as f64;
    if mean_lambda > MAX_MEAN_FREQUENCY {
        return Err(CannError::config(format!(
            "generating configuration implies a mean claim frequency of {mean_lambda:.3}, \
             above the {MAX_MEAN_FREQUENCY} cap"
        )));
    }
    Ok(data)
}

pub fn write_ground_truth(path: &Path, truth: &[GroundTruth]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "vin,contract_index,lambda,psi")?;
    for t in truth {
        writeln!(w, "{},{},{},{}", t.vin, t.contract_index, t.lambda, t.psi)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let record: GroundTruth = row?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::link_trips;

    fn small_config() -> GeneratorConfig {
        GeneratorConfig {
            n_vehicles: 120,
            trips_per_contract: 12.0,
            seed: 99,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn same_seed_gives_identical_output() {
        let cfg = small_config();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.contracts, b.contracts);
        assert_eq!(a.trips, b.trips);
        assert_eq!(
            serde_json::to_string(&a.truth).unwrap(),
            serde_json::to_string(&b.truth).unwrap()
        );
        let c = generate(&GeneratorConfig {
            seed: 100,
            ..small_config()
        })
        .unwrap();
        assert_ne!(a.contracts, c.contracts);
    }

    #[test]
    fn generated_trips_all_link_back_and_blocks_normalize() {
        let data = generate(&small_config()).unwrap();
        let linked = link_trips(&data.contracts, &data.trips).unwrap();
        assert_eq!(linked.discarded, 0);
        let mut checked = 0;
        for (idx, trip_ids) in linked.per_contract.iter().enumerate() {
            if trip_ids.is_empty() {
                continue;
            }
            let refs: Vec<&TripRecord> = trip_ids.iter().map(|&i| &data.trips[i]).collect();
            let v = build_telematics_vector(&refs);
            for block in [&v.hours, &v.weekdays, &v.avg_speed, &v.max_speed, &v.distance] {
                let s: f64 = block.iter().sum();
                assert!(
                    (s - 1.0).abs() < 1e-9,
                    "block sum {s} for contract {idx}"
                );
            }
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn overdispersion_grows_as_phi_shrinks() {
        let mut rng = seeding::rng(5);
        for phi in [0.5, 2.0, 10.0] {
            let lambda = 0.5;
            let n = 200_000;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..n {
                let psi = draw_random_effect(&mut rng, phi);
                let y = draw_claim_count(&mut rng, lambda, psi) as f64;
                sum += y;
                sumsq += y * y;
            }
            let mean = sum / n as f64;
            let var = sumsq / n as f64 - mean * mean;
            // Var = μ + μ²/φ for the gamma-mixed Poisson.
            let expected = lambda + lambda * lambda / phi;
            assert!(var > mean, "phi={phi}: var {var} not above mean {mean}");
            assert!(
                (var - expected).abs() / expected < 0.05,
                "phi={phi}: var {var} vs expected {expected}"
            );
        }
    }

    /// Correlation of consecutive within-vehicle Pearson residuals
    /// (y − λ)/√λ against the generating λ. Shared covariates correlate the
    /// raw counts regardless of the random effect, so the residuals are what
    /// the effect's degeneration must drive to zero.
    fn residual_correlation(phi_star: f64, seed: u64) -> f64 {
        let data = generate(&GeneratorConfig {
            n_vehicles: 50_000,
            phi_star,
            trips_per_contract: 1.0,
            seed,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let resid: Vec<f64> = data
            .contracts
            .iter()
            .zip(&data.truth)
            .map(|(c, t)| (c.nb_claims as f64 - t.lambda) / t.lambda.sqrt())
            .collect();
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (k, w) in data.contracts.windows(2).enumerate() {
            if w[0].vin == w[1].vin {
                pairs.push((resid[k], resid[k + 1]));
            }
        }
        assert!(pairs.len() > 40_000);
        let n = pairs.len() as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for (a, b) in &pairs {
            cov += (a - mx) * (b - my);
            vx += (a - mx) * (a - mx);
            vy += (b - my) * (b - my);
        }
        cov / (vx.sqrt() * vy.sqrt())
    }

    #[test]
    fn huge_phi_degenerates_to_independent_contracts() {
        let rho = residual_correlation(1e9, 11);
        assert!(rho.abs() < 0.01, "correlation {rho} with degenerate effect");
        // Contrast: strong heterogeneity leaves clearly dependent residuals.
        let rho_dep = residual_correlation(1.0, 11);
        assert!(rho_dep > 0.05, "correlation {rho_dep} with phi* = 1");
    }

    #[test]
    fn marginal_count_distribution_matches_negbin_pmf() {
        // Chi-square goodness of fit of Poisson-gamma draws against the
        // analytic negative binomial PMF.
        use crate::distributions::negbin::{log_pmf, NegBinParams};
        let (lambda, phi) = (0.8, 1.5);
        let n = 1_000_000usize;
        let mut rng = seeding::rng(17);
        let mut observed = vec![0u64; 16];
        for _ in 0..n {
            let psi = draw_random_effect(&mut rng, phi);
            let y = draw_claim_count(&mut rng, lambda, psi) as usize;
            observed[y.min(15)] += 1;
        }
        let params = NegBinParams::new(lambda, phi).unwrap();
        // Merge the tail so every expected cell count is comfortable.
        let mut expected = vec![0.0f64; 16];
        let mut tail = 1.0;
        for (y, e) in expected.iter_mut().enumerate().take(15) {
            let p = log_pmf(y as u64, &params).unwrap().exp();
            *e = p * n as f64;
            tail -= p;
        }
        expected[15] = tail * n as f64;
        let mut stat = 0.0;
        let mut dof = 0usize;
        let mut obs_acc = 0.0;
        let mut exp_acc = 0.0;
        for k in 0..16 {
            obs_acc += observed[k] as f64;
            exp_acc += expected[k];
            if exp_acc >= 10.0 {
                stat += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
                dof += 1;
                obs_acc = 0.0;
                exp_acc = 0.0;
            }
        }
        if exp_acc > 0.0 {
            stat += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
            dof += 1;
        }
        let chi2 = statrs::distribution::ChiSquared::new((dof - 1) as f64).unwrap();
        let p_value = 1.0 - statrs::distribution::ContinuousCDF::cdf(&chi2, stat);
        assert!(p_value > 0.01, "chi-square p = {p_value}, stat = {stat}, dof = {dof}");
    }

    #[test]
    fn frequency_cap_is_enforced() {
        let cfg = GeneratorConfig {
            n_vehicles: 50,
            beta: TrueBeta {
                intercept: 0.5,
                ..TrueBeta::default()
            },
            seed: 3,
            ..GeneratorConfig::default()
        };
        assert!(matches!(generate(&cfg), Err(CannError::Config(_))));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = GeneratorConfig::default();
        cfg.n_vehicles = 0;
        assert!(cfg.validate().is_err());
        cfg = GeneratorConfig::default();
        cfg.phi_star = 0.0;
        assert!(cfg.validate().is_err());
        cfg = GeneratorConfig::default();
        cfg.contract_count_weights = [0.0; 7];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ground_truth_round_trips() {
        let data = generate(&GeneratorConfig {
            n_vehicles: 10,
            trips_per_contract: 3.0,
            seed: 8,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        write_ground_truth(&path, &data.truth).unwrap();
        let back = read_ground_truth(&path).unwrap();
        assert_eq!(back.len(), data.truth.len());
        assert_eq!(back[0], data.truth[0]);
    }

    #[test]
    fn portfolio_frequency_is_in_the_sparse_regime() {
        let data = generate(&small_config()).unwrap();
        let n = data.contracts.len() as f64;
        let freq = data.contracts.iter().map(|c| c.nb_claims).sum::<u64>() as f64 / n;
        assert!(
            (0.02..=0.2).contains(&freq),
            "portfolio frequency {freq} outside the expected regime"
        );
    }
}
