//! `synth`: generate the synthetic portfolio files.

use anyhow::Result;
use cann::features::io::{write_contracts, write_trips};
use cann::synth::{generate, write_ground_truth};

use crate::artifacts::ensure_out_dir;
use crate::config::RunConfig;

pub fn run(cfg: &RunConfig) -> Result<String> {
    ensure_out_dir(&cfg.out)?;
    let data = generate(&cfg.synth)?;
    write_contracts(&cfg.contracts_path, &data.contracts)?;
    write_trips(&cfg.trips_path, &data.trips)?;
    write_ground_truth(&cfg.truth_path, &data.truth)?;
    Ok(format!(
        "synth: {} vehicles, {} contracts, {} trips -> {}, {}, {}",
        cfg.synth.n_vehicles,
        data.contracts.len(),
        data.trips.len(),
        cfg.contracts_path.display(),
        cfg.trips_path.display(),
        cfg.truth_path.display()
    ))
}
