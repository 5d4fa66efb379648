//! `prepare`: ingest contracts and trips, build features, split by vehicle,
//! fit the preprocessing recipe on the training split, and write the three
//! feature tables.

use std::io::Write;

use anyhow::{bail, Context, Result};
use cann::features::io::{read_contracts, read_trips, write_features};
use cann::features::prepare::prepare;

use crate::artifacts::{ensure_out_dir, features_path, write_json};
use crate::config::RunConfig;

pub fn run(cfg: &RunConfig) -> Result<String> {
    ensure_out_dir(&cfg.out)?;
    if !cfg.contracts_path.exists() {
        bail!(
            "missing contracts file {} (run the synth command or point [paths].contracts at your data)",
            cfg.contracts_path.display()
        );
    }
    if !cfg.trips_path.exists() {
        bail!(
            "missing trips file {} (run the synth command or point [paths].trips at your data)",
            cfg.trips_path.display()
        );
    }
    let contracts = read_contracts(&cfg.contracts_path)?;
    let trips = read_trips(&cfg.trips_path)?;
    let prepared = prepare(&contracts, &trips, cfg.split, cfg.seed)?;

    write_features(&features_path(&cfg.out, "train"), &prepared.train)?;
    write_features(&features_path(&cfg.out, "valid"), &prepared.valid)?;
    write_features(&features_path(&cfg.out, "test"), &prepared.test)?;
    write_json(&cfg.out.join("recipe.json"), &prepared.recipe)?;

    let splits_path = cfg.out.join("splits.csv");
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(&splits_path)
            .with_context(|| format!("cannot write {}", splits_path.display()))?,
    );
    writeln!(w, "vin,split")?;
    for (name, vins) in [
        ("train", &prepared.assignment.train),
        ("valid", &prepared.assignment.valid),
        ("test", &prepared.assignment.test),
    ] {
        for vin in vins {
            writeln!(w, "{vin},{name}")?;
        }
    }
    w.flush()?;

    Ok(format!(
        "prepare: {}/{}/{} train/valid/test contracts, {} trips discarded, recipe with {} columns",
        prepared.train.y.len(),
        prepared.valid.y.len(),
        prepared.test.y.len(),
        prepared.discarded_trips,
        prepared.recipe.scalers.len()
    ))
}
