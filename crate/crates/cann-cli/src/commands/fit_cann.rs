//! `fit-cann`: train the combined model on the training split with early
//! stopping on the validation split, and save a self-contained artifact
//! (including the preprocessing recipe) plus the per-epoch log.

use std::io::Write;

use anyhow::{bail, Result};
use cann::eval::Model;
use cann::model::{train_cann, ModelData};

use crate::artifacts::{
    ensure_out_dir, load_features, load_recipe, write_json, ModelArtifact,
    ARTIFACT_SCHEMA_VERSION,
};
use crate::config::{Mode, RunConfig};

pub fn run(cfg: &RunConfig) -> Result<String> {
    ensure_out_dir(&cfg.out)?;
    let mode = cfg.mode.unwrap_or(Mode::Cann);
    let telematics = match mode {
        Mode::Cann => true,
        Mode::Trad => false,
        other => bail!(
            "mode '{}' belongs to fit-glm; fit-cann takes cann|trad",
            other.name()
        ),
    };
    let train_table = load_features(&cfg.out, "train")?;
    let valid_table = load_features(&cfg.out, "valid")?;
    let recipe = load_recipe(&cfg.out)?;
    let train = ModelData::from_table(&train_table, telematics)?;
    let valid = ModelData::from_table(&valid_table, telematics)?;

    let train_cfg = cfg.train_config(cfg.head);
    let trained = train_cann(&train, &valid, &train_cfg)?;

    let suffix = if cfg.fixed_beta { "_fixedbeta" } else { "" };
    let name = format!("cann_{}{}", cfg.head, suffix);

    let log_path = cfg.out.join(format!("{name}_log.csv"));
    let mut w = std::io::BufWriter::new(std::fs::File::create(&log_path)?);
    writeln!(w, "epoch,lr,train_loss,valid_loss")?;
    for rec in &trained.trace {
        writeln!(
            w,
            "{},{},{},{}",
            rec.epoch, rec.lr, rec.train_loss, rec.valid_loss
        )?;
    }
    w.flush()?;

    let best_epoch = trained.best_epoch;
    let best_loss = trained.trace_minimum().valid_loss;
    let artifact = ModelArtifact {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        name: name.clone(),
        head: cfg.head.to_string(),
        mode: mode.name().to_string(),
        model: Model::cann(trained)?,
        recipe: Some(recipe),
    };
    let path = cfg.out.join(format!("{name}.json"));
    write_json(&path, &artifact)?;
    Ok(format!(
        "fit-cann: {name} best_epoch={best_epoch} valid_loss={best_loss:.6} \
         fixed_beta={} -> {}",
        cfg.fixed_beta,
        path.display()
    ))
}
