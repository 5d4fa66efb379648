//! `fit-glm`: fit a log-linear benchmark model on the training split and
//! save it as a scoreable artifact.

use anyhow::{bail, Result};
use cann::dataset::VehicleGroups;
use cann::distributions::HeadKind;
use cann::eval::Model;
use cann::features::io::FeatureTable;
use cann::glm::{fit_log_linear, DesignMatrix, GlmOptions};
use ndarray::Array2;

use crate::artifacts::{
    ensure_out_dir, load_features, write_json, ModelArtifact, ARTIFACT_SCHEMA_VERSION,
};
use crate::config::{Mode, RunConfig};

/// Intercept + the blocks selected by the mode.
pub fn design_for_mode(table: &FeatureTable, mode: Mode) -> Result<DesignMatrix> {
    let bundle = &table.bundle;
    let mut ranges = vec![bundle.trad_range()];
    match mode {
        Mode::Trad => {}
        Mode::Handcrafted => ranges.push(bundle.hand_range()),
        Mode::Televector => ranges.push(bundle.tele_range()),
        Mode::Cann => bail!("mode 'cann' belongs to fit-cann; use trad|handcrafted|televector"),
    }
    let names: Vec<String> = ranges
        .iter()
        .flat_map(|r| bundle.names[r.clone()].iter().cloned())
        .collect();
    let width: usize = ranges.iter().map(|r| r.len()).sum();
    let mut x = Array2::zeros((bundle.x.nrows(), width));
    let mut col = 0;
    for r in &ranges {
        x.slice_mut(ndarray::s![.., col..col + r.len()])
            .assign(&bundle.x.slice(ndarray::s![.., r.clone()]));
        col += r.len();
    }
    Ok(DesignMatrix::with_intercept(&names, &x)?)
}

pub fn run(cfg: &RunConfig) -> Result<String> {
    ensure_out_dir(&cfg.out)?;
    let mode = cfg.mode.unwrap_or(Mode::Handcrafted);
    let table = load_features(&cfg.out, "train")?;
    let design = design_for_mode(&table, mode)?;
    let groups = (cfg.head == HeadKind::Mvnb)
        .then(|| VehicleGroups::from_ids(&table.vins, &table.contract_index))
        .transpose()?;

    let fit = fit_log_linear(
        &design,
        &table.y,
        groups.as_ref(),
        cfg.head,
        &GlmOptions::default(),
    )?;
    let converged = fit.converged;
    let loss = fit.final_loss;
    let iters = fit.iterations;

    let name = format!("glm_{}_{}", cfg.head, mode.name());
    let artifact = ModelArtifact {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        name: name.clone(),
        head: cfg.head.to_string(),
        mode: mode.name().to_string(),
        model: Model::Glm(fit),
        recipe: None,
    };
    let path = cfg.out.join(format!("{name}.json"));
    write_json(&path, &artifact)?;
    Ok(format!(
        "fit-glm: {name} converged={converged} loss={loss:.6} iterations={iters} -> {}",
        path.display()
    ))
}
