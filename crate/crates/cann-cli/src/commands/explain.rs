//! `explain`: permutation feature importance over repeated shuffles and
//! partial dependence curves, with optional SVG plots.

use std::io::Write;

use anyhow::{bail, Result};
use cann::eval::plot::{importance_svg, pdp_svg};
use cann::eval::{partial_dependence, permutation_importance, EvalData, PdpGrid};

use crate::artifacts::{ensure_out_dir, load_features, read_model};
use crate::config::RunConfig;

pub fn run(cfg: &RunConfig) -> Result<String> {
    ensure_out_dir(&cfg.out)?;
    let model_file = cfg
        .explain
        .model
        .clone()
        .unwrap_or_else(|| format!("cann_{}.json", cfg.head));
    let artifact = read_model(&cfg.out.join(&model_file))?;
    let split = cfg.explain.split.clone().unwrap_or_else(|| "test".into());
    let table = load_features(&cfg.out, &split)?;
    let data = EvalData::for_model(&artifact.model, &table)?;

    let all_inputs = artifact.model.input_names();
    let inputs: Vec<String> = match &cfg.explain.inputs {
        None => all_inputs.clone(),
        Some(list) if list.len() == 1 && list[0] == "all" => all_inputs.clone(),
        Some(list) => list.clone(),
    };
    if inputs.is_empty() {
        bail!("the model has no inputs to explain");
    }
    let repetitions = cfg.explain.repetitions.unwrap_or(100);
    let pdp_points = cfg.explain.pdp_points.unwrap_or(50);
    let plots = cfg.explain.plots.unwrap_or(true);

    let fi = permutation_importance(&artifact.model, &data, &inputs, repetitions, cfg.seed)?;
    let fi_csv = cfg.out.join("fi.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&fi_csv)?);
    writeln!(w, "input,repetition,fi")?;
    for (j, input) in fi.inputs.iter().enumerate() {
        for (r, v) in fi.scores[j].iter().enumerate() {
            writeln!(w, "{input},{r},{v}")?;
        }
    }
    w.flush()?;
    if plots {
        std::fs::write(cfg.out.join("fi.svg"), importance_svg(&fi)?)?;
    }

    for input in &inputs {
        let pdp = partial_dependence(
            &artifact.model,
            &data,
            input,
            PdpGrid::Quantile { points: pdp_points },
        )?;
        let path = cfg.out.join(format!("pdp_{input}.csv"));
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "grid,average_prediction")?;
        for (g, p) in pdp.grid.iter().zip(&pdp.average_prediction) {
            writeln!(w, "{g},{p}")?;
        }
        w.flush()?;
        let hist_path = cfg.out.join(format!("pdp_{input}_histogram.csv"));
        let mut w = std::io::BufWriter::new(std::fs::File::create(&hist_path)?);
        writeln!(w, "bin_lo,bin_hi,count")?;
        for (k, count) in pdp.histogram_counts.iter().enumerate() {
            writeln!(
                w,
                "{},{},{count}",
                pdp.histogram_edges[k],
                pdp.histogram_edges[k + 1]
            )?;
        }
        w.flush()?;
        if plots {
            std::fs::write(cfg.out.join(format!("pdp_{input}.svg")), pdp_svg(&pdp)?)?;
        }
    }

    Ok(format!(
        "explain: {} on split {split}, {} inputs x {repetitions} repetitions -> {}",
        artifact.name,
        inputs.len(),
        fi_csv.display()
    ))
}
