//! `evaluate`: score the requested models (plus the homogeneous baseline)
//! with the three scoring rules, report percentage improvements over the
//! baseline, and emit the balance report.

use std::io::Write;

use anyhow::{bail, Result};
use cann::eval::{balance_report, baseline_mean, score, EvalData, Model, ModelScores};
use cann::features::io::FeatureTable;
use serde::Serialize;

use crate::artifacts::{ensure_out_dir, load_features, read_model};
use crate::config::RunConfig;

#[derive(Serialize)]
struct ScoreRow {
    model: String,
    split: String,
    deviance: f64,
    log_score: f64,
    squared_error: f64,
    impr_deviance_pct: f64,
    impr_log_score_pct: f64,
    impr_squared_error_pct: f64,
}

#[derive(Serialize)]
struct BalanceOut {
    model: String,
    split: String,
    sum_predicted: f64,
    sum_actual: f64,
    ratio_pct: f64,
}

/// Concatenate feature tables row-wise (same schema).
fn concat(tables: &[&FeatureTable]) -> Result<FeatureTable> {
    let first = tables[0];
    let mut vins = Vec::new();
    let mut contract_index = Vec::new();
    let mut y = Vec::new();
    let mut rows = Vec::new();
    for t in tables {
        if t.bundle.names != first.bundle.names {
            bail!("feature files disagree on columns");
        }
        vins.extend(t.vins.iter().cloned());
        contract_index.extend(t.contract_index.iter().copied());
        y.extend(t.y.iter().copied());
        rows.push(t.bundle.x.view());
    }
    let x = ndarray::concatenate(ndarray::Axis(0), &rows)?;
    Ok(FeatureTable {
        vins,
        contract_index,
        y,
        bundle: cann::features::recipe::FeatureBundle {
            names: first.bundle.names.clone(),
            x,
            n_trad: first.bundle.n_trad,
        },
    })
}

pub fn run(cfg: &RunConfig) -> Result<String> {
    ensure_out_dir(&cfg.out)?;
    let train = load_features(&cfg.out, "train")?;
    let valid = load_features(&cfg.out, "valid")?;
    let test = load_features(&cfg.out, "test")?;
    let learning = concat(&[&train, &valid])?;

    // Homogeneous baseline: the learning-set average claim frequency.
    let learning_y: Vec<u64> = learning.y.clone();
    let baseline = Model::baseline(baseline_mean(&learning_y)?)?;

    let mut models: Vec<(String, Model)> = vec![("baseline".into(), baseline)];
    for file in cfg.evaluate.models.clone().unwrap_or_default() {
        let artifact = read_model(&cfg.out.join(&file))?;
        models.push((artifact.name.clone(), artifact.model));
    }

    let split_names = cfg
        .evaluate
        .splits
        .clone()
        .unwrap_or_else(|| vec!["learning".into(), "test".into()]);
    let tables: Vec<(&str, &FeatureTable)> = split_names
        .iter()
        .map(|name| {
            Ok(match name.as_str() {
                "train" => ("train", &train),
                "valid" => ("valid", &valid),
                "test" => ("test", &test),
                "learning" => ("learning", &learning),
                other => bail!("unknown split '{other}' (train|valid|test|learning)"),
            })
        })
        .collect::<Result<_>>()?;

    // Baseline scores per split anchor the improvement percentages.
    let mut score_rows: Vec<ScoreRow> = Vec::new();
    let mut balance_rows: Vec<BalanceOut> = Vec::new();
    for (split_name, table) in &tables {
        let mut baseline_scores: Option<ModelScores> = None;
        for (model_name, model) in &models {
            let data = EvalData::for_model(model, table)?;
            let s = score(model, &data)?;
            let base = *baseline_scores.get_or_insert(s);
            score_rows.push(ScoreRow {
                model: model_name.clone(),
                split: split_name.to_string(),
                deviance: s.deviance,
                log_score: s.log_score,
                squared_error: s.squared_error,
                impr_deviance_pct: (1.0 - s.deviance / base.deviance) * 100.0,
                impr_log_score_pct: (1.0 - s.log_score / base.log_score) * 100.0,
                impr_squared_error_pct: (1.0 - s.squared_error / base.squared_error) * 100.0,
            });
            let rows = balance_report(model, &[(split_name, &data)])?;
            for b in rows {
                balance_rows.push(BalanceOut {
                    model: model_name.clone(),
                    split: b.split,
                    sum_predicted: b.sum_predicted,
                    sum_actual: b.sum_actual,
                    ratio_pct: b.ratio * 100.0,
                });
            }
        }
    }

    let scores_csv = cfg.out.join("evaluation_scores.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&scores_csv)?);
    writeln!(
        w,
        "model,split,deviance,log_score,squared_error,\
         impr_deviance_pct,impr_log_score_pct,impr_squared_error_pct"
    )?;
    for r in &score_rows {
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{:.4},{:.4},{:.4}",
            r.model,
            r.split,
            r.deviance,
            r.log_score,
            r.squared_error,
            r.impr_deviance_pct,
            r.impr_log_score_pct,
            r.impr_squared_error_pct
        )?;
    }
    w.flush()?;
    crate::artifacts::write_json(&cfg.out.join("evaluation_scores.json"), &score_rows)?;

    let balance_csv = cfg.out.join("evaluation_balance.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&balance_csv)?);
    writeln!(w, "model,split,sum_predicted,sum_actual,ratio_pct")?;
    for r in &balance_rows {
        writeln!(
            w,
            "{},{},{:.4},{},{:.1}",
            r.model, r.split, r.sum_predicted, r.sum_actual, r.ratio_pct
        )?;
    }
    w.flush()?;
    crate::artifacts::write_json(&cfg.out.join("evaluation_balance.json"), &balance_rows)?;

    Ok(format!(
        "evaluate: {} models x {} splits -> {}, {}",
        models.len(),
        tables.len(),
        scores_csv.display(),
        balance_csv.display()
    ))
}
