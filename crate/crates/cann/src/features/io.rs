//! Delimited-text readers and writers for the contract, trip, and feature
//! files. Headers are fixed; dates are ISO-8601; an empty field is a missing
//! value.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{CannError, Result};
use crate::features::recipe::FeatureBundle;
use crate::features::records::{ContractRecord, TripRecord};

pub fn read_contracts(path: &Path) -> Result<Vec<ContractRecord>> {
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let record: ContractRecord = row?;
        record.validate()?;
        out.push(record);
    }
    if out.is_empty() {
        return Err(CannError::data(format!(
            "no contracts in {}",
            path.display()
        )));
    }
    Ok(out)
}

pub fn write_contracts(path: &Path, contracts: &[ContractRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for c in contracts {
        writer.serialize(c)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_trips(path: &Path) -> Result<Vec<TripRecord>> {
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let record: TripRecord = row?;
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_trips(path: &Path, trips: &[TripRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for t in trips {
        writer.serialize(t)?;
    }
    writer.flush()?;
    Ok(())
}

/// A feature file: identification columns, the response, then the encoded
/// feature columns of a [`FeatureBundle`].
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub vins: Vec<String>,
    /// 1-based chronological contract index within the vehicle.
    pub contract_index: Vec<u32>,
    pub y: Vec<u64>,
    pub bundle: FeatureBundle,
}

pub fn write_features(path: &Path, table: &FeatureTable) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = vec!["vin".to_string(), "contract_index".into(), "nb_claims".into()];
    header.extend(table.bundle.names.iter().cloned());
    writeln!(w, "{}", header.join(","))?;
    for r in 0..table.bundle.x.nrows() {
        let mut fields = vec![
            table.vins[r].clone(),
            table.contract_index[r].to_string(),
            table.y[r].to_string(),
        ];
        fields.extend(table.bundle.x.row(r).iter().map(|v| v.to_string()));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<FeatureTable> {
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header.len() < 4 || header[0] != "vin" || header[1] != "contract_index" || header[2] != "nb_claims"
    {
        return Err(CannError::data(format!(
            "{} is not a feature file (bad header)",
            path.display()
        )));
    }
    let names: Vec<String> = header[3..].to_vec();
    let n_trad = FeatureBundle::trad_width_from_names(&names)?;

    let mut vins = Vec::new();
    let mut contract_index = Vec::new();
    let mut y = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() != header.len() {
            return Err(CannError::data("ragged feature row"));
        }
        vins.push(row[0].to_string());
        contract_index.push(row[1].parse::<u32>().map_err(|e| {
            CannError::data(format!("bad contract_index '{}': {e}", &row[1]))
        })?);
        y.push(row[2]
            .parse::<u64>()
            .map_err(|e| CannError::data(format!("bad nb_claims '{}': {e}", &row[2])))?);
        for field in row.iter().skip(3) {
            values.push(field.parse::<f64>().map_err(|e| {
                CannError::data(format!("bad feature value '{field}': {e}"))
            })?);
        }
    }
    let n_rows = vins.len();
    if n_rows == 0 {
        return Err(CannError::data(format!(
            "no feature rows in {}",
            path.display()
        )));
    }
    let x = Array2::from_shape_vec((n_rows, names.len()), values)
        .map_err(|e| CannError::shape(e.to_string()))?;
    Ok(FeatureTable {
        vins,
        contract_index,
        y,
        bundle: FeatureBundle { names, x, n_trad },
    })
}
