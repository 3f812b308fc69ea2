use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Aggregate, ResultsTable, ScenarioSpec};
use crate::error::Result;
use crate::optimizer::Algorithm;

pub const RESULTS_CSV: &str = "results.csv";
pub const UE_RATES_CSV: &str = "ue_rates.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// One (sweep point, algorithm, trial) outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub algorithm: Algorithm,
    pub trial: usize,
    pub total_st_bps_hz: f64,
    pub iterations: usize,
    pub status: String,
    pub bwr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UeRateRecord {
    pub sweep_value: f64,
    pub algorithm: Algorithm,
    pub trial: usize,
    pub cell: usize,
    pub ue: usize,
    pub class: String,
    pub rate_bps_hz: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    spec: &'a ScenarioSpec,
    aggregates: &'a [Aggregate],
}

fn write_csv<T: Serialize>(path: &Path, headers: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(headers)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Write `results.csv`, `ue_rates.csv` and `summary.json` into `dir`.
/// Output carries no timings, so equal tables give equal bytes.
pub fn emit_results(table: &ResultsTable, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let results = dir.join(RESULTS_CSV);
    write_csv(
        &results,
        &["sweep_value", "algorithm", "trial", "total_st_bps_hz", "iterations", "status", "bwr"],
        &table.rows,
    )?;
    let ue = dir.join(UE_RATES_CSV);
    write_csv(&ue, &["sweep_value", "algorithm", "trial", "cell", "ue", "class", "rate_bps_hz"], &table.ue_rates)?;
    let summary = dir.join(SUMMARY_JSON);
    let w = BufWriter::new(File::create(&summary)?);
    serde_json::to_writer_pretty(w, &Summary { spec: &table.spec, aggregates: &table.aggregates })?;
    Ok(vec![results, ue, summary])
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
