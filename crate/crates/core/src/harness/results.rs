use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const RESULTS_HEADER: [&str; 9] = [
    "method", "seed", "acc_r", "acc_f", "mia", "mia_nn", "mia_nn_gap", "ulira", "runtime_s",
];

/// Metrics of one successful cell. Rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Metrics {
    pub acc_r: f64,
    pub acc_f: f64,
    pub mia: f64,
    #[serde(rename = "miaNN")]
    pub mia_nn: f64,
    #[serde(rename = "miaNNGap")]
    pub mia_nn_gap: f64,
    pub ulira: Option<f64>,
    pub runtime_seconds: f64,
}

/// One `(method, seed)` cell; `metrics` is absent when the cell failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsRow {
    pub method: String,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: Option<Metrics>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results_csv<W: Write>(rows: &[MetricsRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        let m = r.metrics.as_ref();
        w.write_record([
            r.method.clone(),
            r.seed.to_string(),
            opt(m.map(|m| m.acc_r)),
            opt(m.map(|m| m.acc_f)),
            opt(m.map(|m| m.mia)),
            opt(m.map(|m| m.mia_nn)),
            opt(m.map(|m| m.mia_nn_gap)),
            opt(m.and_then(|m| m.ulira)),
            opt(m.map(|m| m.runtime_seconds)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(reader: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(reader);
    if r.headers()?.iter().ne(RESULTS_HEADER) {
        return Err(Error::InvalidInput("unexpected results header".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |col: &str| Error::InvalidInput(format!("results row {}: bad {col}", line + 1));
        let num = |i: usize| -> Result<Option<f64>> {
            match &rec[i] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(RESULTS_HEADER[i])),
            }
        };
        let seed = rec[1].parse().map_err(|_| bad("seed"))?;
        let fields: Vec<Option<f64>> = [2, 3, 4, 5, 6, 8].into_iter().map(num).collect::<Result<_>>()?;
        let metrics = match fields.iter().all(Option::is_some) {
            true => Some(Metrics {
                acc_r: fields[0].unwrap_or_default(),
                acc_f: fields[1].unwrap_or_default(),
                mia: fields[2].unwrap_or_default(),
                mia_nn: fields[3].unwrap_or_default(),
                mia_nn_gap: fields[4].unwrap_or_default(),
                ulira: num(7)?,
                runtime_seconds: fields[5].unwrap_or_default(),
            }),
            false if fields.iter().all(Option::is_none) && rec[7].is_empty() => None,
            false => return Err(bad("metric columns (partially empty)")),
        };
        rows.push(MetricsRow {
            method: rec[0].to_string(),
            seed,
            metrics,
        });
    }
    Ok(rows)
}

pub fn write_results_csv_path(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut buf = Vec::new();
    write_results_csv(rows, &mut buf)?;
    crate::io::write_atomic(path, &buf)
}

pub fn read_results_csv_path(path: &Path) -> Result<Vec<MetricsRow>> {
    read_results_csv(std::fs::File::open(path)?)
}
