//! CSV and JSON file emission.
//!
//! Numbers are written in decimal scientific notation with 17 significant
//! digits, which round-trips every binary64 value exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::bands::BandTable;
use crate::error::{Error, Result};
use crate::series::{MomentumSnapshot, ObservableSeries, Sample};

pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, what: format!("{other:?}") },
    }
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| format_number(v)))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv<W: Write>(out: W, series: &ObservableSeries) -> Result<()> {
    write_rows(
        out,
        &Sample::COLUMNS,
        series.samples.iter().map(|s| s.values().to_vec()),
    )
}

pub fn save_series_csv(path: &Path, series: &ObservableSeries) -> Result<()> {
    write_series_csv(File::create(path)?, series)
}

/// A generic numeric CSV: header plus rows of floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_table<R: Read>(input: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Parse { line: 1, what: "missing header row".into() });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let row = rec
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    what: format!("not a number: {f:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_series_csv<R: Read>(input: R) -> Result<ObservableSeries> {
    let table = read_table(input)?;
    if table.header.iter().map(String::as_str).ne(Sample::COLUMNS) {
        return Err(Error::Parse {
            line: 1,
            what: format!("expected columns {:?}", Sample::COLUMNS),
        });
    }
    let samples = table
        .rows
        .into_iter()
        .map(|r| {
            let mut v = [0.0; 10];
            v.copy_from_slice(&r);
            Sample::from_values(v)
        })
        .collect();
    Ok(ObservableSeries { samples, ..Default::default() })
}

pub fn load_series_csv(path: &Path) -> Result<ObservableSeries> {
    read_series_csv(File::open(path)?)
}

/// Columns `q`, `band_0..`, `free_0..`.
pub fn write_bands_csv<W: Write>(out: W, table: &BandTable) -> Result<()> {
    let nb = table.n_bands();
    let mut header = vec!["q".to_string()];
    header.extend((0..nb).map(|b| format!("band_{b}")));
    header.extend((0..nb).map(|b| format!("free_{b}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = table.q_grid.iter().enumerate().map(|(i, &q)| {
        let mut row = vec![q];
        row.extend(table.energies.iter().map(|b| b[i]));
        row.extend(table.free.iter().map(|b| b[i]));
        row
    });
    write_rows(out, &header_refs, rows)
}

/// Long format: one row per `(t, p)` pair.
pub fn write_snapshots_csv<W: Write>(out: W, snapshots: &[MomentumSnapshot]) -> Result<()> {
    let rows = snapshots.iter().flat_map(|s| {
        s.p.iter()
            .zip(&s.probability)
            .map(move |(&p, &prob)| vec![s.t, p, prob])
    });
    write_rows(out, &["t", "p", "probability"], rows)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
