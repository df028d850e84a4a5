//! File formats: measure CSVs in, series CSVs and digests out.

use std::fs;
use std::path::Path;

use mkvlab_core::EmpiricalMeasure;
use sha2::{Digest, Sha256};

/// Read a single-column CSV of atoms. A first row that is not a number is
/// taken as a header.
pub fn read_measure(path: &Path) -> Result<EmpiricalMeasure, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let mut atoms = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let Some(cell) = rec.get(0) else { continue };
        match cell.parse::<f64>() {
            Ok(x) => atoms.push(x),
            Err(_) if i == 0 => {}
            Err(_) => return Err(format!("{}: row {}: `{cell}` is not a number", path.display(), i + 1)),
        }
    }
    EmpiricalMeasure::uniform(atoms).map_err(|e| format!("{}: {e}", path.display()))
}

/// Text form of a float in CSV output: shortest round-trip, `.` decimal.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// A table destined for `series.csv`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Series {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        self.push_cells(row.iter().map(|&x| fmt_f64(x)).collect());
    }

    pub fn push_cells(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
