//! Plain-text serialization of [`ObservableSeries`].
//!
//! CSV files start with `# key = value` fingerprint lines, then the header
//! `time,pz,pz_stderr,norm,e_spin,e_rest,e_total`. Numbers use 17 significant
//! digits so that every `f64` round-trips.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use crate::observables::ObservableSeries;

pub const CSV_HEADER: &str = "time,pz,pz_stderr,norm,e_spin,e_rest,e_total";

fn columns(series: &ObservableSeries) -> [&[f64]; 7] {
    [
        &series.times,
        &series.pz,
        &series.pz_stderr,
        &series.norm,
        &series.e_spin,
        &series.e_rest,
        &series.e_total,
    ]
}

/// Renders the series as CSV text.
pub fn to_csv(series: &ObservableSeries) -> String {
    let mut out = String::new();
    for (k, v) in series.fingerprint.entries() {
        writeln!(out, "# {k} = {v}").unwrap();
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    let cols = columns(series);
    for i in 0..series.len() {
        for (j, col) in cols.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{:.16e}", col[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_csv<W: Write>(series: &ObservableSeries, mut w: W) -> io::Result<()> {
    w.write_all(to_csv(series).as_bytes())
}

/// Numeric columns and fingerprint lines read back from a CSV file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub fingerprint: Vec<(String, String)>,
    pub rows: Vec<[f64; 7]>,
}

impl CsvTable {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

pub fn read_csv<R: BufRead>(reader: R) -> io::Result<CsvTable> {
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let mut table = CsvTable::default();
    let mut header_seen = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                table.fingerprint.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if !header_seen {
            if line.trim() != CSV_HEADER {
                return Err(bad(format!("line {}: unexpected header `{line}`", lineno + 1)));
            }
            header_seen = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = [0.0; 7];
        let mut fields = line.split(',');
        for slot in &mut row {
            let field = fields
                .next()
                .ok_or_else(|| bad(format!("line {}: too few fields", lineno + 1)))?;
            *slot = field
                .trim()
                .parse()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
        }
        if fields.next().is_some() {
            return Err(bad(format!("line {}: too many fields", lineno + 1)));
        }
        table.rows.push(row);
    }
    if !header_seen {
        return Err(bad("missing header".into()));
    }
    Ok(table)
}

pub fn to_json(series: &ObservableSeries) -> serde_json::Result<String> {
    serde_json::to_string_pretty(series)
}

pub fn from_json(text: &str) -> serde_json::Result<ObservableSeries> {
    serde_json::from_str(text)
}
