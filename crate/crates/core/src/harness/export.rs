//! CSV field export and JSON run reports.
//!
//! Files are written to a temporary sibling and renamed into place, so a
//! reader never observes a half-written file.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{FieldSnapshot, TrainReport};
use crate::error::{Error, Result};

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// Header row of column names, then one row per point. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn export_fields(snapshot: &FieldSnapshot, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(snapshot.columns())?;
    for i in 0..snapshot.len() {
        w.write_record(snapshot.row(i).iter().map(|v| format!("{v:?}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

pub fn read_fields(path: &Path) -> Result<FieldSnapshot> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let dim = headers
        .iter()
        .take_while(|h| matches!(*h, "x" | "y" | "z"))
        .count();
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(line + 2, format!("bad number `{v}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let snap = FieldSnapshot::from_rows(dim, &rows)?;
    if snap.columns().iter().map(String::as_str).ne(headers.iter()) {
        return Err(Error::parse(1, "unexpected column layout"));
    }
    Ok(snap)
}

pub fn export_report(report: &TrainReport, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_report(path: &Path) -> Result<TrainReport> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}
