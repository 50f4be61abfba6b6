use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use super::{ColumnRole, ColumnSchema, DataTable};
use crate::error::{Error, Result};

/// Reads a CSV file against a schema. Empty cells become missing; every
/// other cell must parse to a finite number (or be a label, for class
/// columns). Header columns may appear in any order but must match the
/// schema names exactly.
pub fn load_csv(path: impl AsRef<Path>, schema: &[ColumnSchema]) -> Result<DataTable> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &[ColumnSchema]) -> Result<DataTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    for col in schema {
        if !header.contains(&col.name) {
            return Err(Error::Schema(format!("header is missing column '{}'", col.name)));
        }
    }
    if let Some(extra) = header.iter().find(|h| !schema.iter().any(|c| &c.name == *h)) {
        return Err(Error::Schema(format!("header has unknown column '{extra}'")));
    }
    if header.len() != schema.len() {
        return Err(Error::Schema("header repeats a column".into()));
    }
    let source: Vec<usize> = schema
        .iter()
        .map(|c| header.iter().position(|h| h == &c.name).expect("checked"))
        .collect();

    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;

    let mut labels = BTreeSet::new();
    for rec in &records {
        for (c, col) in schema.iter().enumerate() {
            if col.role == ColumnRole::ClassLabel {
                let cell = rec.get(source[c]).unwrap_or("").trim();
                if !cell.is_empty() {
                    labels.insert(cell.to_string());
                }
            }
        }
    }
    let classes: Vec<String> = labels.into_iter().collect();

    let mut rows = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        let mut row = Vec::with_capacity(schema.len());
        for (c, col) in schema.iter().enumerate() {
            let cell = rec.get(source[c]).unwrap_or("").trim();
            if cell.is_empty() {
                row.push(None);
                continue;
            }
            let v = if col.role == ColumnRole::ClassLabel {
                classes.iter().position(|l| l == cell).expect("collected") as f64
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        return Err(Error::Parse {
                            row: r + 1,
                            column: col.name.clone(),
                            message: format!("'{cell}' is not a finite number"),
                        })
                    }
                }
            };
            row.push(Some(v));
        }
        rows.push(row);
    }
    DataTable::new(schema.to_vec(), rows, classes)
}

pub fn write_csv(table: &DataTable, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(table, file)
}

/// Values are written in Rust's shortest round-trip form, so reading the
/// output back reproduces every bit.
pub fn write_csv_to<W: Write>(table: &DataTable, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(table.column_names())?;
    for r in 0..table.n_rows() {
        let rec: Vec<String> = (0..table.n_cols())
            .map(|c| match table.value(r, c) {
                None => String::new(),
                Some(_) if table.schema()[c].role == ColumnRole::ClassLabel => {
                    table.class_label(r, c).unwrap_or_default().to_string()
                }
                Some(v) => format!("{v}"),
            })
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
