//! CSV interchange for labeled feature tables.
//!
//! The schema is fixed: the 30 feature names followed by
//! `label,image_id,x,y`. Floats are written with Rust's shortest
//! round-trippable formatting, so write -> read is the identity.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{FeatureVector, LabeledDataset, LabeledRow, FEATURE_COUNT, FEATURE_NAMES};

const TRAILER_COLUMNS: [&str; 4] = ["label", "image_id", "x", "y"];
const COLUMN_COUNT: usize = FEATURE_COUNT + TRAILER_COLUMNS.len();

fn header() -> String {
    let mut cols: Vec<&str> = FEATURE_NAMES.to_vec();
    cols.extend(TRAILER_COLUMNS);
    cols.join(",")
}

pub fn write_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);

    writeln!(out, "{}", header()).map_err(io_err)?;
    let mut line = String::with_capacity(512);
    for row in &ds.rows {
        if row.image_id.contains(',') || row.image_id.contains('\n') {
            return Err(Error::Schema(format!(
                "image id {:?} contains a delimiter",
                row.image_id
            )));
        }
        line.clear();
        for v in &row.features {
            line.push_str(&format!("{v}"));
            line.push(',');
        }
        line.push_str(if row.label { "1" } else { "0" });
        line.push(',');
        line.push_str(&row.image_id);
        line.push_str(&format!(",{},{}", row.x, row.y));
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let first = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::Schema("file is empty, expected a header".into())),
    };
    if first.trim_end() != header() {
        let got = first.split(',').count();
        if got != COLUMN_COUNT {
            return Err(Error::Schema(format!(
                "expected {COLUMN_COUNT} columns, header has {got}"
            )));
        }
        return Err(Error::Schema("header does not match the schema".into()));
    }

    let mut ds = LabeledDataset::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != COLUMN_COUNT {
            return Err(Error::Schema(format!(
                "row {}: expected {COLUMN_COUNT} columns, got {}",
                lineno + 2,
                fields.len()
            )));
        }

        let mut features: FeatureVector = [0.0; FEATURE_COUNT];
        for (k, field) in fields[..FEATURE_COUNT].iter().enumerate() {
            features[k] = field.parse().map_err(|_| {
                Error::Schema(format!(
                    "row {}: column {} is not a number: {field:?}",
                    lineno + 2,
                    FEATURE_NAMES[k]
                ))
            })?;
        }
        let label = match fields[FEATURE_COUNT] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Schema(format!(
                    "row {}: label must be 0 or 1, got {other:?}",
                    lineno + 2
                )))
            }
        };
        let parse_coord = |s: &str, name: &str| {
            s.parse::<u32>().map_err(|_| {
                Error::Schema(format!(
                    "row {}: {name} is not an integer: {s:?}",
                    lineno + 2
                ))
            })
        };
        ds.rows.push(LabeledRow {
            features,
            label,
            image_id: fields[FEATURE_COUNT + 1].to_string(),
            x: parse_coord(fields[FEATURE_COUNT + 2], "x")?,
            y: parse_coord(fields[FEATURE_COUNT + 3], "y")?,
        });
    }
    Ok(ds)
}
