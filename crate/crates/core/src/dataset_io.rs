//! CSV form of a [`Dataset`].
//!
//! Columns: `index, phi_raw, ref_1..ref_12, click, excitation_present,
//! n_atoms`, header mandatory. Reals use the shortest representation that
//! round-trips, flags are written as `0`/`1`; rows keep dataset order so the
//! byte stream is a function of the dataset alone.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::{Dataset, MeasurementRecord, REFERENCES};

pub fn header() -> Vec<String> {
    let mut cols = vec!["index".to_string(), "phi_raw".to_string()];
    cols.extend((1..=REFERENCES).map(|j| format!("ref_{j}")));
    cols.extend(["click", "excitation_present", "n_atoms"].map(String::from));
    cols
}

pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(header())?;
    let mut row: Vec<String> = Vec::with_capacity(REFERENCES + 5);
    for record in &dataset.records {
        row.clear();
        row.push(record.index.to_string());
        row.push(record.phi_raw.to_string());
        row.extend(record.references.iter().map(|r| r.to_string()));
        row.push(flag(record.click).to_string());
        row.push(flag(record.excitation_present).to_string());
        row.push(record.n_atoms.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn to_csv_bytes(dataset: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf).expect("writing to memory");
    buf
}

pub fn write_csv_file(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(dataset, std::io::BufWriter::new(file))
}

fn flag(value: bool) -> &'static str {
    if value {
        "1"
    } else {
        "0"
    }
}

/// Read records from any CSV carrying the required columns (extra columns
/// and column order are free). The fingerprint is left empty and the seed
/// zero; they live in the run manifest.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut input = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = input.headers()?.clone();
    let required = header();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let missing: Vec<String> = required
        .iter()
        .filter(|name| position(name).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::SchemaMismatch { missing });
    }
    let columns: Vec<usize> = required.iter().map(|name| position(name).unwrap()).collect();

    let mut records = Vec::new();
    for row in input.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::MalformedRecord {
                line,
                reason: e.to_string(),
            }
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |k: usize| row.get(columns[k]).unwrap_or("");
        let bad = |name: &str, value: &str| Error::MalformedRecord {
            line,
            reason: format!("cannot parse {name} = {value:?}"),
        };
        let real = |k: usize| -> Result<f64> {
            field(k)
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(&required[k], field(k)))
        };
        let boolean = |k: usize| -> Result<bool> {
            match field(k) {
                "1" | "true" | "True" | "TRUE" => Ok(true),
                "0" | "false" | "False" | "FALSE" => Ok(false),
                other => Err(bad(&required[k], other)),
            }
        };
        let integer = |k: usize| -> Result<u64> {
            let raw = field(k);
            raw.parse::<u64>()
                .ok()
                .or_else(|| {
                    raw.parse::<f64>()
                        .ok()
                        .filter(|x| *x >= 0.0 && x.fract() == 0.0)
                        .map(|x| x as u64)
                })
                .ok_or_else(|| bad(&required[k], raw))
        };

        let mut references = [0.0; REFERENCES];
        for (j, slot) in references.iter_mut().enumerate() {
            *slot = real(2 + j)?;
        }
        records.push(MeasurementRecord {
            index: integer(0)?,
            phi_raw: real(1)?,
            references,
            click: boolean(2 + REFERENCES)?,
            excitation_present: boolean(3 + REFERENCES)?,
            n_atoms: integer(4 + REFERENCES)?,
        });
    }
    for (expected, record) in records.iter().enumerate() {
        if record.index != expected as u64 {
            return Err(Error::MalformedRecord {
                line: expected as u64 + 2,
                reason: format!("index {} is not contiguous (expected {expected})", record.index),
            });
        }
    }
    Ok(Dataset {
        records,
        config_fingerprint: String::new(),
        seed: 0,
    })
}

pub fn read_csv_file(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file))
}
