//! Dataset interchange: one CSV of events plus one JSON metadata sidecar.
//!
//! The CSV carries the raw event stream, header `index,x` (SG) or
//! `index,x,y` (EPRB), one row per event, outcome values written exactly as
//! `1` or `-1`. The sidecar (same path with extension `.json`) records the
//! condition, the generating model with its parameters, `n` and the seed —
//! everything needed to regenerate or validate the CSV. The pair is the unit
//! all downstream commands consume.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{ConditionRecord, EventDataset, Events, ExperimentKind, OutcomeModel};

/// Sidecar content for one dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMetadata {
    pub condition: ConditionRecord,
    pub model: OutcomeModel,
    pub n: u64,
    pub seed: u64,
}

impl DatasetMetadata {
    pub fn of(dataset: &EventDataset) -> Self {
        DatasetMetadata {
            condition: dataset.condition.clone(),
            model: dataset.model.clone(),
            n: dataset.n(),
            seed: dataset.seed,
        }
    }
}

/// Sidecar path for a dataset CSV path.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Serializes a value as pretty-printed JSON (trailing newline included, so
/// files are byte-stable and diff-friendly).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = std::fs::read_to_string(path)?;
    serde_json::from_str(&raw).map_err(|e| format_error(path, e.to_string()))
}

/// Writes the event CSV and its metadata sidecar.
pub fn write_dataset(dataset: &EventDataset, csv_path: &Path) -> Result<()> {
    if let Some(parent) = csv_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(csv_path)?);
    match &dataset.events {
        Events::Sg(xs) => {
            writeln!(w, "index,x")?;
            for (i, x) in xs.iter().enumerate() {
                writeln!(w, "{i},{x}")?;
            }
        }
        Events::Eprb(pairs) => {
            writeln!(w, "index,x,y")?;
            for (i, (x, y)) in pairs.iter().enumerate() {
                writeln!(w, "{i},{x},{y}")?;
            }
        }
    }
    w.flush()?;
    write_json(&metadata_path(csv_path), &DatasetMetadata::of(dataset))
}

fn parse_outcome(path: &Path, field: &str) -> Result<i8> {
    match field {
        "1" => Ok(1),
        "-1" => Ok(-1),
        other => Err(format_error(
            path,
            format!("outcome value must be exactly 1 or -1, got {other:?}"),
        )),
    }
}

/// Reads a dataset CSV together with its sidecar, validating the header, the
/// ±1 outcome values, sequential indices, and the event count against the
/// metadata.
pub fn read_dataset(csv_path: &Path) -> Result<EventDataset> {
    let meta: DatasetMetadata = read_json(&metadata_path(csv_path))?;
    let reader = BufReader::new(File::open(csv_path)?);
    let mut lines = reader.lines();

    let header = lines
        .next()
        .ok_or_else(|| format_error(csv_path, "missing header"))??;
    let expected_header = match meta.condition.kind() {
        ExperimentKind::Sg => "index,x",
        ExperimentKind::Eprb => "index,x,y",
    };
    if header.trim_end() != expected_header {
        return Err(format_error(
            csv_path,
            format!("header {header:?}, expected {expected_header:?}"),
        ));
    }

    let mut sg = Vec::new();
    let mut eprb = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let index: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| format_error(csv_path, format!("bad index on row {row}")))?;
        if index != row {
            return Err(format_error(
                csv_path,
                format!("non-sequential index {index} on row {row}"),
            ));
        }
        match meta.condition.kind() {
            ExperimentKind::Sg => {
                let x = fields
                    .next()
                    .ok_or_else(|| format_error(csv_path, format!("missing x on row {row}")))?;
                sg.push(parse_outcome(csv_path, x)?);
            }
            ExperimentKind::Eprb => {
                let x = fields
                    .next()
                    .ok_or_else(|| format_error(csv_path, format!("missing x on row {row}")))?;
                let y = fields
                    .next()
                    .ok_or_else(|| format_error(csv_path, format!("missing y on row {row}")))?;
                eprb.push((parse_outcome(csv_path, x)?, parse_outcome(csv_path, y)?));
            }
        }
        if fields.next().is_some() {
            return Err(format_error(
                csv_path,
                format!("too many fields on row {row}"),
            ));
        }
    }

    let events = match meta.condition.kind() {
        ExperimentKind::Sg => Events::Sg(sg),
        ExperimentKind::Eprb => Events::Eprb(eprb),
    };
    if events.len() as u64 != meta.n {
        return Err(format_error(
            csv_path,
            format!("{} events but metadata says n = {}", events.len(), meta.n),
        ));
    }
    Ok(EventDataset {
        condition: meta.condition,
        model: meta.model,
        seed: meta.seed,
        events,
    })
}
