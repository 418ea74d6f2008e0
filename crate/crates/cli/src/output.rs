//! CSV and JSON Lines writers for [`Record`]s.

use std::io::Write;

use serde_json::Value;

use crate::{CliError, Record};

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// Text of one CSV cell. Floats use the shortest round-trip form with a
/// decimal point or exponent; null is an empty cell.
pub fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => i.to_string(),
            (_, Some(u), _) => u.to_string(),
            (_, _, Some(f)) => format!("{f:?}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

/// RFC 4180 CSV with a single header row taken from the first record.
pub fn write_csv<W: Write>(records: &[Record], out: W) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out);
    let Some(first) = records.first() else {
        return Ok(());
    };
    let header: Vec<&String> = first.keys().collect();
    w.write_record(&header).map_err(io)?;
    for rec in records {
        w.write_record(header.iter().map(|k| rec.get(*k).map_or_else(String::new, cell)))
            .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One JSON object per line.
pub fn write_json<W: Write>(records: &[Record], mut out: W) -> Result<(), CliError> {
    for rec in records {
        serde_json::to_writer(&mut out, rec).map_err(io)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}
