//! Matrix files: CSV (one row per line) or JSON (`{"n": .., "d": [[..]]}`).

use std::fmt::Write as _;
use std::path::Path;

use edmp_core::DistanceMatrix;
use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn read_matrix(path: &Path) -> Result<DistanceMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix(&text)
}

/// Parses either format; JSON is recognized by a leading `{`.
pub fn parse_matrix(text: &str) -> Result<DistanceMatrix, CliError> {
    let rows = if text.trim_start().starts_with('{') {
        parse_json(text)?
    } else {
        parse_csv(text)?
    };
    Ok(DistanceMatrix::from_rows(&rows)?)
}

fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        CliError::Parse(format!("line {}: bad number {field:?}", lineno + 1))
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    check_square(&rows)?;
    Ok(rows)
}

fn parse_json(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let n = doc
        .get("n")
        .and_then(Value::as_u64)
        .ok_or_else(|| CliError::Parse("missing integer field \"n\"".into()))? as usize;
    let d = doc
        .get("d")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::Parse("missing array field \"d\"".into()))?;
    let rows = d
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.as_array()
                .ok_or_else(|| CliError::Parse(format!("row {} is not an array", i + 1)))?
                .iter()
                .map(|x| {
                    x.as_f64().ok_or_else(|| {
                        CliError::Parse(format!("row {}: non-numeric entry {x}", i + 1))
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_square(&rows)?;
    if rows.len() != n {
        return Err(CliError::Parse(format!(
            "\"n\" is {n} but \"d\" has {} rows",
            rows.len()
        )));
    }
    Ok(rows)
}

fn check_square(rows: &[Vec<f64>]) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::Parse("no matrix rows".into()));
    }
    let n = rows.len();
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(CliError::Parse(format!(
            "row {} has {} entries, expected {n}",
            i + 1,
            row.len()
        )));
    }
    Ok(())
}

/// CSV with 17 significant digits per entry, preceded by `# ` comment lines.
pub fn to_csv(d: &DistanceMatrix, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for row in d.to_rows() {
        let fields: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

/// JSON document; `extra` keys are merged at the top level.
pub fn to_json(d: &DistanceMatrix, extra: serde_json::Map<String, Value>) -> String {
    let mut doc = json!({ "n": d.n(), "d": d.to_rows() });
    doc.as_object_mut().expect("object").extend(extra);
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}
