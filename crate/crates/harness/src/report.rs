//! CSV and JSON serialization of result tables.
//!
//! CSV files start with `# key=value` lines carrying the metadata, followed
//! by a header and one line per cell; missing numbers are empty cells.

use std::io::{Read, Write};
use std::path::Path;

use highlight_core::AgentType;
use serde::Serialize;

use crate::error::{io_error, HarnessError, Result};
use crate::sweep::{CellStatus, ResultRow, ResultTable, TableMetadata};

/// Column order of the CSV body.
pub const CSV_COLUMNS: [&str; 8] = [
    "k",
    "policy",
    "agent",
    "mean_loss",
    "std_error",
    "median_revealed",
    "status",
    "note",
];

/// The JSON schema shipped with the crate.
pub const RESULT_SCHEMA: &str = include_str!("../schema/result_table.schema.json");

/// Metadata fields kept as text even when they look numeric.
const TEXT_FIELDS: [&str; 3] = ["config_hash", "target", "evaluation"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metadata_pairs(meta: &TableMetadata) -> Result<Vec<(String, String)>> {
    // Reuse the serde field order so CSV and JSON never drift apart.
    let value = serde_json::to_value(meta)?;
    let object = value.as_object().expect("metadata is a struct");
    Ok(object
        .iter()
        .map(|(k, v)| {
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            (k.clone(), text)
        })
        .collect())
}

pub fn write_csv<W: Write>(table: &ResultTable, mut writer: W) -> Result<()> {
    for (key, value) in metadata_pairs(&table.metadata)? {
        writeln!(writer, "# {key}={value}").map_err(io_error("<csv writer>"))?;
    }
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(CSV_COLUMNS)?;
    for row in &table.rows {
        csv.write_record([
            row.k.to_string(),
            row.policy.clone(),
            row.agent.to_string(),
            opt(row.mean_loss),
            opt(row.std_error),
            opt(row.median_revealed),
            row.status.to_string(),
            row.note.clone(),
        ])?;
    }
    csv.flush().map_err(io_error("<csv writer>"))?;
    Ok(())
}

fn parse_opt(cell: &str, what: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| HarnessError::MalformedReport(format!("bad {what} '{cell}'")))
}

pub fn read_csv<R: Read>(mut reader: R) -> Result<ResultTable> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(io_error("<csv reader>"))?;
    let mut meta = serde_json::Map::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let (key, value) = line[1..]
            .trim()
            .split_once('=')
            .ok_or_else(|| HarnessError::MalformedReport(format!("bad metadata line '{line}'")))?;
        let parsed = Some(key)
            .filter(|k| !TEXT_FIELDS.contains(k))
            .and_then(|_| serde_json::from_str::<serde_json::Value>(value).ok())
            .filter(serde_json::Value::is_number)
            .unwrap_or_else(|| serde_json::Value::String(value.to_string()));
        meta.insert(key.to_string(), parsed);
    }
    let metadata: TableMetadata = serde_json::from_value(serde_json::Value::Object(meta))
        .map_err(|e| HarnessError::MalformedReport(format!("metadata: {e}")))?;

    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(HarnessError::MalformedReport(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record?;
        let k = record[0]
            .parse()
            .map_err(|_| HarnessError::MalformedReport(format!("bad k '{}'", &record[0])))?;
        let agent: AgentType = record[2]
            .parse()
            .map_err(|_| HarnessError::MalformedReport(format!("bad agent '{}'", &record[2])))?;
        let status = match &record[6] {
            "ok" => CellStatus::Ok,
            "skipped" => CellStatus::Skipped,
            other => return Err(HarnessError::MalformedReport(format!("bad status '{other}'"))),
        };
        rows.push(ResultRow {
            k,
            policy: record[1].to_string(),
            agent,
            mean_loss: parse_opt(&record[3], "mean_loss")?,
            std_error: parse_opt(&record[4], "std_error")?,
            median_revealed: parse_opt(&record[5], "median_revealed")?,
            status,
            note: record[7].to_string(),
        });
    }
    Ok(ResultTable { metadata, rows })
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn read_json<R: Read>(reader: R) -> Result<ResultTable> {
    Ok(serde_json::from_reader(reader)?)
}

/// Writes `table` to `path`, as JSON if the extension is `.json` and as CSV
/// otherwise.
pub fn save(table: &ResultTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    let file = std::fs::File::create(path).map_err(io_error(path))?;
    let mut out = std::io::BufWriter::new(file);
    if path.extension().is_some_and(|e| e == "json") {
        out.write_all(to_json(table)?.as_bytes()).map_err(io_error(path))?;
    } else {
        write_csv(table, &mut out)?;
    }
    out.flush().map_err(io_error(path))
}

pub fn load(path: &Path) -> Result<ResultTable> {
    let file = std::fs::File::open(path).map_err(io_error(path))?;
    if path.extension().is_some_and(|e| e == "json") {
        read_json(file)
    } else {
        read_csv(file)
    }
}

/// Plain-text table for the terminal.
pub fn render_text(table: &ResultTable) -> String {
    let m = &table.metadata;
    let mut out = format!(
        "n = {} (training {}), revealable = {}, R² = {:.4}, alpha = {}, config {}\n",
        m.sample_size,
        m.training_size,
        m.revealable,
        m.r_squared,
        m.alpha,
        &m.config_hash[..12.min(m.config_hash.len())]
    );
    out += &format!(
        "{:>4}  {:<28} {:<14} {:>10} {:>10} {:>8}\n",
        "k", "policy", "agent", "loss", "se", "revealed"
    );
    for r in &table.rows {
        let num = |v: Option<f64>, p: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.p$}"));
        out += &format!(
            "{:>4}  {:<28} {:<14} {:>10} {:>10} {:>8}{}\n",
            r.k,
            r.policy,
            r.agent.to_string(),
            num(r.mean_loss, 4),
            num(r.std_error, 4),
            num(r.median_revealed, 1),
            if r.note.is_empty() { String::new() } else { format!("  ({})", r.note) }
        );
    }
    out
}
