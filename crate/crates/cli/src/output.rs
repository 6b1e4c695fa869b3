use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{Map, Number, Value};

use crate::args::Format;

/// Writes tables in the chosen format and figures as given.
pub struct Output {
    dir: PathBuf,
    format: Format,
}

impl Output {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), format })
    }

    /// Writes `<stem>.csv`, or `<stem>.json` holding the same rows as records.
    pub fn table(&self, stem: &str, csv: &str) -> Result<PathBuf> {
        match self.format {
            Format::Csv => self.file(&format!("{stem}.csv"), csv),
            Format::Json => {
                let mut json = serde_json::to_string_pretty(&csv_to_json(csv))?;
                json.push('\n');
                self.file(&format!("{stem}.json"), &json)
            }
        }
    }

    pub fn file(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// Array of records keyed by header. A line with no numeric field is a
/// header; a second header starts a new block, so a CSV holding two tables
/// becomes an array of two arrays.
pub fn csv_to_json(csv: &str) -> Value {
    let mut blocks: Vec<Vec<Value>> = Vec::new();
    let mut header: Option<Vec<&str>> = None;
    for line in csv.lines().filter(|l| !l.is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.iter().all(|f| is_name(f)) {
            header = Some(fields);
            blocks.push(Vec::new());
            continue;
        }
        let keys = header.as_ref().expect("first line is a header");
        let record: Map<String, Value> = keys.iter().zip(&fields).map(|(k, v)| (k.to_string(), cell(v))).collect();
        blocks.last_mut().expect("block started").push(Value::Object(record));
    }
    match blocks.len() {
        1 => Value::Array(blocks.remove(0)),
        _ => Value::Array(blocks.into_iter().map(Value::Array).collect()),
    }
}

fn is_name(field: &str) -> bool {
    field.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && field.parse::<f64>().is_err()
}

fn cell(field: &str) -> Value {
    if let Ok(i) = field.parse::<i64>() {
        return Value::Number(i.into());
    }
    match field.parse::<f64>().ok().and_then(Number::from_f64) {
        Some(n) => Value::Number(n),
        None => Value::String(field.to_string()),
    }
}
