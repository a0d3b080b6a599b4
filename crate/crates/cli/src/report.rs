use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// What a subcommand produced: a verdict, the budget it was judged against,
/// the result body and an optional CSV artifact.
pub struct Outcome {
    pub pass: bool,
    pub budget: Value,
    pub result: Value,
    pub csv: Option<Vec<u8>>,
}

impl Outcome {
    pub fn new(pass: bool, budget: Value, result: Value) -> Self {
        Self { pass, budget, result, csv: None }
    }

    pub fn with_csv(mut self, csv: Vec<u8>) -> Self {
        self.csv = Some(csv);
        self
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema_version: u32,
    command: &'a str,
    pass: bool,
    budget: &'a Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<String>,
    result: &'a Value,
}

/// Writes the JSON report to `out` (stdout when absent) and the CSV
/// artifact to `csv` when both exist.
pub fn emit(command: &str, outcome: &Outcome, out: Option<&Path>, csv: Option<&PathBuf>) -> Result<()> {
    let csv_path = match (csv, &outcome.csv) {
        (Some(path), Some(bytes)) => {
            fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
            Some(path.display().to_string())
        }
        _ => None,
    };
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        pass: outcome.pass,
        budget: &outcome.budget,
        csv: csv_path,
        result: &outcome.result,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
