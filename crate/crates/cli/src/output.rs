//! Artifact writers: pretty JSON with sorted keys, CSV with a provenance preamble.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

/// JSON report `{config, master_seed, ...body}`; keys come out sorted because
/// `serde_json::Map` is a `BTreeMap`.
pub fn write_json<T: Serialize>(cfg: &ExperimentConfig, path: &Path, body: &T) -> Result<PathBuf, CliError> {
    let mut root = Map::new();
    root.insert("config".into(), cfg.resolved());
    root.insert("master_seed".into(), Value::from(cfg.master_seed()));
    match serde_json::to_value(body).map_err(|e| CliError::Numeric(e.to_string()))? {
        Value::Object(m) => root.extend(m),
        other => {
            root.insert("result".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(root)).map_err(|e| CliError::Numeric(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(path.to_path_buf())
}

pub fn preamble(cfg: &ExperimentConfig) -> Vec<String> {
    vec![format!("config: {}", cfg.resolved()), format!("master_seed: {}", cfg.master_seed())]
}

/// CSV with `# ` preamble lines, a header row and LF line endings.
pub fn write_csv(cfg: &ExperimentConfig, path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
    let mut buf = Vec::new();
    for line in preamble(cfg) {
        writeln!(buf, "# {line}")?;
    }
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    std::fs::write(path, buf)?;
    Ok(path.to_path_buf())
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
