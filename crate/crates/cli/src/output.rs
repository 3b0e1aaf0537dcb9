//! Rendering and writing command results.

use std::io::Write;
use std::path::PathBuf;

use clap::ValueEnum;
use koksma::Result;
use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A finished command: a JSON result and, for tabular commands, a CSV body
/// plus `# key: value` summary lines.
pub struct Output {
    pub command: &'static str,
    pub result: Value,
    pub table: Option<Table>,
    /// Non-zero when the command ran but its check failed.
    pub exit_code: i32,
}

pub struct Table {
    pub summary: Vec<(String, String)>,
    pub csv: String,
}

impl Output {
    pub fn json(command: &'static str, result: impl Serialize) -> Result<Output> {
        Ok(Output {
            command,
            result: serde_json::to_value(result)?,
            table: None,
            exit_code: 0,
        })
    }

    pub fn tabular(
        command: &'static str,
        result: impl Serialize,
        summary: Vec<(String, String)>,
        csv: String,
    ) -> Result<Output> {
        Ok(Output {
            command,
            result: serde_json::to_value(result)?,
            table: Some(Table { summary, csv }),
            exit_code: 0,
        })
    }

    pub fn with_exit(mut self, code: i32) -> Self {
        self.exit_code = code;
        self
    }

    pub fn render(&self, cfg: &ExperimentConfig, format: Format) -> Result<String> {
        let config = serde_json::to_value(cfg)?;
        match (format, &self.table) {
            (Format::Csv, Some(t)) => {
                let mut s = format!("# command: {}\n# config: {}\n", self.command, config);
                for (k, v) in &t.summary {
                    s.push_str(&format!("# {k}: {v}\n"));
                }
                s.push_str(&t.csv);
                Ok(s)
            }
            (Format::Csv, None) => Err(koksma::Error::Config(format!(
                "`{}` writes JSON only",
                self.command
            ))),
            (Format::Json, _) => {
                let doc = serde_json::json!({
                    "command": self.command,
                    "config": config,
                    "result": self.result,
                });
                let mut s = serde_json::to_string_pretty(&doc)?;
                s.push('\n');
                Ok(s)
            }
        }
    }

    pub fn default_format(&self) -> Format {
        if self.table.is_some() {
            Format::Csv
        } else {
            Format::Json
        }
    }
}

/// Writes to `<dir>/<command>.<ext>` or to stdout.
pub fn emit(text: &str, command: &str, format: Format, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let ext = match format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            let path = dir.join(format!("{command}.{ext}"));
            std::fs::write(&path, text)?;
            println!("{}", path.display());
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Fixed 17-significant-digit formatting used in every CSV.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
