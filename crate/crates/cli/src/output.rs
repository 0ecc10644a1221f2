use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Stamp {
    pub command: String,
    pub config_sha256: String,
    pub sigma_rule: String,
    pub sigma_note: String,
    pub version: String,
}

impl Stamp {
    fn comment_lines(&self) -> String {
        format!(
            "# adiabat {} {}\n# config_sha256 {}\n# sigma_rule {}\n# sigma_note {}\n",
            self.version, self.command, self.config_sha256, self.sigma_rule, self.sigma_note
        )
    }
}

pub struct Writer {
    dir: PathBuf,
    stamp: Stamp,
}

impl Writer {
    pub fn new(dir: &Path, stamp: Stamp) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("field `out_dir`: cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), stamp })
    }

    /// CSV with the provenance as leading `#` lines, then the header.
    pub fn csv(&self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<PathBuf, CliError> {
        let mut text = self.stamp.comment_lines();
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        self.write(name, &text)
    }

    /// Pretty JSON with the provenance under `"stamp"`.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            stamp: &'a Stamp,
            #[serde(flatten)]
            body: &'a T,
        }
        let text = serde_json::to_string_pretty(&Doc { stamp: &self.stamp, body }).expect("report serializes");
        self.write(name, &(text + "\n"))
    }

    /// Plain-text report with the provenance as leading `#` lines.
    pub fn text(&self, name: &str, lines: &[String]) -> Result<PathBuf, CliError> {
        let mut text = self.stamp.comment_lines();
        for l in lines {
            text.push_str(l);
            text.push('\n');
        }
        self.write(name, &text)
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::Config(format!("field `out_dir`: cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

pub fn sci(x: f64) -> String {
    format!("{x:.10e}")
}
