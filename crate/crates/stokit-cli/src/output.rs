//! Deterministic CSV/JSON artifact writers.
//!
//! Every artifact embeds the resolved experiment configuration and the
//! master seed, so outputs are self-describing. Floats are written with
//! Rust's shortest round-trip formatting, '.' decimal separator, and the
//! final row is newline-terminated.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn parse(s: &str) -> Option<Format> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "both" => Some(Format::Both),
            _ => None,
        }
    }

    pub fn wants_csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn wants_json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

/// Collects artifact files as they are written.
pub struct ArtifactSink {
    pub dir: PathBuf,
    /// Resolved config text embedded into every artifact.
    pub config_text: String,
    pub seed: u64,
    pub format: Format,
    pub files: Vec<String>,
}

impl ArtifactSink {
    pub fn new(dir: &Path, config_text: String, seed: u64, format: Format) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactSink { dir: dir.to_path_buf(), config_text, seed, format, files: Vec::new() })
    }

    /// Write a CSV artifact: '#'-prefixed config lines, a mandatory header
    /// row, then the data rows.
    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl Iterator<Item = Vec<String>>,
    ) -> std::io::Result<()> {
        if !self.format.wants_csv() {
            return Ok(());
        }
        let path = self.dir.join(name);
        let mut out = String::new();
        out.push_str(&format!("# seed = {}\n", self.seed));
        for line in self.config_text.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let mut f = fs::File::create(&path)?;
        f.write_all(out.as_bytes())?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Write a JSON artifact wrapping the payload with the resolved config
    /// and seed.
    pub fn json<T: Serialize>(&mut self, name: &str, payload: &T) -> std::io::Result<()> {
        if !self.format.wants_json() {
            return Ok(());
        }
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            seed: u64,
            config: Vec<&'a str>,
            data: &'a T,
        }
        let env = Envelope {
            seed: self.seed,
            config: self.config_text.lines().collect(),
            data: payload,
        };
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(serde_json::to_string_pretty(&env)?.as_bytes())?;
        f.write_all(b"\n")?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// JSON-lines artifact: one record per line.
    pub fn jsonl<T: Serialize>(&mut self, name: &str, records: &[T]) -> std::io::Result<()> {
        if !self.format.wants_json() {
            return Ok(());
        }
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)?;
        for r in records {
            f.write_all(serde_json::to_string(r)?.as_bytes())?;
            f.write_all(b"\n")?;
        }
        self.files.push(name.to_string());
        Ok(())
    }
}

pub fn fmt_f64(v: f64) -> String {
    v.to_string()
}
