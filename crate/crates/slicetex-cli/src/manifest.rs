//! Run manifests: plain structured text, one `key = value` per line, written
//! next to every command's outputs. The embedded `config.*` snapshot makes a
//! manifest directly parseable as a config file, so any run can be replayed
//! from its manifest alone.

use crate::config::RunConfig;
use crate::{CmdError, CmdResult};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest {
            entries: Vec::new(),
        };
        m.push("manifest.format", "1");
        m.push("manifest.command", command);
        m
    }

    /// Appends an entry. Values are flattened to one line; keys must not be
    /// empty or contain `=`.
    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        debug_assert!(!key.is_empty() && !key.contains('='), "bad manifest key {key}");
        let value = value.into().replace(['\n', '\r'], " ");
        self.entries.push((key, value));
    }

    /// Embeds the full config snapshot under the `config.` prefix.
    pub fn push_config(&mut self, cfg: &RunConfig) {
        for line in cfg.serialize().lines() {
            let (k, v) = line.split_once(" = ").expect("canonical config line");
            self.push(format!("config.{k}"), v);
        }
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> CmdResult<()> {
        std::fs::write(path, self.serialize())
            .map_err(|e| CmdError::runtime(format!("cannot write {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> CmdResult<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CmdError::runtime(format!(
                    "manifest line {}: expected key = value",
                    lineno + 1
                )));
            };
            entries.push((k.trim().to_owned(), v.trim().to_owned()));
        }
        Ok(Manifest { entries })
    }

    pub fn load(path: &Path) -> CmdResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError::runtime(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// First value stored under `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// All `(key, value)` pairs whose key starts with `prefix`.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> {
        self.entries
            .iter()
            .filter(move |(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
