//! Run manifest: hash of the inputs, echo of the effective parameters and
//! checksums of every artifact written.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.toml";

/// An input file, or an embedded preset, by label and content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Input {
    pub label: String,
    pub bytes: Vec<u8>,
}

impl Input {
    pub fn text(&self) -> Result<&str, CliError> {
        std::str::from_utf8(&self.bytes).map_err(|e| CliError::Parse(format!("{}: not UTF-8: {e}", self.label)))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash over input contents and command-line overrides. Labels are left
/// out so the hash depends on bytes only.
pub fn config_hash(inputs: &[&Input], overrides: &[(String, String)]) -> String {
    let mut h = Sha256::new();
    for i in inputs {
        h.update((i.bytes.len() as u64).to_le_bytes());
        h.update(&i.bytes);
    }
    for (k, v) in overrides {
        h.update(format!("{k}={v}\n").as_bytes());
    }
    hex::encode(h.finalize())
}

pub struct Manifest<'a> {
    pub command: &'a str,
    pub inputs: Vec<(&'a str, &'a Input)>,
    pub overrides: Vec<(String, String)>,
    pub parameters: Option<toml::Table>,
    pub extra: toml::Table,
}

impl Manifest<'_> {
    /// Write `manifest.toml` listing `artifacts` (already present in `dir`).
    pub fn write(&self, dir: &Path, artifacts: &[String]) -> Result<(), CliError> {
        let mut t = toml::Table::new();
        t.insert("tool".into(), "snapnet".into());
        t.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        t.insert("command".into(), self.command.into());
        let ins: Vec<&Input> = self.inputs.iter().map(|(_, i)| *i).collect();
        t.insert("config_sha256".into(), config_hash(&ins, &self.overrides).into());
        let mut inputs = toml::Table::new();
        for (role, i) in &self.inputs {
            let mut e = toml::Table::new();
            e.insert("source".into(), i.label.clone().into());
            e.insert("sha256".into(), sha256_hex(&i.bytes).into());
            inputs.insert((*role).into(), e.into());
        }
        t.insert("inputs".into(), inputs.into());
        if !self.overrides.is_empty() {
            let o: toml::Table = self.overrides.iter().map(|(k, v)| (k.clone(), v.clone().into())).collect();
            t.insert("overrides".into(), o.into());
        }
        for (k, v) in &self.extra {
            t.insert(k.clone(), v.clone());
        }
        if let Some(p) = &self.parameters {
            t.insert("parameters".into(), p.clone().into());
        }
        let mut arts = Vec::new();
        for name in artifacts {
            let bytes = fs::read(dir.join(name))?;
            let mut e = toml::Table::new();
            e.insert("file".into(), name.clone().into());
            e.insert("bytes".into(), (bytes.len() as i64).into());
            e.insert("sha256".into(), sha256_hex(&bytes).into());
            arts.push(toml::Value::Table(e));
        }
        t.insert("artifacts".into(), arts.into());
        let text = toml::to_string_pretty(&t).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}
