//! Flat key=value experiment config files with `[section]` headers.
//!
//! ```text
//! [data]
//! source = blocks
//! n = 1000
//! blocks = 10
//!
//! [method.coo]
//! schedule = coo
//! ```
//!
//! Lines starting with `#` are comments. A stable hash of the canonical
//! key/value rendering is embedded in every output for provenance.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {}: unterminated section header", idx + 1))?;
                current = name.trim().to_ascii_lowercase();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", idx + 1))?;
            if current.is_empty() {
                bail!("line {}: key outside any [section]", idx + 1);
            }
            sections
                .get_mut(&current)
                .unwrap()
                .insert(key.trim().to_ascii_lowercase(), value.trim().to_string());
        }
        Ok(Self { sections })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key)
            .ok_or_else(|| anyhow!("config is missing [{section}] {key}"))
    }

    pub fn parse_value<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| anyhow!("bad value for [{section}] {key}: '{raw}'")),
        }
    }

    pub fn parse_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.parse_value(section, key)?.unwrap_or(default))
    }

    pub fn parse_bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(section, key) {
            None => Ok(default),
            Some(raw) => match raw.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                other => Err(anyhow!("bad boolean for [{section}] {key}: '{other}'")),
            },
        }
    }

    /// Sections named `prefix.<name>`, e.g. per-method blocks.
    pub fn subsections(&self, prefix: &str) -> Vec<(String, &BTreeMap<String, String>)> {
        let full = format!("{prefix}.");
        self.sections
            .iter()
            .filter_map(|(name, map)| name.strip_prefix(&full).map(|rest| (rest.to_string(), map)))
            .collect()
    }

    /// Override or insert one value (CLI flags over file content).
    pub fn set(&mut self, section: &str, key: &str, value: String) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value);
    }

    /// FNV-1a over the canonical `section.key=value` rendering. The
    /// `[output]` section is excluded: where results are written is not
    /// part of the experiment identity.
    pub fn content_hash(&self) -> u64 {
        let mut canonical = String::new();
        for (section, map) in &self.sections {
            if section == "output" {
                continue;
            }
            for (key, value) in map {
                canonical.push_str(section);
                canonical.push('.');
                canonical.push_str(key);
                canonical.push('=');
                canonical.push_str(value);
                canonical.push('\n');
            }
        }
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for b in canonical.bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    pub fn parse_seeds(&self, section: &str, key: &str, default: &[u64]) -> Result<Vec<u64>> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(raw) => parse_seed_list(raw),
        }
    }
}

pub fn parse_seed_list(raw: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        seeds.push(
            part.parse()
                .map_err(|_| anyhow!("bad seed '{part}' in list"))?,
        );
    }
    if seeds.is_empty() {
        bail!("empty seed list");
    }
    Ok(seeds)
}
