//! Run configuration: line-oriented `key = value` text grouped by `[section]`.
//!
//! Keys before the first section header belong to `run`. Lookups that fall
//! back to a default record the default, so after a command has read its
//! settings the file holds the fully resolved configuration and can be
//! written out as the run manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const DEFAULT_SECTION: &str = "run";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RunConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::new();
        let mut section = DEFAULT_SECTION.to_string();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(i + 1, "unterminated section header"))?
                    .trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(Error::parse(i + 1, format!("bad section name `{name}`")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(i + 1, format!("expected key = value, got `{line}`"))
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::parse(i + 1, "empty key"));
            }
            cfg.set(&section, k, v.trim());
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Io(io::Error::new(
                e.kind(),
                format!("cannot read config {}: {e}", path.display()),
            ))
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Display) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.to_string());
    }

    /// Applies a `section.key=value` override; a bare `key=value` targets `run`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("override `{spec}` is not key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .unwrap_or((DEFAULT_SECTION, path.trim()));
        if key.is_empty() || section.is_empty() {
            return Err(Error::invalid(format!(
                "override `{spec}` has an empty key"
            )));
        }
        self.set(section, key, value.trim());
        Ok(())
    }

    pub fn value<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::invalid(format!("[{section}] {key} = `{v}` is malformed"))),
        }
    }

    /// Value of `key`, recording `default` when it is absent.
    pub fn or<T: FromStr + Display>(&mut self, section: &str, key: &str, default: T) -> Result<T> {
        match self.value(section, key)? {
            Some(v) => Ok(v),
            None => {
                self.set(section, key, &default);
                Ok(default)
            }
        }
    }

    /// Comma-separated list, recording `default` when absent.
    pub fn list_or<T: FromStr + Display>(
        &mut self,
        section: &str,
        key: &str,
        default: Vec<T>,
    ) -> Result<Vec<T>> {
        match self.get(section, key) {
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|_| {
                        Error::invalid(format!("[{section}] {key}: `{s}` is malformed"))
                    })
                })
                .collect(),
            None => {
                let text: Vec<String> = default.iter().map(ToString::to_string).collect();
                self.set(section, key, text.join(", "));
                Ok(default)
            }
        }
    }

    /// Sections in name order, keys sorted within each.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, keys) in &self.sections {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{name}]\n"));
            for (k, v) in keys {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>, header: &str) -> Result<()> {
        let mut text = String::new();
        for line in header.lines() {
            text.push_str(&format!("# {line}\n"));
        }
        text.push_str(&self.to_text());
        fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "seed = 7\n# comment\n[model]\nlx = 4\nly=4  # trailing\nomega = 1.5\n\n[rbm]\ndeltas = -2, 0, 2.5\n";

    #[test]
    fn parses_sections_and_defaults() {
        let mut c = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.get("run", "seed"), Some("7"));
        assert_eq!(c.value::<usize>("model", "ly").unwrap(), Some(4));
        assert_eq!(c.or("model", "omega", 1.0).unwrap(), 1.5);
        assert_eq!(c.or("model", "v0", 3.0).unwrap(), 3.0);
        assert_eq!(c.get("model", "v0"), Some("3"));
        assert_eq!(
            c.list_or::<f64>("rbm", "deltas", vec![]).unwrap(),
            vec![-2.0, 0.0, 2.5]
        );
        assert_eq!(
            c.list_or("rbm", "other", vec![1usize, 2]).unwrap(),
            vec![1, 2]
        );
        assert!(c.value::<usize>("model", "omega").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::parse(SAMPLE).unwrap();
        c.apply_override("model.lx=5").unwrap();
        c.apply_override("seed=9").unwrap();
        assert_eq!(c.get("model", "lx"), Some("5"));
        assert_eq!(c.get("run", "seed"), Some("9"));
        assert!(c.apply_override("novalue").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::parse(SAMPLE).unwrap();
        c.or("cnn", "epochs", 20usize).unwrap();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(
            RunConfig::parse("[model\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("x = 1\njunk\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(RunConfig::parse("= 3").is_err());
    }
}
