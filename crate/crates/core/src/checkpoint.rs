//! Parameter checkpoints and history tables.
//!
//! A checkpoint is a binary dump of one flat `f64` parameter buffer next to a
//! text manifest of `key=value` lines describing how to interpret it.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RNQS";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Ordered `key=value` metadata.
    pub manifest: Vec<(String, String)>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(params: Vec<f64>) -> Self {
        Self {
            manifest: Vec::new(),
            params,
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.manifest.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.manifest
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)
            .ok_or_else(|| Error::invalid(format!("checkpoint manifest lacks `{key}`")))?
            .parse()
            .map_err(|_| Error::invalid(format!("checkpoint manifest has a malformed `{key}`")))
    }

    /// Writes `<path>` (binary) and `<path>.manifest.txt`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::with_capacity(16 + 8 * self.params.len());
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        fs::write(path, bytes)?;
        let mut text = format!("format_version={VERSION}\n");
        for (k, v) in &self.manifest {
            text.push_str(&format!("{k}={v}\n"));
        }
        fs::write(manifest_path(path), text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(Error::invalid("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        if bytes.len() != 16 + 8 * n {
            return Err(Error::invalid("truncated checkpoint"));
        }
        let params = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let text = fs::read_to_string(manifest_path(path))?;
        let mut manifest = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, "expected key=value"))?;
            if k != "format_version" {
                manifest.push((k.to_string(), v.to_string()));
            }
        }
        Ok(Self { manifest, params })
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.txt");
    s.into()
}

/// Write a CSV with a header row. Floats use Rust's shortest round-trip form.
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    fs::write(path, csv_string(header, rows))?;
    Ok(())
}

pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.bin");
        let c = Checkpoint::new(vec![1.5, -0.25, f64::MIN_POSITIVE, 3e300])
            .with("kind", "rbm")
            .with("n_hidden", 9);
        c.save(&p).unwrap();
        let back = Checkpoint::load(&p).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.require::<usize>("n_hidden").unwrap(), 9);
        assert!(back.require::<usize>("missing").is_err());
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        fs::write(&p, b"hello world, not a checkpoint").unwrap();
        assert!(Checkpoint::load(&p).is_err());
    }

    #[test]
    fn csv_layout() {
        let s = csv_string(&["epoch", "loss"], &[vec![1.0, 0.5], vec![2.0, 0.25]]);
        assert_eq!(s, "epoch,loss\n1,0.5\n2,0.25\n");
    }
}
