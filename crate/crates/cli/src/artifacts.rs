use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub ci: Option<(f64, f64)>,
    pub target: String,
    pub pass: bool,
}

impl Verdict {
    pub fn new(name: impl Into<String>, value: f64, target: impl Into<String>, pass: bool) -> Verdict {
        Verdict { name: name.into(), value, ci: None, target: target.into(), pass }
    }

    pub fn with_ci(mut self, lo: f64, hi: f64) -> Verdict {
        self.ci = Some((lo, hi));
        self
    }

    /// One report line: name, value with interval, target, PASS/FAIL.
    pub fn line(&self) -> String {
        let ci = match self.ci {
            Some((lo, hi)) => format!(" [{lo:.4}, {hi:.4}]"),
            None => String::new(),
        };
        format!(
            "{:<28} {:>12.5}{ci}  target {}  {}",
            self.name,
            self.value,
            self.target,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub radius: Option<f64>,
    pub critical_radius: Option<f64>,
    pub wall_time: f64,
    pub verdicts: Vec<Verdict>,
    pub flags: BTreeMap<String, serde_json::Value>,
    pub all_pass: bool,
}

/// Git blob hash of `bytes`.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// In-memory CSV table written out atomically.
pub struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("write to memory");
        Table { w }
    }

    pub fn row<I, T>(&mut self, fields: I)
    where
        I: IntoIterator<Item = T>,
        T: ToString,
    {
        let rec: Vec<String> = fields.into_iter().map(|f| f.to_string()).collect();
        self.w.write_record(&rec).expect("write to memory");
    }

    pub fn save(self, path: &Path) -> Result<()> {
        let bytes = self.w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        write_atomic(path, &bytes)
    }
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin`
        assert_eq!(git_blob_sha1(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
        assert_eq!(git_blob_sha1(b""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn table_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut t = Table::new(&["replica", "x"]);
        t.row([0.to_string(), 0.1f64.to_string()]);
        t.save(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "replica,x\n0,0.1\n");
    }
}
