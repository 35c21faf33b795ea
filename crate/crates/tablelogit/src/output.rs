//! Output artifacts. Every file carries the config hash and seed; nothing is
//! written until a command has finished, and each file is renamed into
//! place atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

/// Files produced by a command, in write order.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn csv(&mut self, name: &str, prov: &Provenance, header: &[String], rows: &[Vec<String>]) {
        let mut buf = format!("# config_hash={} seed={}\n", prov.config_hash, prov.seed).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header).expect("in-memory write");
            for r in rows {
                w.write_record(r).expect("in-memory write");
            }
            w.flush().expect("in-memory flush");
        }
        self.files.push((name.to_string(), buf));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, prov: &Provenance, result: &T) {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            config_hash: &'a str,
            seed: u64,
            result: &'a T,
        }
        let mut buf = serde_json::to_vec_pretty(&Wrapped {
            config_hash: &prov.config_hash,
            seed: prov.seed,
            result,
        })
        .expect("result serializes");
        buf.push(b'\n');
        self.files.push((name.to_string(), buf));
    }

    /// Write every file into `dir`. On failure, files already placed by
    /// this call are removed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let target = dir.join(name);
            let placed = (|| -> std::io::Result<()> {
                let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
                tmp.write_all(bytes)?;
                tmp.as_file().sync_all()?;
                tmp.persist(&target).map_err(|e| e.error)?;
                Ok(())
            })();
            if let Err(e) = placed {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(CliError::io(target, e));
            }
            written.push(target);
        }
        Ok(written)
    }
}

/// Shortest representation that parses back to the same value; `NA` for
/// missing.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), num)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn files_carry_provenance() {
        let prov = Provenance {
            config_hash: "abc".into(),
            seed: 3,
        };
        let mut a = Artifacts::default();
        a.csv("t.csv", &prov, &["x".into()], &[vec![num(0.1)], vec![opt(None)]]);
        a.json("s.json", &prov, &vec![1, 2]);
        let dir = tempfile::tempdir().unwrap();
        a.write(dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(csv, "# config_hash=abc seed=3\nx\n0.1\nNA\n");
        let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("s.json")).unwrap()).unwrap();
        assert_eq!(json["config_hash"], "abc");
        assert_eq!(json["seed"], 3);
    }
}
