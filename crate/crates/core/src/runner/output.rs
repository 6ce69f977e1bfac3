use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::RunConfig;
use crate::error::Result;

/// Shortest decimal that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// A CSV table whose first line echoes the effective config.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(cfg: &RunConfig, columns: &[&str]) -> Result<Self> {
        let mut text = format!("# config: {}\n", serde_json::to_string(cfg)?);
        text.push_str(&columns.join(","));
        text.push('\n');
        Ok(Self { text })
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        write_atomic(path, self.text.as_bytes())?;
        Ok(path.to_path_buf())
    }
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with the effective config under `config`.
pub fn write_json<T: Serialize>(cfg: &RunConfig, body: &T, path: &Path) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(&Artifact { config: cfg, body })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2e-9, 3.0_f64.powi(-7), std::f64::consts::PI] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(2.0), "2");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("ck-out-{}", std::process::id()));
        let p = dir.join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(dir).unwrap();
    }
}
