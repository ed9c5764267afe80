use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::json;

/// Written as `manifest.json` next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub version: String,
    pub outputs: Vec<String>,
    /// Wall-clock seconds; the only field that differs between reruns.
    pub duration_secs: f64,
}

/// An output directory that remembers what was written into it.
pub(crate) struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
    started: Instant,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_text(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.written.push(path.display().to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write_text(name, &json::to_string_pretty(value)?)
    }

    pub fn finish<C: Serialize>(mut self, command: &str, argv: &[String], config: &C, seeds: Vec<u64>) -> Result<Vec<String>> {
        let manifest = RunManifest {
            command: command.to_string(),
            argv: argv.to_vec(),
            config: serde_json::to_value(config)?,
            seeds,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.written.clone(),
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(self.written)
    }
}

/// `k,<column>...` rows for `k = 1..=len`.
pub(crate) fn curves_csv(columns: &[(&str, &[f64])]) -> String {
    let mut out = String::from("k");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let len = columns.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    for k in 0..len {
        out.push_str(&(k + 1).to_string());
        for (_, c) in columns {
            out.push(',');
            if let Some(v) = c.get(k) {
                out.push_str(&format!("{v:?}"));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_csv_layout() {
        let a = [1.0, 0.5];
        let b = [0.25];
        assert_eq!(curves_csv(&[("a", &a), ("b", &b)]), "k,a,b\n1,1.0,0.25\n2,0.5,\n");
    }

    #[test]
    fn manifest_lists_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_json("r.json", &[1.5]).unwrap();
        out.write_text("sub/c.csv", "k\n").unwrap();
        let written = out.finish("eval", &["autkc".into()], &serde_json::json!({"K": 3}), vec![0]).unwrap();
        assert_eq!(written.len(), 3, "outputs plus the manifest");
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["command"], "eval");
        assert_eq!(m["config"]["K"], 3);
        assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
        assert!(dir.path().join("sub/c.csv").exists());
    }
}
