//! Atomic artifact writing and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::RunError;

pub struct Outputs {
    dir: PathBuf,
    inputs: Vec<PathBuf>,
    written: Vec<String>,
}

fn absolute(path: &Path) -> PathBuf {
    if let Ok(p) = fs::canonicalize(path) {
        return p;
    }
    match (path.parent(), path.file_name()) {
        (Some(parent), Some(name)) if !parent.as_os_str().is_empty() => absolute(parent).join(name),
        _ => std::env::current_dir()
            .map(|d| d.join(path))
            .unwrap_or_else(|_| path.to_path_buf()),
    }
}

impl Outputs {
    pub fn new(dir: &Path, inputs: &[PathBuf]) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|e| RunError::io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            inputs: inputs.iter().map(|p| absolute(p)).collect(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Writes `name` inside the output directory through a temporary file
    /// that is renamed into place.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let target = self.dir.join(name);
        let abs = absolute(&target);
        if self.inputs.contains(&abs) {
            return Err(RunError::io(format!(
                "refusing to overwrite input file {}",
                target.display()
            )));
        }
        let io = |e: std::io::Error| RunError::io(format!("writing {}: {e}", target.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(contents.as_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&target).map_err(|e| io(e.error))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut text = qmetro::measurement::to_json_string(value).map_err(RunError::runtime)?;
        text.push('\n');
        self.write(name, &text)
    }
}
