use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Destination directory, created on first write.
#[derive(Clone, Debug)]
pub struct Output {
    dir: PathBuf,
    vtk: bool,
}

impl Output {
    pub fn new(dir: PathBuf, vtk: bool) -> Self {
        Self { dir, vtk }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn vtk(&self) -> bool {
        self.vtk
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::Failed(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
