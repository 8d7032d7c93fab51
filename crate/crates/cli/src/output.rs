//! All-or-nothing output writing.
//!
//! Every output is first written to a temporary file next to its final
//! location. Nothing becomes visible until [`Staged::commit`], and a failed
//! commit removes whatever it had already moved into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tempfile::NamedTempFile;

#[derive(Default)]
pub struct Staged {
    files: Vec<(PathBuf, NamedTempFile)>,
}

impl Staged {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("staging {}", path.display()))?;
        tmp.write_all(contents.as_ref())
            .and_then(|_| tmp.flush())
            .with_context(|| format!("writing {}", path.display()))?;
        self.files.push((path.to_path_buf(), tmp));
        Ok(())
    }

    pub fn commit(self) -> Result<()> {
        let mut done: Vec<PathBuf> = Vec::new();
        for (path, tmp) in self.files {
            if let Err(e) = tmp.persist(&path) {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                return Err(e.error).with_context(|| format!("moving output into {}", path.display()));
            }
            done.push(path);
        }
        Ok(())
    }
}

/// Fails early when an input is missing or not a regular file.
pub fn check_input(path: &Path, what: &str) -> Result<()> {
    let meta = fs::metadata(path).with_context(|| format!("{what} {}", path.display()))?;
    anyhow::ensure!(meta.is_file(), "{what} {} is not a file", path.display());
    Ok(())
}

/// Fails early when an output cannot be placed: its directory must exist.
pub fn check_output(path: &Path, what: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        anyhow::ensure!(dir.is_dir(), "directory for {what} {} does not exist", path.display());
    }
    anyhow::ensure!(!path.is_dir(), "{what} {} is a directory", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_visible_before_commit() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let mut staged = Staged::new();
        staged.add(&a, "hello").unwrap();
        assert!(!a.exists());
        staged.commit().unwrap();
        assert_eq!(fs::read_to_string(&a).unwrap(), "hello");
    }

    #[test]
    fn dropped_stage_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut staged = Staged::new();
        staged.add(&dir.path().join("a.txt"), "x").unwrap();
        drop(staged);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn failed_commit_rolls_back() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let blocked = dir.path().join("sub");
        let mut staged = Staged::new();
        staged.add(&a, "x").unwrap();
        fs::create_dir(&blocked).unwrap();
        staged.add(&blocked.join("b.txt"), "y").unwrap();
        // replace the target with a directory so the rename fails
        fs::create_dir(blocked.join("b.txt")).unwrap();
        assert!(staged.commit().is_err());
        assert!(!a.exists());
    }
}
