//! Outputs are written to a temporary sibling and renamed into place, so a
//! failed command never leaves a partial file behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::failure::{Classify, CliResult, Failure};

fn parent_dir(target: &Path) -> PathBuf {
    match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Runs `write` against a temporary path next to `target`, then renames it
/// over `target`. The temporary file is deleted if `write` fails.
pub fn write_file<T>(target: &Path, write: impl FnOnce(&Path) -> CliResult<T>) -> CliResult<T> {
    let dir = parent_dir(target);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display())).internal()?;
    let tmp = tempfile::Builder::new()
        .prefix(".retigrade-")
        .tempfile_in(&dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))
        .internal()?;
    let value = write(tmp.path())?;
    tmp.persist(target).with_context(|| format!("cannot write {}", target.display())).internal()?;
    Ok(value)
}

/// Like [`write_file`] for a whole directory tree. `target` must not exist
/// or be empty.
pub fn write_dir<T>(target: &Path, write: impl FnOnce(&Path) -> CliResult<T>) -> CliResult<T> {
    if target.exists() {
        let empty =
            fs::read_dir(target).with_context(|| format!("cannot read {}", target.display())).input()?.next().is_none();
        if !empty {
            return Err(Failure::bad_input(format!("{} exists and is not empty", target.display())));
        }
    }
    let dir = parent_dir(target);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display())).internal()?;
    let tmp = tempfile::Builder::new()
        .prefix(".retigrade-")
        .tempdir_in(&dir)
        .with_context(|| format!("cannot create a temporary directory in {}", dir.display()))
        .internal()?;
    let value = write(tmp.path())?;
    if target.exists() {
        fs::remove_dir(target).with_context(|| format!("cannot replace {}", target.display())).internal()?;
    }
    let staged = tmp.keep();
    if let Err(e) = fs::rename(&staged, target) {
        let _ = fs::remove_dir_all(&staged);
        return Err(e).with_context(|| format!("cannot write {}", target.display())).internal();
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_write_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out.csv");
        let r: CliResult = write_file(&target, |p| {
            fs::write(p, "partial").unwrap();
            Err(Failure::bad_input("boom"))
        });
        assert!(r.is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn successful_write_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out.csv");
        fs::write(&target, "old").unwrap();
        write_file(&target, |p| fs::write(p, "new").internal()).unwrap();
        assert_eq!(fs::read_to_string(&target).unwrap(), "new");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn directory_output_is_staged() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("tree");
        let r: CliResult = write_dir(&target, |p| {
            fs::write(p.join("a"), "x").unwrap();
            Err(Failure::bad_input("boom"))
        });
        assert!(r.is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);

        write_dir(&target, |p| fs::write(p.join("a"), "x").internal()).unwrap();
        assert_eq!(fs::read_to_string(target.join("a")).unwrap(), "x");
        assert!(write_dir(&target, |_| Ok(())).is_err());
    }
}
