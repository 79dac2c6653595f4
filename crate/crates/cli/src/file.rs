//! Vault files: a sidecar lock held across read-modify-write, and writes
//! that go through a temporary file and a rename.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fs2::FileExt;

use crate::Fail;

pub struct Locked {
    path: PathBuf,
    _lock: File,
}

fn lock_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".lock");
    path.with_file_name(name)
}

impl Locked {
    /// Fails at once if another process holds the lock.
    pub fn acquire(path: &Path) -> Result<Locked, Fail> {
        let lp = lock_path(path);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lp)
            .with_context(|| format!("opening lock file {}", lp.display()))?;
        lock.try_lock_exclusive().map_err(|_| {
            Fail::Io(anyhow::anyhow!(
                "{} is locked by another process",
                path.display()
            ))
        })?;
        Ok(Locked {
            path: path.to_path_buf(),
            _lock: lock,
        })
    }

    pub fn read(&self) -> Result<Vec<u8>, Fail> {
        Ok(fs::read(&self.path).with_context(|| format!("reading {}", self.path.display()))?)
    }

    pub fn write(&self, bytes: &[u8]) -> Result<(), Fail> {
        write_atomic(&self.path, bytes)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Fail> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp-{}", std::process::id()));
    let tmp = path.with_file_name(name);
    let result = (|| -> anyhow::Result<()> {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result.with_context(|| format!("writing {}", path.display()))?)
}
