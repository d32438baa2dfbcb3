//! Output directories built aside and moved into place only on success.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::error::{io_err, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct FileEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct OutputManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: Option<&'a str>,
    files: Vec<FileEntry>,
}

/// A directory under construction. Dropping it without [`Staging::commit`]
/// removes everything written so far.
pub struct Staging {
    target: PathBuf,
    tmp: PathBuf,
    done: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self> {
        let name = target.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(io_err(parent))?;
        let tmp = parent.join(format!(".{name}.partial"));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
        }
        fs::create_dir_all(&tmp).map_err(io_err(&tmp))?;
        Ok(Staging { target: target.to_path_buf(), tmp, done: false })
    }

    pub fn path(&self) -> &Path {
        &self.tmp
    }

    pub fn join(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.tmp.join(rel)
    }

    /// Write the integrity manifest and move the tree to its final place,
    /// replacing any previous run.
    pub fn commit(mut self, command: &str, config_sha256: Option<&str>) -> Result<PathBuf> {
        let files = list_files(&self.tmp)?;
        let m = OutputManifest {
            tool: "hlab",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256,
            files,
        };
        let mp = self.tmp.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(&mp, text).map_err(io_err(&mp))?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(io_err(&self.target))?;
        }
        fs::rename(&self.tmp, &self.target).map_err(io_err(&self.target))?;
        self.done = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.done {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

fn list_files(root: &Path) -> Result<Vec<FileEntry>> {
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<FileEntry>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir).map_err(io_err(dir))?.collect::<std::io::Result<_>>().map_err(io_err(dir))?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            walk(root, &p, out)?;
        } else {
            let bytes = fs::read(&p).map_err(io_err(&p))?;
            let rel = p.strip_prefix(root).expect("inside root");
            let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            if rel == MANIFEST {
                continue;
            }
            out.push(FileEntry { path: rel, bytes: bytes.len() as u64, sha256: hex(&Sha256::digest(&bytes)) });
        }
    }
    Ok(())
}

/// Re-hash every file listed in `dir/manifest.json`; returns the mismatches.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let mp = dir.join(MANIFEST);
    let text = fs::read_to_string(&mp).map_err(io_err(&mp))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let mut bad = Vec::new();
    for f in v["files"].as_array().into_iter().flatten() {
        let rel = f["path"].as_str().unwrap_or_default();
        match fs::read(dir.join(rel)) {
            Ok(b) if Some(hex(&Sha256::digest(&b)).as_str()) == f["sha256"].as_str() => {}
            _ => bad.push(rel.to_string()),
        }
    }
    Ok(bad)
}
