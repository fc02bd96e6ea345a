use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use hodmd_core::{Error, Result};

pub const RUN_MANIFEST: &str = "run_manifest.json";

/// File count and a digest over `(relative path, content hash)` of every file
/// below a root, in path order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeDigest {
    pub path: PathBuf,
    pub files: usize,
    pub sha256: String,
}

pub fn digest_tree(root: &Path, skip: &[&str]) -> Result<TreeDigest> {
    let mut hasher = Sha256::new();
    let mut files = 0;
    let base = if root.is_file() {
        root.parent().unwrap_or(root)
    } else {
        root
    };
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Format {
            path: root.to_path_buf(),
            message: e.to_string(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(base).unwrap_or(entry.path());
        let rel = rel.to_string_lossy().replace('\\', "/");
        if skip.iter().any(|s| rel == *s) {
            continue;
        }
        let bytes = fs::read(entry.path()).map_err(|e| Error::Io {
            path: entry.path().to_path_buf(),
            source: e,
        })?;
        hasher.update(rel.as_bytes());
        hasher.update([0]);
        hasher.update(Sha256::digest(&bytes));
        files += 1;
    }
    Ok(TreeDigest {
        path: root.to_path_buf(),
        files,
        sha256: hex::encode(hasher.finalize()),
    })
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, P: Serialize> {
    pub command: &'a str,
    pub tool_version: &'static str,
    pub parameters: &'a P,
    pub inputs: Vec<TreeDigest>,
    pub outputs: TreeDigest,
    pub wall_clock_seconds: f64,
}

/// Writes `{out}/run_manifest.json` for a finished command.
pub fn write<P: Serialize>(
    command: &str,
    parameters: &P,
    inputs: &[&Path],
    out: &Path,
    started: Instant,
) -> Result<()> {
    let inputs = inputs.iter().map(|p| digest_tree(p, &[])).collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        parameters,
        inputs,
        outputs: digest_tree(out, &[RUN_MANIFEST])?,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let path = out.join(RUN_MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
}
