//! Binary snapshots of a [`ModeState`] and their JSON sidecars.
//!
//! Layout (little-endian): `b"ONQ1"`, `u32` version, `u64 n_k`, `f64 t`,
//! `f64 r_eff`, then `Re f`, `Im f`, `Re fdot`, `Im fdot` as `n_k` doubles
//! each.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::evolve::ModeState;

pub const MAGIC: &[u8; 4] = b"ONQ1";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn encode(state: &ModeState) -> Vec<u8> {
    let n = state.len();
    let mut out = Vec::with_capacity(HEADER_LEN + 32 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    out.extend_from_slice(&state.r_eff.to_le_bytes());
    let parts: [&dyn Fn(usize) -> f64; 4] = [
        &|i| state.f[i].re,
        &|i| state.f[i].im,
        &|i| state.fdot[i].re,
        &|i| state.fdot[i].im,
    ];
    for part in parts {
        for i in 0..n {
            out.extend_from_slice(&part(i).to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ModeState> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = usize::try_from(u64_at(8)).map_err(|_| Error::Format("n_k overflows".into()))?;
    let expected = n
        .checked_mul(32)
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("n_k overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for n_k = {n}, found {}",
            bytes.len()
        )));
    }
    let t = f64_at(16);
    let r_eff = f64_at(24);
    let array = |k: usize, i: usize| f64_at(HEADER_LEN + 8 * (k * n + i));
    let f = (0..n).map(|i| C64::new(array(0, i), array(1, i))).collect();
    let fdot = (0..n).map(|i| C64::new(array(2, i), array(3, i))).collect();
    Ok(ModeState { t, f, fdot, r_eff })
}

/// Sidecar describing one checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub config: ModelConfig,
    pub config_hash: String,
    pub t: f64,
    pub n_k: u64,
    /// SHA-256 of the binary file.
    pub content_hash: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Writes the binary snapshot and then its sidecar, both atomically.
pub fn write_checkpoint(path: &Path, state: &ModeState, cfg: &ModelConfig) -> Result<CheckpointManifest> {
    let bytes = encode(state);
    let manifest = CheckpointManifest {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        config_hash: cfg.dynamics_hash(),
        t: state.t,
        n_k: state.len() as u64,
        content_hash: sha256_hex(&bytes),
    };
    write_atomic(path, &bytes)?;
    write_atomic(&sidecar_path(path), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}

/// Reads a snapshot, checking it against its sidecar.
pub fn read_checkpoint(path: &Path) -> Result<(ModeState, CheckpointManifest)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if sha256_hex(&bytes) != manifest.content_hash {
        return Err(Error::Format(format!("{} does not match its content hash", path.display())));
    }
    let state = decode(&bytes)?;
    if state.len() as u64 != manifest.n_k || state.t != manifest.t {
        return Err(Error::Format(format!("{} disagrees with its sidecar", path.display())));
    }
    Ok((state, manifest))
}
