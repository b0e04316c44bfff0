//! On-disk capture cache: `<cache_dir>/<config hash>/<entry id>/{A,B,C}.pcv`.
//!
//! Each entry directory also holds `source.sha256`, the digest of the cloud
//! file it was rendered from. It is written last, so its presence marks a
//! complete entry.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{io_err, HarnessError, ManifestEntry, Result};
use crate::camera::{CaptureConfig, OrbitId};
use crate::render::{capture_sequences, load_frames, read_sequence_header, save_sequence, Frame};

const SOURCE_DIGEST: &str = "source.sha256";

/// Hex SHA-256 of the capture config's canonical JSON.
pub fn config_hash(capture: &CaptureConfig) -> String {
    let json = serde_json::to_vec(capture).expect("capture config serializes");
    hex::encode(Sha256::digest(json))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheReport {
    pub rendered: usize,
    pub skipped: usize,
}

/// View of the cache for one capture config.
#[derive(Debug, Clone)]
pub struct CacheIndex {
    root: PathBuf,
    capture: CaptureConfig,
}

impl CacheIndex {
    pub fn new(cache_dir: impl AsRef<Path>, capture: &CaptureConfig) -> Self {
        Self { root: cache_dir.as_ref().join(config_hash(capture)), capture: capture.clone() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn capture(&self) -> &CaptureConfig {
        &self.capture
    }

    pub fn entry_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn sequence_path(&self, id: &str, orbit: OrbitId) -> PathBuf {
        self.entry_dir(id).join(format!("{}.pcv", orbit.name()))
    }

    fn sequence_valid(&self, id: &str, orbit: OrbitId) -> bool {
        matches!(read_sequence_header(self.sequence_path(id, orbit)), Ok(h)
            if h.orbit == orbit
                && h.width as usize == self.capture.image_width
                && h.height as usize == self.capture.image_height
                && h.frame_count as usize == self.capture.frames_per_orbit)
    }

    /// Fails with `CacheMiss` unless all three sequences of `id` are present
    /// with the expected geometry.
    pub fn check(&self, id: &str) -> Result<()> {
        if !self.entry_dir(id).join(SOURCE_DIGEST).is_file() {
            return Err(HarnessError::CacheMiss { id: id.into(), orbit: OrbitId::A });
        }
        for orbit in OrbitId::ALL {
            if !self.sequence_valid(id, orbit) {
                return Err(HarnessError::CacheMiss { id: id.into(), orbit });
            }
        }
        Ok(())
    }

    /// Reads the listed frames of one cached sequence.
    pub fn frames(&self, id: &str, orbit: OrbitId, indices: &[usize]) -> Result<Vec<Frame>> {
        load_frames(self.sequence_path(id, orbit), indices)
            .map(|(_, frames)| frames)
            .map_err(|_| HarnessError::CacheMiss { id: id.into(), orbit })
    }

    fn is_fresh(&self, id: &str, digest: &str) -> bool {
        let stored = std::fs::read_to_string(self.entry_dir(id).join(SOURCE_DIGEST)).unwrap_or_default();
        stored.trim() == digest && self.check(id).is_ok()
    }

    /// Renders one entry unless a complete, matching render exists.
    /// Returns whether a render happened.
    fn ensure(&self, entry: &ManifestEntry) -> Result<bool> {
        let bytes = std::fs::read(&entry.cloud_path).map_err(io_err(&entry.cloud_path))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        if self.is_fresh(&entry.id, &digest) {
            return Ok(false);
        }
        let dir = self.entry_dir(&entry.id);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let marker = dir.join(SOURCE_DIGEST);
        match std::fs::remove_file(&marker) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(io_err(&marker)(e)),
            _ => {}
        }
        let cloud = crate::cloud::parse_ply(&bytes)
            .map_err(|source| HarnessError::CloudFailure { id: entry.id.clone(), source })?;
        let sequences = capture_sequences(&cloud, &self.capture)
            .map_err(|source| HarnessError::RenderFailure { id: entry.id.clone(), source })?;
        for seq in &sequences {
            let path = self.sequence_path(&entry.id, seq.orbit);
            let tmp = path.with_extension("pcv.tmp");
            save_sequence(seq, &tmp).map_err(|source| HarnessError::RenderFailure { id: entry.id.clone(), source })?;
            std::fs::rename(&tmp, &path).map_err(io_err(&path))?;
        }
        std::fs::write(&marker, &digest).map_err(io_err(&marker))?;
        Ok(true)
    }
}

/// Renders every entry missing from the cache. Entries render in parallel;
/// outputs do not depend on scheduling.
pub fn build_cache(
    manifest: &[ManifestEntry],
    capture: &CaptureConfig,
    cache_dir: impl AsRef<Path>,
) -> Result<(CacheIndex, CacheReport)> {
    capture.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    let index = CacheIndex::new(cache_dir, capture);
    std::fs::create_dir_all(&index.root).map_err(io_err(&index.root))?;
    let config_path = index.root.join("capture.json");
    if !config_path.exists() {
        let json = serde_json::to_string_pretty(capture)?;
        std::fs::write(&config_path, json).map_err(io_err(&config_path))?;
    }
    let rendered = manifest.par_iter().map(|e| index.ensure(e)).collect::<Result<Vec<bool>>>()?;
    let n = rendered.iter().filter(|&&r| r).count();
    Ok((index, CacheReport { rendered: n, skipped: rendered.len() - n }))
}
