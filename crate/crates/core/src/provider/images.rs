use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::ProviderError;

/// Byte cache for rendered images, keyed by digest.
pub trait ImageStore: Send + Sync {
    fn put(&self, digest: &str, bytes: &[u8]) -> Result<(), ProviderError>;
    fn get(&self, digest: &str) -> Option<Vec<u8>>;
}

/// Stores `<digest>.png` files in one directory.
#[derive(Debug, Clone)]
pub struct DirImageStore {
    dir: PathBuf,
}

impl DirImageStore {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(DirImageStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path for a digest, or `None` when the digest is not a plain hex string.
    pub fn path_for(&self, digest: &str) -> Option<PathBuf> {
        if digest.is_empty() || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        Some(self.dir.join(format!("{digest}.png")))
    }
}

impl ImageStore for DirImageStore {
    fn put(&self, digest: &str, bytes: &[u8]) -> Result<(), ProviderError> {
        let path = self
            .path_for(digest)
            .ok_or_else(|| ProviderError::Unresolvable(format!("invalid digest {digest:?}")))?;
        if path.exists() {
            return Ok(());
        }
        let tmp = path.with_extension("png.tmp");
        std::fs::write(&tmp, bytes)
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| ProviderError::Transport(format!("caching image {digest}: {e}")))
    }

    fn get(&self, digest: &str) -> Option<Vec<u8>> {
        std::fs::read(self.path_for(digest)?).ok()
    }
}

#[derive(Debug, Default)]
pub struct MemoryImageStore {
    images: Mutex<HashMap<String, Vec<u8>>>,
}

impl MemoryImageStore {
    pub fn len(&self) -> usize {
        self.images.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ImageStore for MemoryImageStore {
    fn put(&self, digest: &str, bytes: &[u8]) -> Result<(), ProviderError> {
        self.images.lock().unwrap().insert(digest.to_string(), bytes.to_vec());
        Ok(())
    }

    fn get(&self, digest: &str) -> Option<Vec<u8>> {
        self.images.lock().unwrap().get(digest).cloned()
    }
}
