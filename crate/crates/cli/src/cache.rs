//! Persistent response cache keyed by service, language pair, and input
//! checksum. Entries carry a checksum sidecar so corruption is detected and
//! repaired instead of silently poisoning a run.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use biascope_core::service::{Lang, ServiceError, ServiceUnderTest, TranslationService};

use crate::fsutil::{sanitize_component, write_atomic};

#[derive(Debug, Serialize, Deserialize)]
struct EntryMeta {
    /// Hex SHA-256 of the cached response text.
    checksum: String,
    created_unix_ms: u64,
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn now_unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Reads a cache entry, returning `None` when it is absent or fails its
/// checksum (the caller then refetches and rewrites it).
fn read_entry(dir: &Path, stem: &str) -> Option<String> {
    let text_path = dir.join(format!("{stem}.txt"));
    let meta_path = dir.join(format!("{stem}.meta"));
    let text = std::fs::read_to_string(&text_path).ok()?;
    let meta: EntryMeta = serde_json::from_str(&std::fs::read_to_string(&meta_path).ok()?).ok()?;
    if meta.checksum == sha256_hex(&text) {
        Some(text)
    } else {
        log::warn!("cache entry {} failed its checksum; refetching", text_path.display());
        None
    }
}

/// Writes a cache entry; failures are logged, not fatal, because the live
/// response is already in hand.
fn write_entry(dir: &Path, stem: &str, response: &str) {
    if let Err(e) = std::fs::create_dir_all(dir) {
        log::warn!("cannot create cache directory {}: {e}", dir.display());
        return;
    }
    let meta = EntryMeta { checksum: sha256_hex(response), created_unix_ms: now_unix_ms() };
    let meta_json = match serde_json::to_string(&meta) {
        Ok(j) => j,
        Err(e) => {
            log::warn!("cannot serialize cache metadata: {e}");
            return;
        }
    };
    for (name, body) in [(format!("{stem}.txt"), response), (format!("{stem}.meta"), meta_json.as_str())] {
        if let Err(e) = write_atomic(&dir.join(&name), body.as_bytes()) {
            log::warn!("cannot write cache entry {}: {e}", dir.join(&name).display());
        }
    }
}

/// Wraps a [`TranslationService`] with an on-disk response cache.
///
/// Layout: `<root>/<service-id>/<source>-<target>/<sha256(text)>.txt` plus a
/// `.meta` sidecar holding the response checksum.
pub struct CachedTranslator<T> {
    inner: T,
    root: PathBuf,
}

impl<T: TranslationService> CachedTranslator<T> {
    pub fn new(inner: T, root: PathBuf) -> Self {
        CachedTranslator { inner, root }
    }

    fn entry_dir(&self, source: &Lang, target: &Lang) -> PathBuf {
        self.root
            .join(sanitize_component(self.inner.id()))
            .join(format!("{}-{}", sanitize_component(source.as_str()), sanitize_component(target.as_str())))
    }
}

impl<T: TranslationService> TranslationService for CachedTranslator<T> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn supported_languages(&self) -> &[Lang] {
        self.inner.supported_languages()
    }

    fn translate(&self, text: &str, source: &Lang, target: &Lang) -> Result<String, ServiceError> {
        let dir = self.entry_dir(source, target);
        let stem = sha256_hex(text);
        if let Some(hit) = read_entry(&dir, &stem) {
            return Ok(hit);
        }
        let response = self.inner.translate(text, source, target)?;
        write_entry(&dir, &stem, &response);
        Ok(response)
    }

    fn begin_block(&self) {
        self.inner.begin_block();
    }
}

/// Wraps a [`ServiceUnderTest`] with the same cache; entries live under a
/// fixed `transform` pair directory since there is no language pair.
pub struct CachedTransform<S> {
    inner: S,
    root: PathBuf,
}

impl<S: ServiceUnderTest> CachedTransform<S> {
    pub fn new(inner: S, root: PathBuf) -> Self {
        CachedTransform { inner, root }
    }

    fn entry_dir(&self) -> PathBuf {
        self.root.join(sanitize_component(self.inner.id())).join("transform")
    }
}

impl<S: ServiceUnderTest> ServiceUnderTest for CachedTransform<S> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn transform(&self, text: &str) -> Result<String, ServiceError> {
        let dir = self.entry_dir();
        let stem = sha256_hex(text);
        if let Some(hit) = read_entry(&dir, &stem) {
            return Ok(hit);
        }
        let response = self.inner.transform(text)?;
        write_entry(&dir, &stem, &response);
        Ok(response)
    }

    fn begin_block(&self) {
        self.inner.begin_block();
    }
}
