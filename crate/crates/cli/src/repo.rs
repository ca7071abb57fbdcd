//! The repository file: the canonical export document, replaced atomically.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use dforge_core::repository::RepositoryStore;

use crate::service::{self, ErrorKind, ServiceError};

/// Loads the store at `path`; a missing file is an empty store.
pub fn load(path: &Path) -> Result<RepositoryStore, ServiceError> {
    match fs::read_to_string(path) {
        Ok(doc) => service::import(&doc).map_err(|mut e| {
            e.message = format!("{}: {}", path.display(), e.message);
            e
        }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(RepositoryStore::default()),
        Err(e) => Err(ServiceError::new(ErrorKind::BadRequest, "io", format!("{}: {e}", path.display()))),
    }
}

/// Writes to a sibling temporary file, syncs it and renames it over `path`.
pub fn save(path: &Path, store: &RepositoryStore) -> io::Result<()> {
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(store.export().as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "repository".into());
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}
