//! Small file helpers shared by the writers.

use std::io::Write;
use std::path::Path;

use crate::error::{Result, TvgError};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| TvgError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| TvgError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| TvgError::io(path, e))?;
    tmp.persist(path).map_err(|e| TvgError::io(path, e.error))?;
    Ok(())
}
