use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::{CliError, Result};

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let context = || format!("cannot write {}", path.display());
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(context(), e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(context(), e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(context(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(context(), e.error))?;
    Ok(())
}

/// Sends a report to `path`, or to stdout when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("cannot write to stdout", e))
        }
    }
}
