//! File helpers shared by the CLI and the pipeline.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{CorpusError, VerseId};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} line {line}: {source}")]
    IdList { path: PathBuf, line: usize, source: CorpusError },
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    let wrap = |source| IoError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(wrap)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(contents).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

/// One verse id per line; blank and `#` lines are ignored.
pub fn parse_id_list(text: &str) -> Result<Vec<VerseId>, (usize, CorpusError)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(k, l)| l.parse().map_err(|e| (k + 1, e)))
        .collect()
}

pub fn read_id_list(path: &Path) -> Result<Vec<VerseId>, IoError> {
    parse_id_list(&read_text(path)?).map_err(|(line, source)| IoError::IdList { path: path.to_path_buf(), line, source })
}

pub fn format_id_list(ids: &[VerseId]) -> String {
    ids.iter().map(|id| format!("{id}\n")).collect()
}
