use std::fs;
use std::path::Path;

use crate::error::Result;

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV into memory.
pub(crate) fn csv_bytes(
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<Vec<u8>> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(header)?;
    for r in rows {
        wr.write_record(&r)?;
    }
    wr.into_inner()
        .map_err(|e| crate::Error::Io(e.into_error()))
}

pub(crate) fn horizon_header(first: &[&str], h: usize) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain((1..=h).map(|s| format!("h{s}")))
        .collect()
}
