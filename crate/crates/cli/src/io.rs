//! File plumbing: atomic writes, metadata sidecars, per-file runs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use crate::run::{run_scenario, Report};
use crate::scenario::{Scenario, SCHEMA};
use crate::CliError;

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    tmp.persist(path).map_err(|e| CliError::io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Pretty JSON with a trailing newline; the same report always gives the same bytes.
pub fn json_bytes<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable");
    b.push(b'\n');
    b
}

pub fn meta_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Run-specific data kept out of the report so reports stay byte-identical.
pub fn write_meta(output: &Path, source: &Path) -> Result<(), CliError> {
    let ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    let meta = json!({
        "schema": SCHEMA,
        "source": source.to_string_lossy(),
        "generated_unix_ms": ms as u64,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
    });
    write_atomic(&meta_path(output), &json_bytes(&meta))
}

pub fn read_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text).map_err(|e| CliError { code: e.code, message: format!("{}: {}", path.display(), e.message) })
}

#[derive(Debug)]
pub struct FileOutcome {
    pub report: Report,
    /// Where the report went; `None` means it is for stdout.
    pub written: Option<PathBuf>,
}

/// `--out` wins; otherwise the scenario's own output, relative to its file.
pub fn resolve_output(source: &Path, s: &Scenario, out: Option<&Path>) -> Option<PathBuf> {
    if let Some(o) = out {
        return Some(o.to_path_buf());
    }
    let o = s.output.as_ref()?;
    if o.is_absolute() {
        Some(o.clone())
    } else {
        Some(source.parent().unwrap_or(Path::new(".")).join(o))
    }
}

pub fn run_file(path: &Path, out: Option<&Path>) -> Result<FileOutcome, CliError> {
    let s = read_scenario(path)?;
    let report = run_scenario(&s).map_err(|e| CliError { code: e.code, message: format!("{}: {}", path.display(), e.message) })?;
    let written = resolve_output(path, &s, out);
    if let Some(o) = &written {
        write_atomic(o, &json_bytes(&report))?;
        write_meta(o, path)?;
    }
    Ok(FileOutcome { report, written })
}
