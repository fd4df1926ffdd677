//! Output directory layout and the shared logs.

use std::path::{Path, PathBuf};

use forgeloc::detect::DetectorKind;
use forgeloc::util::atomic_write;

use crate::CliError;

pub const TIMING_FILE: &str = "timing.csv";
pub const ERROR_FILE: &str = "errors.csv";
const TIMING_COLUMNS: &str = "case_id,detector,seconds";
const ERROR_COLUMNS: &str = "command,case_id,detector,message";

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn corpus_dir(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn map_path(&self, detector: DetectorKind, case_id: &str) -> PathBuf {
        self.root.join("maps").join(detector.to_string()).join(format!("{case_id}.map"))
    }

    pub fn record_path(&self, detector: DetectorKind, case_id: &str) -> PathBuf {
        self.root.join("eval").join(detector.to_string()).join(format!("{case_id}.json"))
    }

    pub fn records_file(&self) -> PathBuf {
        self.root.join("eval").join("records.jsonl")
    }

    pub fn grid_dir(&self) -> PathBuf {
        self.root.join("gridsearch")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

/// Writes `bytes` atomically, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    atomic_write(path, bytes)?;
    Ok(())
}

/// `# header` line followed by `body`.
pub fn with_header(header: &str, body: &str) -> String {
    format!("# {header}\n{body}")
}

fn append_rows(path: &Path, header: &str, columns: &str, rows: &[String]) -> Result<(), CliError> {
    if rows.is_empty() {
        return Ok(());
    }
    let mut text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => format!("# {header}\n{columns}\n"),
        Err(e) => return Err(e.into()),
    };
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

pub struct TimingRow {
    pub case_id: String,
    pub detector: DetectorKind,
    pub seconds: f64,
}

pub fn append_timing(root: &Path, header: &str, rows: &[TimingRow]) -> Result<(), CliError> {
    let lines: Vec<String> = rows.iter().map(|r| format!("{},{},{:.6}", r.case_id, r.detector, r.seconds)).collect();
    append_rows(&root.join(TIMING_FILE), header, TIMING_COLUMNS, &lines)
}

/// `(case_id, detector, seconds)` rows, comment lines and the column line
/// skipped.
pub fn read_timing(root: &Path) -> Result<Vec<(String, String, f64)>, CliError> {
    let text = match std::fs::read_to_string(root.join(TIMING_FILE)) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && *l != TIMING_COLUMNS && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let secs = f.get(2).and_then(|s| s.parse().ok());
        match (f.len(), secs) {
            (3, Some(s)) => out.push((f[0].to_string(), f[1].to_string(), s)),
            _ => return Err(CliError::Fatal(format!("bad timing row {line:?}"))),
        }
    }
    Ok(out)
}

pub struct ErrorRow {
    pub case_id: String,
    pub detector: String,
    pub message: String,
}

pub fn append_errors(root: &Path, header: &str, command: &str, rows: &[ErrorRow]) -> Result<(), CliError> {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            eprintln!("{command}: {} {}: {}", r.case_id, r.detector, r.message);
            format!("{command},{},{},\"{}\"", r.case_id, r.detector, r.message.replace('"', "'"))
        })
        .collect();
    append_rows(&root.join(ERROR_FILE), header, ERROR_COLUMNS, &lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_log_appends_under_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let row = |c: &str| TimingRow { case_id: c.into(), detector: DetectorKind::Icda, seconds: 0.5 };
        append_timing(dir.path(), "h", &[row("a")]).unwrap();
        append_timing(dir.path(), "h", &[row("b"), row("c")]).unwrap();
        let text = std::fs::read_to_string(dir.path().join(TIMING_FILE)).unwrap();
        assert!(text.starts_with("# h\ncase_id,detector,seconds\n"));
        let rows = read_timing(dir.path()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1], ("b".to_string(), "icda".to_string(), 0.5));
    }
}
