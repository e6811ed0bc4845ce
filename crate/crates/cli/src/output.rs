use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Shortest round-trip decimal form, so equal values always print equally.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:?}")
    }
}

/// Opens `path` for writing now, so an unwritable location fails before any
/// computation starts.
pub fn create_output(path: &Path) -> Result<File, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        if !parent.is_dir() {
            return Err(CliError::io(
                path,
                io::Error::new(io::ErrorKind::NotFound, "output directory does not exist"),
            ));
        }
    }
    OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))
}

/// A CSV table written to a file or to standard output.
pub struct Table {
    writer: csv::Writer<Box<dyn Write>>,
    path: Option<PathBuf>,
}

impl Table {
    pub fn open(path: Option<&Path>, header: &[&str]) -> Result<Self, CliError> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(io::BufWriter::new(create_output(p)?)),
            None => Box::new(io::stdout()),
        };
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(header)?;
        Ok(Self {
            writer,
            path: path.map(Path::to_path_buf),
        })
    }

    pub fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        self.writer.write_record(cells)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<Option<PathBuf>, CliError> {
        self.writer.flush().map_err(|e| match &self.path {
            Some(p) => CliError::io(p, e),
            None => CliError::io(Path::new("<stdout>"), e),
        })?;
        Ok(self.path)
    }
}

/// `run.csv` becomes `run.<suffix>.csv`; paths without an extension get
/// `.<suffix>` appended.
pub fn sibling(path: &Path, suffix: &str, extension: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.{extension}"))
}

/// Everything needed to reproduce a run, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub experiment: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub started_unix: f64,
    pub wall_seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::io(path, io::Error::other(e)))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0, -2.5e-300, std::f64::consts::TAU, 1e21] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1.0), "1.0");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn derived_paths() {
        assert_eq!(
            sibling(Path::new("out/run.csv"), "balls", "csv"),
            PathBuf::from("out/run.balls.csv")
        );
        assert_eq!(
            sibling(Path::new("run"), "balls", "csv"),
            PathBuf::from("run.balls.csv")
        );
        assert_eq!(
            manifest_path(Path::new("out/run.csv")),
            PathBuf::from("out/run.csv.manifest.json")
        );
    }

    #[test]
    fn missing_directory_names_the_path() {
        let err = create_output(Path::new("/nonexistent-dir-af/run.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir-af/run.csv"), "{err}");
    }
}
