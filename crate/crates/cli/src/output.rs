use std::io::Write;
use std::path::{Path, PathBuf};

use compandor::DesignConfig;
use serde::Serialize;

use crate::error::CliError;

/// Formats `v` with six significant digits: fixed notation for magnitudes in
/// `[1e-4, 1e6)`, scientific otherwise.
pub fn format_sig(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0.00000".into();
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, v)
    } else {
        sci
    }
}

/// Shortest round-trip decimal, the same text JSON output uses.
pub fn format_exact(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_else(|_| format_sig(v))
}

/// Rows of preformatted fields, written as CSV with a header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Write(e.to_string()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self, CliError> {
        let mut r = csv::ReaderBuilder::new().from_reader(bytes);
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Self { header, rows })
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Where a command's files go, and which ones it wrote.
#[derive(Debug, Default)]
pub struct Outputs {
    written: Vec<PathBuf>,
}

impl Outputs {
    /// Writes `bytes` to `path`, or to stdout when `path` is `None`.
    pub fn emit(&mut self, path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
        match path {
            Some(p) => {
                std::fs::write(p, bytes).map_err(|e| CliError::io(p, e))?;
                self.written.push(p.to_path_buf());
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            }
        }
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Record of one run, written to `<out>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub config: Option<DesignConfig>,
    pub tool_version: String,
    pub timestamp: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<DesignConfig>, outputs: &Outputs) -> Self {
        Self {
            command: command.to_string(),
            arguments: std::env::args().skip(1).collect(),
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp(),
            outputs: outputs.written().to_vec(),
        }
    }

    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }

    /// Writes the manifest beside `out`; does nothing when output went to stdout.
    pub fn write_beside(&self, out: Option<&Path>) -> Result<(), CliError> {
        let Some(out) = out else {
            return Ok(());
        };
        let path = Self::path_for(out);
        std::fs::write(&path, to_json(self)?).map_err(|e| CliError::io(&path, e))
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig(1.781_934_2), "1.78193");
        assert_eq!(format_sig(-0.426_912_34), "-0.426912");
        assert_eq!(format_sig(37.8), "37.8000");
        assert_eq!(format_sig(9.999_999_9), "10.0000");
        assert_eq!(format_sig(1.5e-7), "1.50000e-7");
        assert_eq!(format_sig(0.0), "0.00000");
        assert_eq!(format_sig(f64::NAN), "nan");
    }

    #[test]
    fn reformatting_is_idempotent() {
        for v in [1.0 / 3.0, 4.027_4, -8.1e-5, 123_456.789, 2.5e9, 0.000_1] {
            let s = format_sig(v);
            assert_eq!(format_sig(s.parse().unwrap()), s);
        }
    }

    #[test]
    fn manifest_sits_beside_output() {
        assert_eq!(
            RunManifest::path_for(Path::new("/tmp/a/t3.csv")),
            PathBuf::from("/tmp/a/t3.csv.manifest.json")
        );
    }
}
