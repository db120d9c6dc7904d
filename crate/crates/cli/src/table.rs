//! Result tables: CSV with a `#` metadata header and a JSON sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "ragged row");
        self.rows.push(row);
    }

    /// CSV body with every line of `header` prefixed by `# `.
    ///
    /// Floats use 17 significant digits so tables round-trip exactly.
    pub fn render(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                let _ = writeln!(out, "# {line}");
            }
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    version: &'a str,
    command: &'a str,
    table: String,
    rows: usize,
    columns: &'a [String],
    wall_time_seconds: f64,
    workers: usize,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

/// Writes the table and its `<out>.meta.json` sidecar. Wall time lives only in
/// the sidecar so identical runs give byte-identical tables.
pub fn write_outputs(
    out: &Path,
    table: &ResultTable,
    header: &str,
    command: &str,
    wall: Duration,
    workers: usize,
) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(out, table.render(header)).map_err(|source| CliError::Write {
        path: out.to_path_buf(),
        source,
    })?;
    let meta = Sidecar {
        version: env!("CARGO_PKG_VERSION"),
        command,
        table: out.display().to_string(),
        rows: table.rows.len(),
        columns: &table.columns,
        wall_time_seconds: wall.as_secs_f64(),
        workers,
    };
    let side = sidecar_path(out);
    let json = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    fs::write(&side, json + "\n").map_err(|source| CliError::Write { path: side, source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_uses_full_precision() {
        let mut t = ResultTable::new(&["a", "b"]);
        t.push(vec![0.1, -2.0]);
        let text = t.render("kind = \"x\"\n\nseed = 1");
        assert_eq!(
            text,
            "# kind = \"x\"\n#\n# seed = 1\na,b\n1.0000000000000001e-1,-2.0000000000000000e0\n"
        );
        let parsed: f64 = text.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(parsed, 0.1);
    }

    #[test]
    fn sidecar_sits_next_to_table() {
        assert_eq!(sidecar_path(Path::new("out/run.csv")), PathBuf::from("out/run.csv.meta.json"));
    }
}
