use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CollapseError, Result};

/// Tabular output of one experiment run plus its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub kind: String,
    pub seed: u64,
    /// Canonical TOML of the config that produced the result.
    pub config_echo: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Named summary statistics, in a fixed order.
    pub summary: Vec<(String, f64)>,
}

impl ExperimentResult {
    pub fn summary_value(&self, name: &str) -> Option<f64> {
        self.summary.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text: a `#` provenance block, then the header and data rows.
pub fn render_csv(result: &ExperimentResult) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("# collapse-lab {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("# kind: {}\n", result.kind));
    out.push_str(&format!("# seed: {}\n", result.seed));
    out.push_str("# config:\n");
    for line in result.config_echo.lines() {
        out.push_str(&format!("#   {line}\n"));
    }
    out.push_str("# summary:\n");
    for (name, v) in &result.summary {
        out.push_str(&format!("#   {name} = {}\n", format_float(*v)));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CollapseError::Io(e.to_string());
    w.write_record(&result.columns).map_err(io)?;
    for row in &result.rows {
        if row.len() != result.columns.len() {
            return Err(CollapseError::ShapeMismatch(format!(
                "row of {} values for {} columns",
                row.len(),
                result.columns.len()
            )));
        }
        w.write_record(row.iter().map(|v| format_float(*v))).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CollapseError::Io(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).map_err(|e| CollapseError::Io(e.to_string()))?);
    Ok(out)
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .map_err(|e| CollapseError::Io(format!("cannot create temporary file in {}: {e}", dir.display())))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| CollapseError::Io(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    write_atomic(path, render_csv(result)?.as_bytes())
}

/// Header and data rows of a file produced by [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let io = |e: csv::Error| CollapseError::Io(e.to_string());
    let header = r.headers().map_err(io)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io)?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| CollapseError::Io(format!("bad number `{f}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Standalone matplotlib script plotting every column against the first.
pub fn plot_script(csv_path: &Path) -> String {
    let name = csv_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    format!(
        r##"import pathlib

import matplotlib.pyplot as plt
import numpy as np

here = pathlib.Path(__file__).resolve().parent
path = here / "{name}"
data = np.genfromtxt(path, delimiter=",", names=True, comments="#")
cols = data.dtype.names
fig, ax = plt.subplots()
for col in cols[1:]:
    ax.plot(data[cols[0]], data[col], marker="o", label=col)
ax.set_xlabel(cols[0])
ax.legend()
fig.tight_layout()
fig.savefig(path.with_suffix(".png"), dpi=150)
"##
    )
}

/// Writes the plot script next to `csv_path` and returns its path.
pub fn write_plot_script(csv_path: &Path) -> Result<PathBuf> {
    let script = csv_path.with_extension("plot.py");
    write_atomic(&script, plot_script(csv_path).as_bytes())?;
    Ok(script)
}
