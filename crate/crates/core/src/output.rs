//! Number formatting and metadata headers shared by every emitted table.

use std::io::Write;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `# key = value` comment lines ahead of a CSV table.
pub fn write_csv_preamble<W: Write>(out: &mut W, meta: &[(String, String)]) -> std::io::Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}

/// Table rows without comment lines.
pub fn csv_data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter(|l| !l.starts_with('#'))
}
