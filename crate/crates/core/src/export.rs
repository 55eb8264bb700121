//! Plain-text output helpers: locale-free CSV numbers with 17 significant digits.

/// `{:.16e}` formatting, e.g. `9.0000000000000002e-1`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Joins a header and rows into CSV text.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
