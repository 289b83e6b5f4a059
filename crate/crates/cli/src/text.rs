//! Aligned text tables for terminal output; the JSON reports stay the
//! machine-readable artifact.

/// Compact numeric rendering for humans: plain decimals in a readable
/// range, scientific notation outside it.
pub fn compact(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs();
    if (1e-3..1e7).contains(&mag) {
        let s = format!("{x:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.3e}")
    }
}

/// Render rows under a header with every column left-aligned to its widest
/// cell.
pub fn render(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut rendered = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                rendered.push_str("  ");
            }
            rendered.push_str(&format!("{cell:<width$}", width = widths[i]));
        }
        out.push_str(rendered.trim_end());
        out.push('\n');
    };
    line(headers.to_vec());
    line(widths.iter().map(|_| "-").collect::<Vec<_>>());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    // Rewrite the separator now that widths are known.
    let sep: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let mut lines: Vec<&str> = out.lines().collect();
    let sep_line = sep.join("  ");
    lines[1] = &sep_line;
    let mut result = lines.join("\n");
    result.push('\n');
    result
}
