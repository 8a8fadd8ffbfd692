use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// One non-negative integer label per line.
pub fn read_labels<R: BufRead>(r: R) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse().map_err(|_| Error::Parse {
            line: n + 1,
            reason: format!("bad label {t:?}"),
        })?);
    }
    Ok(out)
}

pub fn write_labels<W: Write>(mut w: W, labels: &[usize]) -> Result<()> {
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}
