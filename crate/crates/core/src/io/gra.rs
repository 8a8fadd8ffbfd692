use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph::SparseAffinity;

/// Formats like C's `%.9g`: 9 significant digits, trailing zeros dropped,
/// exponent form outside `[1e-4, 1e9)`.
pub fn format_sig9(v: f64) -> String {
    const P: i32 = 9;
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, v);
        strip_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", strip_zeros(mantissa), sign, exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `GRA1 <n> <nnz>` then one `i j w` line per undirected edge, `i < j`.
pub fn write_affinity<W: Write>(mut w: W, a: &SparseAffinity) -> Result<()> {
    writeln!(w, "GRA1 {} {}", a.n(), a.nnz())?;
    for &(i, j, v) in a.edges() {
        writeln!(w, "{i} {j} {}", format_sig9(v))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_affinity<R: BufRead>(r: R) -> Result<SparseAffinity> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        reason: "missing GRA1 header".into(),
    })?;
    let header = header?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || Error::Parse {
        line: 1,
        reason: format!("expected `GRA1 <n> <nnz>`, got {header:?}"),
    };
    if parts.len() != 3 || parts[0] != "GRA1" {
        return Err(bad_header());
    }
    let n: usize = parts[1].parse().map_err(|_| bad_header())?;
    let nnz: usize = parts[2].parse().map_err(|_| bad_header())?;
    let mut edges = Vec::with_capacity(nnz);
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse { line: idx + 1, reason };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(format!("expected `i j w`, got {line:?}")));
        }
        let i: usize = f[0].parse().map_err(|_| err(format!("bad index {:?}", f[0])))?;
        let j: usize = f[1].parse().map_err(|_| err(format!("bad index {:?}", f[1])))?;
        let v: f64 = f[2].parse().map_err(|_| err(format!("bad weight {:?}", f[2])))?;
        if i >= j {
            return Err(err(format!("edge ({i}, {j}) is not stored with i < j")));
        }
        edges.push((i, j, v));
    }
    if edges.len() != nnz {
        return Err(Error::Parse {
            line: 1,
            reason: format!("header announces {nnz} edges, found {}", edges.len()),
        });
    }
    SparseAffinity::from_edges(n, edges)
}
