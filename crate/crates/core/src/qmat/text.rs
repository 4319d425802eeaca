//! Plain-text matrix format shared by every file reader.
//!
//! ```text
//! dims: 2 2
//! 0.5 0.5-0.25i
//! 0.5+0.25i 0.5
//! ```
//!
//! Entries are whitespace separated complex literals `a+bi`, `a-bi`, `a` or `bi`.

use super::matrix::{CMatrix, C64};
use crate::error::{Error, Result};

/// Formats a complex literal with 17 significant digits, enough to round-trip an `f64`.
pub fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:.16e}{}{:.16e}i", z.re, sign, z.im.abs())
}

pub fn parse_complex(tok: &str) -> Option<C64> {
    let Some(body) = tok.strip_suffix('i') else {
        return tok.parse::<f64>().ok().map(|re| C64::new(re, 0.0));
    };
    // split at the last sign that is not the leading sign or an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().ok()?;
            let im = match &body[k..] {
                "+" => 1.0,
                "-" => -1.0,
                s => s.parse::<f64>().ok()?,
            };
            Some(C64::new(re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                s => s.parse::<f64>().ok()?,
            };
            Some(C64::new(0.0, im))
        }
    }
}

pub fn write_matrix(m: &CMatrix) -> String {
    let mut out = format!("dims: {} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format_complex(m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Reads one matrix from a line iterator positioned at its `dims:` header.
///
/// `lines` yields `(line_number, text)`; blank lines and `#` comments are skipped.
pub fn read_matrix<'a, I>(lines: &mut I) -> Result<CMatrix>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let (ln, header) = next_content(lines).ok_or_else(|| Error::parse(0, "missing dims header"))?;
    let dims = header
        .strip_prefix("dims:")
        .ok_or_else(|| Error::parse(ln, format!("expected `dims: <rows> <cols>`, got `{header}`")))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(ln, format!("bad dims: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::parse(ln, "dims needs exactly two integers"));
    };
    let want = rows * cols;
    let mut data = Vec::with_capacity(want);
    let mut last = ln;
    while data.len() < want {
        let (ln, text) = next_content(lines)
            .ok_or_else(|| Error::parse(last, format!("expected {want} entries, found {}", data.len())))?;
        last = ln;
        for tok in text.split_whitespace() {
            let z = parse_complex(tok).ok_or_else(|| Error::parse(ln, format!("bad complex literal `{tok}`")))?;
            data.push(z);
        }
    }
    if data.len() != want {
        return Err(Error::parse(last, format!("expected {want} entries, found {}", data.len())));
    }
    CMatrix::from_vec(rows, cols, data).map_err(|e| Error::parse(last, e.to_string()))
}

pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let m = read_matrix(&mut lines)?;
    if let Some((ln, rest)) = next_content(&mut lines) {
        return Err(Error::parse(ln, format!("trailing content `{rest}`")));
    }
    Ok(m)
}

pub(crate) fn next_content<'a, I>(lines: &mut I) -> Option<(usize, &'a str)>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    lines.find_map(|(n, l)| {
        let t = l.split('#').next().unwrap_or("").trim();
        (!t.is_empty()).then_some((n, t))
    })
}
