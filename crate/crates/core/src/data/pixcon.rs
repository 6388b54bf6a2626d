//! `PIXCON` text format for constraint maps.
//!
//! ```text
//! PIXCON 1
//! <height> <width> <channels>
//! <row> <col> <v1> [<v2> <v3>]
//! ```
//!
//! One line per masked location, row-major, values with six decimals.

use std::fmt::Write as _;
use std::path::Path;

use crate::constraint::ConstraintMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &str = "PIXCON 1";

pub fn to_pixcon<T: Scalar>(map: &ConstraintMap<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "{} {} {}", map.height(), map.width(), map.channels());
    for (r, c) in map.locations() {
        let _ = write!(s, "{r} {c}");
        for k in 0..map.channels() {
            let _ = write!(s, " {:.6}", map.value(r, c, k).f64());
        }
        s.push('\n');
    }
    s
}

pub fn parse_pixcon<T: Scalar>(text: &str, source_name: &str) -> Result<ConstraintMap<T>> {
    let err = |line: usize, msg: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((n, l)) => return Err(err(n, format!("unknown header `{l}`"))),
        None => return Err(err(1, "empty file".into())),
    }
    let (n, dims) = lines.next().ok_or_else(|| err(2, "missing dimensions".into()))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(n, format!("bad dimension `{t}`"))))
        .collect::<Result<_>>()?;
    let [h, w, c] = dims[..] else {
        return Err(err(n, "expected `height width channels`".into()));
    };
    let mut entries = Vec::new();
    let mut prev: Option<(usize, usize)> = None;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 + c {
            return Err(err(n, format!("expected {} columns, found {}", 2 + c, cols.len())));
        }
        let r: usize = cols[0].parse().map_err(|_| err(n, format!("bad row `{}`", cols[0])))?;
        let col: usize = cols[1].parse().map_err(|_| err(n, format!("bad column `{}`", cols[1])))?;
        if r >= h || col >= w {
            return Err(err(n, format!("location ({r}, {col}) outside {h}x{w}")));
        }
        if prev.is_some_and(|p| p >= (r, col)) {
            return Err(err(n, "locations must be strictly row-major".into()));
        }
        prev = Some((r, col));
        let vals = cols[2..]
            .iter()
            .map(|t| {
                let v: f64 = t.parse().map_err(|_| err(n, format!("bad value `{t}`")))?;
                if !(-1.0..=1.0).contains(&v) {
                    return Err(err(n, format!("value {v} outside [-1, 1]")));
                }
                Ok(T::of(v))
            })
            .collect::<Result<Vec<T>>>()?;
        entries.push((r, col, vals));
    }
    ConstraintMap::from_entries(h, w, c, &entries).map_err(|e| err(2, e.to_string()))
}

pub fn write_constraint_file<T: Scalar>(map: &ConstraintMap<T>, path: &Path) -> Result<()> {
    std::fs::write(path, to_pixcon(map)).map_err(|e| Error::io(path, e))
}

pub fn read_constraint_file<T: Scalar>(path: &Path) -> Result<ConstraintMap<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pixcon(&text, &path.display().to_string())
}
