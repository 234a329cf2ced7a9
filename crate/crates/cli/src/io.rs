//! Matrix ingestion and output.
//!
//! Two text formats are read:
//! * Matrix Market, `coordinate` or `array`, field `real`/`integer`/`pattern`,
//!   symmetry `symmetric`/`general`, 1-based indices.
//! * Plain dense text: a `rows cols` header followed by `rows * cols`
//!   whitespace-separated values in row-major order. Lines starting with `#`
//!   or `%` are comments.
//!
//! Writers print 17 significant digits so that a save/load round trip is exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use symnmf_core::{DataMatrix, DenseMat, SparseSym, SymNmfError};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    Symmetric,
    General,
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text, path)
}

/// Parses either format; `path` is only used in error messages.
pub fn parse_matrix(text: &str, path: &Path) -> Result<DataMatrix> {
    if text.trim_start().starts_with("%%MatrixMarket") {
        parse_matrix_market(text, path)
    } else {
        parse_dense(text, path).map(DataMatrix::Dense)
    }
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &'a Path) -> Self {
        Self {
            path,
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-blank, non-comment line with its 1-based number.
    fn next_data(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
                continue;
            }
            return Some((i + 1, t));
        }
        None
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> CliError {
        CliError::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }
}

fn not_square(rows: usize, cols: usize) -> CliError {
    SymNmfError::Shape {
        op: "load_matrix",
        detail: format!("matrix is {rows} x {cols}, not square"),
    }
    .into()
}

fn parse_num<T: std::str::FromStr>(lines: &Lines<'_>, line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| lines.err(line, format!("invalid {what} `{tok}`")))
}

fn parse_header(lines: &Lines<'_>, header: &str) -> Result<(Layout, Field, Symmetry)> {
    let toks: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(lines.err(1, format!("malformed Matrix Market header `{header}`")));
    }
    let layout = match toks[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(lines.err(1, format!("unsupported format `{other}`"))),
    };
    let field = match toks[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "pattern" if layout == Layout::Coordinate => Field::Pattern,
        other => return Err(lines.err(1, format!("unsupported field `{other}`"))),
    };
    let sym = match toks[4].as_str() {
        "symmetric" => Symmetry::Symmetric,
        "general" => Symmetry::General,
        other => return Err(lines.err(1, format!("unsupported symmetry `{other}`"))),
    };
    Ok((layout, field, sym))
}

fn parse_matrix_market(text: &str, path: &Path) -> Result<DataMatrix> {
    let header = text.trim_start().lines().next().unwrap_or_default().trim();
    let mut lines = Lines::new(text.trim_start(), path);
    lines.inner.next();
    let (layout, field, sym) = parse_header(&lines, header)?;

    let (size_line, size) = lines
        .next_data()
        .ok_or_else(|| lines.err(1, "missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    let expected = if layout == Layout::Coordinate { 3 } else { 2 };
    if dims.len() != expected {
        return Err(lines.err(size_line, format!("size line needs {expected} fields, got `{size}`")));
    }
    let rows: usize = parse_num(&lines, size_line, dims[0], "row count")?;
    let cols: usize = parse_num(&lines, size_line, dims[1], "column count")?;
    if rows != cols {
        return Err(not_square(rows, cols));
    }
    let n = rows;

    match layout {
        Layout::Coordinate => {
            let nnz: usize = parse_num(&lines, size_line, dims[2], "entry count")?;
            let mut triples = Vec::with_capacity(nnz);
            let mut last_line = size_line;
            while let Some((ln, l)) = lines.next_data() {
                last_line = ln;
                if triples.len() == nnz {
                    return Err(lines.err(ln, format!("more than the declared {nnz} entries")));
                }
                let toks: Vec<&str> = l.split_whitespace().collect();
                let want = if field == Field::Pattern { 2 } else { 3 };
                if toks.len() != want {
                    return Err(lines.err(ln, format!("expected {want} fields, got {}", toks.len())));
                }
                let i: usize = parse_num(&lines, ln, toks[0], "row index")?;
                let j: usize = parse_num(&lines, ln, toks[1], "column index")?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(lines.err(ln, format!("index ({i}, {j}) out of range for {n} x {n}")));
                }
                let v: f64 = match field {
                    Field::Pattern => 1.0,
                    Field::Real => parse_num(&lines, ln, toks[2], "value")?,
                };
                if !v.is_finite() {
                    return Err(lines.err(ln, format!("non-finite value `{}`", toks[2])));
                }
                triples.push((i - 1, j - 1, v));
            }
            if triples.len() != nnz {
                return Err(lines.err(last_line, format!("declared {nnz} entries, found {}", triples.len())));
            }
            match sym {
                Symmetry::Symmetric => Ok(SparseSym::new(n, triples)?.into()),
                Symmetry::General => Ok(general_coordinate(n, triples)?),
            }
        }
        Layout::Array => {
            let mut vals = Vec::new();
            let mut last_line = size_line;
            while let Some((ln, l)) = lines.next_data() {
                last_line = ln;
                for tok in l.split_whitespace() {
                    let v: f64 = parse_num(&lines, ln, tok, "value")?;
                    vals.push(v);
                }
            }
            let want = match sym {
                Symmetry::General => n * n,
                Symmetry::Symmetric => n * (n + 1) / 2,
            };
            if vals.len() != want {
                return Err(lines.err(last_line, format!("expected {want} values, found {}", vals.len())));
            }
            // column-major; symmetric files list the lower triangle
            let mut d = DenseMat::zeros(n, n);
            let mut it = vals.into_iter();
            for j in 0..n {
                let start = if sym == Symmetry::Symmetric { j } else { 0 };
                for i in start..n {
                    let v = it.next().unwrap_or_default();
                    d.set(i, j, v);
                    if sym == Symmetry::Symmetric {
                        d.set(j, i, v);
                    }
                }
            }
            Ok(d.into())
        }
    }
}

/// A `general` coordinate file whose entries are symmetric as stored becomes a
/// sparse symmetric matrix; otherwise it is kept dense, exactly as read.
fn general_coordinate(n: usize, triples: Vec<(usize, usize, f64)>) -> Result<DataMatrix> {
    let mut summed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, j, v) in triples {
        *summed.entry((i, j)).or_insert(0.0) += v;
    }
    let symmetric = summed
        .iter()
        .all(|(&(i, j), &v)| summed.get(&(j, i)).copied().unwrap_or(0.0) == v);
    if symmetric {
        let upper = summed.into_iter().filter(|&((i, j), _)| i <= j).map(|((i, j), v)| (i, j, v));
        Ok(SparseSym::new(n, upper)?.into())
    } else {
        let mut d = DenseMat::zeros(n, n);
        for ((i, j), v) in summed {
            d.set(i, j, v);
        }
        Ok(d.into())
    }
}

fn parse_dense(text: &str, path: &Path) -> Result<DenseMat> {
    let mut lines = Lines::new(text, path);
    let (hl, header) = lines.next_data().ok_or_else(|| lines.err(1, "empty matrix file"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(lines.err(hl, format!("expected `rows cols` header, got `{header}`")));
    }
    let rows: usize = parse_num(&lines, hl, dims[0], "row count")?;
    let cols: usize = parse_num(&lines, hl, dims[1], "column count")?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut last_line = hl;
    while let Some((ln, l)) = lines.next_data() {
        last_line = ln;
        for tok in l.split_whitespace() {
            if data.len() == rows * cols {
                return Err(lines.err(ln, format!("more than {} values", rows * cols)));
            }
            let v: f64 = parse_num(&lines, ln, tok, "value")?;
            if !v.is_finite() {
                return Err(lines.err(ln, format!("non-finite value `{tok}`")));
            }
            data.push(v);
        }
    }
    if data.len() != rows * cols {
        return Err(lines.err(last_line, format!("expected {} values, found {}", rows * cols, data.len())));
    }
    if rows != cols {
        return Err(not_square(rows, cols));
    }
    Ok(DenseMat::from_vec(rows, cols, data)?)
}

/// 17 significant digits, enough to reproduce any `f64` exactly.
fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_matrix_market(z: &SparseSym) -> String {
    let mut s = String::new();
    s.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
    s.push_str(&format!("{} {} {}\n", z.n(), z.n(), z.entries().len()));
    // stored as i <= j; the file holds the lower triangle
    let mut lower: Vec<(usize, usize, f64)> = z.entries().iter().map(|&(i, j, v)| (j, i, v)).collect();
    lower.sort_by_key(|e| (e.1, e.0));
    for (i, j, v) in lower {
        s.push_str(&format!("{} {} {}\n", i + 1, j + 1, fmt_exact(v)));
    }
    s
}

pub fn format_dense(z: &DenseMat) -> String {
    let mut s = format!("{} {}\n", z.rows(), z.cols());
    for i in 0..z.rows() {
        let row: Vec<String> = z.row(i).iter().map(|&v| fmt_exact(v)).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Sparse input goes out as Matrix Market, dense as plain text.
pub fn save_matrix(path: impl AsRef<Path>, z: &DataMatrix) -> Result<()> {
    let path = path.as_ref();
    let text = match z {
        DataMatrix::Sparse(s) => format_matrix_market(s),
        DataMatrix::Dense(d) => format_dense(d),
    };
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<DataMatrix> {
        parse_matrix(text, Path::new("m.mtx"))
    }

    #[test]
    fn identity_coordinate_symmetric() {
        let z = parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 2 1.0\n").unwrap();
        match z {
            DataMatrix::Sparse(s) => {
                assert_eq!(s.n(), 2);
                assert_eq!(s.nnz(), 2);
                assert_eq!(s.get(0, 0), 1.0);
                assert_eq!(s.get(0, 1), 0.0);
            }
            other => panic!("expected sparse, got {other:?}"),
        }
    }

    #[test]
    fn index_out_of_range_names_line() {
        let err = parse("%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 1.0\n3 1 1.0\n").unwrap_err();
        match err {
            CliError::Parse { line, msg, .. } => {
                assert_eq!(line, 5);
                assert!(msg.contains("out of range"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_square_is_shape_error() {
        let err = parse("%%MatrixMarket matrix coordinate real general\n2 3 1\n1 1 1.0\n").unwrap_err();
        assert!(matches!(err, CliError::Core(symnmf_core::SymNmfError::Shape { .. })), "{err:?}");
        let err = parse("2 3\n1 2 3\n4 5 6\n").unwrap_err();
        assert!(matches!(err, CliError::Core(symnmf_core::SymNmfError::Shape { .. })), "{err:?}");
    }

    #[test]
    fn malformed_header_and_counts() {
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1 0\n"),
            Err(CliError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 1.0\n"),
            Err(CliError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 x 1.0\n"),
            Err(CliError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn general_symmetric_file_becomes_sparse() {
        let z = parse("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 2 0.5\n2 1 0.5\n2 2 3\n").unwrap();
        match z {
            DataMatrix::Sparse(s) => {
                assert_eq!(s.get(0, 1), 0.5);
                assert_eq!(s.get(1, 0), 0.5);
                assert_eq!(s.get(1, 1), 3.0);
            }
            other => panic!("expected sparse, got {other:?}"),
        }
    }

    #[test]
    fn general_nonsymmetric_file_kept_as_read() {
        let z = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 0.5\n2 2 3\n").unwrap();
        match z {
            DataMatrix::Dense(d) => {
                assert_eq!(d.get(0, 1), 0.5);
                assert_eq!(d.get(1, 0), 0.0);
            }
            other => panic!("expected dense, got {other:?}"),
        }
    }

    #[test]
    fn pattern_and_array() {
        let z = parse("%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n2 1\n3 3\n").unwrap();
        assert_eq!(z.get(0, 1), 1.0);
        assert_eq!(z.get(2, 2), 1.0);
        let z = parse("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n").unwrap();
        assert_eq!(z.to_dense().as_slice(), &[1.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn dense_text_with_comments() {
        let z = parse("# similarity\n2 2\n1 0.5\n0.5 1\n").unwrap();
        assert_eq!(z.to_dense().as_slice(), &[1.0, 0.5, 0.5, 1.0]);
    }
}
