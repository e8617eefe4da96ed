//! Matrix Market import/export for real dense and sparse matrices.
//!
//! Supports `matrix coordinate real|integer general|symmetric|skew-symmetric`
//! and `matrix array real|integer general|symmetric`. Written files use the
//! array format with 17 significant digits, so a write/read round trip is
//! entrywise exact.

use anyhow::{anyhow, bail, Context, Result};
use condlab_core::numlin::RealMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

fn parse_header(line: &str) -> Result<(Layout, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        bail!("line 1: expected '%%MatrixMarket matrix <layout> <field> <symmetry>'");
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => bail!("line 1: unsupported layout '{other}'"),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => bail!("line 1: unsupported field '{other}' (real matrices only)"),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => bail!("line 1: unsupported symmetry '{other}'"),
    };
    if layout == Layout::Array && symmetry == Symmetry::Skew {
        bail!("line 1: skew-symmetric array layout is not supported");
    }
    Ok((layout, symmetry))
}

fn parse_usize(tok: &str, line_no: usize) -> Result<usize> {
    tok.parse().with_context(|| format!("line {line_no}: invalid integer '{tok}'"))
}

fn parse_f64(tok: &str, line_no: usize) -> Result<f64> {
    let x: f64 = tok.parse().with_context(|| format!("line {line_no}: invalid number '{tok}'"))?;
    if !x.is_finite() {
        bail!("line {line_no}: non-finite entry '{tok}'");
    }
    Ok(x)
}

/// Parses Matrix Market text into a dense real matrix.
pub fn read_matrix_market(text: &str) -> Result<RealMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| anyhow!("empty Matrix Market input"))?;
    let (layout, symmetry) = parse_header(header)?;
    let mut data = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));

    let (size_no, size_line) = data.next().ok_or_else(|| anyhow!("missing size line"))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| parse_usize(t, size_no))
        .collect::<Result<_>>()?;
    let expected = if layout == Layout::Coordinate { 3 } else { 2 };
    if dims.len() != expected {
        bail!("line {size_no}: expected {expected} size fields, found {}", dims.len());
    }
    let (rows, cols) = (dims[0], dims[1]);
    if symmetry != Symmetry::General && rows != cols {
        bail!("line {size_no}: symmetric storage requires a square matrix");
    }
    let mut m = RealMatrix::zeros(rows, cols);

    match layout {
        Layout::Coordinate => {
            let nnz = dims[2];
            let mut seen = 0;
            for (no, line) in data {
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 3 {
                    bail!("line {no}: expected 'row col value'");
                }
                let (i, j) = (parse_usize(t[0], no)?, parse_usize(t[1], no)?);
                if i == 0 || j == 0 || i > rows || j > cols {
                    bail!("line {no}: index ({i}, {j}) outside {rows}x{cols}");
                }
                let v = parse_f64(t[2], no)?;
                m[(i - 1, j - 1)] += v;
                match symmetry {
                    Symmetry::Symmetric if i != j => m[(j - 1, i - 1)] += v,
                    Symmetry::Skew if i != j => m[(j - 1, i - 1)] -= v,
                    Symmetry::Skew => bail!("line {no}: skew-symmetric diagonal entry"),
                    _ => {}
                }
                seen += 1;
            }
            if seen != nnz {
                bail!("expected {nnz} entries, found {seen}");
            }
        }
        Layout::Array => {
            // Column-major; symmetric stores the lower triangle only.
            let positions: Vec<(usize, usize)> = (0..cols)
                .flat_map(|j| {
                    let start = if symmetry == Symmetry::General { 0 } else { j };
                    (start..rows).map(move |i| (i, j))
                })
                .collect();
            let mut values = Vec::with_capacity(positions.len());
            for (no, line) in data {
                for tok in line.split_whitespace() {
                    values.push(parse_f64(tok, no)?);
                }
            }
            if values.len() != positions.len() {
                bail!("expected {} values, found {}", positions.len(), values.len());
            }
            for ((i, j), v) in positions.into_iter().zip(values) {
                m[(i, j)] = v;
                if symmetry == Symmetry::Symmetric {
                    m[(j, i)] = v;
                }
            }
        }
    }
    Ok(m)
}

/// Writes a real matrix in `array real general` format.
pub fn write_matrix_market(m: &RealMatrix) -> String {
    let mut out = format!("%%MatrixMarket matrix array real general\n{} {}\n", m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out.push_str(&format!("{:.16e}\n", m[(i, j)]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_symmetric_fills_both_triangles() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% note\n3 3 3\n1 1 2.0\n3 1 -1.5\n2 2 4\n";
        let m = read_matrix_market(text).unwrap();
        assert_eq!(m[(0, 2)], -1.5);
        assert_eq!(m[(2, 0)], -1.5);
        assert_eq!(m[(1, 1)], 4.0);
        assert_eq!(m[(2, 2)], 0.0);
    }

    #[test]
    fn array_is_column_major() {
        let text = "%%MatrixMarket matrix array real general\n2 3\n1\n2\n3\n4\n5\n6\n";
        let m = read_matrix_market(text).unwrap();
        assert_eq!(m, RealMatrix::from_row_slice(2, 3, &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_matrix_market("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n").is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n").is_err());
    }

    #[test]
    fn write_read_is_exact() {
        let m = RealMatrix::from_fn(3, 4, |i, j| (1.0 + i as f64).ln() / (3.0 + j as f64) - 0.1 * j as f64);
        assert_eq!(read_matrix_market(&write_matrix_market(&m)).unwrap(), m);
    }
}
