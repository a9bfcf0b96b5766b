//! Matrix Market coordinate format (real, general or symmetric).

use std::io::{BufRead, Write};

use crate::error::{GadiError, Result};
use crate::linalg::SparseMatrix;

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SparseMatrix> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| GadiError::Parse("empty Matrix Market input".into()))??;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(GadiError::Parse(format!("unsupported header `{header}`")));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(GadiError::Parse(format!("unsupported field `{}`", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(GadiError::Parse(format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| GadiError::Parse(format!("`{s}`: {e}")));
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(GadiError::Parse(format!("bad size line `{line}`")));
                }
                let dims = (parse_usize(parts[0])?, parse_usize(parts[1])?, parse_usize(parts[2])?);
                triplets.reserve(if symmetric { 2 * dims.2 } else { dims.2 });
                size = Some(dims);
            }
            Some((m, n, _)) => {
                if parts.len() != 3 {
                    return Err(GadiError::Parse(format!("bad entry line `{line}`")));
                }
                let (i, j) = (parse_usize(parts[0])?, parse_usize(parts[1])?);
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(GadiError::Parse(format!("entry ({i}, {j}) out of range")));
                }
                let v: f64 = parts[2].parse().map_err(|e| GadiError::Parse(format!("`{}`: {e}", parts[2])))?;
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (m, n, nnz) = size.ok_or_else(|| GadiError::Parse("missing size line".into()))?;
    let stored = if symmetric { triplets.iter().filter(|t| t.0 >= t.1).count() } else { triplets.len() };
    if stored != nnz {
        return Err(GadiError::Parse(format!("expected {nnz} entries, found {stored}")));
    }
    SparseMatrix::from_triplets(m, n, &triplets)
}

/// Write in `general` form with full binary64 round-trip precision.
pub fn write_matrix_market<W: Write>(a: &SparseMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_symmetric() {
        let src =
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2.0\n2 1 -1\n2 2 2\n3 3 1.5\n";
        let a = read_matrix_market(src.as_bytes()).unwrap();
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.nnz(), 5);
    }

    #[test]
    fn round_trip_is_exact() {
        let a = SparseMatrix::tridiagonal(4, -1.0 - 1.0 / 6.0, 6.0, -1.0 + 1.0 / 6.0);
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let b = read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n".as_bytes()).is_err());
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n";
        assert!(read_matrix_market(short.as_bytes()).is_err());
        let oob = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n";
        assert!(read_matrix_market(oob.as_bytes()).is_err());
    }
}
