//! Matrix Market reading and writing.
//!
//! Coordinate files become [`SparseOperator`]s (or dense matrices when not
//! square), array files become dense matrices. Symmetric, skew-symmetric and
//! Hermitian storage is expanded on read. Numbers are written with 17
//! significant digits so that a write-read round trip is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::dense::ComplexDenseMatrix;
use crate::error::{Error, Result};
use crate::krylov::{LinearOperator, SparseOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

/// Contents of a Matrix Market file.
#[derive(Debug, Clone)]
pub enum MatrixData {
    Dense(ComplexDenseMatrix),
    Sparse(SparseOperator),
}

impl MatrixData {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixData::Dense(m) => m.shape(),
            MatrixData::Sparse(s) => (s.dim(), s.dim()),
        }
    }

    pub fn to_dense(&self) -> ComplexDenseMatrix {
        match self {
            MatrixData::Dense(m) => m.clone(),
            MatrixData::Sparse(s) => s.to_dense(),
        }
    }

    /// Entries of an `n x 1` or `1 x n` matrix.
    pub fn to_vector(&self) -> Result<Vec<Complex64>> {
        let m = self.to_dense();
        match m.shape() {
            (_, 1) => Ok(m.column(0)),
            (1, _) => Ok(m.transpose().column(0)),
            (r, c) => Err(Error::DimensionMismatch(format!("expected a vector, found a {r}x{c} matrix"))),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(line: &str) -> Result<(Format, Field, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "expected `%%MatrixMarket matrix <format> <field> <symmetry>`"));
    }
    let format = match tokens[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(parse_err(1, format!("unknown format `{other}`"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "complex" => Field::Complex,
        "integer" => Field::Integer,
        "pattern" if format == Format::Coordinate => Field::Pattern,
        other => return Err(parse_err(1, format!("unsupported field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        "hermitian" if field == Field::Complex => Symmetry::Hermitian,
        other => return Err(parse_err(1, format!("unsupported symmetry `{other}`"))),
    };
    Ok((format, field, symmetry))
}

fn parse_number(token: Option<&str>, line: usize) -> Result<f64> {
    let token = token.ok_or_else(|| parse_err(line, "missing value"))?;
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("invalid number `{token}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value `{token}`")));
    }
    Ok(v)
}

fn parse_value<'a>(tokens: &mut impl Iterator<Item = &'a str>, field: Field, line: usize) -> Result<Complex64> {
    match field {
        Field::Pattern => Ok(Complex64::new(1.0, 0.0)),
        Field::Real | Field::Integer => Ok(Complex64::new(parse_number(tokens.next(), line)?, 0.0)),
        Field::Complex => {
            let re = parse_number(tokens.next(), line)?;
            let im = parse_number(tokens.next(), line)?;
            Ok(Complex64::new(re, im))
        }
    }
}

fn parse_index(token: Option<&str>, bound: usize, line: usize) -> Result<usize> {
    let token = token.ok_or_else(|| parse_err(line, "missing index"))?;
    let i: usize = token
        .parse()
        .map_err(|_| parse_err(line, format!("invalid index `{token}`")))?;
    if i == 0 || i > bound {
        return Err(Error::DimensionMismatch(format!(
            "line {line}: index {i} outside 1..={bound}"
        )));
    }
    Ok(i - 1)
}

fn mirrored(symmetry: Symmetry, v: Complex64) -> Complex64 {
    match symmetry {
        Symmetry::General | Symmetry::Symmetric => v,
        Symmetry::SkewSymmetric => -v,
        Symmetry::Hermitian => v.conj(),
    }
}

/// Parses Matrix Market text.
pub fn parse_matrix_market(text: &str) -> Result<MatrixData> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let (format, field, symmetry) = parse_header(header)?;
    let mut content = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let (size_line, size) = content.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let mut tokens = size.split_whitespace();
    let count_of = |t: Option<&str>| -> Result<usize> {
        let t = t.ok_or_else(|| parse_err(size_line, "incomplete size line"))?;
        t.parse()
            .map_err(|_| parse_err(size_line, format!("invalid size `{t}`")))
    };
    let rows = count_of(tokens.next())?;
    let cols = count_of(tokens.next())?;
    if symmetry != Symmetry::General && rows != cols {
        return Err(Error::DimensionMismatch(format!(
            "symmetric storage needs a square matrix, header says {rows}x{cols}"
        )));
    }

    match format {
        Format::Coordinate => {
            let nnz = count_of(tokens.next())?;
            let mut triplets = Vec::with_capacity(nnz);
            let mut seen = 0;
            for (line, text) in content {
                seen += 1;
                if seen > nnz {
                    return Err(Error::DimensionMismatch(format!(
                        "line {line}: more than the {nnz} entries declared"
                    )));
                }
                let mut t = text.split_whitespace();
                let i = parse_index(t.next(), rows, line)?;
                let j = parse_index(t.next(), cols, line)?;
                let v = parse_value(&mut t, field, line)?;
                triplets.push((i, j, v));
                if symmetry != Symmetry::General && i != j {
                    triplets.push((j, i, mirrored(symmetry, v)));
                }
            }
            if seen != nnz {
                return Err(Error::DimensionMismatch(format!("declared {nnz} entries, found {seen}")));
            }
            if rows == cols {
                Ok(MatrixData::Sparse(SparseOperator::from_triplets(rows, &triplets)?))
            } else {
                let mut m = ComplexDenseMatrix::zeros(rows, cols);
                for (i, j, v) in triplets {
                    m.set(i, j, m.get(i, j) + v);
                }
                Ok(MatrixData::Dense(m))
            }
        }
        Format::Array => {
            // column-major; symmetric variants store the lower triangle only
            let positions: Vec<(usize, usize)> = (0..cols)
                .flat_map(|j| {
                    let start = match symmetry {
                        Symmetry::General => 0,
                        Symmetry::SkewSymmetric => j + 1,
                        _ => j,
                    };
                    (start..rows).map(move |i| (i, j))
                })
                .collect();
            let mut values = Vec::with_capacity(positions.len());
            for (line, text) in content {
                let mut t = text.split_whitespace();
                if values.len() == positions.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "line {line}: more than the {} entries expected",
                        positions.len()
                    )));
                }
                values.push(parse_value(&mut t, field, line)?);
            }
            if values.len() != positions.len() {
                return Err(Error::DimensionMismatch(format!(
                    "expected {} entries, found {}",
                    positions.len(),
                    values.len()
                )));
            }
            let mut m = ComplexDenseMatrix::zeros(rows, cols);
            for (&(i, j), &v) in positions.iter().zip(&values) {
                m.set(i, j, v);
                if symmetry != Symmetry::General && i != j {
                    m.set(j, i, mirrored(symmetry, v));
                }
            }
            Ok(MatrixData::Dense(m))
        }
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<MatrixData> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_market(&text)
}

fn is_real(entries: impl IntoIterator<Item = Complex64>) -> bool {
    entries.into_iter().all(|z| z.im == 0.0)
}

fn push_value(out: &mut String, v: Complex64, real: bool) {
    if real {
        let _ = writeln!(out, "{:.16e}", v.re);
    } else {
        let _ = writeln!(out, "{:.16e} {:.16e}", v.re, v.im);
    }
}

/// Array-format text, `real` when every entry has zero imaginary part.
pub fn format_array(m: &ComplexDenseMatrix) -> String {
    let real = is_real(m.to_row_major());
    let mut out = format!(
        "%%MatrixMarket matrix array {} general\n{} {}\n",
        if real { "real" } else { "complex" },
        m.rows(),
        m.cols()
    );
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            push_value(&mut out, m.get(i, j), real);
        }
    }
    out
}

/// Coordinate-format text for a sparse operator.
pub fn format_coordinate(s: &SparseOperator) -> String {
    let triplets = s.triplets();
    let real = is_real(triplets.iter().map(|t| t.2));
    let n = s.dim();
    let mut out = format!(
        "%%MatrixMarket matrix coordinate {} general\n{n} {n} {}\n",
        if real { "real" } else { "complex" },
        triplets.len()
    );
    for (i, j, v) in triplets {
        let _ = write!(out, "{} {} ", i + 1, j + 1);
        push_value(&mut out, v, real);
    }
    out
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &ComplexDenseMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_array(m)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_vector(path: impl AsRef<Path>, v: &[Complex64]) -> Result<()> {
    write_matrix_market(path, &ComplexDenseMatrix::column_vector(v)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_identity() {
        let text = "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 1.0\n2 2 1.0\n";
        let m = parse_matrix_market(text).unwrap();
        assert!(matches!(m, MatrixData::Sparse(_)));
        assert_eq!(m.to_dense(), ComplexDenseMatrix::identity(2));
    }

    #[test]
    fn symmetric_expansion() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 2\n2 1 -1\n3 2 5\n3 3 7\n";
        let m = parse_matrix_market(text).unwrap().to_dense();
        let expected =
            ComplexDenseMatrix::from_real_rows(&[&[2.0, -1.0, 0.0], &[-1.0, 0.0, 5.0], &[0.0, 5.0, 7.0]]).unwrap();
        assert_eq!(m, expected);

        let array = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n";
        let m = parse_matrix_market(array).unwrap().to_dense();
        assert_eq!(m, ComplexDenseMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 3.0]]).unwrap());

        let herm = "%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n1 1 1 0\n2 1 0 1\n";
        let m = parse_matrix_market(herm).unwrap().to_dense();
        assert_eq!(m.get(0, 1), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn errors_carry_lines() {
        let bad = parse_matrix_market("%%MatrixMarket tensor array real general\n1 1\n1\n");
        assert!(matches!(bad, Err(Error::Parse { line: 1, .. })));
        let bad = parse_matrix_market("%%MatrixMarket matrix array real general\n2 1\n1\nx\n");
        assert!(matches!(bad, Err(Error::Parse { line: 4, .. })));
        let short = parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n");
        assert!(matches!(short, Err(Error::DimensionMismatch(_))));
        let out = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n");
        assert!(matches!(out, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn array_round_trip() {
        let m = ComplexDenseMatrix::try_from_fn(3, 2, |i, j| {
            Complex64::new(0.1 * (i as f64 + 1.0) / 3.0, if j == 1 { -1.0 / 7.0 } else { 0.0 })
        })
        .unwrap();
        let back = parse_matrix_market(&format_array(&m)).unwrap().to_dense();
        assert_eq!(back, m);

        let r = ComplexDenseMatrix::from_real_rows(&[&[1.0 / 3.0, 2e-300], &[-5.5e200, 0.0]]).unwrap();
        let text = format_array(&r);
        assert!(text.contains(" real "));
        assert_eq!(parse_matrix_market(&text).unwrap().to_dense(), r);
    }

    #[test]
    fn coordinate_round_trip() {
        let s = SparseOperator::from_triplets(3, &[(0, 2, Complex64::new(0.3, 0.0)), (1, 1, Complex64::new(-2.0, 0.0))])
            .unwrap();
        let back = parse_matrix_market(&format_coordinate(&s)).unwrap();
        assert_eq!(back.to_dense(), s.to_dense());
    }
}
