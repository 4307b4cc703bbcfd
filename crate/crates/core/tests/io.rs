use bivkrylov::dense::ComplexDenseMatrix;
use bivkrylov::io::{
    format_array, format_coordinate, parse_matrix_market, read_matrix_market, write_matrix_market, MatrixData,
};
use bivkrylov::krylov::SparseOperator;
use bivkrylov::{Complex64, Error};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e3..1e3f64, -1e-200..1e-200f64, Just(0.0), -1e300..1e300f64]
}

fn matrix(complex: bool) -> impl Strategy<Value = ComplexDenseMatrix> {
    (1usize..7, 1usize..7).prop_flat_map(move |(r, c)| {
        prop::collection::vec((finite(), finite()), r * c).prop_map(move |v| {
            let data: Vec<Complex64> =
                v.into_iter().map(|(a, b)| Complex64::new(a, if complex { b } else { 0.0 })).collect();
            ComplexDenseMatrix::from_row_major(r, c, &data).unwrap()
        })
    })
}

fn entrywise_close(a: &ComplexDenseMatrix, b: &ComplexDenseMatrix) -> bool {
    a.shape() == b.shape()
        && a.to_row_major().iter().zip(b.to_row_major()).all(|(x, y)| (x - y).norm() <= 1e-15 * x.norm())
}

proptest! {
    #[test]
    fn array_round_trip(m in prop_oneof![matrix(false), matrix(true)]) {
        let back = parse_matrix_market(&format_array(&m)).unwrap().to_dense();
        prop_assert!(entrywise_close(&m, &back));
    }

    #[test]
    fn coordinate_round_trip(
        n in 1usize..8,
        entries in prop::collection::vec((0usize..8, 0usize..8, -10.0..10.0f64, -10.0..10.0f64), 0..20),
    ) {
        let triplets: Vec<_> = entries
            .into_iter()
            .filter(|(i, j, _, _)| *i < n && *j < n)
            .map(|(i, j, a, b)| (i, j, Complex64::new(a, b)))
            .collect();
        let s = SparseOperator::from_triplets(n, &triplets).unwrap();
        let parsed = parse_matrix_market(&format_coordinate(&s)).unwrap();
        prop_assert!(matches!(parsed, MatrixData::Sparse(_)));
        prop_assert!(entrywise_close(&s.to_dense(), &parsed.to_dense()));
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = ComplexDenseMatrix::from_real_rows(&[&[0.1, 1.0 / 3.0], &[-2.5e-17, 7.0]]).unwrap();
    let path = dir.path().join("m.mtx");
    write_matrix_market(&path, &m).unwrap();
    assert_eq!(read_matrix_market(&path).unwrap().to_dense().to_row_major(), m.to_row_major());
}

#[test]
fn symmetric_lower_triangle_is_expanded() {
    let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 2\n2 1 -1\n3 2 5\n3 3 1\n";
    let m = parse_matrix_market(text).unwrap().to_dense();
    let expected = ComplexDenseMatrix::from_real_rows(&[&[2.0, -1.0, 0.0], &[-1.0, 0.0, 5.0], &[0.0, 5.0, 1.0]]).unwrap();
    assert_eq!(m.to_row_major(), expected.to_row_major());
}

#[test]
fn hermitian_and_skew_storage() {
    let text = "%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n1 1 1 0\n2 1 0 2\n";
    let m = parse_matrix_market(text).unwrap().to_dense();
    assert_eq!(m.get(0, 1), Complex64::new(0.0, -2.0));
    let text = "%%MatrixMarket matrix array real skew-symmetric\n2 2\n3\n";
    let m = parse_matrix_market(text).unwrap().to_dense();
    assert_eq!(m.get(1, 0).re, 3.0);
    assert_eq!(m.get(0, 1).re, -3.0);
}

#[test]
fn malformed_header_is_line_one() {
    let err = parse_matrix_market("%%NotMatrixMarket matrix array real general\n1 1\n1\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
}

#[test]
fn errors_carry_line_numbers() {
    let err = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 3\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    let err = parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n").unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch(_) | Error::Parse { .. }), "{err:?}");
}
