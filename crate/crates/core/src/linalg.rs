//! Exact integer rank (fraction-free Bareiss elimination) and a few small
//! dense float helpers.

use crate::error::{Error, Result};

/// Result of an exact row reduction: the rank and the indices of the rows
/// that form a maximal independent subset (in input order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowEchelon {
    pub rank: usize,
    pub independent_rows: Vec<usize>,
}

/// Rank of an integer matrix given as rows, by fraction-free elimination.
pub fn integer_rank(rows: &[Vec<i64>]) -> Result<usize> {
    Ok(independent_rows(rows)?.rank)
}

/// Greedy maximal independent subset of `rows`, scanning in order.
///
/// Each candidate row is reduced against the current Bareiss echelon form;
/// it is kept iff a non-zero entry survives. All arithmetic is exact.
pub fn independent_rows(rows: &[Vec<i64>]) -> Result<RowEchelon> {
    let ncols = rows.first().map_or(0, Vec::len);
    // echelon rows with their pivot column, plus the previous pivot (Bareiss divisor)
    let mut basis: Vec<(Vec<i128>, usize)> = Vec::new();
    let mut kept = Vec::new();
    for (idx, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::LengthMismatch { expected: ncols, got: row.len() });
        }
        let mut v: Vec<i128> = row.iter().map(|&x| x as i128).collect();
        let mut prev_pivot: i128 = 1;
        for (b, col) in &basis {
            let p = b[*col];
            let f = v[*col];
            for j in 0..ncols {
                // v_j ← (p·v_j − f·b_j) / prev  (exact by Sylvester's identity)
                let num = p
                    .checked_mul(v[j])
                    .and_then(|a| f.checked_mul(b[j]).and_then(|c| a.checked_sub(c)))
                    .ok_or(Error::Overflow)?;
                debug_assert_eq!(num % prev_pivot, 0, "Bareiss division must be exact");
                v[j] = num / prev_pivot;
            }
            prev_pivot = p;
        }
        if let Some(col) = v.iter().position(|&x| x != 0) {
            basis.push((v, col));
            kept.push(idx);
        }
    }
    Ok(RowEchelon { rank: kept.len(), independent_rows: kept })
}

/// Least-squares solution of A x = b (minimum norm), with the residual ‖Ax − b‖∞.
pub fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    if b.len() != rows {
        return Err(Error::LengthMismatch { expected: rows, got: b.len() });
    }
    if rows == 0 || cols == 0 {
        let res = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        return Ok((vec![0.0; cols], res));
    }
    let mat = nalgebra::DMatrix::from_fn(rows, cols, |i, j| a[i][j]);
    let rhs = nalgebra::DVector::from_column_slice(b);
    let svd = mat.clone().svd(true, true);
    let x = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
    let res = (&mat * &x - &rhs).amax();
    Ok((x.iter().copied().collect(), res))
}
