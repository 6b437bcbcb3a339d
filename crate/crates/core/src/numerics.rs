//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are stored column-major: entry `(r, c)` lives at `c * rows + r`, so
//! every column (dictionary atom) is a contiguous slice. Vectors are plain
//! `Vec<C64>` / `&[C64]`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A complex vector. Kept as a plain `Vec` so callers can use slice APIs directly.
pub type ComplexVector = Vec<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Tolerance used by [`ComplexMatrix::check_unit_columns`].
pub const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix must be at least 1x1");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { C64::new(1.0, 0.0) } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix must be at least 1x1");
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ShapeMismatch(format!("empty {rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::ShapeMismatch("columns differ in length".into()));
        }
        Self::from_col_major(rows, columns.len(), columns.concat())
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn hstack(blocks: &[ComplexMatrix]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::ShapeMismatch("no blocks to stack".into()))?;
        if blocks.iter().any(|b| b.rows != first.rows) {
            return Err(Error::ShapeMismatch("blocks differ in row count".into()));
        }
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut data = Vec::with_capacity(first.rows * cols);
        for b in blocks {
            data.extend_from_slice(&b.data);
        }
        Ok(Self {
            rows: first.rows,
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[c * self.rows + r]
    }

    pub fn column(&self, c: usize) -> &[C64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks_exact(self.rows)
    }

    /// Column-major backing storage.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.columns().map(norm2).collect()
    }

    /// `self · x`
    pub fn mul_vec(&self, x: &[C64]) -> ComplexVector {
        assert_eq!(x.len(), self.cols, "mul_vec length mismatch");
        let mut out = vec![ZERO; self.rows];
        for (col, &xc) in self.columns().zip(x) {
            if xc == ZERO {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(col) {
                *o += a * xc;
            }
        }
        out
    }

    /// `selfᴴ · y`
    pub fn adjoint_mul_vec(&self, y: &[C64]) -> ComplexVector {
        assert_eq!(y.len(), self.rows, "adjoint_mul_vec length mismatch");
        self.columns().map(|col| dot_h(col, y)).collect()
    }

    /// `selfᴴ · other`, a `self.cols × other.cols` matrix.
    pub fn adjoint_mul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} adjoint times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = Vec::with_capacity(self.cols * other.cols);
        for b in other.columns() {
            for a in self.columns() {
                data.push(dot_h(a, b));
            }
        }
        Ok(ComplexMatrix {
            rows: self.cols,
            cols: other.cols,
            data,
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows.len(), self.cols, |r, c| self.get(rows[r], c))
    }

    pub fn select_columns(&self, cols: &[usize]) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, cols.len(), |r, c| self.get(r, cols[c]))
    }

    /// Copies the contiguous column range `start..end`.
    pub fn column_range(&self, start: usize, end: usize) -> ComplexMatrix {
        assert!(start < end && end <= self.cols, "bad column range");
        ComplexMatrix {
            rows: self.rows,
            cols: end - start,
            data: self.data[start * self.rows..end * self.rows].to_vec(),
        }
    }

    /// Fails with [`Error::NotNormalized`] on the first column whose l2 norm is
    /// not within [`UNIT_NORM_TOL`] of one.
    pub fn check_unit_columns(&self) -> Result<()> {
        for (column, col) in self.columns().enumerate() {
            let norm = norm2(col);
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotNormalized { column, norm });
            }
        }
        Ok(())
    }
}

/// `aᴴ b`
#[inline]
pub fn dot_h(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

#[inline]
pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Principal branch of `(j·base_scale)^exponent`.
///
/// Equals `exp(exponent·ln(base_scale) + j·exponent·π/2)`.
pub fn complex_power(base_scale: f64, exponent: f64) -> Result<C64> {
    if !(base_scale > 0.0) || !base_scale.is_finite() {
        return Err(Error::Domain(format!(
            "complex_power needs a positive finite base, got {base_scale}"
        )));
    }
    if !exponent.is_finite() {
        return Err(Error::Domain(format!("non-finite exponent {exponent}")));
    }
    Ok(C64::from_polar(
        (exponent * base_scale.ln()).exp(),
        exponent * FRAC_PI_2,
    ))
}

/// Scales every column to unit l2 norm.
pub fn normalize_columns(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    normalize_columns_with_norms(m).map(|(n, _)| n)
}

/// Like [`normalize_columns`], also returning the original column norms.
pub fn normalize_columns_with_norms(m: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>)> {
    let norms = m.column_norms();
    if let Some(index) = norms.iter().position(|&n| !(n > 0.0) || !n.is_finite()) {
        return Err(Error::DegenerateColumn { index });
    }
    let mut data = m.data.clone();
    for (col, &n) in data.chunks_exact_mut(m.rows).zip(&norms) {
        for z in col {
            *z /= n;
        }
    }
    Ok((
        ComplexMatrix {
            rows: m.rows,
            cols: m.cols,
            data,
        },
        norms,
    ))
}

/// Least-squares solution of `a·x ≈ y` through an orthogonal factorization.
pub fn ls_solve(a: &ComplexMatrix, y: &[C64]) -> Result<ComplexVector> {
    if y.len() != a.rows() {
        return Err(Error::ShapeMismatch(format!(
            "rhs has length {}, matrix has {} rows",
            y.len(),
            a.rows()
        )));
    }
    if a.cols() > a.rows() {
        return Err(Error::RankDeficient { column: a.rows() });
    }
    let mut qr = IncrementalQr::with_capacity(a.rows(), a.cols());
    for col in a.columns() {
        qr.push(col)?;
    }
    Ok(qr.solve(y))
}

/// Thin QR factorization `A = Q·R` grown one column at a time.
///
/// New columns are orthogonalized with two passes of classical Gram-Schmidt,
/// which keeps `Q` orthonormal to working precision. A column whose orthogonal
/// remainder falls below `max(rows, cols)·ε·(largest column norm)` is rejected
/// as rank deficient and leaves the factorization untouched.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    rows: usize,
    /// Orthonormal columns, column-major.
    q: Vec<C64>,
    /// Upper triangle of R packed by column: column j holds j+1 entries at offset j(j+1)/2.
    r: Vec<C64>,
    len: usize,
    max_col_norm: f64,
    scratch: Vec<C64>,
}

impl IncrementalQr {
    pub fn new(rows: usize) -> Self {
        Self::with_capacity(rows, 0)
    }

    pub fn with_capacity(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            q: Vec::with_capacity(rows * cols),
            r: Vec::with_capacity(cols * (cols + 1) / 2),
            len: 0,
            max_col_norm: 0.0,
            scratch: vec![ZERO; rows],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn q_column(&self, j: usize) -> &[C64] {
        &self.q[j * self.rows..(j + 1) * self.rows]
    }

    /// Appends a column. On rank deficiency the factorization is unchanged.
    pub fn push(&mut self, col: &[C64]) -> Result<()> {
        assert_eq!(col.len(), self.rows, "column length mismatch");
        let k = self.len;
        if k >= self.rows {
            return Err(Error::RankDeficient { column: k });
        }
        let norm = norm2(col);
        let max_norm = self.max_col_norm.max(norm);
        let tol = self.rows.max(k + 1) as f64 * f64::EPSILON * max_norm;

        let mut coeffs = vec![ZERO; k + 1];
        self.scratch.copy_from_slice(col);
        for _pass in 0..2 {
            for j in 0..k {
                let qj = &self.q[j * self.rows..(j + 1) * self.rows];
                let c = dot_h(qj, &self.scratch);
                for (s, &qv) in self.scratch.iter_mut().zip(qj) {
                    *s -= qv * c;
                }
                coeffs[j] += c;
            }
        }
        let rem = norm2(&self.scratch);
        if !(rem > tol) {
            return Err(Error::RankDeficient { column: k });
        }
        coeffs[k] = C64::new(rem, 0.0);
        self.q.extend(self.scratch.iter().map(|&s| s / rem));
        self.r.extend_from_slice(&coeffs);
        self.len += 1;
        self.max_col_norm = max_norm;
        Ok(())
    }

    /// Removes the component of `v` lying in the span of the factored columns.
    pub fn project_out(&self, v: &mut [C64]) {
        for j in 0..self.len {
            let qj = self.q_column(j);
            let c = dot_h(qj, v);
            for (x, &qv) in v.iter_mut().zip(qj) {
                *x -= qv * c;
            }
        }
    }

    /// Removes only the component along the most recently added column.
    pub fn project_out_last(&self, v: &mut [C64]) {
        if self.len == 0 {
            return;
        }
        let q = self.q_column(self.len - 1);
        let c = dot_h(q, v);
        for (x, &qv) in v.iter_mut().zip(q) {
            *x -= qv * c;
        }
    }

    /// Least-squares coefficients of `y` on the factored columns.
    pub fn solve(&self, y: &[C64]) -> ComplexVector {
        assert_eq!(y.len(), self.rows, "rhs length mismatch");
        let k = self.len;
        let mut x: Vec<C64> = (0..k).map(|j| dot_h(self.q_column(j), y)).collect();
        for i in (0..k).rev() {
            let mut s = x[i];
            for j in i + 1..k {
                s -= self.r_entry(i, j) * x[j];
            }
            x[i] = s / self.r_entry(i, i);
        }
        x
    }

    fn r_entry(&self, i: usize, j: usize) -> C64 {
        self.r[j * (j + 1) / 2 + i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn complex_power_values() {
        let close = |a: C64, b: C64| (a - b).norm() < 1e-12;
        assert!(close(complex_power(1.0, 0.0).unwrap(), c(1.0, 0.0)));
        assert!(close(complex_power(1.0, 1.0).unwrap(), c(0.0, 1.0)));
        assert!(close(complex_power(1.0, -1.0).unwrap(), c(0.0, -1.0)));
        // sqrt(2) * e^{j pi/4} = 1 + j
        assert!(close(complex_power(2.0, 0.5).unwrap(), c(1.0, 1.0)));
        assert!(complex_power(0.0, 1.0).is_err());
        assert!(complex_power(-1.0, 1.0).is_err());
    }

    #[test]
    fn complex_power_inverse_pairs() {
        for s in [0.5, 1.0, 2.0] {
            for a in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                let p = complex_power(s, a).unwrap() * complex_power(s, -a).unwrap();
                assert!((p - c(1.0, 0.0)).norm() <= 1e-12, "s={s} a={a}");
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let id = ComplexMatrix::identity(2);
        assert_eq!(normalize_columns(&id).unwrap(), id);

        let m = ComplexMatrix::from_columns(&[vec![c(3.0, 0.0), c(4.0, 0.0)]]).unwrap();
        let n = normalize_columns(&m).unwrap();
        assert!((n.get(0, 0) - c(0.6, 0.0)).norm() < 1e-15);
        assert!((n.get(1, 0) - c(0.8, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn normalize_reports_zero_column() {
        let m = ComplexMatrix::from_columns(&[vec![c(1.0, 0.0)], vec![c(0.0, 0.0)]]).unwrap();
        match normalize_columns(&m) {
            Err(Error::DegenerateColumn { index }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ls_identity_and_single_column() {
        let y = vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, -1.0)];
        let x = ls_solve(&ComplexMatrix::identity(3), &y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-14);
        }

        let phi = normalize_columns(&random_matrix(6, 1, 3)).unwrap();
        let y: Vec<C64> = phi.column(0).iter().map(|z| z * 3.5).collect();
        let x = ls_solve(&phi, &y).unwrap();
        assert!((x[0] - c(3.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ls_recovers_consistent_system() {
        let a = random_matrix(8, 3, 11);
        let x0 = vec![c(0.7, -0.2), c(-1.5, 0.3), c(0.05, 2.0)];
        let y = a.mul_vec(&x0);
        let x = ls_solve(&a, &y).unwrap();
        let err: f64 = x.iter().zip(&x0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-9 * norm2(&x0));
    }

    #[test]
    fn ls_rejects_rank_deficient() {
        let col = vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0)];
        let twice: Vec<C64> = col.iter().map(|z| z * 2.0).collect();
        let a = ComplexMatrix::from_columns(&[col, twice]).unwrap();
        assert!(matches!(
            ls_solve(&a, &[c(1.0, 0.0); 3]),
            Err(Error::RankDeficient { column: 1 })
        ));
        // wide matrices can never have full column rank
        let wide = random_matrix(2, 3, 1);
        assert!(ls_solve(&wide, &[c(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn rank_deficient_push_leaves_factorization_intact() {
        let a = random_matrix(5, 2, 4);
        let mut qr = IncrementalQr::new(5);
        qr.push(a.column(0)).unwrap();
        qr.push(a.column(1)).unwrap();
        let combo: Vec<C64> = a
            .column(0)
            .iter()
            .zip(a.column(1))
            .map(|(x, y)| x * c(0.5, 1.0) - y)
            .collect();
        assert!(qr.push(&combo).is_err());
        assert_eq!(qr.len(), 2);
    }

    #[test]
    fn adjoint_mul_matches_entrywise_definition() {
        let a = random_matrix(4, 3, 5);
        let b = random_matrix(4, 2, 6);
        let g = a.adjoint_mul(&b).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let mut s = c(0.0, 0.0);
                for r in 0..4 {
                    s += a.get(r, i).conj() * b.get(r, j);
                }
                assert!((g.get(i, j) - s).norm() < 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(seed in any::<u64>(), rows in 1usize..9, cols in 1usize..9) {
            let m = random_matrix(rows, cols, seed);
            let once = normalize_columns(&m).unwrap();
            for n in once.column_norms() {
                prop_assert!((n - 1.0).abs() <= 1e-12);
            }
            let twice = normalize_columns(&once).unwrap();
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).norm() <= 1e-12);
            }
        }

        #[test]
        fn ls_residual_is_orthogonal(seed in any::<u64>(), rows in 3usize..12, cols in 1usize..4) {
            let a = random_matrix(rows, cols, seed);
            let y = random_matrix(rows, 1, seed ^ 0xabc).column(0).to_vec();
            let x = ls_solve(&a, &y).unwrap();
            let fit = a.mul_vec(&x);
            let resid: Vec<C64> = y.iter().zip(&fit).map(|(p, q)| p - q).collect();
            let worst = a
                .adjoint_mul_vec(&resid)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            prop_assert!(worst <= 1e-9 * norm2(&y));
        }
    }
}
