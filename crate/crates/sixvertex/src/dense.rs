//! Minimal dense complex linear algebra.
//!
//! Everything downstream — monodromy products, double-row operators, tree
//! reconstructions — runs through the handful of operations in this module.
//! Matrices are immutable-after-construction, row-major, double-precision
//! complex, and small (dimension capped at [`crate::tol::DIMENSION_CAP`]),
//! so the implementations favor obviousness over cleverness: naive loops,
//! no sparsity, no BLAS.
//!
//! Index convention for the embedding helpers: a register of `n` two-level
//! factors is enumerated with factor 0 as the *most significant* bit of the
//! row/column index.  The auxiliary space of a monodromy matrix therefore
//! occupies factor 0, which makes its four operator blocks contiguous
//! quadrants of the full matrix.

use num_complex::Complex64;

use crate::{tol, Error, Result};

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    ///
    /// Panics if the entry count does not equal `rows * cols` or if any
    /// entry is non-finite; both indicate a caller bug, not a runtime
    /// condition.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        assert_eq!(
            entries.len(),
            rows * cols,
            "entry count {} does not match {}x{}",
            entries.len(),
            rows,
            cols
        );
        assert!(
            entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            "matrix entries must be finite"
        );
        ComplexMatrix { rows, cols, entries }
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        ComplexMatrix {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Diagonal matrix from the given values.
    pub fn diagonal(values: &[Complex64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.entries[i * n + i] = *v;
        }
        m
    }

    /// Builds a matrix entry by entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        Self::new(rows, cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entry slice.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Entry at (`r`, `c`).
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        assert!(r < self.rows && c < self.cols, "index out of range");
        self.entries[r * self.cols + c]
    }

    /// Replaces the entry at (`r`, `c`).
    pub fn set(&mut self, r: usize, c: usize, value: Complex64) {
        assert!(r < self.rows && c < self.cols, "index out of range");
        self.entries[r * self.cols + c] = value;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Plain transpose (no conjugation).
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.at(c, r))
    }

    /// Entrywise scalar multiple.
    pub fn scale(&self, s: Complex64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    /// Entrywise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.require_same_shape(other, "add")?;
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Entrywise difference.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.require_same_shape(other, "sub")?;
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Trace; panics on non-square input (caller bug).
    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square(), "trace requires a square matrix");
        (0..self.rows).map(|i| self.at(i, i)).sum()
    }

    /// Contiguous sub-block of size `rows` x `cols` starting at
    /// (`row_offset`, `col_offset`).
    pub fn block(&self, row_offset: usize, col_offset: usize, rows: usize, cols: usize) -> Self {
        assert!(row_offset + rows <= self.rows && col_offset + cols <= self.cols);
        Self::from_fn(rows, cols, |r, c| self.at(row_offset + r, col_offset + c))
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &StateVector) -> Result<StateVector> {
        if self.cols != v.dim() {
            return Err(Error::ShapeError {
                op: "matvec",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: v.dim(),
                right_cols: 1,
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for r in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..self.cols {
                acc += self.entries[r * self.cols + c] * v.entries()[c];
            }
            out[r] = acc;
        }
        Ok(StateVector::new(out))
    }

    fn require_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            Err(Error::ShapeError {
                op,
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            })
        } else {
            Ok(())
        }
    }
}

/// Dense complex state vector over a register of two-level factors.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    entries: Vec<Complex64>,
}

impl StateVector {
    /// Builds a state from entries; the length must be a power of two.
    pub fn new(entries: Vec<Complex64>) -> Self {
        assert!(
            entries.len().is_power_of_two(),
            "state dimension {} is not a power of two",
            entries.len()
        );
        assert!(
            entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            "state entries must be finite"
        );
        StateVector { entries }
    }

    /// Computational-basis vector `index` in dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index out of range");
        let mut entries = vec![Complex64::new(0.0, 0.0); dim];
        entries[index] = Complex64::new(1.0, 0.0);
        Self::new(entries)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn at(&self, i: usize) -> Complex64 {
        self.entries[i]
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Entrywise scalar multiple.
    pub fn scale(&self, s: Complex64) -> Self {
        StateVector {
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    /// Entrywise sum; panics on dimension mismatch (caller bug).
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "state dimension mismatch");
        StateVector {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Entrywise difference; panics on dimension mismatch (caller bug).
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "state dimension mismatch");
        StateVector {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Hermitian inner product `⟨self|other⟩` (conjugate-linear in `self`).
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim(), other.dim(), "state dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Reports a [`Error::ZeroState`] value when the norm sits below
    /// [`tol::ZERO_STATE_NORM`]; callers decide whether that is a warning
    /// (annihilated excitation, expected) or an error (division pending).
    pub fn zero_state_warning(&self) -> Option<Error> {
        let norm = self.norm();
        if norm < tol::ZERO_STATE_NORM {
            Some(Error::ZeroState { norm })
        } else {
            None
        }
    }
}

/// Kronecker product; dimensions multiply, capped at
/// [`tol::DIMENSION_CAP`].
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    let cap = tol::DIMENSION_CAP;
    if rows > cap || cols > cap {
        return Err(Error::DimensionCap {
            dim: rows.max(cols),
            cap,
        });
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows() {
        for ac in 0..a.cols() {
            let av = a.at(ar, ac);
            if av == Complex64::new(0.0, 0.0) {
                continue;
            }
            for br in 0..b.rows() {
                for bc in 0..b.cols() {
                    out.set(ar * b.rows() + br, ac * b.cols() + bc, av * b.at(br, bc));
                }
            }
        }
    }
    Ok(out)
}

/// Standard matrix product.
pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::ShapeError {
            op: "matmul",
            left_rows: a.rows(),
            left_cols: a.cols(),
            right_rows: b.rows(),
            right_cols: b.cols(),
        });
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a.entries()[i * k + p];
            if av == Complex64::new(0.0, 0.0) {
                continue;
            }
            let brow = &b.entries()[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    Ok(ComplexMatrix::new(m, n, out))
}

/// Product of a slice of matrices, left to right.
pub fn matmul_chain(factors: &[&ComplexMatrix]) -> Result<ComplexMatrix> {
    assert!(!factors.is_empty(), "empty matrix chain");
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = matmul(&acc, f)?;
    }
    Ok(acc)
}

/// Integer matrix power by repeated multiplication.
pub fn matpow(m: &ComplexMatrix, exponent: usize) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::ShapeError {
            op: "matpow",
            left_rows: m.rows(),
            left_cols: m.cols(),
            right_rows: m.rows(),
            right_cols: m.cols(),
        });
    }
    let mut acc = ComplexMatrix::identity(m.rows());
    for _ in 0..exponent {
        acc = matmul(&acc, m)?;
    }
    Ok(acc)
}

/// Trace over the two-dimensional auxiliary factor (factor 0, the most
/// significant index bit): interprets the input as a 2x2 block matrix of
/// `d x d` blocks and returns `block(0,0) + block(1,1)`.
pub fn partial_trace_aux(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() || m.rows() % 2 != 0 {
        return Err(Error::ShapeError {
            op: "partial_trace_aux",
            left_rows: m.rows(),
            left_cols: m.cols(),
            right_rows: m.rows(),
            right_cols: m.cols(),
        });
    }
    let d = m.rows() / 2;
    Ok(ComplexMatrix::from_fn(d, d, |r, c| {
        m.at(r, c) + m.at(d + r, d + c)
    }))
}

/// Relative residual `‖a − b‖_F / max(1, ‖b‖_F)`.
///
/// The guarded denominator makes the residual meaningful for identities
/// whose right side is the zero matrix.
pub fn rel_residual(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let diff = a.sub(b)?;
    Ok(diff.frobenius_norm() / 1.0_f64.max(b.frobenius_norm()))
}

/// Relative residual for state vectors, same normalization as
/// [`rel_residual`].
pub fn rel_residual_state(a: &StateVector, b: &StateVector) -> f64 {
    assert_eq!(a.dim(), b.dim(), "state dimension mismatch");
    a.sub(b).norm() / 1.0_f64.max(b.norm())
}

/// Embeds a two-factor operator (4x4) into a register of `n` two-level
/// factors, acting on factors `p` and `q` with `p` carrying the more
/// significant of the operator's own index bits.  All other factors carry
/// the identity.
pub fn embed_two_site(op4: &ComplexMatrix, p: usize, q: usize, n: usize) -> Result<ComplexMatrix> {
    assert_eq!(op4.rows(), 4, "two-site operator must be 4x4");
    assert_eq!(op4.cols(), 4, "two-site operator must be 4x4");
    assert!(p < n && q < n && p != q, "invalid factor indices");
    let dim = 1usize << n;
    if dim > tol::DIMENSION_CAP {
        return Err(Error::DimensionCap {
            dim,
            cap: tol::DIMENSION_CAP,
        });
    }
    let bp = n - 1 - p;
    let bq = n - 1 - q;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for row in 0..dim {
        let ip = (row >> bp) & 1;
        let iq = (row >> bq) & 1;
        let base = row & !(1 << bp) & !(1 << bq);
        for jp in 0..2usize {
            for jq in 0..2usize {
                let col = base | (jp << bp) | (jq << bq);
                let v = op4.at(ip * 2 + iq, jp * 2 + jq);
                if v != Complex64::new(0.0, 0.0) {
                    out.set(row, col, v);
                }
            }
        }
    }
    Ok(out)
}

/// Embeds a single-factor operator (2x2) into a register of `n` two-level
/// factors, acting on factor `p`.
pub fn embed_one_site(op2: &ComplexMatrix, p: usize, n: usize) -> Result<ComplexMatrix> {
    assert_eq!(op2.rows(), 2, "one-site operator must be 2x2");
    assert_eq!(op2.cols(), 2, "one-site operator must be 2x2");
    assert!(p < n, "invalid factor index");
    let dim = 1usize << n;
    if dim > tol::DIMENSION_CAP {
        return Err(Error::DimensionCap {
            dim,
            cap: tol::DIMENSION_CAP,
        });
    }
    let bp = n - 1 - p;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for row in 0..dim {
        let ip = (row >> bp) & 1;
        let base = row & !(1 << bp);
        for jp in 0..2usize {
            let col = base | (jp << bp);
            let v = op2.at(ip, jp);
            if v != Complex64::new(0.0, 0.0) {
                out.set(row, col, v);
            }
        }
    }
    Ok(out)
}

/// Solves the square system `a·x = b` by Gaussian elimination with
/// partial pivoting.  Intended for the small dense systems this crate
/// needs (normal equations, Newton steps); fails with a pole-proximity
/// error when a pivot falls below the global guard.
pub fn solve_linear(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    assert!(a.is_square(), "solve_linear needs a square matrix");
    let n = a.rows();
    assert_eq!(b.len(), n, "right-hand side length mismatch");
    let mut work: Vec<Vec<Complex64>> = (0..n)
        .map(|r| (0..n).map(|c| a.at(r, c)).collect())
        .collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                work[r1][col]
                    .norm()
                    .partial_cmp(&work[r2][col].norm())
                    .expect("finite entries")
            })
            .expect("non-empty range");
        let pivot = work[pivot_row][col];
        if pivot.norm() < tol::POLE_GUARD {
            return Err(Error::PoleProximity {
                context: "linear solve pivot",
                magnitude: pivot.norm(),
                guard: tol::POLE_GUARD,
            });
        }
        work.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = work[row][col] / pivot;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let sub = factor * work[col][k];
                work[row][k] -= sub;
            }
            let sub = factor * rhs[col];
            rhs[row] -= sub;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in (row + 1)..n {
            acc -= work[row][k] * x[k];
        }
        x[row] = acc / work[row][row];
    }
    Ok(x)
}
