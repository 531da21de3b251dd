//! Small dense complex matrices.
//!
//! Everything in this crate is at most 9×9 (the Choi matrix of a qutrit
//! channel), so the kernel favours simplicity and bit-stable results over
//! blocking or vectorisation. Hermitian eigenproblems are solved with cyclic
//! complex Jacobi rotations.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type Complex = Complex64;

/// Largest supported row or column count.
pub const MAX_DIM: usize = 9;

/// Default absolute tolerance on `max |A - A†|` for Hermitian checks.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Default relative eigenvalue threshold for [`numerical_rank`].
pub const RANK_TOL: f64 = 1e-9;
/// Default relative slack for [`is_psd`].
pub const PSD_TOL: f64 = 1e-9;
/// Below this largest eigenvalue a matrix is treated as zero.
pub const ZERO_FLOOR: f64 = 1e-14;

const MAX_SWEEPS: usize = 100;

#[inline]
pub fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

#[inline]
pub fn re(x: f64) -> Complex {
    Complex::new(x, 0.0)
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(
            rows > 0 && cols > 0 && rows <= MAX_DIM && cols <= MAX_DIM,
            "matrix shape {rows}x{cols} outside 1..={MAX_DIM}"
        );
        CMatrix {
            rows,
            cols,
            data: vec![Complex::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = re(1.0);
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting bad shapes and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::DimensionMismatch {
                expected: format!("shape within 1..={MAX_DIM}"),
                found: format!("{rows}x{cols}"),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                found: format!("{} entries", data.len()),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch {
                expected: format!("rows of length {n_cols}"),
                found: "ragged rows".into(),
            });
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

    /// Real-valued convenience constructor, mostly for tests and fixtures.
    pub fn from_real(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex>> = rows.iter().map(|r| r.iter().map(|&x| re(x)).collect()).collect();
        Self::from_rows(&rows)
    }

    /// The rank-one matrix `v v†`.
    pub fn outer(v: &[Complex]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &x) in values.iter().enumerate() {
            m[(i, i)] = re(x);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Entries in row-major order; for a d×d operator this is its vectorisation.
    #[inline]
    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows on the right operand", self.cols),
                found: format!("{}", other.rows),
            });
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == Complex::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn scale(&self, s: Complex) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |self - other|` over entries; infinite when the shapes differ.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `max |U U† - I|`; infinite for non-square input.
    pub fn unitarity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let prod = self.matmul(&self.adjoint()).expect("square");
        prod.max_abs_diff(&CMatrix::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }

    /// Eigendecomposition of a Hermitian matrix; see [`hermitian_eigen`].
    pub fn hermitian_eigen(&self, tol: f64) -> Result<HermitianEigen> {
        hermitian_eigen(self, tol)
    }

    /// Copies a square block into an `n × n` zero matrix at the given row/column indices.
    pub fn embed(&self, indices: &[usize], n: usize) -> CMatrix {
        assert_eq!(self.rows, indices.len());
        assert!(self.is_square());
        let mut out = CMatrix::zeros(n, n);
        for (i, &p) in indices.iter().enumerate() {
            for (j, &q) in indices.iter().enumerate() {
                out[(p, q)] = self[(i, j)];
            }
        }
        out
    }

    /// Principal submatrix on the given indices.
    pub fn principal(&self, indices: &[usize]) -> CMatrix {
        let k = indices.len();
        let mut out = CMatrix::zeros(k, k);
        for (i, &p) in indices.iter().enumerate() {
            for (j, &q) in indices.iter().enumerate() {
                out[(i, j)] = self[(p, q)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

fn zip_with(a: &CMatrix, b: &CMatrix, op: impl Fn(Complex, Complex) -> Complex) -> CMatrix {
    assert!(
        a.rows == b.rows && a.cols == b.cols,
        "shape mismatch {}x{} vs {}x{}",
        a.rows,
        a.cols,
        b.rows,
        b.cols
    );
    CMatrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| op(x, y)).collect(),
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        zip_with(self, rhs, |x, y| x + y)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        zip_with(self, rhs, |x, y| x - y)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(re(-1.0))
    }
}

impl Mul<f64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: f64) -> CMatrix {
        self.scale(re(rhs))
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:>+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

// Matrices travel as arrays of rows, each entry a `[re, im]` pair.
impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let rows: Vec<Vec<Complex>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(|[x, y]| c(x, y)).collect())
            .collect();
        CMatrix::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// Result of [`hermitian_eigen`]: `A = V diag(values) V†`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<Complex> {
        self.vectors.column(k)
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Rebuilds `V diag(λ) V†`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            for i in 0..n {
                let vik = self.vectors[(i, k)] * lambda;
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Cyclic complex Jacobi eigensolver.
///
/// Each rotation first removes the phase of `a[p][q]` with a diagonal unitary
/// and then applies the classical real Jacobi rotation, so the pair update is
/// `A ← G† A G` with `G = diag(1, e^{-iφ}) R(θ)` on rows/columns `p, q`.
pub fn hermitian_eigen(a: &CMatrix, tol: f64) -> Result<HermitianEigen> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let deviation = a.hermitian_deviation();
    if deviation > tol {
        return Err(Error::NotHermitian { deviation });
    }
    let n = a.rows;
    let mut w = a.clone();
    for i in 0..n {
        for j in i + 1..n {
            let avg = (w[(i, j)] + w[(j, i)].conj()) * 0.5;
            w[(i, j)] = avg;
            w[(j, i)] = avg.conj();
        }
        w[(i, i)] = re(w[(i, i)].re);
    }
    let mut v = CMatrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = w[(p, q)];
                let h = apq.norm();
                let app = w[(p, p)].re;
                let aqq = w[(q, q)].re;
                if h == 0.0 || h <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    w[(p, q)] = re(0.0);
                    w[(q, p)] = re(0.0);
                    continue;
                }
                rotated = true;
                let phase = apq / h;
                let theta = (aqq - app) / (2.0 * h);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                let g_pp = re(cs);
                let g_pq = re(sn);
                let g_qp = phase.conj() * (-sn);
                let g_qq = phase.conj() * cs;

                for k in 0..n {
                    let akp = w[(k, p)];
                    let akq = w[(k, q)];
                    w[(k, p)] = akp * g_pp + akq * g_qp;
                    w[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = w[(p, k)];
                    let aqk = w[(q, k)];
                    w[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    w[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                w[(p, q)] = re(0.0);
                w[(q, p)] = re(0.0);
                w[(p, p)] = re(w[(p, p)].re);
                w[(q, q)] = re(w[(q, q)].re);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(j, j)].re.total_cmp(&w[(i, i)].re));
    let values = order.iter().map(|&i| w[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Number of eigenvalues above `tol_rel · λ_max`; zero when `λ_max ≤ 1e-14`.
pub fn numerical_rank(a: &CMatrix, tol_rel: f64) -> Result<usize> {
    let eig = hermitian_eigen(a, HERMITIAN_TOL)?;
    Ok(rank_from_values(&eig.values, tol_rel))
}

pub(crate) fn rank_from_values(values: &[f64], tol_rel: f64) -> usize {
    let lambda_max = values.iter().copied().fold(0.0, f64::max);
    if lambda_max <= ZERO_FLOOR {
        return 0;
    }
    values.iter().filter(|&&x| x > tol_rel * lambda_max).count()
}

/// `true` iff the smallest eigenvalue is at least `-tol · max(1, λ_max)`.
///
/// Non-square or non-Hermitian input (beyond `tol`) is reported as not PSD.
pub fn is_psd(a: &CMatrix, tol: f64) -> bool {
    psd_margin(a, tol).is_some_and(|(min, max)| min >= -tol * max.max(1.0))
}

/// Smallest and largest eigenvalue, when the matrix is Hermitian within `tol`.
pub fn psd_margin(a: &CMatrix, tol: f64) -> Option<(f64, f64)> {
    let eig = hermitian_eigen(a, tol).ok()?;
    Some((eig.min_value(), eig.max_value()))
}

/// Euclidean inner product `Σ conj(x_i) y_i`.
pub fn inner(x: &[Complex], y: &[Complex]) -> Complex {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn vec_norm(x: &[Complex]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Completes `first` (any nonzero vector) to a unitary whose first row is `first / |first|`.
///
/// Remaining rows come from Gram–Schmidt over the standard basis, skipping
/// basis vectors that are (numerically) in the span already built.
pub fn unitary_with_first_row(first: &[Complex]) -> Result<CMatrix> {
    let m = first.len();
    let norm = vec_norm(first);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidParameters("zero row cannot seed a unitary".into()));
    }
    let mut rows: Vec<Vec<Complex>> = vec![first.iter().map(|z| z / norm).collect()];
    for basis in 0..m {
        if rows.len() == m {
            break;
        }
        let mut candidate = vec![re(0.0); m];
        candidate[basis] = re(1.0);
        for _ in 0..2 {
            for r in &rows {
                let proj = inner(r, &candidate);
                for (x, y) in candidate.iter_mut().zip(r) {
                    *x -= proj * y;
                }
            }
        }
        let len = vec_norm(&candidate);
        if len > 1e-6 {
            rows.push(candidate.into_iter().map(|z| z / len).collect());
        }
    }
    CMatrix::from_rows(&rows)
}
