//! Kraus operators, channels and their Choi matrices.
//!
//! Operators are vectorised row-major, so a qubit operator `K` maps to the
//! slot vector `(K00, K01, K10, K11)` and the Choi matrix of a channel is
//! `M = (1/d) Σ vec(K) vec(K)†`. Completeness then reads
//! `m00 + m22 = m11 + m33 = 1/2` and `m01 + m23 = 0` for qubits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::complexmat::{self, c, re, CMatrix, Complex};
use crate::error::{Error, Result};

/// Largest admissible `‖Σ K†K − I‖_max` for a channel.
pub const COMPLETENESS_TOL: f64 = 1e-8;
/// Default relative tolerance used to decide whether an operator entry is nonzero.
pub const PATTERN_TOL: f64 = 1e-9;
/// Operators whose largest entry is at most this are treated as zero.
pub const ZERO_OPERATOR_FLOOR: f64 = 1e-13;
/// Tolerance on the Choi invariants (trace, Hermiticity, completeness).
pub const CHOI_TOL: f64 = 1e-9;
/// Tolerance on density-matrix validity.
pub const STATE_TOL: f64 = 1e-9;

/// Support shape of a 2×2 Kraus operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum IncoherencePattern {
    /// `[[*, *], [0, 0]]`
    Row1,
    /// `[[0, 0], [*, *]]`
    Row2,
    /// `[[*, 0], [0, *]]`
    Diagonal,
    /// `[[0, *], [*, 0]]`
    Antidiagonal,
    SingleEntry { row: usize, col: usize },
    Zero,
    NotIncoherent,
}

impl IncoherencePattern {
    pub fn is_incoherent(self) -> bool {
        self != IncoherencePattern::NotIncoherent
    }

    /// Compatible with a strictly incoherent operator (no row holds two entries).
    pub fn is_strictly_incoherent(self) -> bool {
        matches!(
            self,
            IncoherencePattern::Diagonal
                | IncoherencePattern::Antidiagonal
                | IncoherencePattern::SingleEntry { .. }
                | IncoherencePattern::Zero
        )
    }
}

impl fmt::Display for IncoherencePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IncoherencePattern::SingleEntry { row, col } => write!(f, "SingleEntry({row},{col})"),
            other => write!(f, "{other:?}"),
        }
    }
}

fn nonzero_mask(k: &CMatrix, tol: f64) -> Option<Vec<bool>> {
    let scale = k.max_abs();
    if scale <= ZERO_OPERATOR_FLOOR {
        return None;
    }
    Some(k.as_slice().iter().map(|z| z.norm() > tol * scale).collect())
}

/// Classifies the support of a 2×2 operator.
///
/// An entry counts as nonzero when `|entry| > tol · max|K|`.
pub fn classify_pattern(k: &CMatrix, tol: f64) -> IncoherencePattern {
    debug_assert!(k.rows() == 2 && k.cols() == 2);
    let Some(mask) = nonzero_mask(k, tol) else {
        return IncoherencePattern::Zero;
    };
    let (k00, k01, k10, k11) = (mask[0], mask[1], mask[2], mask[3]);
    if (k00 && k10) || (k01 && k11) {
        return IncoherencePattern::NotIncoherent;
    }
    match (k00, k01, k10, k11) {
        (false, false, false, false) => IncoherencePattern::Zero,
        (true, true, false, false) => IncoherencePattern::Row1,
        (false, false, true, true) => IncoherencePattern::Row2,
        (true, false, false, true) => IncoherencePattern::Diagonal,
        (false, true, true, false) => IncoherencePattern::Antidiagonal,
        _ => {
            let idx = mask.iter().position(|&b| b).expect("one entry set");
            IncoherencePattern::SingleEntry {
                row: idx / 2,
                col: idx % 2,
            }
        }
    }
}

/// Every column holds at most one nonzero entry (any dimension).
pub fn is_incoherent_matrix(k: &CMatrix, tol: f64) -> bool {
    let Some(mask) = nonzero_mask(k, tol) else {
        return true;
    };
    let n = k.cols();
    (0..n).all(|j| (0..k.rows()).filter(|&i| mask[i * n + j]).count() <= 1)
}

/// Both `K` and `Kᵀ` are incoherent.
pub fn is_strictly_incoherent_matrix(k: &CMatrix, tol: f64) -> bool {
    let Some(mask) = nonzero_mask(k, tol) else {
        return true;
    };
    let n = k.cols();
    let rows_ok = (0..k.rows()).all(|i| (0..n).filter(|&j| mask[i * n + j]).count() <= 1);
    rows_ok && is_incoherent_matrix(k, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KrausOperator {
    pub matrix: CMatrix,
    /// Only populated for 2×2 operators.
    pub pattern: Option<IncoherencePattern>,
    #[serde(skip)]
    pub tolerance: f64,
}

impl KrausOperator {
    pub fn new(matrix: CMatrix) -> Self {
        Self::with_tolerance(matrix, PATTERN_TOL)
    }

    pub fn with_tolerance(matrix: CMatrix, tolerance: f64) -> Self {
        let pattern = (matrix.rows() == 2 && matrix.cols() == 2).then(|| classify_pattern(&matrix, tolerance));
        KrausOperator {
            matrix,
            pattern,
            tolerance,
        }
    }

    pub fn zero(d: usize) -> Self {
        Self::new(CMatrix::zeros(d, d))
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.max_abs() <= ZERO_OPERATOR_FLOOR
    }

    pub fn is_incoherent(&self) -> bool {
        match self.pattern {
            Some(p) => p.is_incoherent(),
            None => is_incoherent_matrix(&self.matrix, self.tolerance),
        }
    }

    pub fn is_strictly_incoherent(&self) -> bool {
        match self.pattern {
            Some(p) => p.is_strictly_incoherent(),
            None => is_strictly_incoherent_matrix(&self.matrix, self.tolerance),
        }
    }
}

/// `‖Σ K†K − I‖_max` for a list of square operators of equal size.
pub fn completeness_residual(ops: &[CMatrix]) -> Result<f64> {
    let first = ops.first().ok_or(Error::EmptyChannel)?;
    let d = first.rows();
    let mut sum = CMatrix::zeros(d, d);
    for k in ops {
        sum = &sum + &k.adjoint().matmul(k)?;
    }
    Ok(sum.max_abs_diff(&CMatrix::identity(d)))
}

/// A trace-preserving list of Kraus operators on a qubit (or, for the rank
/// examples, a qutrit).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QubitChannel {
    dim: usize,
    kraus: Vec<KrausOperator>,
    completeness_residual: f64,
}

impl QubitChannel {
    /// Validating constructor: shapes must agree, d ∈ {2, 3}, and the
    /// completeness residual must not exceed [`COMPLETENESS_TOL`].
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        Self::from_operators(ops.into_iter().map(KrausOperator::new).collect())
    }

    pub fn from_operators(kraus: Vec<KrausOperator>) -> Result<Self> {
        let first = kraus.first().ok_or(Error::EmptyChannel)?;
        let dim = first.matrix.rows();
        for k in &kraus {
            if !k.matrix.is_square() || k.matrix.rows() != dim {
                return Err(Error::DimensionMismatch {
                    expected: format!("{dim}x{dim} operators"),
                    found: format!("{}x{}", k.matrix.rows(), k.matrix.cols()),
                });
            }
        }
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let matrices: Vec<CMatrix> = kraus.iter().map(|k| k.matrix.clone()).collect();
        let residual = completeness_residual(&matrices)?;
        if residual > COMPLETENESS_TOL {
            return Err(Error::Completeness {
                residual,
                limit: COMPLETENESS_TOL,
            });
        }
        Ok(QubitChannel {
            dim,
            kraus,
            completeness_residual: residual,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[KrausOperator] {
        &self.kraus
    }

    pub fn matrices(&self) -> Vec<CMatrix> {
        self.kraus.iter().map(|k| k.matrix.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kraus.is_empty()
    }

    pub fn completeness_residual(&self) -> f64 {
        self.completeness_residual
    }

    /// Operators that are not (numerically) zero.
    pub fn nonzero_operators(&self) -> Vec<&KrausOperator> {
        self.kraus.iter().filter(|k| !k.is_zero()).collect()
    }

    /// The same channel with zero operators removed.
    pub fn without_zeros(&self) -> QubitChannel {
        let kept: Vec<KrausOperator> = self.kraus.iter().filter(|k| !k.is_zero()).cloned().collect();
        if kept.is_empty() {
            return self.clone();
        }
        QubitChannel {
            dim: self.dim,
            kraus: kept,
            completeness_residual: self.completeness_residual,
        }
    }

    pub fn choi(&self) -> ChoiMatrix {
        choi(self)
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        apply(self, rho)
    }

    pub fn to_json(&self) -> ChannelJson {
        ChannelJson {
            dim: self.dim,
            kraus: self.matrices(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("channel serialises")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        ChannelJson::parse(s)?.into_channel()
    }
}

/// On-disk channel description:
/// `{"dim": 2, "kraus": [[[[re, im], [re, im]], [[re, im], [re, im]]], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    pub dim: usize,
    pub kraus: Vec<CMatrix>,
}

impl ChannelJson {
    /// Parses and checks shapes only; completeness is left to [`ChannelJson::into_channel`].
    pub fn parse(s: &str) -> Result<Self> {
        let parsed: ChannelJson = serde_json::from_str(s)?;
        if parsed.kraus.is_empty() {
            return Err(Error::Format("\"kraus\" must contain at least one matrix".into()));
        }
        if !(2..=3).contains(&parsed.dim) {
            return Err(Error::Format(format!("unsupported \"dim\" {}", parsed.dim)));
        }
        for (i, k) in parsed.kraus.iter().enumerate() {
            if k.rows() != parsed.dim || k.cols() != parsed.dim {
                return Err(Error::Format(format!(
                    "operator {i} is {}x{}, expected {}x{}",
                    k.rows(),
                    k.cols(),
                    parsed.dim,
                    parsed.dim
                )));
            }
        }
        Ok(parsed)
    }

    pub fn into_channel(self) -> Result<QubitChannel> {
        QubitChannel::new(self.kraus)
    }
}

/// Choi–Jamiołkowski–Sudarshan matrix of a channel, in row-major slot order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChoiMatrix {
    dim: usize,
    m: CMatrix,
}

impl ChoiMatrix {
    /// Validates a raw d²×d² matrix: Hermitian, PSD, unit trace and the
    /// partial-trace (completeness) constraints, all within [`CHOI_TOL`].
    pub fn new(m: CMatrix, dim: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let n = dim * dim;
        if m.rows() != n || m.cols() != n {
            return Err(Error::InvalidChoi(format!("expected {n}x{n}, found {}x{}", m.rows(), m.cols())));
        }
        let dev = m.hermitian_deviation();
        if dev > CHOI_TOL {
            return Err(Error::InvalidChoi(format!("not Hermitian (deviation {dev:.3e})")));
        }
        let tr = m.trace();
        if (tr - re(1.0)).norm() > CHOI_TOL {
            return Err(Error::InvalidChoi(format!("trace {} differs from 1", tr.re)));
        }
        for j in 0..dim {
            for jp in 0..dim {
                let partial: Complex = (0..dim).map(|i| m[(i * dim + j, i * dim + jp)]).sum();
                let target = if j == jp { 1.0 / dim as f64 } else { 0.0 };
                if (partial - re(target)).norm() > CHOI_TOL {
                    return Err(Error::InvalidChoi(format!(
                        "completeness constraint ({j},{jp}) off by {:.3e}",
                        (partial - re(target)).norm()
                    )));
                }
            }
        }
        if !complexmat::is_psd(&m, CHOI_TOL) {
            return Err(Error::InvalidChoi("not positive semidefinite".into()));
        }
        Ok(ChoiMatrix { dim, m })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex {
        self.m[(i, j)]
    }

    pub fn kraus_rank(&self) -> usize {
        complexmat::numerical_rank(&self.m, complexmat::RANK_TOL).expect("Choi matrices are Hermitian")
    }

    pub fn max_abs_diff(&self, other: &ChoiMatrix) -> f64 {
        self.m.max_abs_diff(&other.m)
    }
}

pub fn choi(ch: &QubitChannel) -> ChoiMatrix {
    choi_of(&ch.matrices())
}

/// Choi matrix of any non-empty list of equal-shape square operators, with no
/// completeness or positivity check.
pub fn unchecked_choi(ops: &[CMatrix]) -> Result<CMatrix> {
    let first = ops.first().ok_or(Error::EmptyChannel)?;
    let d = first.rows();
    if let Some(k) = ops.iter().find(|k| k.rows() != d || k.cols() != d) {
        return Err(Error::DimensionMismatch {
            expected: format!("{d}x{d} operators"),
            found: format!("{}x{}", k.rows(), k.cols()),
        });
    }
    Ok(choi_of(ops).m)
}

/// Choi matrix of an arbitrary operator list (no completeness check).
pub(crate) fn choi_of(ops: &[CMatrix]) -> ChoiMatrix {
    let d = ops[0].rows();
    let n = d * d;
    let mut m = CMatrix::zeros(n, n);
    for k in ops {
        let v = k.as_slice();
        for i in 0..n {
            if v[i] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                m[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    ChoiMatrix {
        dim: d,
        m: &m * (1.0 / d as f64),
    }
}

/// Equality of channels, decided on their Choi matrices.
pub fn channels_equal(ch1: &QubitChannel, ch2: &QubitChannel, tol: f64) -> Result<bool> {
    if ch1.dim() != ch2.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("dimension {}", ch1.dim()),
            found: format!("dimension {}", ch2.dim()),
        });
    }
    Ok(choi(ch1).max_abs_diff(&choi(ch2)) <= tol)
}

/// Appends zero operators until the list has `m` members.
pub fn pad_with_zeros(ops: &[KrausOperator], m: usize) -> Vec<KrausOperator> {
    let d = ops.first().map_or(2, |k| k.matrix.rows());
    let mut out = ops.to_vec();
    while out.len() < m {
        out.push(KrausOperator::zero(d));
    }
    out
}

/// `L_i = Σ_j U_ij K_j` for an `m × m` unitary and exactly `m` operators.
pub fn mix_kraus(u: &CMatrix, ops: &[KrausOperator]) -> Result<Vec<KrausOperator>> {
    if !u.is_square() || u.rows() != ops.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} mixing matrix", ops.len()),
            found: format!("{}x{}", u.rows(), u.cols()),
        });
    }
    let deviation = u.unitarity_deviation();
    if deviation > 1e-9 {
        return Err(Error::NotUnitary { deviation });
    }
    let d = ops[0].matrix.rows();
    let mut out = Vec::with_capacity(ops.len());
    for i in 0..ops.len() {
        let mut l = CMatrix::zeros(d, d);
        for (j, k) in ops.iter().enumerate() {
            let uij = u[(i, j)];
            if uij != c(0.0, 0.0) {
                l = &l + &k.matrix.scale(uij);
            }
        }
        out.push(KrausOperator::with_tolerance(l, ops[i].tolerance));
    }
    Ok(out)
}

fn validate_density_matrix(rho: &CMatrix) -> Result<()> {
    if rho.rows() != 2 || rho.cols() != 2 {
        return Err(Error::InvalidDensityMatrix(format!("expected 2x2, found {}x{}", rho.rows(), rho.cols())));
    }
    if !rho.is_hermitian(STATE_TOL) {
        return Err(Error::InvalidDensityMatrix("not Hermitian".into()));
    }
    if (rho.trace() - re(1.0)).norm() > STATE_TOL {
        return Err(Error::InvalidDensityMatrix(format!("trace {}", rho.trace().re)));
    }
    if !complexmat::is_psd(rho, STATE_TOL) {
        return Err(Error::InvalidDensityMatrix("not positive semidefinite".into()));
    }
    Ok(())
}

/// `Σ K ρ K†` for a qubit density matrix.
pub fn apply(ch: &QubitChannel, rho: &CMatrix) -> Result<CMatrix> {
    if ch.dim() != 2 {
        return Err(Error::UnsupportedDimension(ch.dim()));
    }
    validate_density_matrix(rho)?;
    let mut out = CMatrix::zeros(2, 2);
    for k in ch.kraus() {
        out = &out + &k.matrix.matmul(rho)?.matmul(&k.matrix.adjoint())?;
    }
    Ok(out)
}

/// Bloch vector `(x, y, z)` with `ρ = (I + xσx + yσy + zσz)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const BALL_TOL: f64 = 1e-12;

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let b = BlochVector { x, y, z };
        let norm = b.norm();
        if !norm.is_finite() || norm > 1.0 + Self::BALL_TOL {
            return Err(Error::OutsideBlochBall { norm });
        }
        Ok(b)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2)).sqrt()
    }
}

pub fn bloch_to_rho(b: &BlochVector) -> CMatrix {
    let mut rho = CMatrix::zeros(2, 2);
    rho[(0, 0)] = re((1.0 + b.z) / 2.0);
    rho[(1, 1)] = re((1.0 - b.z) / 2.0);
    rho[(0, 1)] = c(b.x / 2.0, -b.y / 2.0);
    rho[(1, 0)] = c(b.x / 2.0, b.y / 2.0);
    rho
}

pub fn rho_to_bloch(rho: &CMatrix) -> Result<BlochVector> {
    if rho.rows() != 2 || rho.cols() != 2 {
        return Err(Error::InvalidDensityMatrix(format!("expected 2x2, found {}x{}", rho.rows(), rho.cols())));
    }
    let off = rho[(0, 1)] + rho[(1, 0)].conj();
    BlochVector::new(off.re, -off.im, (rho[(0, 0)] - rho[(1, 1)]).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m2(a: [[f64; 2]; 2]) -> CMatrix {
        CMatrix::from_real(&[&a[0], &a[1]]).unwrap()
    }

    fn eq14() -> QubitChannel {
        QubitChannel::new(vec![
            m2([[0.5, 0.5], [0.0, 0.0]]),
            m2([[0.0, 0.0], [0.5, -0.5]]),
            m2([[0.5, 0.0], [0.0, 0.5]]),
            m2([[0.0, 0.5], [0.5, 0.0]]),
        ])
        .unwrap()
    }

    fn dephasing() -> QubitChannel {
        QubitChannel::new(vec![m2([[1.0, 0.0], [0.0, 0.0]]), m2([[0.0, 0.0], [0.0, 1.0]])]).unwrap()
    }

    #[test]
    fn pattern_shapes() {
        let z = c(0.3, -0.4);
        let row1 = CMatrix::from_rows(&[vec![re(0.6), z], vec![re(0.0), re(0.0)]]).unwrap();
        assert_eq!(classify_pattern(&row1, PATTERN_TOL), IncoherencePattern::Row1);
        let diag = CMatrix::from_rows(&[vec![re(0.6), re(0.0)], vec![re(0.0), z]]).unwrap();
        assert_eq!(classify_pattern(&diag, PATTERN_TOL), IncoherencePattern::Diagonal);
        assert_eq!(classify_pattern(&m2([[0.0, 0.0], [2.0, 1.0]]), PATTERN_TOL), IncoherencePattern::Row2);
        assert_eq!(classify_pattern(&m2([[0.0, 1.0], [2.0, 0.0]]), PATTERN_TOL), IncoherencePattern::Antidiagonal);
        assert_eq!(
            classify_pattern(&m2([[0.0, 0.0], [2.0, 0.0]]), PATTERN_TOL),
            IncoherencePattern::SingleEntry { row: 1, col: 0 }
        );
        assert_eq!(classify_pattern(&CMatrix::zeros(2, 2), PATTERN_TOL), IncoherencePattern::Zero);
    }

    #[test]
    fn unchecked_choi_accepts_incomplete_lists() {
        let half = m2([[0.5, 0.0], [0.0, 0.5]]);
        let m = unchecked_choi(&[half]).unwrap();
        assert!((m.trace().re - 0.25).abs() < 1e-15);
        assert_eq!(unchecked_choi(&[]), Err(Error::EmptyChannel));
        assert!(unchecked_choi(&[CMatrix::identity(2), CMatrix::identity(3)]).is_err());
    }

    #[test]
    fn dense_unitary_is_not_incoherent() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hadamard = m2([[h, h], [h, -h]]);
        assert_eq!(classify_pattern(&hadamard, PATTERN_TOL), IncoherencePattern::NotIncoherent);
        let rot = CMatrix::from_rows(&[vec![c(0.8, 0.0), c(0.0, 0.6)], vec![c(0.0, 0.6), c(0.8, 0.0)]]).unwrap();
        assert_eq!(classify_pattern(&rot, PATTERN_TOL), IncoherencePattern::NotIncoherent);
    }

    #[test]
    fn pattern_tolerance_is_relative() {
        let k = m2([[1e6, 1e-4], [0.0, 0.0]]);
        assert_eq!(classify_pattern(&k, PATTERN_TOL), IncoherencePattern::SingleEntry { row: 0, col: 0 });
        let small = &m2([[1.0, 0.5], [0.0, 0.0]]) * 1e-6;
        assert_eq!(classify_pattern(&small, PATTERN_TOL), IncoherencePattern::Row1);
    }

    #[test]
    fn identity_choi() {
        let id = QubitChannel::new(vec![CMatrix::identity(2)]).unwrap();
        let m2x = &choi(&id).matrix().clone() * 2.0;
        let mut expected = CMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (3, 3), (0, 3), (3, 0)] {
            expected[(i, j)] = re(1.0);
        }
        assert_eq!(m2x, expected);
    }

    /// Independent summation: (2M)_{ij} = Σ_k v_k[i] conj(v_k[j]) with the
    /// vectors of the four operators written out by hand.
    #[test]
    fn eq14_choi_matches_hand_summation() {
        let vs: [[f64; 4]; 4] = [
            [0.5, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.5, -0.5],
            [0.5, 0.0, 0.0, 0.5],
            [0.0, 0.5, 0.5, 0.0],
        ];
        let mut oracle = [[0.0f64; 4]; 4];
        for v in &vs {
            for (row, vi) in oracle.iter_mut().zip(v) {
                for (slot, vj) in row.iter_mut().zip(v) {
                    *slot += vi * vj;
                }
            }
        }
        let m = choi(&eq14());
        for (i, row) in oracle.iter().enumerate() {
            for (j, &want) in row.iter().enumerate() {
                assert!((m.entry(i, j) * 2.0 - re(want)).norm() < 1e-15);
            }
        }
        // a = b = c = d = 1/2, e = f = g = 1/4
        for i in 0..4 {
            assert!((2.0 * m.entry(i, i).re - 0.5).abs() < 1e-15);
        }
        assert!((m.entry(0, 1) * 2.0 - re(0.25)).norm() < 1e-15);
        assert!((m.entry(1, 2) * 2.0 - re(0.25)).norm() < 1e-15);
        assert!((m.entry(0, 3) * 2.0 - re(0.25)).norm() < 1e-15);
    }

    #[test]
    fn channel_construction_rejects_bad_input() {
        assert_eq!(QubitChannel::new(vec![]), Err(Error::EmptyChannel));
        let bad = QubitChannel::new(vec![m2([[1.0, 0.0], [0.0, 0.9]])]);
        assert!(matches!(bad, Err(Error::Completeness { .. })));
        let mixed = QubitChannel::new(vec![CMatrix::identity(2), CMatrix::identity(3)]);
        assert!(matches!(mixed, Err(Error::DimensionMismatch { .. })));
        let big = QubitChannel::new(vec![CMatrix::identity(4)]);
        assert_eq!(big, Err(Error::UnsupportedDimension(4)));
    }

    #[test]
    fn identity_vs_dephasing() {
        let id = QubitChannel::new(vec![CMatrix::identity(2)]).unwrap();
        assert!(!channels_equal(&id, &dephasing(), 1e-9).unwrap());
        assert!(channels_equal(&id, &id, 0.0).unwrap());
        let qutrit = QubitChannel::new(vec![CMatrix::identity(3)]).unwrap();
        assert!(channels_equal(&id, &qutrit, 1e-9).is_err());
    }

    #[test]
    fn mix_with_identity_is_noop() {
        let ops = eq14().kraus().to_vec();
        let mixed = mix_kraus(&CMatrix::identity(4), &ops).unwrap();
        assert_eq!(mixed, ops);
    }

    #[test]
    fn mix_rejects_non_unitary() {
        let ops = eq14().kraus().to_vec();
        let u = &CMatrix::identity(4) * 1.1;
        assert!(matches!(mix_kraus(&u, &ops), Err(Error::NotUnitary { .. })));
        assert!(mix_kraus(&CMatrix::identity(3), &ops).is_err());
    }

    #[test]
    fn row1_pair_mixes_into_sio_shapes() {
        let (theta, phi) = (0.7f64, 1.3f64);
        let e = Complex::from_polar(1.0, phi);
        let k1 = CMatrix::from_rows(&[vec![re(theta.cos()), e * theta.sin()], vec![re(0.0), re(0.0)]]).unwrap();
        let k2 = CMatrix::from_rows(&[vec![re(theta.sin()), -e * theta.cos()], vec![re(0.0), re(0.0)]]).unwrap();
        let ch = QubitChannel::new(vec![k1, k2]).unwrap();
        let u = m2([[theta.cos(), theta.sin()], [theta.sin(), -theta.cos()]]);
        let mixed = mix_kraus(&u, ch.kraus()).unwrap();
        for k in &mixed {
            assert!(k.pattern.unwrap().is_strictly_incoherent(), "{:?}", k.pattern);
        }
        let after = QubitChannel::from_operators(mixed).unwrap();
        assert!(channels_equal(&ch, &after, 1e-12).unwrap());
    }

    #[test]
    fn apply_identity_and_dephasing() {
        let b = BlochVector::new(0.3, -0.4, 0.5).unwrap();
        let rho = bloch_to_rho(&b);
        let id = QubitChannel::new(vec![CMatrix::identity(2)]).unwrap();
        assert!(apply(&id, &rho).unwrap().max_abs_diff(&rho) < 1e-15);
        let out = rho_to_bloch(&apply(&dephasing(), &rho).unwrap()).unwrap();
        assert_eq!((out.x, out.y), (0.0, 0.0));
        assert!((out.z - 0.5).abs() < 1e-15);
    }

    /// Oracle: expand Σ K ρ K† entrywise with explicit index sums.
    #[test]
    fn apply_eq14_matches_direct_summation() {
        let b = BlochVector::new(0.5, 0.0, 0.5).unwrap();
        let rho = bloch_to_rho(&b);
        let ch = eq14();
        let mut oracle = [[c(0.0, 0.0); 2]; 2];
        for k in ch.kraus() {
            let km = &k.matrix;
            for i in 0..2 {
                for j in 0..2 {
                    for p in 0..2 {
                        for q in 0..2 {
                            oracle[i][j] += km[(i, p)] * rho[(p, q)] * km[(j, q)].conj();
                        }
                    }
                }
            }
        }
        let out = apply(&ch, &rho).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((out[(i, j)] - oracle[i][j]).norm() < 1e-15);
            }
        }
        // The hand-expanded value: ρ' = diag(5/8, 3/8) + (1/8)(σx-part), i.e. Bloch (1/4, 0, 1/4).
        let bout = rho_to_bloch(&out).unwrap();
        assert!((bout.x - 0.25).abs() < 1e-15 && bout.y.abs() < 1e-15 && (bout.z - 0.25).abs() < 1e-15);
    }

    #[test]
    fn apply_rejects_invalid_states() {
        let id = QubitChannel::new(vec![CMatrix::identity(2)]).unwrap();
        assert!(apply(&id, &CMatrix::diag(&[1.5, -0.5])).is_err());
        assert!(apply(&id, &CMatrix::diag(&[0.5, 0.4])).is_err());
        assert!(apply(&id, &m2([[0.5, 0.5], [0.0, 0.5]])).is_err());
    }

    #[test]
    fn bloch_examples() {
        let north = bloch_to_rho(&BlochVector::new(0.0, 0.0, 1.0).unwrap());
        assert_eq!(north, CMatrix::diag(&[1.0, 0.0]));
        let centre = bloch_to_rho(&BlochVector::new(0.0, 0.0, 0.0).unwrap());
        assert_eq!(centre, CMatrix::diag(&[0.5, 0.5]));
        assert!(matches!(BlochVector::new(0.0, 0.0, 1.5), Err(Error::OutsideBlochBall { .. })));
    }

    #[test]
    fn choi_validation() {
        let m = choi(&eq14()).matrix().clone();
        assert!(ChoiMatrix::new(m.clone(), 2).is_ok());
        let mut broken = m.clone();
        broken[(0, 0)] += re(0.1);
        assert!(matches!(ChoiMatrix::new(broken, 2), Err(Error::InvalidChoi(_))));
        let mut not_tp = m;
        not_tp[(0, 1)] += re(0.05);
        not_tp[(1, 0)] += re(0.05);
        assert!(matches!(ChoiMatrix::new(not_tp, 2), Err(Error::InvalidChoi(_))));
    }

    #[test]
    fn json_round_trip_preserves_digits() {
        let theta = 0.123_456_789_012_345_68_f64;
        let k1 = CMatrix::from_rows(&[vec![re(theta.cos()), c(0.0, theta.sin())], vec![re(0.0), re(0.0)]]).unwrap();
        let k2 = CMatrix::from_rows(&[vec![re(0.0), re(0.0)], vec![re(theta.sin()), c(0.0, -theta.cos())]]).unwrap();
        let ch = QubitChannel::new(vec![k1, k2]).unwrap();
        let back = QubitChannel::from_json_str(&ch.to_json_string()).unwrap();
        assert_eq!(back.matrices(), ch.matrices());
    }

    #[test]
    fn json_shape_errors() {
        assert!(matches!(ChannelJson::parse(r#"{"dim":2,"kraus":[]}"#), Err(Error::Format(_))));
        assert!(matches!(
            ChannelJson::parse(r#"{"dim":2,"kraus":[[[[1,0]]]]}"#),
            Err(Error::Format(_))
        ));
        assert!(matches!(ChannelJson::parse("not json"), Err(Error::Format(_))));
    }

    fn arb_channel() -> impl Strategy<Value = QubitChannel> {
        // Random Kraus lists from a random isometry: stack m operators, orthonormalise columns.
        (1usize..=4, proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 32)).prop_filter_map(
            "degenerate draw",
            |(m, raw)| {
                let rows = 2 * m;
                let mut cols: Vec<Vec<Complex>> = (0..2)
                    .map(|j| (0..rows).map(|i| c(raw[2 * i + j].0, raw[2 * i + j].1)).collect())
                    .collect();
                for j in 0..2 {
                    for p in 0..j {
                        let proj = complexmat::inner(&cols[p], &cols[j]);
                        let prev = cols[p].clone();
                        for (x, y) in cols[j].iter_mut().zip(&prev) {
                            *x -= proj * y;
                        }
                    }
                    let n = complexmat::vec_norm(&cols[j]);
                    if n < 1e-3 {
                        return None;
                    }
                    cols[j].iter_mut().for_each(|x| *x /= n);
                }
                let ops = (0..m)
                    .map(|k| {
                        let mut op = CMatrix::zeros(2, 2);
                        for i in 0..2 {
                            for j in 0..2 {
                                op[(i, j)] = cols[j][2 * k + i];
                            }
                        }
                        op
                    })
                    .collect();
                QubitChannel::new(ops).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn json_round_trip_is_exact(seed in any::<u64>()) {
            let u = crate::sampler::random_unitary(&mut crate::sampler::rng_for(seed, 0), 2);
            let ch = QubitChannel::new(vec![u]).unwrap();
            let back = QubitChannel::from_json_str(&ch.to_json_string()).unwrap();
            prop_assert_eq!(back.matrices(), ch.matrices());
        }

        #[test]
        fn choi_invariants_hold(ch in arb_channel()) {
            let m = choi(&ch);
            prop_assert!(ChoiMatrix::new(m.matrix().clone(), 2).is_ok());
            prop_assert!((m.matrix().trace() - re(1.0)).norm() <= 1e-9);
            prop_assert!(complexmat::is_psd(m.matrix(), complexmat::PSD_TOL));
        }

        #[test]
        fn mixing_preserves_choi(
            ch in arb_channel(),
            extra in 0usize..3,
            seed in any::<u64>(),
        ) {
            let m = ch.len() + extra;
            let padded = pad_with_zeros(ch.kraus(), m);
            let u = crate::sampler::random_unitary(&mut crate::sampler::rng_for(seed, 0), m);
            let mixed = QubitChannel::from_operators(mix_kraus(&u, &padded).unwrap()).unwrap();
            prop_assert!(choi(&ch).max_abs_diff(&choi(&mixed)) <= 1e-10);
        }

        #[test]
        fn apply_preserves_state_validity(
            ch in arb_channel(),
            (x, y, z) in (-0.57f64..0.57, -0.57f64..0.57, -0.57f64..0.57),
        ) {
            let rho = bloch_to_rho(&BlochVector::new(x, y, z).unwrap());
            let out = apply(&ch, &rho).unwrap();
            prop_assert!((out.trace() - re(1.0)).norm() <= 1e-10);
            prop_assert!(out.hermitian_deviation() <= 1e-10);
            prop_assert!(rho_to_bloch(&out).unwrap().norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn bloch_round_trip(x in -0.57f64..0.57, y in -0.57f64..0.57, z in -0.57f64..0.57) {
            let b = BlochVector::new(x, y, z).unwrap();
            let back = rho_to_bloch(&bloch_to_rho(&b)).unwrap();
            prop_assert!(b.distance(&back) <= 1e-12);
        }

        #[test]
        fn incoherent_patterns_have_single_column_entries(
            entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, any::<bool>()), 4)
        ) {
            let data: Vec<Complex> = entries.iter().map(|&(a, b, keep)| if keep { c(a, b) } else { re(0.0) }).collect();
            let k = CMatrix::new(2, 2, data).unwrap();
            let pattern = classify_pattern(&k, PATTERN_TOL);
            if pattern != IncoherencePattern::NotIncoherent {
                let scale = k.max_abs();
                let nz = |z: Complex| z.norm() > PATTERN_TOL * scale;
                prop_assert!(!(nz(k[(0, 0)]) && nz(k[(1, 0)])));
                prop_assert!(!(nz(k[(0, 1)]) && nz(k[(1, 1)])));
            }
        }
    }
}
