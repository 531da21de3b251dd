//! Membership tests, rank reports, the two-operator classification and a
//! gallery of reference channels.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;

use crate::canonical::CanonicalSIO4;
use crate::channel::{self, ChoiMatrix, IncoherencePattern, QubitChannel};
use crate::complexmat::{self, re, CMatrix, Complex};
use crate::decompose::{self, DecompositionSolution};
use crate::error::{Error, Result};

/// Default structural tolerance, relative to the largest Choi entry.
pub const CLASSIFY_TOL: f64 = 1e-9;

fn structural_zero(m: &CMatrix, i: usize, j: usize, tol: f64) -> bool {
    m[(i, j)].norm() <= tol * m.max_abs().max(complexmat::ZERO_FLOOR)
}

/// `true` iff the Choi matrix only couples slots (0,3) and (1,2).
pub fn is_sio_choi(m: &ChoiMatrix, tol: f64) -> bool {
    m.dim() == 2
        && [(0, 1), (2, 3), (0, 2), (1, 3)]
            .into_iter()
            .all(|(i, j)| structural_zero(m.matrix(), i, j, tol))
}

/// Whether a qubit channel is strictly incoherent, decided on its Choi matrix.
pub fn is_sio_channel(ch: &QubitChannel, tol: f64) -> bool {
    ch.dim() == 2 && is_sio_choi(&ch.choi(), tol)
}

/// Peels each strictly incoherent block into a pivot operator plus a single
/// entry remainder. Works on an unvalidated Choi matrix (units of `M`).
pub(crate) fn sio_peel(m: &ChoiMatrix, tol: f64) -> Result<(CanonicalSIO4, QubitChannel)> {
    let mm = m.matrix();
    if m.dim() != 2 {
        return Err(Error::UnsupportedDimension(m.dim()));
    }
    for (slot, (i, j)) in [("02", (0, 2)), ("13", (1, 3))] {
        if !structural_zero(mm, i, j, tol) {
            return Err(Error::NotIncoherentChannel {
                slot,
                magnitude: mm[(i, j)].norm(),
            });
        }
    }
    for (i, j) in [(0, 1), (2, 3)] {
        if !structural_zero(mm, i, j, tol) {
            return Err(Error::ConstraintViolation(format!(
                "channel is not strictly incoherent: |m{i}{j}| = {:.3e}",
                mm[(i, j)].norm()
            )));
        }
    }
    let (a, b, c, d) = (2.0 * mm[(0, 0)].re, 2.0 * mm[(1, 1)].re, 2.0 * mm[(2, 2)].re, 2.0 * mm[(3, 3)].re);
    let (f, g) = (mm[(1, 2)] * 2.0, mm[(0, 3)] * 2.0);

    let outer = CMatrix::new(2, 2, vec![re(a), g, g.conj(), re(d)])?.hermitian_eigen(complexmat::HERMITIAN_TOL)?;
    let inner = CMatrix::new(2, 2, vec![re(b), f, f.conj(), re(c)])?.hermitian_eigen(complexmat::HERMITIAN_TOL)?;
    let lambda_max = outer.max_value().max(inner.max_value());
    let threshold = complexmat::RANK_TOL * lambda_max;
    let rank = |values: &[f64]| {
        if lambda_max <= complexmat::ZERO_FLOOR {
            0
        } else {
            values.iter().filter(|&&v| v > threshold).count()
        }
    };

    // (pivot weight, coupling, other diagonal, rank) -> (single, pivot entry, remainder)
    let peel = |pivot: f64, coupling: Complex, other: f64, r: usize| -> (f64, Complex, f64) {
        if r == 0 {
            return (0.0, re(0.0), 0.0);
        }
        if pivot <= threshold {
            return (0.0, re(0.0), other.max(0.0).sqrt());
        }
        let single = coupling.norm() / pivot.sqrt();
        let pivot_entry = if coupling.norm() > 0.0 {
            coupling * (pivot.sqrt() / coupling.norm())
        } else {
            re(pivot.sqrt())
        };
        let remainder = if r >= 2 { (other - coupling.norm_sqr() / pivot).max(0.0).sqrt() } else { 0.0 };
        (single, pivot_entry, remainder)
    };
    let (a1, b1_conj, a3) = peel(d, g, a, rank(&outer.values));
    let (a2, b2, a4) = peel(b, f, c, rank(&inner.values));
    let form = CanonicalSIO4 {
        a: [a1, a2, a3, a4],
        b: [b1_conj.conj(), b2],
    };
    let ops: Vec<CMatrix> = form
        .operators()
        .into_iter()
        .filter(|k| k.max_abs() > channel::ZERO_OPERATOR_FLOOR)
        .collect();
    Ok((form, QubitChannel::new(ops)?))
}

/// Strictly incoherent decomposition with exactly Kraus-rank many operators.
pub fn sio_decompose(m: &ChoiMatrix, tol: f64) -> Result<QubitChannel> {
    sio_peel(m, tol).map(|(_, ch)| ch)
}

/// The canonical parameters found by [`sio_decompose`].
pub fn sio_canonical(m: &ChoiMatrix, tol: f64) -> Result<CanonicalSIO4> {
    sio_peel(m, tol).map(|(form, _)| form)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[allow(non_camel_case_types)]
pub enum TwoKrausTag {
    Row1Row1_SIO,
    Row2Row2_SIO,
    Mixed_NotSIO,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoKrausClass {
    pub tag: TwoKrausTag,
    /// Mixing unitary taking the pair to strictly incoherent operators.
    pub witness_unitary: Option<CMatrix>,
    pub theta: Option<f64>,
    pub phi: Option<f64>,
}

fn phase_normalised_row(row: Vec<Complex>) -> Vec<Complex> {
    let norm = complexmat::vec_norm(&row);
    match row.iter().find(|z| z.norm() > 1e-12 * norm) {
        Some(lead) => {
            let phase = lead.conj() / lead.norm();
            row.into_iter().map(|z| z * phase).collect()
        }
        None => row,
    }
}

/// Rows are the conjugated per-column coefficient vectors of the pair, so the
/// mixed operators are single entries.
fn column_witness(ops: &[&CMatrix], row: usize) -> Result<CMatrix> {
    let rows: Vec<Vec<Complex>> = (0..2)
        .map(|col| phase_normalised_row(ops.iter().map(|k| k[(row, col)].conj()).collect()))
        .collect();
    CMatrix::from_rows(&rows)
}

/// Classifies a channel with exactly two nonzero incoherent operators.
pub fn classify_two_kraus(ch: &QubitChannel) -> Result<TwoKrausClass> {
    if ch.dim() != 2 {
        return Err(Error::UnsupportedDimension(ch.dim()));
    }
    let ops = ch.nonzero_operators();
    if ops.len() != 2 {
        return Err(Error::NotTwoKraus(ops.len()));
    }
    for (index, k) in ch.kraus().iter().enumerate() {
        if !k.is_incoherent() {
            return Err(Error::NotIncoherentOperator { index });
        }
    }
    let patterns = (ops[0].pattern.expect("qubit"), ops[1].pattern.expect("qubit"));
    let mats = [&ops[0].matrix, &ops[1].matrix];
    use IncoherencePattern::{Row1, Row2};
    let class = match patterns {
        (Row1, Row1) => TwoKrausClass {
            tag: TwoKrausTag::Row1Row1_SIO,
            witness_unitary: Some(column_witness(&mats, 0)?),
            theta: None,
            phi: None,
        },
        (Row2, Row2) => TwoKrausClass {
            tag: TwoKrausTag::Row2Row2_SIO,
            witness_unitary: Some(column_witness(&mats, 1)?),
            theta: None,
            phi: None,
        },
        (Row1, Row2) | (Row2, Row1) => {
            let k = if patterns.0 == Row1 { mats[0] } else { mats[1] };
            let (k00, k01) = (k[(0, 0)], k[(0, 1)]);
            let theta = k01.norm().atan2(k00.norm());
            let phi = (k01.arg() - k00.arg()).rem_euclid(2.0 * PI);
            TwoKrausClass {
                tag: TwoKrausTag::Mixed_NotSIO,
                witness_unitary: None,
                theta: Some(theta),
                phi: Some(phi),
            }
        }
        _ => TwoKrausClass {
            tag: TwoKrausTag::Degenerate,
            witness_unitary: Some(CMatrix::identity(2)),
            theta: None,
            phi: None,
        },
    };
    Ok(class)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelReport {
    pub dim: usize,
    pub is_valid_channel: bool,
    /// For qutrits this reports whether the given operators are all incoherent.
    pub is_io: bool,
    /// For qutrits this reports whether the given operators are all strictly incoherent.
    pub is_sio: bool,
    pub kraus_rank: usize,
    /// Number of incoherent operators in the best decomposition found; `None` if not incoherent.
    pub io_rank_upper: Option<usize>,
    pub io_rank_certified: bool,
    pub sio_rank: Option<usize>,
    pub decomposition: Option<DecompositionSolution>,
}

/// Ranks and membership flags of a channel.
pub fn report(ch: &QubitChannel) -> ChannelReport {
    let m = ch.choi();
    let kraus_rank = m.kraus_rank();
    if ch.dim() != 2 {
        let nonzero = ch.nonzero_operators();
        let is_io = nonzero.iter().all(|k| k.is_incoherent());
        let is_sio = nonzero.iter().all(|k| k.is_strictly_incoherent());
        let io_rank_upper = is_io.then_some(nonzero.len());
        return ChannelReport {
            dim: ch.dim(),
            is_valid_channel: true,
            is_io,
            is_sio,
            kraus_rank,
            io_rank_upper,
            io_rank_certified: io_rank_upper == Some(kraus_rank),
            sio_rank: None,
            decomposition: None,
        };
    }
    let decomposition = decompose::decompose_io(&m, decompose::DECOMPOSE_TOL).ok();
    let is_io = decomposition.is_some();
    let is_sio = is_io && is_sio_choi(&m, CLASSIFY_TOL);
    let sio_rank = if is_sio { sio_decompose(&m, CLASSIFY_TOL).ok().map(|s| s.len()) } else { None };
    let io_rank_upper = match (decomposition.as_ref().map(|d| d.kraus.len()), sio_rank) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    ChannelReport {
        dim: 2,
        is_valid_channel: true,
        is_io,
        is_sio,
        kraus_rank,
        io_rank_upper,
        io_rank_certified: io_rank_upper == Some(kraus_rank),
        sio_rank,
        decomposition,
    }
}

/// Names accepted by [`gallery`].
pub const GALLERY_NAMES: [&str; 8] = [
    "eq14",
    "eq15",
    "eq17",
    "flattening",
    "qutrit_permutations",
    "identity",
    "dephasing",
    "hadamard",
];

pub const EQ15_DEFAULT_THETA: f64 = PI / 3.0;
pub const EQ15_DEFAULT_PHI: f64 = 0.7;

fn real2(rows: [[f64; 2]; 2]) -> CMatrix {
    CMatrix::from_real(&[&rows[0], &rows[1]]).expect("2x2")
}

/// The two-operator family `[[cosθ, sinθ e^{iφ}],[0,0]]`, `[[0,0],[sinθ, −cosθ e^{iφ}]]`.
pub fn eq15(theta: f64, phi: f64) -> Result<QubitChannel> {
    let e = Complex::from_polar(1.0, phi);
    let (s, co) = theta.sin_cos();
    QubitChannel::new(vec![
        CMatrix::new(2, 2, vec![re(co), e * s, re(0.0), re(0.0)])?,
        CMatrix::new(2, 2, vec![re(0.0), re(0.0), re(s), -e * co])?,
    ])
}

/// Reference channels by name; `eq15` uses the default angles.
pub fn gallery(name: &str) -> Result<QubitChannel> {
    let h = 0.5;
    let ops = match name {
        "eq14" => vec![
            real2([[h, h], [0.0, 0.0]]),
            real2([[0.0, 0.0], [h, -h]]),
            real2([[h, 0.0], [0.0, h]]),
            real2([[0.0, h], [h, 0.0]]),
        ],
        "eq15" => return eq15(EQ15_DEFAULT_THETA, EQ15_DEFAULT_PHI),
        "eq17" => vec![
            real2([[h, h], [0.0, 0.0]]),
            real2([[0.0, 0.0], [h, -h]]),
            real2([[h, 0.0], [0.0, -h]]),
            real2([[0.0, h], [h, 0.0]]),
        ],
        "flattening" => (0..4)
            .map(|s| {
                let mut k = CMatrix::zeros(2, 2);
                k[(s / 2, s % 2)] = re(FRAC_1_SQRT_2);
                k
            })
            .collect(),
        "qutrit_permutations" => {
            let w = 1.0 / 6f64.sqrt();
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
                .iter()
                .map(|perm| {
                    let mut k = CMatrix::zeros(3, 3);
                    for (col, &row) in perm.iter().enumerate() {
                        k[(row, col)] = re(w);
                    }
                    k
                })
                .collect()
        }
        "identity" => vec![CMatrix::identity(2)],
        "dephasing" => vec![real2([[1.0, 0.0], [0.0, 0.0]]), real2([[0.0, 0.0], [0.0, 1.0]])],
        "hadamard" => vec![real2([[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]])],
        _ => {
            return Err(Error::UnknownExample {
                name: name.to_string(),
                available: GALLERY_NAMES.join(", "),
            })
        }
    };
    QubitChannel::new(ops)
}

/// Diagonal-phase permutation unitaries on a qubit: `diag(e^{iφ0}, e^{iφ1})` and its swap.
pub fn permutation_phase_unitary(swap: bool, phi0: f64, phi1: f64) -> CMatrix {
    let mut u = CMatrix::zeros(2, 2);
    let (p0, p1) = (Complex::from_polar(1.0, phi0), Complex::from_polar(1.0, phi1));
    if swap {
        u[(1, 0)] = p0;
        u[(0, 1)] = p1;
    } else {
        u[(0, 0)] = p0;
        u[(1, 1)] = p1;
    }
    u
}
