//! Fixed-shape parametrisations of incoherent qubit channels.
//!
//! * [`LegacyIO5`]: five operators `[[a1,b1],[0,0]]`, `[[0,0],[a2,b2]]`,
//!   `[[a3,0],[0,b3]]`, `[[0,b4],[a4,0]]`, `[[a5,0],[0,0]]`.
//! * [`CanonicalIO5`]: the same five shapes written with a ratio `r` so that
//!   the two row operators read `[[rα1,β1],[0,0]]` and `[[0,0],[α1,−rβ1]]`.
//! * [`CanonicalIO4`]: the first four operators of [`CanonicalIO5`].
//! * [`CanonicalSIO4`]: `[[a1,0],[0,b1]]`, `[[0,b2],[a2,0]]`, `[[a3,0],[0,0]]`, `[[0,0],[a4,0]]`.

use serde::{Deserialize, Serialize};

use crate::channel::{self, KrausOperator, QubitChannel};
use crate::classify;
use crate::complexmat::{self, re, CMatrix, Complex};
use crate::error::{Error, Result};

/// Tolerance on the normalisation constraints of every form.
pub const FORM_TOL: f64 = 1e-9;
/// Default zero tolerance for [`reduce_observation1`].
pub const REDUCTION_TOL: f64 = 1e-9;
/// Below this, `a2` of a [`LegacyIO5`] is treated as zero.
const LEGACY_ZERO: f64 = 1e-12;

fn m2(k00: Complex, k01: Complex, k10: Complex, k11: Complex) -> CMatrix {
    CMatrix::new(2, 2, vec![k00, k01, k10, k11]).expect("2x2 operator")
}

fn check_nonnegative(name: &str, values: &[f64]) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameters(format!("{name}{} = {v} must be finite and nonnegative", i + 1)));
        }
    }
    Ok(())
}

fn check_finite(name: &str, values: &[Complex]) -> Result<()> {
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameters(format!("{name} has a non-finite entry")));
    }
    Ok(())
}

fn check_sum(label: &str, value: f64) -> Result<()> {
    if (value - 1.0).abs() > FORM_TOL {
        return Err(Error::InvalidParameters(format!("{label} sums to {value}, expected 1")));
    }
    Ok(())
}

fn channel_from(ops: Vec<CMatrix>) -> Result<QubitChannel> {
    let kept: Vec<CMatrix> = ops.into_iter().filter(|k| k.max_abs() > channel::ZERO_OPERATOR_FLOOR).collect();
    QubitChannel::new(kept)
}

/// Five-operator form with a shared ratio `r` between the two row operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalIO5 {
    pub r: f64,
    pub alpha: [f64; 4],
    pub beta: [Complex; 3],
}

impl CanonicalIO5 {
    pub fn new(r: f64, alpha: [f64; 4], beta: [Complex; 3]) -> Result<Self> {
        let form = CanonicalIO5 { r, alpha, beta };
        form.validate()?;
        Ok(form)
    }

    pub fn validate(&self) -> Result<()> {
        check_nonnegative("r", &[self.r])?;
        check_nonnegative("alpha", &self.alpha)?;
        check_finite("beta", &self.beta)?;
        let [a1, a2, a3, a4] = self.alpha;
        let [b1, b2, b3] = self.beta;
        let s = 1.0 + self.r * self.r;
        check_sum("alpha normalisation", a2 * a2 + a3 * a3 + a4 * a4 + s * a1 * a1)?;
        check_sum("beta normalisation", b2.norm_sqr() + b3.norm_sqr() + s * b1.norm_sqr())
    }

    /// All five operators in order, zeros included.
    pub fn operators(&self) -> Vec<CMatrix> {
        let [a1, a2, a3, a4] = self.alpha;
        let [b1, b2, b3] = self.beta;
        let z = re(0.0);
        vec![
            m2(re(self.r * a1), b1, z, z),
            m2(z, z, re(a1), -b1 * self.r),
            m2(re(a2), z, z, b2),
            m2(z, b3, re(a3), z),
            m2(re(a4), z, z, z),
        ]
    }

    pub fn to_kraus(&self) -> Result<QubitChannel> {
        self.validate()?;
        channel_from(self.operators())
    }
}

/// Four-operator form; the fifth (slot-0 single) operator is absorbed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalIO4 {
    pub r: f64,
    pub alpha: [f64; 3],
    pub beta: [Complex; 3],
}

impl CanonicalIO4 {
    pub fn new(r: f64, alpha: [f64; 3], beta: [Complex; 3]) -> Result<Self> {
        let form = CanonicalIO4 { r, alpha, beta };
        form.validate()?;
        Ok(form)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.normalisation();
        check_nonnegative("r", &[self.r])?;
        check_nonnegative("alpha", &self.alpha)?;
        check_finite("beta", &self.beta)?;
        check_sum("alpha normalisation", a)?;
        check_sum("beta normalisation", b)
    }

    /// `(α2²+α3²+(1+r²)α1², |β2|²+|β3|²+(1+r²)|β1|²)`, both 1 for a valid form.
    pub fn normalisation(&self) -> (f64, f64) {
        let [a1, a2, a3] = self.alpha;
        let [b1, b2, b3] = self.beta;
        let s = 1.0 + self.r * self.r;
        (
            a2 * a2 + a3 * a3 + s * a1 * a1,
            b2.norm_sqr() + b3.norm_sqr() + s * b1.norm_sqr(),
        )
    }

    pub fn to_io5(&self) -> CanonicalIO5 {
        let [a1, a2, a3] = self.alpha;
        CanonicalIO5 {
            r: self.r,
            alpha: [a1, a2, a3, 0.0],
            beta: self.beta,
        }
    }

    pub fn operators(&self) -> Vec<CMatrix> {
        let mut ops = self.to_io5().operators();
        ops.truncate(4);
        ops
    }

    pub fn to_kraus(&self) -> Result<QubitChannel> {
        self.validate()?;
        channel_from(self.operators())
    }
}

/// Strictly incoherent four-operator form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalSIO4 {
    pub a: [f64; 4],
    pub b: [Complex; 2],
}

impl CanonicalSIO4 {
    pub fn new(a: [f64; 4], b: [Complex; 2]) -> Result<Self> {
        let form = CanonicalSIO4 { a, b };
        form.validate()?;
        Ok(form)
    }

    pub fn validate(&self) -> Result<()> {
        check_nonnegative("a", &self.a)?;
        check_finite("b", &self.b)?;
        check_sum("a normalisation", self.a.iter().map(|x| x * x).sum())?;
        check_sum("b normalisation", self.b[0].norm_sqr() + self.b[1].norm_sqr())
    }

    pub fn operators(&self) -> Vec<CMatrix> {
        let [a1, a2, a3, a4] = self.a;
        let [b1, b2] = self.b;
        let z = re(0.0);
        vec![
            m2(re(a1), z, z, b1),
            m2(z, b2, re(a2), z),
            m2(re(a3), z, z, z),
            m2(z, z, re(a4), z),
        ]
    }

    pub fn to_kraus(&self) -> Result<QubitChannel> {
        self.validate()?;
        channel_from(self.operators())
    }
}

/// Five-operator form with independent row operators, constrained by `a1 b1 + a2 b2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegacyIO5 {
    pub a: [f64; 5],
    pub b: [Complex; 4],
}

impl LegacyIO5 {
    pub fn new(a: [f64; 5], b: [Complex; 4]) -> Result<Self> {
        let form = LegacyIO5 { a, b };
        form.validate()?;
        Ok(form)
    }

    pub fn validate(&self) -> Result<()> {
        check_nonnegative("a", &self.a)?;
        check_finite("b", &self.b)?;
        check_sum("a normalisation", self.a.iter().map(|x| x * x).sum())?;
        check_sum("b normalisation", self.b.iter().map(|z| z.norm_sqr()).sum())?;
        let cross = self.b[0] * self.a[0] + self.b[1] * self.a[1];
        if cross.norm() > FORM_TOL {
            return Err(Error::InvalidParameters(format!("a1 b1 + a2 b2 = {cross}, expected 0")));
        }
        Ok(())
    }

    pub fn operators(&self) -> Vec<CMatrix> {
        let [a1, a2, a3, a4, a5] = self.a;
        let [b1, b2, b3, b4] = self.b;
        let z = re(0.0);
        vec![
            m2(re(a1), b1, z, z),
            m2(z, z, re(a2), b2),
            m2(re(a3), z, z, b3),
            m2(z, b4, re(a4), z),
            m2(re(a5), z, z, z),
        ]
    }

    pub fn to_kraus(&self) -> Result<QubitChannel> {
        self.validate()?;
        channel_from(self.operators())
    }
}

/// Rewrites the five independent-row form with a shared ratio.
///
/// With `a2 > 0` the operator list is reproduced exactly. With `a2 = 0` and
/// `a1 = 0` the second row operator is reproduced up to a global phase. In the
/// remaining case (`a2 = 0`, `b1 = 0`) the two row operators are single
/// entries at slots 0 and 3; they are merged into the slot-0 single and the
/// diagonal operator, which preserves the channel but not the list.
pub fn legacy_to_five(form: &LegacyIO5) -> Result<CanonicalIO5> {
    form.validate()?;
    let [a1, a2, a3, a4, a5] = form.a;
    let [b1, b2, b3, b4] = form.b;
    if a2 > LEGACY_ZERO {
        return Ok(CanonicalIO5 {
            r: a1 / a2,
            alpha: [a2, a3, a4, a5],
            beta: [b1, b3, b4],
        });
    }
    if b1.norm() > a1 {
        return Ok(CanonicalIO5 {
            r: b2.norm() / b1.norm(),
            alpha: [0.0, a3, a4, (a5 * a5 + a1 * a1 + a2 * a2).sqrt()],
            beta: [b1, b3, b4],
        });
    }
    let beta2_mag = (b3.norm_sqr() + b2.norm_sqr()).sqrt();
    let (alpha2, beta2) = if beta2_mag > 0.0 {
        let phase = if b3.norm() > 0.0 { b3 / b3.norm() } else { re(1.0) };
        (a3 * b3.norm() / beta2_mag, phase * beta2_mag)
    } else {
        (a3, re(0.0))
    };
    let alpha4 = (a5 * a5 + a1 * a1 + a2 * a2 + a3 * a3 - alpha2 * alpha2).max(0.0).sqrt();
    Ok(CanonicalIO5 {
        r: 0.0,
        alpha: [0.0, alpha2, a4, alpha4],
        beta: [re(0.0), beta2, b4],
    })
}

/// Mixes the operators at `group` so that one of them vanishes, then drops it.
///
/// The vanishing combination is the null vector of the vectorisation matrix of
/// the group; it seeds the first row of the mixing unitary.
fn eliminate_dependent(ops: &[CMatrix], group: &[usize]) -> Result<Vec<CMatrix>> {
    let members: Vec<&CMatrix> = group.iter().map(|&i| &ops[i]).collect();
    let n = members.len();
    let mut gram = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = complexmat::inner(members[i].as_slice(), members[j].as_slice());
        }
    }
    let eig = gram.hermitian_eigen(complexmat::HERMITIAN_TOL)?;
    let scale = eig.max_value().max(complexmat::ZERO_FLOOR);
    if eig.min_value() > 1e-9 * scale {
        return Err(Error::ConstraintViolation(format!(
            "operators {group:?} are not linearly dependent (smallest Gram eigenvalue {:.3e})",
            eig.min_value()
        )));
    }
    let null = eig.vector(n - 1);
    let first_row: Vec<Complex> = null.to_vec();
    let u = complexmat::unitary_with_first_row(&first_row)?;
    let wrapped: Vec<KrausOperator> = members.iter().map(|&k| KrausOperator::new(k.clone())).collect();
    let mixed = channel::mix_kraus(&u, &wrapped)?;
    let mut out: Vec<CMatrix> = ops
        .iter()
        .enumerate()
        .filter(|(i, _)| !group.contains(i))
        .map(|(_, k)| k.clone())
        .collect();
    out.extend(mixed.into_iter().skip(1).map(|k| k.matrix));
    Ok(out)
}

fn mix_pair(ops: &mut [CMatrix], i: usize, j: usize, u: [[Complex; 2]; 2]) {
    let norm = (u[0][0].norm_sqr() + u[0][1].norm_sqr()).sqrt();
    let (ki, kj) = (ops[i].clone(), ops[j].clone());
    ops[i] = &ki.scale(u[0][0] / norm) + &kj.scale(u[0][1] / norm);
    ops[j] = &ki.scale(u[1][0] / norm) + &kj.scale(u[1][1] / norm);
}

/// Reduces a five-operator form with a vanishing parameter to at most four
/// incoherent operators describing the same channel.
///
/// The first parameter at or below `tol` (checked in the order α4, α1·β1 and
/// r, β2, α3, α2, β3) is set to zero and the matching reduction applied.
pub fn reduce_observation1(form: &CanonicalIO5, tol: f64) -> Result<QubitChannel> {
    form.validate()?;
    let mut p = *form;
    let [a1, a2, a3, a4] = p.alpha;
    let [b1, b2, b3] = p.beta;
    let z = re(0.0);

    if a4 <= tol {
        p.alpha[3] = 0.0;
        let mut ops = p.operators();
        ops.truncate(4);
        return reduced(ops);
    }
    if a1 <= tol || b1.norm() <= tol || p.r <= tol {
        if a1 <= tol {
            p.alpha[0] = 0.0;
        } else if b1.norm() <= tol {
            p.beta[0] = z;
        } else {
            p.r = 0.0;
        }
        let m = channel::choi_of(&p.operators());
        let (_, channel) = classify::sio_peel(&m, tol)?;
        return Ok(channel);
    }
    if b2.norm() <= tol {
        p.beta[1] = z;
        return reduced(eliminate_dependent(&p.operators(), &[2, 4])?);
    }
    if a3 <= tol {
        p.alpha[2] = 0.0;
        return reduced(eliminate_dependent(&p.operators(), &[0, 3, 4])?);
    }
    let r = p.r;
    if a2 <= tol {
        p.alpha[1] = 0.0;
        let mut ops = p.operators();
        // (op1, op5) -> Row1 + slot-1 single; (op2, op3) -> Row2 + slot-2 single.
        mix_pair(&mut ops, 0, 4, [[re(r * a1), re(a4)], [re(-a4), re(r * a1)]]);
        mix_pair(&mut ops, 1, 2, [[b1.conj() * r, -b2.conj()], [b2, b1 * r]]);
        return reduced(eliminate_dependent(&ops, &[4, 2, 3])?);
    }
    if b3.norm() <= tol {
        p.beta[2] = z;
        let mut ops = p.operators();
        // (op2, op4) -> Row2 + slot-3 single, which is dependent on op3 and op5.
        mix_pair(&mut ops, 1, 3, [[re(a1), re(a3)], [re(a3), re(-a1)]]);
        return reduced(eliminate_dependent(&ops, &[4, 3, 2])?);
    }
    Err(Error::NoDegenerateParameter)
}

fn reduced(ops: Vec<CMatrix>) -> Result<QubitChannel> {
    let ch = channel_from(ops)?;
    debug_assert!(ch.len() <= 4);
    Ok(ch)
}
