//! Splitting the Choi matrix of an incoherent qubit channel into at most four
//! rank-one blocks, each the Choi matrix of one incoherent Kraus operator.
//!
//! With `2M` written as
//!
//! ```text
//! [ a   e   0   g ]
//! [ e*  b   f   0 ]
//! [ 0   f*  c  -e ]
//! [ g*  0  -e*  d ]
//! ```
//!
//! the split is `2M = Diag(0,3) + Antidiag(1,2) + Row1(0,1) + Row2(2,3)` with
//! the diagonal weights `A` and `B` chosen so that every block has rank one.
//! All scalar equations use `|e|, |f|, |g|`; the blocks keep the complex entries.

use serde::Serialize;
use twofloat::TwoFloat;

use crate::canonical::CanonicalIO4;
use crate::channel::{self, ChoiMatrix, KrausOperator, QubitChannel};
use crate::complexmat::{re, CMatrix, Complex};
use crate::error::{Error, Result};

/// Default zero tolerance, relative to the largest Choi entry.
pub const DECOMPOSE_TOL: f64 = 1e-9;
/// Blocks whose weight (in units of `2M`) is at most this are dropped.
pub const BLOCK_DROP: f64 = 1e-12;
/// Relative tolerance of the product conditions checked for each root.
pub const ROOT_TOL: f64 = 1e-8;
/// Largest accepted second eigenvalue of a block (units of `2M`).
pub const RANK_ONE_TOL: f64 = 1e-9;
/// Choi round-trip error, relative to the largest entry, below which the
/// dispatched construction is accepted without trying alternatives.
pub const ACCEPT_TOL: f64 = 1e-12;

/// The seven scalars of a qubit Choi matrix with incoherent structure, in units of `2M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChoiEntries {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: Complex,
    pub f: Complex,
    pub g: Complex,
}

impl ChoiEntries {
    /// Reassembles `2M`.
    pub fn to_matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for (i, x) in [self.a, self.b, self.c, self.d].into_iter().enumerate() {
            m[(i, i)] = re(x);
        }
        let mut put = |i: usize, j: usize, z: Complex| {
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        };
        put(0, 1, self.e);
        put(1, 2, self.f);
        put(0, 3, self.g);
        put(2, 3, -self.e);
        m
    }

    fn scale(&self) -> f64 {
        self.a.max(self.b).max(self.c).max(self.d)
    }
}

fn max_entry(m: &CMatrix) -> f64 {
    m.max_abs().max(crate::complexmat::ZERO_FLOOR)
}

/// `true` iff `|m02|` and `|m13|` vanish (relative to the largest entry).
///
/// Each incoherent operator puts column 0 in at most one of slots {0, 2} and
/// column 1 in at most one of {1, 3}, so these entries are zero for every IO;
/// conversely [`decompose_io`] succeeds whenever they are.
pub fn io_membership(m: &ChoiMatrix, tol: f64) -> bool {
    if m.dim() != 2 {
        return false;
    }
    let scale = max_entry(m.matrix());
    m.entry(0, 2).norm() <= tol * scale && m.entry(1, 3).norm() <= tol * scale
}

pub fn extract_entries(m: &ChoiMatrix, tol: f64) -> Result<ChoiEntries> {
    if m.dim() != 2 {
        return Err(Error::UnsupportedDimension(m.dim()));
    }
    let mm = m.matrix();
    let scale = max_entry(mm);
    for (slot, (i, j)) in [("02", (0, 2)), ("13", (1, 3))] {
        let magnitude = mm[(i, j)].norm();
        if magnitude > tol * scale {
            return Err(Error::NotIncoherentChannel { slot, magnitude });
        }
    }
    let breach = (mm[(2, 3)] + mm[(0, 1)]).norm();
    if breach > tol * scale {
        return Err(Error::ConstraintViolation(format!("m23 + m01 = {breach:.3e}, expected 0")));
    }
    Ok(ChoiEntries {
        a: 2.0 * mm[(0, 0)].re,
        b: 2.0 * mm[(1, 1)].re,
        c: 2.0 * mm[(2, 2)].re,
        d: 2.0 * mm[(3, 3)].re,
        e: mm[(0, 1)] * 2.0,
        f: mm[(1, 2)] * 2.0,
        g: mm[(0, 3)] * 2.0,
    })
}

fn dd(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

fn dd_norm_sqr(z: Complex) -> TwoFloat {
    dd(z.re) * dd(z.re) + dd(z.im) * dd(z.im)
}

/// Minors and the quadratic in `k`, evaluated in double-double arithmetic.
struct Minors {
    e2: TwoFloat,
    f2: TwoFloat,
    g2: TwoFloat,
    fg: TwoFloat,
    ad_g: TwoFloat,
    bc_f: TwoFloat,
    d1: TwoFloat,
    d2: TwoFloat,
    d3: TwoFloat,
    d4: TwoFloat,
    delta: TwoFloat,
}

fn minors(x: &ChoiEntries) -> Minors {
    let (a, b, c, d) = (dd(x.a), dd(x.b), dd(x.c), dd(x.d));
    let (e2, f2, g2) = (dd_norm_sqr(x.e), dd_norm_sqr(x.f), dd_norm_sqr(x.g));
    let fg = (f2 * g2).sqrt();
    let ad_g = a * d - g2;
    let bc_f = b * c - f2;
    let cd_e = c * d - e2;
    Minors {
        d1: a * bc_f - c * e2,
        d2: b * ad_g - d * e2,
        d3: a * cd_e - c * g2,
        d4: b * cd_e - d * f2,
        delta: ad_g * bc_f - e2 * (a * b + c * d - e2 + fg * 2.0),
        e2,
        f2,
        g2,
        fg,
        ad_g,
        bc_f,
    }
}

/// Coefficients and roots of `α k² − β k + γ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticData {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `β² − 4αγ`.
    pub discriminant: f64,
    /// `Δ (Δ + 4|e|²|f||g|) [(ad − |g|²)(bc − |f|²) − |e|⁴]²`.
    pub discriminant_closed: f64,
    /// Positive real roots in ascending order.
    pub roots: Vec<f64>,
}

pub fn quadratic_data(x: &ChoiEntries) -> Result<QuadraticData> {
    let (a, b, c, d) = (dd(x.a), dd(x.b), dd(x.c), dd(x.d));
    let n = minors(x);
    let e2 = n.e2;
    let e4 = e2 * e2;
    let alpha = e2 * n.d2 * n.d4;
    let beta = n.delta * (n.delta + e2 * (a * b + c * d + n.fg * 4.0))
        + e4 * (a * b * n.fg + a * d * n.f2 + b * c * n.g2 + c * d * n.fg) * 2.0;
    let gamma = e2 * n.d1 * n.d3;
    let disc = beta * beta - alpha * gamma * 4.0;
    let bracket = n.ad_g * n.bc_f - e4;
    let disc_closed = n.delta * (n.delta + e2 * n.fg * 4.0) * bracket * bracket;

    let beta_f = f64::from(beta);
    let disc_f = f64::from(disc);
    // D has the sign of Δ, so only Δ is tested; a slightly negative D is rounding
    // around a double root.
    if f64::from(n.delta) < -1e-9 {
        return Err(Error::ConstraintViolation(format!(
            "quadratic is inconsistent with a positive semidefinite input (delta {:.3e}, discriminant {:.3e})",
            f64::from(n.delta),
            disc_f
        )));
    }
    let sqrt_disc = if disc_f > 0.0 { disc.sqrt() } else { dd(0.0) };
    let mut roots = Vec::with_capacity(2);
    let q = (beta + sqrt_disc) / 2.0;
    if f64::from(q) > 0.0 {
        let small = f64::from(gamma / q);
        if small > 0.0 && small.is_finite() {
            roots.push(small);
        }
        if f64::from(alpha) > 0.0 {
            let large = f64::from(q / alpha);
            if large.is_finite() && large > 0.0 && roots.last() != Some(&large) {
                roots.push(large);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    Ok(QuadraticData {
        d1: f64::from(n.d1),
        d2: f64::from(n.d2),
        d3: f64::from(n.d3),
        d4: f64::from(n.d4),
        delta: f64::from(n.delta),
        alpha: f64::from(alpha),
        beta: beta_f,
        gamma: f64::from(gamma),
        discriminant: disc_f,
        discriminant_closed: f64::from(disc_closed),
        roots,
    })
}

/// Diagonal weights of the four blocks for one value of `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockWeights {
    #[serde(rename = "A")]
    pub a_cap: f64,
    #[serde(rename = "B")]
    pub b_cap: f64,
    /// `a − A`
    pub row1_top: f64,
    /// `b − B`
    pub row1_bottom: f64,
    /// `c − |f|²/B`
    pub row2_top: f64,
    /// `d − |g|²/A`
    pub row2_bottom: f64,
}

/// `A` and `B` for a given `k > 0`, together with the remaining row-block diagonals.
///
/// Every difference is evaluated in a cancellation-free form, so the returned
/// weights stay accurate when `a ≈ kd` or `kb ≈ c`.
pub fn compute_ab(k: f64, x: &ChoiEntries) -> Result<BlockWeights> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::ConstraintViolation(format!("k = {k} must be positive")));
    }
    let n = minors(x);
    let (ad_g, bc_f) = (f64::from(n.ad_g), f64::from(n.bc_f));
    let (f2, g2) = (f64::from(n.f2), f64::from(n.g2));
    let limit = -DECOMPOSE_TOL * x.scale() * x.scale();
    if ad_g < limit || bc_f < limit {
        return Err(Error::ConstraintViolation(format!(
            "negative 2x2 minor (ad - |g|^2 = {ad_g:.3e}, bc - |f|^2 = {bc_f:.3e})"
        )));
    }
    let (ad_g, bc_f) = (ad_g.max(0.0), bc_f.max(0.0));

    let u = x.a - k * x.d;
    let s_a = (u * u + 4.0 * k * g2).sqrt();
    let a_cap = if u >= 0.0 { (u + s_a) / 2.0 } else { 2.0 * k * g2 / (s_a - u) };
    let row1_top = 2.0 * k * ad_g / ((x.a + k * x.d) + s_a);

    let v = k * x.b - x.c;
    let s_b = (v * v + 4.0 * k * f2).sqrt();
    let b_cap = if v >= 0.0 { (v + s_b) / (2.0 * k) } else { 2.0 * f2 / (s_b - v) };
    let row1_bottom = 2.0 * bc_f / ((k * x.b + x.c) + s_b);

    let w = BlockWeights {
        a_cap,
        b_cap,
        row1_top,
        row1_bottom,
        row2_top: k * row1_bottom,
        row2_bottom: row1_top / k,
    };
    if [w.a_cap, w.b_cap, w.row1_top, w.row1_bottom].iter().any(|v| !v.is_finite()) {
        return Err(Error::ConstraintViolation(format!("non-finite block weights at k = {k}")));
    }
    Ok(w)
}

fn relative_gap(value: f64, target: f64) -> f64 {
    (value - target).abs() / target.abs().max(f64::MIN_POSITIVE)
}

/// Product-condition residuals `((a−A)(b−B) vs |e|², (c−|f|²/B)(d−|g|²/A) vs |e|²)`.
///
/// The second product is formed by direct subtraction so it does not share
/// the rearrangements used by [`compute_ab`].
pub fn product_residuals(w: &BlockWeights, x: &ChoiEntries) -> (f64, f64) {
    let e2 = x.e.norm_sqr();
    let first = relative_gap(w.row1_top * w.row1_bottom, e2);
    let c_direct = x.c - x.f.norm_sqr() / w.b_cap;
    let d_direct = x.d - x.g.norm_sqr() / w.a_cap;
    // direct subtraction loses up to ~eps·(c + d) absolutely
    let slack = 8.0 * f64::EPSILON * (x.c + x.d) * (x.c.max(x.d)) / e2;
    let second = (relative_gap(c_direct * d_direct, e2) - slack).max(0.0);
    (first, second)
}

/// Whether each root in `q.roots` satisfies both product conditions.
pub fn root_validity(q: &QuadraticData, x: &ChoiEntries) -> Vec<bool> {
    q.roots
        .iter()
        .map(|&k| match compute_ab(k, x) {
            Ok(w) => {
                let (p1, p2) = product_residuals(&w, x);
                p1 <= ROOT_TOL && p2 <= ROOT_TOL
            }
            Err(_) => false,
        })
        .collect()
}

/// The smallest root whose weights satisfy both product conditions.
pub fn select_root(q: &QuadraticData, x: &ChoiEntries) -> Result<f64> {
    q.roots
        .iter()
        .zip(root_validity(q, x))
        .find_map(|(&k, ok)| ok.then_some(k))
        .ok_or(Error::NoValidRoot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockKind {
    /// Slots (0, 3), a `[[*,0],[0,*]]` operator.
    Diag,
    /// Slots (1, 2), a `[[0,*],[*,0]]` operator.
    Antidiag,
    /// Slots (0, 1), a `[[*,*],[0,0]]` operator.
    Row1,
    /// Slots (2, 3), a `[[0,0],[*,*]]` operator.
    Row2,
}

impl BlockKind {
    pub fn slots(self) -> (usize, usize) {
        match self {
            BlockKind::Diag => (0, 3),
            BlockKind::Antidiag => (1, 2),
            BlockKind::Row1 => (0, 1),
            BlockKind::Row2 => (2, 3),
        }
    }

    /// Position (0 or 1) of the column-0 slot whose entry is made real and nonnegative.
    fn leading(self) -> usize {
        match self {
            BlockKind::Antidiag => 1,
            _ => 0,
        }
    }
}

/// A 2×2 Hermitian block living on two slots of the 4×4 Choi matrix (units of `2M`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub kind: BlockKind,
    pub slots: (usize, usize),
    pub matrix: CMatrix,
}

impl Block {
    pub fn new(kind: BlockKind, top: f64, off: Complex, bottom: f64) -> Block {
        let matrix = CMatrix::new(2, 2, vec![re(top), off + re(0.0), off.conj() + re(0.0), re(bottom)]).expect("2x2 block");
        Block {
            kind,
            slots: kind.slots(),
            matrix,
        }
    }

    /// The block embedded into a 4×4 matrix.
    pub fn full(&self) -> CMatrix {
        self.matrix.embed(&[self.slots.0, self.slots.1], 4)
    }

    /// Largest eigenvalue.
    pub fn weight(&self) -> f64 {
        let (p, q, x) = (self.matrix[(0, 0)].re, self.matrix[(1, 1)].re, self.matrix[(0, 1)].norm());
        let half = (p + q) / 2.0;
        half + (((p - q) / 2.0).powi(2) + x * x).sqrt()
    }

    /// Second eigenvalue magnitude, zero for an exact rank-one block.
    pub fn rank_one_defect(&self) -> f64 {
        let (p, q, x) = (self.matrix[(0, 0)].re, self.matrix[(1, 1)].re, self.matrix[(0, 1)].norm());
        let lambda1 = self.weight();
        if lambda1 <= 0.0 {
            return lambda1.abs();
        }
        ((p * q - x * x) / lambda1).abs()
    }
}

/// The four blocks of the split for given weights.
pub fn split_blocks(x: &ChoiEntries, w: &BlockWeights) -> Result<[Block; 4]> {
    let g2 = x.g.norm_sqr();
    let f2 = x.f.norm_sqr();
    let diag_bottom = if w.a_cap > 0.0 { g2 / w.a_cap } else { 0.0 };
    let anti_bottom = if w.b_cap > 0.0 { f2 / w.b_cap } else { 0.0 };
    let blocks = [
        Block::new(BlockKind::Diag, w.a_cap, x.g, diag_bottom),
        Block::new(BlockKind::Antidiag, w.b_cap, x.f, anti_bottom),
        Block::new(BlockKind::Row1, w.row1_top, x.e, w.row1_bottom),
        Block::new(BlockKind::Row2, w.row2_top, -x.e, w.row2_bottom),
    ];
    for b in &blocks {
        let (p, q) = (b.matrix[(0, 0)].re, b.matrix[(1, 1)].re);
        if p < -RANK_ONE_TOL || q < -RANK_ONE_TOL {
            return Err(Error::ConstraintViolation(format!("{:?} block has a negative diagonal", b.kind)));
        }
        let second = b.rank_one_defect();
        if second > RANK_ONE_TOL {
            return Err(Error::RankOneViolation { second });
        }
    }
    Ok(blocks)
}

/// The operator whose Choi contribution (units of `2M`) is the rank-one block.
///
/// The vector is built from the larger diagonal pivot and its phase is fixed so
/// that the column-0 entry (slot 0 or 2) is real and nonnegative; when that
/// entry vanishes the other entry is made real and nonnegative instead.
pub fn rank1_to_kraus(block: &Block) -> KrausOperator {
    let (p, q, x) = (block.matrix[(0, 0)].re, block.matrix[(1, 1)].re, block.matrix[(0, 1)]);
    if block.weight() <= BLOCK_DROP {
        return KrausOperator::zero(2);
    }
    let mut v = if p >= q {
        let s = p.max(0.0).sqrt();
        [re(s), x.conj() / s]
    } else {
        let s = q.max(0.0).sqrt();
        [x / s, re(s)]
    };
    let lead = block.kind.leading();
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let pivot = if v[lead].norm() > 1e-12 * norm { lead } else { 1 - lead };
    let phase = v[pivot].conj() / v[pivot].norm();
    v = [v[0] * phase, v[1] * phase];
    v[pivot] = re(v[pivot].re);
    let mut k = CMatrix::zeros(2, 2);
    let (s0, s1) = block.slots;
    // adding +0 clears the negative zeros left by conjugation
    k[(s0 / 2, s0 % 2)] = v[0] + re(0.0);
    k[(s1 / 2, s1 % 2)] = v[1] + re(0.0);
    KrausOperator::new(k)
}

/// Which construction produced the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecompositionBranch {
    /// All of `e, f, g` nonzero: quadratic in `k`.
    Generic,
    /// `e = 0`: the two strictly incoherent blocks are split spectrally.
    NoRowCoupling,
    /// `f = g = 0`: the two row blocks are split spectrally.
    RowsOnly,
    /// `g = 0`: closed form with the diagonal operator reduced to slot 0.
    NoDiagonalCoupling,
    /// `f = 0`: closed form with the antidiagonal operator reduced to slot 1.
    NoAntidiagonalCoupling,
    /// All of `e, f, g` nonzero but the quadratic's coefficients are at the
    /// rounding level: the weights come from a direct root search.
    GenericRootSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    /// `max |choi(out) − M|`.
    pub choi_round_trip: f64,
    /// Second eigenvalue of each block, in units of `2M`.
    pub block_rank_defects: Vec<f64>,
    pub completeness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionSolution {
    pub branch: DecompositionBranch,
    pub entries: ChoiEntries,
    pub quadratic: Option<QuadraticData>,
    /// Only set when the weights come from a root of the quadratic.
    pub k: Option<f64>,
    /// Set on the generic, root-search and single-coupling branches.
    pub weights: Option<BlockWeights>,
    pub blocks: Vec<Block>,
    /// `None` when the operators do not fit the four-operator shape (for
    /// example two independent diagonal operators).
    pub canonical: Option<CanonicalIO4>,
    pub kraus: QubitChannel,
    pub residuals: Residuals,
}

/// Spectral split of a 2×2 PSD block into at most two rank-one blocks.
fn spectral_blocks(kind: BlockKind, top: f64, off: Complex, bottom: f64) -> Result<Vec<Block>> {
    let whole = Block::new(kind, top, off, bottom);
    let eig = whole.matrix.hermitian_eigen(crate::complexmat::HERMITIAN_TOL)?;
    if eig.min_value() < -RANK_ONE_TOL {
        return Err(Error::ConstraintViolation(format!(
            "{kind:?} block has eigenvalue {:.3e}",
            eig.min_value()
        )));
    }
    let mut out = Vec::new();
    for (i, &lambda) in eig.values.iter().enumerate() {
        if lambda <= BLOCK_DROP {
            continue;
        }
        let u = eig.vector(i);
        let m = &CMatrix::outer(&u) * lambda;
        out.push(Block::new(kind, m[(0, 0)].re, m[(0, 1)], m[(1, 1)].re));
    }
    Ok(out)
}

fn weights_from_parts(a_cap: f64, b_cap: f64, row1: (f64, f64), row2: (f64, f64)) -> BlockWeights {
    BlockWeights {
        a_cap,
        b_cap,
        row1_top: row1.0,
        row1_bottom: row1.1,
        row2_top: row2.0,
        row2_bottom: row2.1,
    }
}

/// Fits the four-operator canonical form to kind-tagged operators.
fn fit_canonical(ops: &[(BlockKind, CMatrix)]) -> Option<CanonicalIO4> {
    let mut found: [Option<&CMatrix>; 4] = [None; 4];
    for (kind, m) in ops {
        let idx = *kind as usize;
        if found[idx].is_some() {
            return None;
        }
        found[idx] = Some(m);
    }
    let z = re(0.0);
    let get = |kind: BlockKind, i: usize, j: usize| found[kind as usize].map_or(z, |m| m[(i, j)]);
    let tiny = 1e-12;

    let (alpha2, beta2) = (get(BlockKind::Diag, 0, 0), get(BlockKind::Diag, 1, 1));
    let (alpha3, beta3) = (get(BlockKind::Antidiag, 1, 0), get(BlockKind::Antidiag, 0, 1));
    let (p, q) = (get(BlockKind::Row1, 0, 0), get(BlockKind::Row1, 0, 1));
    let (s, t) = (get(BlockKind::Row2, 1, 0), get(BlockKind::Row2, 1, 1));

    let (r, alpha1, beta1) = if s.norm() > tiny {
        (p.norm() / s.norm(), s.norm(), q)
    } else if p.norm() <= tiny && q.norm() > tiny {
        // slot-1 and slot-3 singles: the second row operator is fixed up to a global phase
        (t.norm() / q.norm(), 0.0, q)
    } else if p.norm() <= tiny && q.norm() <= tiny && t.norm() <= tiny {
        (0.0, 0.0, z)
    } else {
        return None;
    };
    let form = CanonicalIO4 {
        r,
        alpha: [alpha1, alpha2.norm(), alpha3.norm()],
        beta: [beta1, beta2, beta3],
    };
    let (na, nb) = form.normalisation();
    ((na - 1.0).abs() <= 1e-8 && (nb - 1.0).abs() <= 1e-8).then_some(form)
}

/// Blocks and intermediate data of one construction.
struct Candidate {
    branch: DecompositionBranch,
    quadratic: Option<QuadraticData>,
    k: Option<f64>,
    weights: Option<BlockWeights>,
    blocks: Vec<Block>,
}

fn no_row_coupling(x: &ChoiEntries) -> Result<Candidate> {
    let mut blocks = spectral_blocks(BlockKind::Diag, x.a, x.g, x.d)?;
    blocks.extend(spectral_blocks(BlockKind::Antidiag, x.b, x.f, x.c)?);
    Ok(Candidate {
        branch: DecompositionBranch::NoRowCoupling,
        quadratic: None,
        k: None,
        weights: None,
        blocks,
    })
}

fn rows_only(x: &ChoiEntries) -> Result<Candidate> {
    let mut blocks = spectral_blocks(BlockKind::Row1, x.a, x.e, x.b)?;
    blocks.extend(spectral_blocks(BlockKind::Row2, x.c, -x.e, x.d)?);
    Ok(Candidate {
        branch: DecompositionBranch::RowsOnly,
        quadratic: None,
        k: None,
        weights: None,
        blocks,
    })
}

/// Closed form with `g` (`drop_g`) or `f` set to zero.
///
/// With `g = 0` the second row block takes all of slot 3, the antidiagonal
/// block takes what is left of slot 2, the first row block what is left of
/// slot 1, and the diagonal operator what is left of slot 0. With `f = 0` the
/// same chain runs in mirror order. This equals the minor-ratio form
/// (`A = Δ/d4` resp. `B = Δ/d3`) but every diagonal entry is matched exactly
/// and every block is rank one by construction, which keeps it accurate when
/// the minors are small.
fn single_coupling(x: &ChoiEntries, drop_g: bool) -> Result<Candidate> {
    let mut x_used = *x;
    let e2 = x.e.norm_sqr();
    let positive = |v: f64, what: &str| {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::ConstraintViolation(format!("{what} is not positive")))
        }
    };
    let ratio = |num: f64, den: f64, what: &str| if num == 0.0 { Ok(0.0) } else { positive(den, what).map(|d| num / d) };
    let w = if drop_g {
        x_used.g = re(0.0);
        let row2_top = e2 / positive(x.d, "slot 3")?;
        let anti_bottom = (x.c - row2_top).max(0.0);
        let b_cap = ratio(x.f.norm_sqr(), anti_bottom, "antidiagonal remainder")?;
        let row1_bottom = positive(x.b - b_cap, "first row remainder")?;
        let row1_top = e2 / row1_bottom;
        weights_from_parts((x.a - row1_top).max(0.0), b_cap, (row1_top, row1_bottom), (row2_top, x.d))
    } else {
        x_used.f = re(0.0);
        let row2_bottom = e2 / positive(x.c, "slot 2")?;
        let diag_bottom = (x.d - row2_bottom).max(0.0);
        let a_cap = ratio(x.g.norm_sqr(), diag_bottom, "diagonal remainder")?;
        let row1_top = positive(x.a - a_cap, "first row remainder")?;
        let row1_bottom = e2 / row1_top;
        weights_from_parts(a_cap, (x.b - row1_bottom).max(0.0), (row1_top, row1_bottom), (x.c, row2_bottom))
    };
    Ok(Candidate {
        branch: if drop_g {
            DecompositionBranch::NoDiagonalCoupling
        } else {
            DecompositionBranch::NoAntidiagonalCoupling
        },
        quadratic: None,
        k: None,
        weights: Some(w),
        blocks: split_blocks(&x_used, &w)?.to_vec(),
    })
}

fn generic(x: &ChoiEntries) -> Result<Candidate> {
    let q = quadratic_data(x)?;
    let root = select_root(&q, x)?;
    let w = compute_ab(root, x)?;
    Ok(Candidate {
        branch: DecompositionBranch::Generic,
        quadratic: Some(q),
        k: Some(root),
        weights: Some(w),
        blocks: split_blocks(x, &w)?.to_vec(),
    })
}

/// Weights from the two rank-one conditions solved directly in `A`.
///
/// The first row block is rank one by construction once `B = b − |e|²/(a−A)`;
/// the remaining condition
/// `h(A) = (c − |f|²/B)(d − |g|²/A) − |e|²` is negative at both ends of the
/// admissible interval, so its peak is located by golden-section search and
/// the lower root by bisection. A non-positive peak is a double root.
fn root_search(x: &ChoiEntries) -> Result<Candidate> {
    let (e2, f2, g2) = (x.e.norm_sqr(), x.f.norm_sqr(), x.g.norm_sqr());
    let invalid = || Error::ConstraintViolation("no admissible interval for the diagonal weight".into());
    if e2 == 0.0 || f2 == 0.0 || g2 == 0.0 || x.c <= 0.0 || x.d <= 0.0 {
        return Err(invalid());
    }
    let b_room = x.b - f2 / x.c;
    if b_room <= 0.0 {
        return Err(invalid());
    }
    let (lo, hi) = (g2 / x.d, x.a - e2 / b_room);
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(invalid());
    }
    let b_of = |a_cap: f64| x.b - e2 / (x.a - a_cap);
    let h = |a_cap: f64| (x.c - f2 / b_of(a_cap)) * (x.d - g2 / a_cap) - e2;

    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut l, mut r) = (lo, hi);
    for _ in 0..200 {
        let m1 = r - ratio * (r - l);
        let m2 = l + ratio * (r - l);
        if h(m1) < h(m2) {
            l = m1;
        } else {
            r = m2;
        }
        if r - l <= f64::EPSILON * r {
            break;
        }
    }
    let peak = 0.5 * (l + r);
    let a_cap = if h(peak) <= 0.0 {
        peak
    } else {
        let (mut l, mut r) = (lo, peak);
        for _ in 0..200 {
            let mid = 0.5 * (l + r);
            if mid <= l || mid >= r {
                break;
            }
            if h(mid) < 0.0 {
                l = mid;
            } else {
                r = mid;
            }
        }
        r
    };
    let b_cap = b_of(a_cap);
    let w = weights_from_parts(
        a_cap,
        b_cap,
        (x.a - a_cap, e2 / (x.a - a_cap)),
        ((x.c - f2 / b_cap).max(0.0), (x.d - g2 / a_cap).max(0.0)),
    );
    let blocks = [
        Block::new(BlockKind::Diag, w.a_cap, x.g, g2 / w.a_cap),
        Block::new(BlockKind::Antidiag, w.b_cap, x.f, f2 / w.b_cap),
        Block::new(BlockKind::Row1, w.row1_top, x.e, w.row1_bottom),
        Block::new(BlockKind::Row2, w.row2_top, -x.e, w.row2_bottom),
    ];
    Ok(Candidate {
        branch: DecompositionBranch::GenericRootSearch,
        quadratic: quadratic_data(x).ok(),
        k: None,
        weights: Some(w),
        blocks: blocks.to_vec(),
    })
}

struct Realised {
    blocks: Vec<Block>,
    tagged: Vec<(BlockKind, CMatrix)>,
    kraus: QubitChannel,
    round_trip: f64,
}

/// Operators of a candidate and their Choi round-trip error against `m`.
fn realise(candidate: &Candidate, m: &ChoiMatrix) -> Result<Realised> {
    let blocks: Vec<Block> = candidate.blocks.iter().filter(|b| b.weight() > BLOCK_DROP).cloned().collect();
    let tagged: Vec<(BlockKind, CMatrix)> = blocks.iter().map(|b| (b.kind, rank1_to_kraus(b).matrix)).collect();
    let kraus = QubitChannel::from_operators(tagged.iter().map(|(_, m)| KrausOperator::new(m.clone())).collect())?;
    let round_trip = channel::choi(&kraus).max_abs_diff(m);
    Ok(Realised { blocks, tagged, kraus, round_trip })
}

/// Decomposes a qubit Choi matrix with incoherent structure into at most four
/// incoherent Kraus operators.
///
/// The construction is chosen from which of `e, f, g` are zero within `tol`.
/// If its Choi round-trip error exceeds [`ACCEPT_TOL`] (near-degenerate
/// inputs, where the quadratic's coefficients or the closed forms' minors
/// are at the rounding level), every other applicable construction is tried
/// and the most accurate one is kept.
pub fn decompose_io(m: &ChoiMatrix, tol: f64) -> Result<DecompositionSolution> {
    let x = extract_entries(m, tol)?;
    let zero = tol * x.scale();
    let (e0, f0, g0) = (x.e.norm() <= zero, x.f.norm() <= zero, x.g.norm() <= zero);

    let mut builders: Vec<fn(&ChoiEntries) -> Result<Candidate>> = Vec::new();
    let dispatched: fn(&ChoiEntries) -> Result<Candidate> = if e0 {
        no_row_coupling
    } else if f0 && g0 {
        rows_only
    } else if g0 {
        |x| single_coupling(x, true)
    } else if f0 {
        |x| single_coupling(x, false)
    } else {
        generic
    };
    builders.push(dispatched);
    let exact_zero = |z: Complex| z.norm() == 0.0;
    if !exact_zero(x.e) {
        if !exact_zero(x.f) && !exact_zero(x.g) {
            builders.push(generic);
            builders.push(root_search);
        }
        builders.push(|x| single_coupling(x, true));
        builders.push(|x| single_coupling(x, false));
        builders.push(rows_only);
    }
    builders.push(no_row_coupling);

    let mut best: Option<(Candidate, Realised)> = None;
    let mut first_error = None;
    for (i, build) in builders.iter().enumerate() {
        let attempt = build(&x).and_then(|cand| realise(&cand, m).map(|r| (cand, r)));
        match attempt {
            Ok(found) => {
                let better = best.as_ref().map_or(true, |(_, b)| found.1.round_trip < b.round_trip);
                if better {
                    best = Some(found);
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
        let settled = best.as_ref().is_some_and(|(_, b)| b.round_trip <= ACCEPT_TOL * x.scale());
        if i == 0 && settled {
            break;
        }
    }
    let Some((cand, Realised { blocks, tagged, kraus, round_trip: choi_round_trip })) = best else {
        return Err(first_error.unwrap_or(Error::NoValidRoot));
    };
    let residuals = Residuals {
        choi_round_trip,
        block_rank_defects: blocks.iter().map(Block::rank_one_defect).collect(),
        completeness: kraus.completeness_residual(),
    };
    Ok(DecompositionSolution {
        branch: cand.branch,
        entries: x,
        quadratic: cand.quadratic,
        k: cand.k,
        weights: cand.weights,
        canonical: fit_canonical(&tagged),
        blocks,
        kraus,
        residuals,
    })
}

/// [`decompose_io`] applied to the Choi matrix of a channel.
pub fn decompose_channel(ch: &QubitChannel, tol: f64) -> Result<DecompositionSolution> {
    if ch.dim() != 2 {
        return Err(Error::UnsupportedDimension(ch.dim()));
    }
    decompose_io(&ch.choi(), tol)
}
