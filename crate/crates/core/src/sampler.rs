//! Seeded sampling of canonical incoherent channels and the achievable-region
//! Monte Carlo driver.
//!
//! Randomness comes from ChaCha8. Channel `i` of a run with seed `s` draws
//! from `ChaCha8Rng::seed_from_u64(s)` switched to stream `i`, so every
//! channel is reproducible on its own and results do not depend on how the
//! work is scheduled.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canonical::{CanonicalIO4, CanonicalIO5, CanonicalSIO4};
use crate::channel::{self, BlochVector};
use crate::complexmat::{self, c, CMatrix, Complex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub count: usize,
    pub r_range: (f64, f64),
    /// Half-width of the square the complex parameters are drawn from.
    pub beta_box: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            count: 100_000,
            r_range: (1.0, 2.0),
            beta_box: 2.0,
        }
    }
}

impl SamplerConfig {
    pub fn new(seed: u64, count: usize) -> Result<Self> {
        let cfg = SamplerConfig {
            seed,
            count,
            ..SamplerConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParameters("count must be at least 1".into()));
        }
        let (lo, hi) = self.r_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(Error::InvalidParameters(format!("r range [{lo}, {hi}] must satisfy 0 <= lo <= hi")));
        }
        if !(self.beta_box.is_finite() && self.beta_box > 0.0) {
            return Err(Error::InvalidParameters(format!("beta box {} must be positive", self.beta_box)));
        }
        Ok(())
    }
}

/// Generator for channel `index` of a run with the given seed.
pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.gen();
    lo + (hi - lo) * u
}

fn unit_real<R: Rng, const N: usize>(rng: &mut R) -> [f64; N] {
    loop {
        let v: [f64; N] = std::array::from_fn(|_| rng.gen::<f64>());
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.map(|x| x / norm);
        }
    }
}

fn unit_complex<R: Rng, const N: usize>(rng: &mut R, half_width: f64) -> [Complex; N] {
    loop {
        let v: [Complex; N] = std::array::from_fn(|_| {
            let re = uniform(rng, -half_width, half_width);
            let im = uniform(rng, -half_width, half_width);
            c(re, im)
        });
        let norm = complexmat::vec_norm(&v);
        if norm > 0.0 {
            return v.map(|z| z / norm);
        }
    }
}

/// One four-operator channel: `r` uniform on `cfg.r_range`, `α` a normalised
/// triple of uniform reals on [0,1], `β` a normalised triple of complex
/// numbers uniform on the square of half-width `cfg.beta_box`; finally `α1`
/// and `β1` are divided by `√(1+r²)`.
pub fn sample_io<R: Rng>(rng: &mut R, cfg: &SamplerConfig) -> CanonicalIO4 {
    let r = uniform(rng, cfg.r_range.0, cfg.r_range.1);
    let mut alpha: [f64; 3] = unit_real(rng);
    let mut beta: [Complex; 3] = unit_complex(rng, cfg.beta_box);
    let s = (1.0 + r * r).sqrt();
    alpha[0] /= s;
    beta[0] /= s;
    CanonicalIO4 { r, alpha, beta }
}

/// Five-operator analogue of [`sample_io`] with four `α` and three `β`.
///
/// Draws with any `α` or `|β|` below `floor` are rejected, so every accepted
/// sample has five independent operators.
pub fn sample_io5<R: Rng>(rng: &mut R, cfg: &SamplerConfig, floor: f64) -> CanonicalIO5 {
    loop {
        let r = uniform(rng, cfg.r_range.0, cfg.r_range.1);
        let mut alpha: [f64; 4] = unit_real(rng);
        let mut beta: [Complex; 3] = unit_complex(rng, cfg.beta_box);
        let s = (1.0 + r * r).sqrt();
        alpha[0] /= s;
        beta[0] /= s;
        if alpha.iter().all(|&a| a >= floor) && beta.iter().all(|b| b.norm() >= floor) {
            return CanonicalIO5 { r, alpha, beta };
        }
    }
}

/// A strictly incoherent channel with normalised uniform `a` and complex `b`.
pub fn sample_sio4<R: Rng>(rng: &mut R, cfg: &SamplerConfig) -> CanonicalSIO4 {
    CanonicalSIO4 {
        a: unit_real(rng),
        b: unit_complex(rng, cfg.beta_box),
    }
}

/// Haar-distributed `n × n` unitary: Gram–Schmidt on a complex Gaussian
/// matrix (Box–Muller), with each column's phase fixed by its pivot.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let mut gauss = || {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let radius = (-2.0 * u1.ln()).sqrt();
        Complex::from_polar(radius, 2.0 * std::f64::consts::PI * u2)
    };
    loop {
        let mut cols: Vec<Vec<Complex>> = (0..n).map(|_| (0..n).map(|_| gauss()).collect()).collect();
        let mut ok = true;
        for j in 0..n {
            for p in 0..j {
                let proj = complexmat::inner(&cols[p], &cols[j]);
                let prev = cols[p].clone();
                for (x, y) in cols[j].iter_mut().zip(&prev) {
                    *x -= proj * y;
                }
            }
            let norm = complexmat::vec_norm(&cols[j]);
            if norm < 1e-8 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|x| *x /= norm);
        }
        if ok {
            let mut u = CMatrix::zeros(n, n);
            for (j, col) in cols.iter().enumerate() {
                for (i, &z) in col.iter().enumerate() {
                    u[(i, j)] = z;
                }
            }
            return u;
        }
    }
}

/// Output states of randomly sampled channels applied to one input state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionResult {
    pub initial: BlochVector,
    pub points: Vec<BlochVector>,
    pub seed: u64,
}

fn region_point(cfg: &SamplerConfig, index: usize, rho: &CMatrix) -> Result<BlochVector> {
    let mut rng = rng_for(cfg.seed, index as u64);
    let ch = sample_io(&mut rng, cfg).to_kraus()?;
    channel::rho_to_bloch(&channel::apply(&ch, rho)?)
}

/// Applies `cfg.count` sampled channels to `initial`.
pub fn achievable_region(cfg: &SamplerConfig, initial: BlochVector) -> Result<RegionResult> {
    cfg.validate()?;
    let initial = BlochVector::new(initial.x, initial.y, initial.z)?;
    let rho = channel::bloch_to_rho(&initial);

    #[cfg(feature = "parallel")]
    let points: Result<Vec<BlochVector>> = {
        use rayon::prelude::*;
        (0..cfg.count).into_par_iter().map(|i| region_point(cfg, i, &rho)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Result<Vec<BlochVector>> = (0..cfg.count).map(|i| region_point(cfg, i, &rho)).collect();

    Ok(RegionResult {
        initial,
        points: points?,
        seed: cfg.seed,
    })
}

impl RegionResult {
    /// `x,y,z` header followed by one row per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.points.len() + 1));
        out.push_str("x,y,z\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.x, p.y, p.z);
        }
        out
    }

    /// Static SVG scatter of the x–z projection on `[-1,1]²`.
    pub fn to_svg(&self) -> String {
        const SIZE: f64 = 600.0;
        const MARGIN: f64 = 30.0;
        let span = SIZE - 2.0 * MARGIN;
        let px = |x: f64| MARGIN + (x + 1.0) / 2.0 * span;
        let py = |z: f64| MARGIN + (1.0 - z) / 2.0 * span;
        let mut out = String::with_capacity(48 * self.points.len() + 1024);
        let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r##"<circle cx="{c}" cy="{c}" r="{r}" fill="none" stroke="#999" stroke-width="1"/>"##,
            c = SIZE / 2.0,
            r = span / 2.0
        );
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN}" y1="{m}" x2="{e}" y2="{m}" stroke="#ccc"/><line x1="{m}" y1="{MARGIN}" x2="{m}" y2="{e}" stroke="#ccc"/>"##,
            m = SIZE / 2.0,
            e = SIZE - MARGIN
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12">x</text>"#, SIZE - MARGIN + 6.0, SIZE / 2.0 + 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12">z</text>"#, SIZE / 2.0 - 4.0, MARGIN - 8.0);
        let _ = writeln!(out, r##"<g fill="#c0392b">"##);
        for p in &self.points {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1"/>"#, px(p.x), py(p.z));
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="#1f4e9c" stroke="white" stroke-width="1"/>"##,
            px(self.initial.x),
            py(self.initial.z)
        );
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::choi;
    use crate::decompose::{decompose_channel, io_membership, DECOMPOSE_TOL};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn draws_are_normalised() {
        let cfg = SamplerConfig::default();
        for i in 0..200 {
            let form = sample_io(&mut rng_for(3, i), &cfg);
            let (na, nb) = form.normalisation();
            assert!((na - 1.0).abs() <= 1e-12 && (nb - 1.0).abs() <= 1e-12);
            assert!((1.0..=2.0).contains(&form.r));
            assert!(form.to_kraus().is_ok());
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let cfg = SamplerConfig::default();
        let a = sample_io(&mut rng_for(42, 7), &cfg);
        let b = sample_io(&mut rng_for(42, 7), &cfg);
        assert_eq!(a, b);
        assert_ne!(a, sample_io(&mut rng_for(42, 8), &cfg));
    }

    /// Pinned first draw for seed 0, stream 0 guards against silent changes of
    /// the generator or the drawing order.
    #[test]
    fn first_draw_is_pinned() {
        let mut rng = rng_for(0, 0);
        let first: f64 = rng.gen();
        let mut again = ChaCha8Rng::seed_from_u64(0);
        again.set_stream(0);
        assert_eq!(first, again.gen::<f64>());
        let form = sample_io(&mut rng_for(0, 0), &SamplerConfig::default());
        assert_eq!(form.r, 1.0 + first);
    }

    #[test]
    fn io5_samples_clear_the_floor() {
        let cfg = SamplerConfig::default();
        for i in 0..100 {
            let form = sample_io5(&mut rng_for(5, i), &cfg, 1e-3);
            form.validate().unwrap();
            assert!(form.alpha.iter().all(|&a| a >= 1e-3));
            assert_eq!(form.to_kraus().unwrap().len(), 5);
        }
    }

    #[test]
    fn unitaries_are_unitary() {
        for n in 1..=6 {
            let u = random_unitary(&mut rng_for(9, n as u64), n);
            assert!(u.unitarity_deviation() < 1e-12);
        }
    }

    #[test]
    fn region_from_maximally_mixed_stays_in_ball() {
        let cfg = SamplerConfig::new(1, 500).unwrap();
        let res = achievable_region(&cfg, BlochVector::new(0.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(res.points.len(), 500);
        assert!(res.points.iter().all(|p| p.norm() <= 1.0 + 1e-12));
    }

    #[test]
    fn region_is_reproducible() {
        let cfg = SamplerConfig::new(7, 300).unwrap();
        let init = BlochVector::new(0.5, 0.0, 0.5).unwrap();
        let a = achievable_region(&cfg, init).unwrap();
        let b = achievable_region(&cfg, init).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_csv().starts_with("x,y,z\n"));
        assert_eq!(a.to_csv().lines().count(), 301);
        let svg = a.to_svg();
        assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches(r#"r="1"/>"#).count(), 300);
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(0, 0).is_err());
        let cfg = SamplerConfig {
            r_range: (2.0, 1.0),
            ..SamplerConfig::default()
        };
        assert!(cfg.validate().is_err());
        let init = BlochVector { x: 0.0, y: 0.0, z: 1.5 };
        assert!(achievable_region(&SamplerConfig::new(0, 1).unwrap(), init).is_err());
    }

    proptest! {
        #[test]
        fn sampled_channels_are_io(seed in any::<u64>(), index in any::<u64>()) {
            let form = sample_io(&mut rng_for(seed, index), &SamplerConfig::default());
            let ch = form.to_kraus().unwrap();
            prop_assert!(io_membership(&choi(&ch), DECOMPOSE_TOL));
            let sol = decompose_channel(&ch, DECOMPOSE_TOL).unwrap();
            prop_assert!(sol.residuals.choi_round_trip <= 1e-9);
        }
    }
}
