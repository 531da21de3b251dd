//! End-to-end properties checked against oracles that do not go through the
//! Choi-level decomposition: composition closure, action on states, and
//! hand-computed small channels.

use iokraus::canonical::CanonicalSIO4;
use iokraus::channel::{self, BlochVector, QubitChannel};
use iokraus::classify;
use iokraus::complexmat::{c, re, CMatrix, Complex};
use iokraus::decompose::{self, DECOMPOSE_TOL};
use iokraus::sampler::{self, SamplerConfig};
use proptest::prelude::*;

/// Kraus list of `second ∘ first`.
fn compose(first: &QubitChannel, second: &QubitChannel) -> QubitChannel {
    let mut ops = Vec::new();
    for b in second.matrices() {
        for a in first.matrices() {
            ops.push(b.matmul(&a).unwrap());
        }
    }
    QubitChannel::new(ops).unwrap()
}

/// `Σ K ρ K†` written out entry by entry.
fn act(ops: &[CMatrix], rho: [[Complex; 2]; 2]) -> [[Complex; 2]; 2] {
    let mut out = [[re(0.0); 2]; 2];
    for k in ops {
        for (i, row) in out.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                for p in 0..2 {
                    for q in 0..2 {
                        *slot += k[(i, p)] * rho[p][q] * k[(j, q)].conj();
                    }
                }
            }
        }
    }
    out
}

fn rho_of(x: f64, y: f64, z: f64) -> [[Complex; 2]; 2] {
    [[re((1.0 + z) / 2.0), c(x, -y) / 2.0], [c(x, y) / 2.0, re((1.0 - z) / 2.0)]]
}

fn probe_states() -> Vec<[[Complex; 2]; 2]> {
    vec![
        rho_of(0.0, 0.0, 1.0),
        rho_of(0.0, 0.0, -1.0),
        rho_of(1.0, 0.0, 0.0),
        rho_of(0.0, 1.0, 0.0),
        rho_of(0.5, 0.0, 0.5),
        rho_of(-0.3, 0.4, 0.2),
    ]
}

fn action_gap(x: &[CMatrix], y: &[CMatrix]) -> f64 {
    probe_states()
        .into_iter()
        .map(|rho| {
            let (a, b) = (act(x, rho), act(y, rho));
            (0..4).map(|s| (a[s / 2][s % 2] - b[s / 2][s % 2]).norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn random_io(seed: u64, index: u64) -> QubitChannel {
    let cfg = SamplerConfig::default();
    sampler::sample_io(&mut sampler::rng_for(seed, index), &cfg).to_kraus().unwrap()
}

#[test]
fn dephasing_decomposes_to_two_diagonal_projectors() {
    let ch = classify::gallery("dephasing").unwrap();
    let sol = decompose::decompose_channel(&ch, DECOMPOSE_TOL).unwrap();
    assert_eq!(sol.kraus.len(), 2);
    assert!(action_gap(&sol.kraus.matrices(), &ch.matrices()) < 1e-14);
    let out = act(&sol.kraus.matrices(), rho_of(1.0, 0.0, 0.0));
    assert!(out[0][1].norm() < 1e-15);
}

#[test]
fn flattening_maps_every_state_to_the_maximally_mixed_state() {
    let ch = classify::gallery("flattening").unwrap();
    let sol = decompose::decompose_channel(&ch, DECOMPOSE_TOL).unwrap();
    assert!(sol.kraus.len() <= 4);
    for rho in probe_states() {
        let out = act(&sol.kraus.matrices(), rho);
        assert!((out[0][0] - re(0.5)).norm() < 1e-14);
        assert!(out[0][1].norm() < 1e-14);
    }
}

#[test]
fn composed_channel_report_is_consistent() {
    let ch = compose(&random_io(1, 0), &random_io(1, 1));
    assert_eq!(ch.len(), 16);
    let report = classify::report(&ch);
    assert!(report.is_io);
    let upper = report.io_rank_upper.unwrap();
    assert!(report.kraus_rank <= upper && upper <= 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Products of incoherent operators are incoherent, so the composition of
    /// two sampled channels is a 16-operator incoherent channel.
    #[test]
    fn compositions_reduce_to_four_operators(seed in any::<u64>()) {
        let ch = compose(&random_io(seed, 0), &random_io(seed, 1));
        let sol = decompose::decompose_channel(&ch, DECOMPOSE_TOL).unwrap();
        prop_assert!(sol.kraus.len() <= 4);
        prop_assert!(sol.kraus.kraus().iter().all(|k| k.is_incoherent()));
        prop_assert!(action_gap(&sol.kraus.matrices(), &ch.matrices()) <= 1e-9);
    }

    #[test]
    fn decomposition_preserves_action_on_states(seed in any::<u64>()) {
        let ch = random_io(seed, 7);
        let sol = decompose::decompose_channel(&ch, DECOMPOSE_TOL).unwrap();
        prop_assert!(action_gap(&sol.kraus.matrices(), &ch.matrices()) <= 1e-9);
    }

    /// Incoherent channels send diagonal states to diagonal states.
    #[test]
    fn incoherent_states_stay_incoherent(seed in any::<u64>(), z in -1.0f64..1.0) {
        let ch = random_io(seed, 3);
        let sol = decompose::decompose_channel(&ch, DECOMPOSE_TOL).unwrap();
        let out = act(&sol.kraus.matrices(), rho_of(0.0, 0.0, z));
        prop_assert!(out[0][1].norm() <= 1e-12);
    }

    /// Conjugating by a diagonal phase unitary or the swap keeps a channel
    /// incoherent and leaves its ranks unchanged.
    #[test]
    fn ranks_are_invariant_under_incoherent_unitaries(seed in any::<u64>(), phi in 0.0f64..6.3, swap in any::<bool>()) {
        let ch = random_io(seed, 5);
        let u = classify::permutation_phase_unitary(swap, 0.0, phi);
        let ops: Vec<CMatrix> = ch
            .matrices()
            .iter()
            .map(|k| u.matmul(k).unwrap().matmul(&u.adjoint()).unwrap())
            .collect();
        let turned = QubitChannel::new(ops).unwrap();
        let (before, after) = (classify::report(&ch), classify::report(&turned));
        prop_assert!(after.is_io);
        prop_assert_eq!(before.kraus_rank, after.kraus_rank);
        prop_assert_eq!(before.io_rank_upper, after.io_rank_upper);
    }

    /// Strictly incoherent channels: decomposition and peel both preserve the action.
    #[test]
    fn sio_paths_agree(seed in any::<u64>()) {
        let cfg = SamplerConfig::default();
        let form: CanonicalSIO4 = sampler::sample_sio4(&mut sampler::rng_for(seed, 0), &cfg);
        let ch = form.to_kraus().unwrap();
        let m = channel::choi(&ch);
        let peeled = classify::sio_decompose(&m, classify::CLASSIFY_TOL).unwrap();
        let sol = decompose::decompose_io(&m, DECOMPOSE_TOL).unwrap();
        prop_assert!(action_gap(&peeled.matrices(), &ch.matrices()) <= 1e-9);
        prop_assert!(action_gap(&sol.kraus.matrices(), &ch.matrices()) <= 1e-9);
        prop_assert!(peeled.kraus().iter().all(|k| k.is_strictly_incoherent()));
    }
}

#[test]
fn region_points_match_direct_application() {
    let cfg = SamplerConfig {
        seed: 5,
        count: 40,
        ..SamplerConfig::default()
    };
    let initial = BlochVector::new(0.5, 0.0, 0.5).unwrap();
    let region = sampler::achievable_region(&cfg, initial).unwrap();
    for (i, p) in region.points.iter().enumerate() {
        let ch = random_io(5, i as u64);
        let out = act(&ch.matrices(), rho_of(0.5, 0.0, 0.5));
        let (x, y, z) = (2.0 * out[1][0].re, 2.0 * out[1][0].im, (out[0][0] - out[1][1]).re);
        assert!((p.x - x).abs() < 1e-14 && (p.y - y).abs() < 1e-14 && (p.z - z).abs() < 1e-14);
    }
}

#[test]
fn region_is_prefix_stable() {
    let initial = BlochVector::new(0.1, 0.2, -0.3).unwrap();
    let small = SamplerConfig {
        seed: 9,
        count: 10,
        ..SamplerConfig::default()
    };
    let large = SamplerConfig { count: 100, ..small.clone() };
    let a = sampler::achievable_region(&small, initial).unwrap();
    let b = sampler::achievable_region(&large, initial).unwrap();
    assert_eq!(a.points[..], b.points[..10]);
}
