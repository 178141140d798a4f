//! Statistics of the elementary-state engine against quantum oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use telesim::elementary::{pair_s2_sample, EsArena};
use telesim::optics::{bs_pair, PbsSetting};
use telesim::qcore::{bell_state, measure_projective, BellKind, PhotonId, Qubit, Spin};

fn four_sigma(n: f64, p: f64) -> f64 {
    4.0 * (n * p * (1.0 - p)).sqrt()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #[test]
    fn reversed_direction_reads_opposite(prep in 0.0f64..360.0, dirs in prop::collection::vec(-720.0f64..720.0, 1..10), seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut arena = EsArena::new();
        let e = arena.prepare_single(prep);
        for d in dirs {
            let v = arena.respond(e, d, &mut r);
            prop_assert_eq!(arena.respond(e, d + 180.0, &mut r), -v);
            prop_assert_eq!(arena.respond(e, d - 180.0, &mut r), -v);
            prop_assert_eq!(arena.respond(e, d + 360.0, &mut r), v);
        }
    }

    #[test]
    fn revealed_values_are_stable(dirs in prop::collection::vec(0.0f64..360.0, 1..12), seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut arena = EsArena::new();
        let (a, b) = arena.prepare_epr_pair();
        let first: Vec<Spin> = dirs.iter().map(|&d| arena.respond(a, d, &mut r)).collect();
        let partner: Vec<Spin> = dirs.iter().map(|&d| arena.respond(b, d, &mut r)).collect();
        let snapshot = r.clone();
        for ((&d, &v), &w) in dirs.iter().zip(&first).zip(&partner) {
            prop_assert_eq!(arena.respond(a, d, &mut r), v);
            prop_assert_eq!(arena.respond(b, d, &mut r), w);
            prop_assert_eq!(v, -w);
        }
        prop_assert_eq!(r, snapshot);
    }
}

#[test]
fn epr_pairs_are_perfectly_anticorrelated() {
    let mut r = rng(1);
    for _ in 0..10_000 {
        let mut arena = EsArena::new();
        let (a, b) = arena.prepare_epr_pair();
        for _ in 0..8 {
            let d = r.random::<f64>() * 360.0;
            let (x, y) = if r.random::<bool>() { (a, b) } else { (b, a) };
            let vx = arena.respond(x, d, &mut r);
            assert_eq!(arena.respond(y, d, &mut r), -vx);
        }
        assert_eq!(
            arena.get(a).perturbation_count() + arena.get(b).perturbation_count(),
            0
        );
    }
}

#[test]
fn epr_marginals_are_unbiased() {
    let mut r = rng(2);
    let n = 100_000;
    let plus = (0..n)
        .filter(|_| {
            let mut arena = EsArena::new();
            let (a, _) = arena.prepare_epr_pair();
            arena.respond(a, 37.0, &mut r).is_plus()
        })
        .count();
    assert!((plus as f64 - n as f64 / 2.0).abs() <= four_sigma(n as f64, 0.5));
}

#[test]
fn prepared_photon_follows_malus() {
    let mut r = rng(3);
    let n = 100_000;
    let plus = (0..n)
        .filter(|_| {
            let mut arena = EsArena::new();
            let e = arena.prepare_single(0.0);
            arena.respond(e, 45.0, &mut r).is_plus()
        })
        .count();
    assert!((plus as f64 - n as f64 / 2.0).abs() <= four_sigma(n as f64, 0.5));
    for _ in 0..1000 {
        let mut arena = EsArena::new();
        let e = arena.prepare_single(90.0);
        assert_eq!(arena.respond(e, 0.0, &mut r), Spin::Minus);
    }
}

/// Single-photon statistics of both engines agree for arbitrary preparation
/// and measurement angles.
#[test]
fn marginals_agree_with_quantum_measurement() {
    let mut r = rng(4);
    let n = 100_000;
    let pairs = [
        (0.0, 30.0),
        (10.0, 55.0),
        (45.0, 0.0),
        (90.0, 60.0),
        (120.0, 200.0),
        (33.0, 33.5),
        (75.0, 160.0),
        (0.0, 112.5),
    ];
    let p0 = PhotonId(0);
    for (prep, meas) in pairs {
        let es = (0..n)
            .filter(|_| {
                let mut arena = EsArena::new();
                let e = arena.prepare_single(prep);
                // A polarizer axis is defined modulo 180°, as in the PBS.
                arena
                    .respond(e, PbsSetting::new(meas).angle(), &mut r)
                    .is_plus()
            })
            .count() as f64;
        let state = Qubit::linear(prep).to_state(p0);
        let qm = (0..n)
            .filter(|_| {
                measure_projective(&state, p0, meas, &mut r)
                    .unwrap()
                    .outcome
                    .is_plus()
            })
            .count() as f64;
        let p = (prep - meas).to_radians().cos().powi(2);
        let band = 4.0 * (2.0 * n as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (es - qm).abs() <= band + 1e-9,
            "{prep} -> {meas}: es {es}, qm {qm}"
        );
        assert!((es - n as f64 * p).abs() <= four_sigma(n as f64, p) + 1e-9);
    }
}

#[test]
fn perturbation_resets_the_reference() {
    let mut r = rng(5);
    let n = 100_000;
    let mut plus = 0;
    for _ in 0..n {
        let mut arena = EsArena::new();
        let e = arena.prepare_single(0.0);
        let v = arena.perturb(e, 45.0, &mut r);
        assert_eq!(arena.respond(e, 45.0, &mut r), v);
        if arena.respond(e, 0.0, &mut r).is_plus() {
            plus += 1;
        }
    }
    assert!((plus as f64 - n as f64 / 2.0).abs() <= four_sigma(n as f64, 0.5));
}

#[test]
fn pair_quasispin_frequencies() {
    let mut r = rng(6);
    let n = 100_000;
    let zeros = (0..n)
        .filter(|_| pair_s2_sample(0.1, &mut r).unwrap().is_singlet())
        .count();
    assert!((zeros as f64 - 10_000.0).abs() <= four_sigma(n as f64, 0.1));
    assert!((0..1000).all(|_| pair_s2_sample(0.0, &mut r).unwrap().s_squared == 2));
    assert!((0..1000).all(|_| pair_s2_sample(1.0, &mut r).unwrap().s_squared == 0));
    assert!(pair_s2_sample(-0.1, &mut r).is_err());
}

/// With no deviation, Bell-state inputs exit the beam splitter exactly as in
/// the quantum engine.
#[test]
fn bell_routing_matches_quantum_engine() {
    let mut r = rng(7);
    let (p1, p2) = (PhotonId(1), PhotonId(2));
    for kind in BellKind::ALL {
        let qm_state = bell_state(kind, p1, p2);
        let mut es_split = 0;
        let mut qm_split = 0;
        for _ in 0..10_000 {
            let mut arena = EsArena::new();
            let (a, b) = arena.prepare_bell_pair(kind);
            let (o, _) = arena
                .route_pair((p1, a), (p2, b), true, 1.0, 0.0, &mut r)
                .unwrap();
            es_split += usize::from(!o.same_side);
            qm_split += usize::from(!bs_pair(&qm_state, true, 1.0, &mut r).unwrap().same_side);
        }
        assert_eq!(es_split, qm_split, "{kind:?}");
    }
}

/// Bell-pair partners reproduce the quantum correlation `P(same)` at equal
/// analyzer angles for every kind.
#[test]
fn bell_pair_correlations_match_quantum_oracle() {
    let mut r = rng(8);
    let n = 50_000;
    for kind in BellKind::ALL {
        for theta in [0.0, 22.5, 45.0, 70.0] {
            let same = (0..n)
                .filter(|_| {
                    let mut arena = EsArena::new();
                    let (a, b) = arena.prepare_bell_pair(kind);
                    arena.respond(a, theta, &mut r) == arena.respond(b, theta, &mut r)
                })
                .count();
            let c2 = (2.0 * theta).to_radians().cos().powi(2);
            let p = match kind {
                BellKind::PsiMinus => 0.0,
                BellKind::PhiPlus => 1.0,
                BellKind::PhiMinus => c2,
                BellKind::PsiPlus => 1.0 - c2,
            };
            assert!(
                (same as f64 - n as f64 * p).abs() <= four_sigma(n as f64, p) + 1e-9,
                "{kind:?} at {theta}: {same}"
            );
        }
    }
}
