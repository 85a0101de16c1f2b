use shallow_learner::circuit::{Circuit, Gate};
use shallow_learner::error::Error;
use shallow_learner::lattice::{ball, LatticeGeometry, Region};
use shallow_learner::linalg::{self, ZERO};
use shallow_learner::simulator::DensityMatrix;

use shallow_learner::inversion::*;
use shallow_learner::circuit::{random_shallow_circuit, GateSource};
use shallow_learner::simulator::{prepare, SimLimits, StateVector};

fn chain(n: usize) -> LatticeGeometry {
    LatticeGeometry::chain(n).unwrap()
}

fn problem_for(geom: &LatticeGeometry, psi: &StateVector, a: Region, d: usize, thr: f64) -> InversionProblem {
    let b = ball(geom, &a, d).unwrap();
    let rdm = psi.partial_trace(b.sites()).unwrap();
    InversionProblem::new(geom, a, d, rdm, thr).unwrap()
}

#[test]
fn architecture_counts() {
    let count = |n: usize| enumerate_architectures(&chain(n), &Region::all(&chain(n)), 1).unwrap();
    assert_eq!(count(2).len(), 2);
    let p3 = count(3);
    assert_eq!(p3, vec![vec![vec![]], vec![vec![(0, 1)]], vec![vec![(1, 2)]]]);
    assert_eq!(count(4).len(), 5);
    assert_eq!(enumerate_architectures(&chain(3), &Region::all(&chain(3)), 2).unwrap().len(), 9);
    let big = chain(20);
    assert!(matches!(
        enumerate_architectures(&big, &Region::all(&big), 1),
        Err(Error::ArchitectureCapExceeded { .. })
    ));
}

/// Brute-force oracle: matchings of a path from the recurrence
/// `m(n) = m(n−1) + m(n−2)`.
#[test]
fn matching_counts_follow_recurrence() {
    let mut m = vec![1usize, 1];
    for n in 2..=10 {
        m.push(m[n - 1] + m[n - 2]);
    }
    for n in 1..=10 {
        let g = chain(n);
        assert_eq!(enumerate_architectures(&g, &Region::all(&g), 1).unwrap().len(), m[n]);
    }
}

#[test]
fn fidelity_trivial_cases() {
    let g = chain(3);
    let a = Region::single(1);
    let p = problem_for(&g, &StateVector::zero(3), a.clone(), 1, 0.9);
    assert!((inversion_fidelity(&Circuit::on_sites(&[0, 1, 2]), &p).unwrap() - 1.0).abs() < 1e-12);

    let g1 = chain(1);
    let mixed = DensityMatrix::maximally_mixed(1);
    let p = InversionProblem::new(&g1, Region::single(0), 0, mixed, 0.9).unwrap();
    let mut rng = shallow_learner::rng::rng_from_seed(1);
    for _ in 0..5 {
        let u = linalg::haar_unitary(2, &mut rng);
        let mut c = Circuit::on_sites(&[0]);
        c.push_layer(vec![Gate::Unitary1 { wire: 0, matrix: [u[0], u[1], u[2], u[3]] }]).unwrap();
        assert!((inversion_fidelity(&c, &p).unwrap() - 0.5).abs() < 1e-12);
    }
    let outside = Circuit::on_sites(&[5]);
    let mut bad = outside.clone();
    bad.push_layer(vec![Gate::Unitary1 { wire: 0, matrix: [linalg::ONE, ZERO, ZERO, linalg::ONE] }]).unwrap();
    assert!(matches!(inversion_fidelity(&bad, &p), Err(Error::SupportViolation(5))));
}

#[test]
fn lightcone_inversion_is_exact() {
    let lim = SimLimits::default();
    for (dims, depth) in [(vec![8], 1), (vec![8], 2), (vec![3, 3], 1)] {
        let g = LatticeGeometry::new(dims).unwrap();
        for seed in 0..4 {
            let u = random_shallow_circuit(&g, depth, GateSource::Haar, seed);
            let psi = prepare(&u, &lim).unwrap();
            for a in [Region::single(3), Region::from_sites(vec![4, 5])] {
                let v = lightcone_inversion(&g, &u, &a).unwrap();
                let p = problem_for(&g, &psi, a.clone(), depth, 0.5);
                let f = inversion_fidelity(&v, &p).unwrap();
                assert!((f - 1.0).abs() < 1e-9, "local {f}");
                // global oracle: apply V on the full state
                let mut full = psi.clone();
                for gate in v.embed(g.n_sites()).unwrap().layers().iter().flatten() {
                    full.apply_gate(gate).unwrap();
                }
                let rho = full.partial_trace(a.sites()).unwrap();
                assert!((rho.matrix()[0].re - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn marginal_fidelity_matches_global_definition() {
    let g = chain(8);
    let mut rng = shallow_learner::rng::rng_from_seed(8);
    for seed in 0..5 {
        let psi = StateVector::random(8, &mut rng);
        let a = Region::from_sites(vec![3, 4]);
        let p = problem_for(&g, &psi, a.clone(), 1, 0.5);
        let v = shallow_learner::reconstruction::random_inversions(
            &g,
            &shallow_learner::covering::CoveringScheme { d: 1, layers: vec![vec![a.clone()]], separation: None },
            seed,
        )
        .unwrap()
        .remove(&(0, 0))
        .unwrap();
        let local = inversion_fidelity(&v, &p).unwrap();
        let mut full = psi.clone();
        for gate in v.embed(8).unwrap().layers().iter().flatten() {
            full.apply_gate(gate).unwrap();
        }
        let global = full.partial_trace(a.sites()).unwrap().matrix()[0].re;
        assert!((local - global).abs() < 1e-9);
    }
}

#[test]
fn zero_state_identity_found() {
    let g = chain(6);
    let p = problem_for(&g, &StateVector::zero(6), Region::from_sites(vec![2, 3]), 1, 0.99);
    let out = find_local_inversion(&g, &p, &SearchConfig::new(Strategy::CliffordEnum)).unwrap();
    match out {
        SearchOutcome::Success(r) => {
            assert_eq!(r.circuit.gate_count(), 0);
            assert!((r.achieved_fidelity - 1.0).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn ghz6_interior_pair_inverts() {
    let g = chain(6);
    let p = problem_for(&g, &StateVector::ghz(6), Region::from_sites(vec![2, 3]), 1, 1.0 - 1e-9);
    // the explicit boundary-offloading construction: CNOT(1→2), CNOT(4→3)
    let mut cnot = [ZERO; 16];
    for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cnot[r * 4 + c] = linalg::ONE;
    }
    let mut v = Circuit::on_sites(p.ball.sites());
    let w = |s: usize| p.ball.index_of(s).unwrap();
    v.push_layer(vec![
        Gate::Unitary2 { wires: [w(1), w(2)], matrix: cnot },
        Gate::Unitary2 { wires: [w(4), w(3)], matrix: cnot },
    ])
    .unwrap();
    assert!((inversion_fidelity(&v, &p).unwrap() - 1.0).abs() < 1e-12);
    let out = find_local_inversion(&g, &p, &SearchConfig::new(Strategy::CliffordEnum)).unwrap();
    assert!(out.is_success());
    assert!((out.best_fidelity() - 1.0).abs() < 1e-9);
}

#[test]
fn ghz8_wide_interior_fails_exhaustively() {
    let g = chain(8);
    let p = problem_for(&g, &StateVector::ghz(8), Region::from_sites(vec![2, 3, 4, 5]), 1, 1.0 - 1e-6);
    match find_local_inversion(&g, &p, &SearchConfig::new(Strategy::CliffordEnum)).unwrap() {
        SearchOutcome::Failure(f) => {
            assert!(f.exhaustive);
            assert!(!f.budget_exhausted);
            assert!(f.best_fidelity < 0.9);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn clifford_states_always_invert() {
    let lim = SimLimits::default();
    let g = chain(8);
    for seed in 0..10 {
        let u = random_shallow_circuit(&g, 1, GateSource::Clifford, seed);
        let psi = prepare(&u, &lim).unwrap();
        for a in [Region::from_sites(vec![0, 1, 2]), Region::from_sites(vec![3, 4, 5, 6])] {
            let p = problem_for(&g, &psi, a, 1, 1.0 - 1e-6);
            let out = find_local_inversion(&g, &p, &SearchConfig::new(Strategy::CliffordEnum)).unwrap();
            assert!(out.is_success(), "seed {seed}");
            assert!(out.best_fidelity() > 1.0 - 1e-9);
        }
    }
}

#[test]
fn depth_two_clifford_prefix_search() {
    let lim = SimLimits::default();
    let g = chain(5);
    let u = random_shallow_circuit(&g, 1, GateSource::Clifford, 3);
    let psi = prepare(&u, &lim).unwrap();
    let p = problem_for(&g, &psi, Region::single(2), 2, 1.0 - 1e-6);
    let cfg = SearchConfig { node_budget: 2_000_000, ..SearchConfig::new(Strategy::CliffordEnum) };
    let out = find_local_inversion(&g, &p, &cfg).unwrap();
    assert!(out.is_success());
    if let SearchOutcome::Success(r) = out {
        assert!(r.circuit.depth() <= 2);
    }
}

#[test]
fn continuous_mode_finds_haar_inversions() {
    let lim = SimLimits::default();
    let g = chain(8);
    let mut ok = 0;
    for seed in 0..4 {
        let u = random_shallow_circuit(&g, 1, GateSource::Haar, seed);
        let psi = prepare(&u, &lim).unwrap();
        let p = problem_for(&g, &psi, Region::from_sites(vec![2, 3, 4]), 1, 1.0 - 1e-8);
        let cfg = SearchConfig { restarts: 5, seed, ..SearchConfig::new(Strategy::ContinuousOpt) };
        if find_local_inversion(&g, &p, &cfg).unwrap().is_success() {
            ok += 1;
        }
    }
    assert!(ok >= 3);
}

#[test]
fn continuous_best_is_monotone_in_restarts() {
    let lim = SimLimits::default();
    let g = chain(6);
    let u = random_shallow_circuit(&g, 2, GateSource::Haar, 5);
    let psi = prepare(&u, &lim).unwrap();
    // depth 1 cannot invert a depth-2 state here, so every restart runs
    let p = problem_for(&g, &psi, Region::from_sites(vec![2, 3]), 1, 1.0 - 1e-12);
    let mut prev = 0.0;
    for r in 1..=4 {
        let cfg = SearchConfig { restarts: r, max_iters: 30, seed: 9, ..SearchConfig::new(Strategy::ContinuousOpt) };
        let f = find_local_inversion(&g, &p, &cfg).unwrap().best_fidelity();
        assert!(f >= prev - 1e-12);
        prev = f;
    }
}

#[test]
fn depth_zero_closed_form() {
    let lim = SimLimits::default();
    let g = chain(4);
    let mut c = Circuit::empty(4);
    let mut rng = shallow_learner::rng::rng_from_seed(4);
    c.push_layer(
        (0..4)
            .map(|w| {
                let u = linalg::haar_unitary(2, &mut rng);
                Gate::Unitary1 { wire: w, matrix: [u[0], u[1], u[2], u[3]] }
            })
            .collect(),
    )
    .unwrap();
    let psi = prepare(&c, &lim).unwrap();
    let p = problem_for(&g, &psi, Region::from_sites(vec![1, 2]), 0, 1.0 - 1e-9);
    let out = find_local_inversion(&g, &p, &SearchConfig::new(Strategy::CliffordEnum)).unwrap();
    assert!(out.is_success());
}

#[test]
fn config_json_defaults() {
    let c: SearchConfig = shallow_learner::json::from_str_with_path(r#"{"strategy":"continuous_opt","seed":3}"#).unwrap();
    assert_eq!(c.restarts, 20);
    assert_eq!(c.seed, 3);
    let err = shallow_learner::json::from_str_with_path::<SearchConfig>(r#"{"strategy":"annealing"}"#).unwrap_err();
    assert!(matches!(err, Error::Schema { .. }));
}
