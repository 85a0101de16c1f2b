use shallow_learner::error::Error;
use shallow_learner::simulator::{SimLimits, StateVector};

use shallow_learner::shadows::*;
use shallow_learner::circuit::{random_shallow_circuit, GateSource};
use shallow_learner::lattice::LatticeGeometry;
use shallow_learner::simulator::{prepare, trace_distance};

#[test]
fn zero_state_single_wire() {
    let psi = StateVector::zero(3);
    let lim = SimLimits::default();
    let mut misses = 0;
    for seed in 0..20 {
        let data = sample_shadows(&psi, 10_000, seed).unwrap();
        let est = estimate_rdm(&data, &[1], &lim).unwrap();
        let exact = psi.partial_trace(&[1]).unwrap();
        if trace_distance(&est, &exact).unwrap() > 0.05 {
            misses += 1;
        }
    }
    assert_eq!(misses, 0);
}

#[test]
fn z_outcomes_of_basis_state_are_deterministic() {
    let psi = StateVector::zero(4);
    let data = sample_shadows(&psi, 200, 1).unwrap();
    for i in 0..data.len() {
        let (b, o) = data.snapshot(i);
        for w in 0..4 {
            if b[w] == Pauli::Z {
                assert!(!o[w]);
            }
        }
    }
}

#[test]
fn replay_is_bit_identical_and_roundtrips() {
    let geom = LatticeGeometry::chain(5).unwrap();
    let psi = prepare(&random_shallow_circuit(&geom, 1, GateSource::Haar, 2), &SimLimits::default()).unwrap();
    let a = sample_shadows(&psi, 500, 77).unwrap();
    let b = sample_shadows(&psi, 500, 77).unwrap();
    assert_eq!(a, b);
    let lim = SimLimits::default();
    let ea = estimate_rdm(&a, &[1, 2], &lim).unwrap();
    let eb = estimate_rdm(&b, &[1, 2], &lim).unwrap();
    assert_eq!(ea.matrix(), eb.matrix());

    let mut buf = Vec::new();
    a.write_binary(&mut buf).unwrap();
    assert_eq!(ShadowDataset::read_binary(&buf[..]).unwrap(), a);
    let text = shallow_learner::json::to_canonical_string(&a).unwrap();
    let back: ShadowDataset = shallow_learner::json::from_str_with_path(&text).unwrap();
    assert_eq!(back, a);

    buf[0] = b'X';
    assert!(ShadowDataset::read_binary(&buf[..]).is_err());
}

#[test]
fn region_cap() {
    let data = sample_shadows(&StateVector::zero(4), 10, 0).unwrap();
    let lim = SimLimits { max_rdm_wires: 2, ..SimLimits::default() };
    assert!(matches!(estimate_rdm(&data, &[0, 1, 2], &lim), Err(Error::RegionTooLarge { .. })));
    assert!(sample_shadows(&StateVector::zero(2), 0, 0).is_err());
}
