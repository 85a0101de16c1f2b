use shallow_learner::circuit::{Circuit, Gate};
use shallow_learner::covering::CoveringScheme;
use shallow_learner::error::Error;
use shallow_learner::lattice::{ball, LatticeGeometry, Region};

use shallow_learner::reconstruction::*;
use shallow_learner::covering::lattice_covering;

#[test]
fn identity_inversion_is_bare_reset() {
    let g = LatticeGeometry::chain(3).unwrap();
    let p = build_replacement(&g, &Region::single(0), &Circuit::on_sites(&[0, 1]), 1).unwrap();
    assert_eq!(p.as_channel.depth(), 1);
    assert_eq!(p.as_channel.layers()[0], vec![Gate::Reset { wire: 0 }]);
    assert_eq!(p.as_channel.n_wires(), 2);
}

#[test]
fn replacement_layout_and_support_check() {
    let g = LatticeGeometry::chain(6).unwrap();
    let a = Region::from_sites(vec![2, 3]);
    let v = brickwork(&g, &ball(&g, &a, 1).unwrap(), 1);
    let p = build_replacement(&g, &a, &v, 1).unwrap();
    assert_eq!(p.as_channel.n_wires(), 4);
    assert_eq!(p.as_channel.depth(), 2 * v.depth() + 1);
    let resets: Vec<usize> = p.as_channel.layers()[1].iter().flat_map(Gate::wires).collect();
    assert_eq!(resets, vec![1, 2]);
    let outside = brickwork(&g, &Region::from_sites(vec![0, 1, 2]), 1);
    assert!(matches!(build_replacement(&g, &a, &outside, 1), Err(Error::SupportViolation(0))));
}

#[test]
fn missing_and_overlapping() {
    let g = LatticeGeometry::chain(10).unwrap();
    let (s, _) = lattice_covering(&g, 9, 1).unwrap();
    let mut inv = placeholder_inversions(&g, &s).unwrap();
    inv.remove(&(1, 0));
    assert!(matches!(build_reconstruction(&g, &s, &inv), Err(Error::MissingInversion(m)) if m == vec![(1, 0)]));

    let bad = CoveringScheme {
        d: 1,
        layers: vec![vec![Region::from_sites(vec![0, 1, 2]), Region::from_sites(vec![3, 4])]],
        separation: None,
    };
    let inv = placeholder_inversions(&g, &bad).unwrap();
    assert!(matches!(
        build_reconstruction(&g, &bad, &inv),
        Err(Error::OverlappingSupports { a: (0, 0), b: (0, 1) })
    ));
}

#[test]
fn chain_layout_and_extraction() {
    let g = LatticeGeometry::chain(24).unwrap();
    let (s, _) = lattice_covering(&g, 9, 1).unwrap();
    let inv = placeholder_inversions(&g, &s).unwrap();
    let w = build_reconstruction(&g, &s, &inv).unwrap();
    assert_eq!(w.full_circuit.depth(), 2 * 3);
    assert_eq!(w.process_count(), 4);
    let c = extract_learned_circuit(&w).unwrap();
    assert!(c.depth_gates <= 3);
    assert_eq!(c.system_wires, (0..24).collect::<Vec<_>>());
}

#[test]
fn whole_lattice_subset_needs_no_ancillas() {
    let g = LatticeGeometry::chain(5).unwrap();
    let s = CoveringScheme { d: 1, layers: vec![vec![Region::all(&g)]], separation: None };
    let w = build_reconstruction(&g, &s, &placeholder_inversions(&g, &s).unwrap()).unwrap();
    let c = extract_learned_circuit(&w).unwrap();
    assert_eq!(c.ancilla_count(), 0);
    assert_eq!(c.depth_gates, 1);
}

#[test]
fn broken_scheme_fails_to_shield() {
    let g = LatticeGeometry::chain(6).unwrap();
    let s = CoveringScheme { d: 1, layers: vec![vec![Region::from_sites(vec![0, 1, 2])]], separation: None };
    let w = build_reconstruction(&g, &s, &placeholder_inversions(&g, &s).unwrap()).unwrap();
    assert!(matches!(extract_learned_circuit(&w), Err(Error::ShieldingFailed(_))));
}

#[test]
fn bundle_json_roundtrip() {
    let g = LatticeGeometry::chain(10).unwrap();
    let (s, _) = lattice_covering(&g, 9, 1).unwrap();
    let w = build_reconstruction(&g, &s, &random_inversions(&g, &s, 4).unwrap()).unwrap();
    let c = extract_learned_circuit(&w).unwrap();
    let text = shallow_learner::json::to_canonical_string(&c).unwrap();
    assert!(text.contains("\"ancilla_count\""));
    let back: LearnedCircuit = shallow_learner::json::from_str_with_path(&text).unwrap();
    assert_eq!(back, c);
}
