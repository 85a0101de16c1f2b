use shallow_learner::lattice::{LatticeGeometry, Region};

use shallow_learner::covering::*;
use proptest::prelude::*;

fn chain(n: usize) -> LatticeGeometry {
    LatticeGeometry::chain(n).unwrap()
}

fn sites(r: &Region) -> Vec<usize> {
    r.sites().to_vec()
}

/// Exhaustive oracle for same-color separation.
fn min_same_color_distance(geom: &LatticeGeometry, c: &LatticeColoring) -> usize {
    let mut best = usize::MAX;
    for (i, a) in c.cells.iter().enumerate() {
        for b in &c.cells[i + 1..] {
            if a.color == b.color {
                for &x in a.region.sites() {
                    for &y in b.region.sites() {
                        best = best.min(geom.manhattan(x, y));
                    }
                }
            }
        }
    }
    best
}

#[test]
fn chain_coloring_examples() {
    let g = chain(10);
    let c = build_lattice_coloring(&g, 9).unwrap();
    assert_eq!(c.n_colors, 2);
    let cells: Vec<_> = c.cells.iter().map(|x| (sites(&x.region), x.color)).collect();
    assert_eq!(cells, vec![((0..5).collect(), 0), ((5..10).collect(), 1)]);

    let g = chain(24);
    let c = build_lattice_coloring(&g, 3).unwrap();
    let rep = validate_coloring(&g, &c);
    assert!(rep.is_valid(), "{rep:?}");
    assert_eq!(c.n_colors, 2);
    assert!(min_same_color_distance(&g, &c) >= 3);
    // alternating separator and interior blocks
    let mut colors: Vec<usize> = vec![0; 24];
    for cell in &c.cells {
        cell.region.sites().iter().for_each(|&s| colors[s] = cell.color);
    }
    let changes = colors.windows(2).filter(|w| w[0] != w[1]).count();
    assert!(changes >= 6);
}

#[test]
fn tiny_lattice_is_one_cell() {
    let g = chain(4);
    let c = build_lattice_coloring(&g, 9).unwrap();
    assert_eq!(c.cells.len(), 1);
    assert_eq!(c.n_colors, 1);
    let g = LatticeGeometry::new(vec![3, 3]).unwrap();
    let c = build_lattice_coloring(&g, 13).unwrap();
    assert!(validate_coloring(&g, &c).is_valid());
    let (scheme, rep) = coloring_to_covering(&g, &c, 1).unwrap();
    assert!(rep.is_valid());
    assert_eq!(scheme.subsets().count(), 1);
}

#[test]
fn grid_coloring_has_corner_edge_bulk() {
    let g = LatticeGeometry::new(vec![26, 26]).unwrap();
    let c = build_lattice_coloring(&g, 6).unwrap();
    assert_eq!(c.n_colors, 3);
    let rep = validate_coloring(&g, &c);
    assert!(rep.is_valid(), "{rep:?}");
    assert!(rep.max_box_side <= 2 * 2 * 6);
    assert!(min_same_color_distance(&g, &c) >= 6);
    // the origin corner block is color 0
    let origin = c.cells.iter().find(|x| x.region.contains(0)).unwrap();
    assert_eq!(origin.color, 0);
    let centre = g.site(&[12, 12]).unwrap();
    let bulk = c.cells.iter().find(|x| x.region.contains(centre)).unwrap();
    assert_eq!(bulk.color, 2);
}

#[test]
fn chain_covering_examples() {
    let g = chain(10);
    let (s, rep) = lattice_covering(&g, 9, 1).unwrap();
    assert!(rep.is_valid(), "{rep:?}");
    assert_eq!(s.n_layers(), 2);
    assert_eq!(sites(&s.layers[0][0]), (0..8).collect::<Vec<_>>());
    assert_eq!(sites(&s.layers[1][0]), (2..10).collect::<Vec<_>>());

    let g = chain(24);
    let (s, rep) = lattice_covering(&g, 9, 1).unwrap();
    assert!(rep.is_valid());
    let l: Vec<Vec<Vec<usize>>> = s.layers.iter().map(|l| l.iter().map(sites).collect()).collect();
    assert_eq!(
        l,
        vec![
            vec![(0..8).collect::<Vec<_>>(), (11..24).collect()],
            vec![(2..17).collect(), (20..24).collect()]
        ]
    );
}

#[test]
fn zero_depth_collapses_to_cells() {
    let g = chain(12);
    let c = build_lattice_coloring(&g, 3).unwrap();
    let (s, rep) = coloring_to_covering(&g, &c, 0).unwrap();
    assert!(rep.is_valid());
    let mut all: Vec<Region> = s.layers.iter().flatten().cloned().collect();
    all.sort_by_key(|r| r.sites()[0]);
    let mut cells: Vec<Region> = c.cells.iter().map(|x| x.region.clone()).collect();
    cells.sort_by_key(|r| r.sites()[0]);
    assert_eq!(all, cells);
}

#[test]
fn witnesses() {
    let g = chain(10);
    let touching = CoveringScheme {
        d: 1,
        layers: vec![vec![Region::from_sites(vec![0, 1, 2]), Region::from_sites(vec![4, 5])]],
        separation: None,
    };
    let rep = validate_covering(&g, &touching).unwrap();
    assert_eq!(rep.disjoint_layers.witness, Some(Witness::Overlap { layer: 0, a: 0, b: 1, site: 3 }));

    let (mut s, _) = lattice_covering(&g, 9, 1).unwrap();
    // shrink the subset holding the far corner
    s.layers[1][0] = Region::from_sites((2..9).collect());
    let rep = validate_covering(&g, &s).unwrap();
    assert_eq!(rep.covered.witness, Some(Witness::Uncovered { site: 6 }));

    let rep = validate_covering_with_c(&g, &lattice_covering(&g, 9, 1).unwrap().0, Some(3)).unwrap();
    assert!(matches!(rep.small_balls.witness, Some(Witness::Oversized { .. })));
}

#[test]
fn two_dimensional_instance() {
    let g = LatticeGeometry::new(vec![26, 26]).unwrap();
    let (s, rep) = lattice_covering(&g, 13, 1).unwrap();
    assert!(rep.is_valid(), "{rep:?}");
    assert!(rep.realized_c <= 3844);
    assert_eq!(rep.lattice_bound, 3844.0);
    assert!(s.n_layers() <= 3);
}

#[test]
fn scheme_json_roundtrip() {
    let g = chain(10);
    let (s, rep) = lattice_covering(&g, 9, 1).unwrap();
    let text = shallow_learner::json::to_canonical_string(&s).unwrap();
    assert!(text.starts_with(r#"{"d":1,"layers":[[{"sites":[0,1,2"#));
    let back: CoveringScheme = shallow_learner::json::from_str_with_path(&text).unwrap();
    assert_eq!(back, s);
    let _ = shallow_learner::json::to_canonical_string(&rep).unwrap();
}

#[test]
fn ancilla_bounds_formula() {
    let (f, c) = ancilla_bounds(24, 1, 9, 1);
    assert!((f - 24.0 / 9.0 * 6.0).abs() < 1e-12);
    assert!((c - 24.0).abs() < 1e-12);
    let (f, c) = ancilla_bounds(676, 2, 13, 1);
    assert!(f <= c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn construction_valid_in_regime(k in 1usize..=2, d in 0usize..=2, extra in 0usize..3, seed in any::<u64>()) {
        let r = default_separation(k, d) + extra;
        let side = 4 * k * r;
        let dims: Vec<usize> = (0..k).map(|i| side + ((seed >> (8 * i)) % 5) as usize).collect();
        let g = LatticeGeometry::new(dims).unwrap();
        let coloring = build_lattice_coloring(&g, r).unwrap();
        let crep = validate_coloring(&g, &coloring);
        prop_assert!(crep.is_valid());
        prop_assert!(crep.max_box_side <= 2 * k * r);
        prop_assert!(coloring.n_colors <= k + 1);
        let (_, rep) = coloring_to_covering(&g, &coloring, d).unwrap();
        prop_assert!(rep.is_valid(), "{:?}", rep);
        if d > 0 && extra == 0 {
            prop_assert!(rep.within_lattice_bound);
        }
    }

    #[test]
    fn chain_colorings_valid_for_any_separation(n in 1usize..60, r in 1usize..12) {
        let g = chain(n);
        let c = build_lattice_coloring(&g, r).unwrap();
        prop_assert!(validate_coloring(&g, &c).is_valid());
        if c.cells.len() > 1 {
            let oracle = min_same_color_distance(&g, &c);
            prop_assert!(oracle == usize::MAX || oracle >= r);
        }
    }
}

#[test]
fn three_dimensional_instance() {
    let k = 3;
    let d = 1;
    let r = default_separation(k, d);
    let side = 4 * k * r;
    // a slab is enough to exercise every level
    let g = LatticeGeometry::new(vec![side, 8, 8]).unwrap();
    let coloring = build_lattice_coloring(&g, r).unwrap();
    assert!(validate_coloring(&g, &coloring).is_valid());
}
