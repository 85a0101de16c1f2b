use std::collections::VecDeque;
use shallow_learner::error::Error;

use shallow_learner::lattice::*;
use proptest::prelude::*;

fn grid(dims: &[usize]) -> LatticeGeometry {
    LatticeGeometry::new(dims.to_vec()).unwrap()
}

/// Pairwise BFS distance, independent of the l1 shortcut.
fn bfs_distance(geom: &LatticeGeometry, a: &Region, b: &Region) -> usize {
    let mut best = usize::MAX;
    for &s in a.sites() {
        let mut dist = vec![usize::MAX; geom.n_sites()];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for u in geom.neighbors(v) {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    q.push_back(u);
                }
            }
        }
        for &t in b.sites() {
            best = best.min(dist[t]);
        }
    }
    best
}

#[test]
fn ball_examples() {
    let path7 = grid(&[7]);
    assert_eq!(ball(&path7, &Region::single(3), 1).unwrap().sites(), &[2, 3, 4]);
    let path5 = grid(&[5]);
    assert_eq!(ball(&path5, &Region::single(0), 2).unwrap().sites(), &[0, 1, 2]);

    let g = grid(&[3, 3]);
    let center = g.site(&[1, 1]).unwrap();
    let b = ball(&g, &Region::single(center), 1).unwrap();
    let expected: Vec<usize> =
        [[1, 1], [0, 1], [2, 1], [1, 0], [1, 2]].iter().map(|c| g.site(c).unwrap()).collect();
    assert_eq!(b, Region::from_sites(expected));
}

#[test]
fn ball_zero_is_identity() {
    let g = grid(&[4, 5]);
    let a = Region::new(&g, vec![3, 17, 9]).unwrap();
    assert_eq!(ball(&g, &a, 0).unwrap(), a);
}

#[test]
fn ball_rejects_bad_input() {
    let g = grid(&[4]);
    assert!(matches!(ball(&g, &Region::from_sites(vec![9]), 1), Err(Error::InvalidSite { .. })));
    assert!(matches!(ball(&g, &Region::default(), 1), Err(Error::EmptyRegion)));
}

#[test]
fn distance_examples() {
    let path = grid(&[6]);
    let a = Region::from_sites(vec![0, 1]);
    assert_eq!(region_distance(&path, &a, &Region::single(4)).unwrap(), 3);
    assert_eq!(region_distance(&path, &a, &a).unwrap(), 0);

    let g = grid(&[8, 8]);
    let boxed = |lo: usize, hi: usize| {
        let mut v = Vec::new();
        for x in lo..=hi {
            for y in lo..=hi {
                v.push(g.site(&[x, y]).unwrap());
            }
        }
        Region::from_sites(v)
    };
    let (a, b) = (boxed(0, 1), boxed(4, 5));
    assert_eq!(bfs_distance(&g, &a, &b), 6);
    assert_eq!(region_distance(&g, &a, &b).unwrap(), 6);
}

#[test]
fn row_major_bijection() {
    let g = grid(&[3, 4, 2]);
    for s in 0..g.n_sites() {
        assert_eq!(g.site(&g.coords(s)).unwrap(), s);
    }
    assert_eq!(g.coords(1), vec![0, 0, 1]);
    assert!(LatticeGeometry::new(vec![]).is_err());
    assert!(LatticeGeometry::new(vec![3, 0]).is_err());
}

fn geom_and_region() -> impl Strategy<Value = (LatticeGeometry, Region)> {
    prop::collection::vec(1usize..6, 1..=3).prop_flat_map(|dims| {
        let g = LatticeGeometry::new(dims).unwrap();
        let n = g.n_sites();
        (Just(g), prop::collection::vec(0..n, 1..4))
            .prop_map(|(g, s)| (g, Region::from_sites(s)))
    })
}

proptest! {
    #[test]
    fn ball_monotone_and_composes((g, a) in geom_and_region(), r1 in 0usize..3, r2 in 0usize..3) {
        let b1 = ball(&g, &a, r1).unwrap();
        let b1_next = ball(&g, &a, r1 + 1).unwrap();
        prop_assert!(a.is_subset(&b1));
        prop_assert!(b1.is_subset(&b1_next));
        prop_assert_eq!(ball(&g, &b1, r2).unwrap(), ball(&g, &a, r1 + r2).unwrap());
    }

    #[test]
    fn distance_matches_ball_intersection((g, a) in geom_and_region(), seed in 0usize..1000, r in 0usize..5) {
        let b = Region::single(seed % g.n_sites());
        let dist = region_distance(&g, &a, &b).unwrap();
        prop_assert_eq!(dist, bfs_distance(&g, &a, &b));
        prop_assert_eq!(dist <= r, ball(&g, &a, r).unwrap().intersects(&b));
    }
}
