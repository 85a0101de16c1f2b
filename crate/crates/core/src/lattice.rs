//! Finite k-dimensional lattices with open boundaries and nearest-neighbor
//! edges, plus regions (sorted site sets) and graph-distance balls.
//!
//! Sites are indexed in row-major order: the last coordinate varies fastest.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `dims[0] × dims[1] × …` grid with open boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GeometryRepr", into = "GeometryRepr")]
pub struct LatticeGeometry {
    dims: Vec<usize>,
    strides: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GeometryRepr {
    dims: Vec<usize>,
}

impl TryFrom<GeometryRepr> for LatticeGeometry {
    type Error = Error;
    fn try_from(r: GeometryRepr) -> Result<Self> {
        LatticeGeometry::new(r.dims)
    }
}

impl From<LatticeGeometry> for GeometryRepr {
    fn from(g: LatticeGeometry) -> Self {
        GeometryRepr { dims: g.dims }
    }
}

impl LatticeGeometry {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidGeometry("at least one dimension is required".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidGeometry(format!("dimension {pos} has zero length")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidGeometry("site count overflows".into()))?;
        let mut strides = vec![1; dims.len()];
        for i in (0..dims.len() - 1).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Ok(LatticeGeometry { dims, strides })
    }

    /// A 1D path of `n` sites.
    pub fn chain(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of spatial dimensions `k`.
    pub fn k(&self) -> usize {
        self.dims.len()
    }

    /// Total number of sites `n`.
    pub fn n_sites(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&d, &s)| (site / s) % d)
            .collect()
    }

    pub fn site(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.k() {
            return Err(Error::DimensionMismatch { expected: self.k(), got: coords.len() });
        }
        let mut idx = 0;
        for ((&c, &d), &s) in coords.iter().zip(&self.dims).zip(&self.strides) {
            if c >= d {
                return Err(Error::InvalidGeometry(format!("coordinate {c} outside 0..{d}")));
            }
            idx += c * s;
        }
        Ok(idx)
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site < self.n_sites() {
            Ok(())
        } else {
            Err(Error::InvalidSite { site, n: self.n_sites() })
        }
    }

    /// Nearest neighbors of `site`, ascending.
    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.k());
        let c = self.coords(site);
        for axis in 0..self.k() {
            if c[axis] > 0 {
                out.push(site - self.strides[axis]);
            }
            if c[axis] + 1 < self.dims[axis] {
                out.push(site + self.strides[axis]);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        a != b && self.manhattan(a, b) == 1
    }

    /// Graph distance between two sites. On an open box lattice this is the
    /// l1 distance of their coordinates.
    pub fn manhattan(&self, a: usize, b: usize) -> usize {
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&d, &s)| ((a / s) % d).abs_diff((b / s) % d))
            .sum()
    }

    /// All nearest-neighbor edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n_sites() {
            for b in self.neighbors(a) {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Edges of the lattice graph induced on `region`, sorted.
    pub fn edges_within(&self, region: &Region) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &a in region.sites() {
            for b in self.neighbors(a) {
                if a < b && region.contains(b) {
                    out.push((a, b));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// A canonical (sorted, deduplicated) set of sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(from = "RegionRepr", into = "RegionRepr")]
pub struct Region {
    sites: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RegionRepr {
    sites: Vec<usize>,
}

impl From<RegionRepr> for Region {
    fn from(r: RegionRepr) -> Self {
        Region::from_sites(r.sites)
    }
}

impl From<Region> for RegionRepr {
    fn from(r: Region) -> Self {
        RegionRepr { sites: r.sites }
    }
}

impl Region {
    /// Canonicalizes `sites` without checking them against a geometry.
    pub fn from_sites(mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Region { sites }
    }

    /// Canonicalizes `sites` and rejects indices outside `geom`.
    pub fn new(geom: &LatticeGeometry, sites: Vec<usize>) -> Result<Self> {
        for &s in &sites {
            geom.check_site(s)?;
        }
        Ok(Self::from_sites(sites))
    }

    pub fn single(site: usize) -> Self {
        Region { sites: vec![site] }
    }

    pub fn all(geom: &LatticeGeometry) -> Self {
        Region { sites: (0..geom.n_sites()).collect() }
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    /// Position of `site` within the canonical order.
    pub fn index_of(&self, site: usize) -> Option<usize> {
        self.sites.binary_search(&site).ok()
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.sites.iter().all(|&s| other.contains(s))
    }

    pub fn intersects(&self, other: &Region) -> bool {
        let (small, big) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.sites.iter().any(|&s| big.contains(s))
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut v = self.sites.clone();
        v.extend_from_slice(&other.sites);
        Region::from_sites(v)
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region { sites: self.sites.iter().copied().filter(|&s| !other.contains(s)).collect() }
    }

    fn validate(&self, geom: &LatticeGeometry) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyRegion);
        }
        for &s in &self.sites {
            geom.check_site(s)?;
        }
        Ok(())
    }
}

/// All sites within graph distance `r` of `region`, including `region`.
pub fn ball(geom: &LatticeGeometry, region: &Region, r: usize) -> Result<Region> {
    region.validate(geom)?;
    Ok(ball_unchecked(geom, region.sites(), r))
}

pub(crate) fn ball_unchecked(geom: &LatticeGeometry, seeds: &[usize], r: usize) -> Region {
    if r == 0 {
        return Region::from_sites(seeds.to_vec());
    }
    // visited set sized to the ball, not the lattice, so many small balls
    // on a large lattice stay cheap
    let mut dist: HashMap<usize, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for &s in seeds {
        if dist.insert(s, 0).is_none() {
            queue.push_back(s);
        }
    }
    let mut out = Vec::new();
    while let Some(v) = queue.pop_front() {
        out.push(v);
        let dv = dist[&v];
        if dv == r {
            continue;
        }
        for u in geom.neighbors(v) {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(u) {
                e.insert(dv + 1);
                queue.push_back(u);
            }
        }
    }
    Region::from_sites(out)
}

/// Minimum graph distance between any site of `a` and any site of `b`;
/// zero iff they intersect.
pub fn region_distance(geom: &LatticeGeometry, a: &Region, b: &Region) -> Result<usize> {
    a.validate(geom)?;
    b.validate(geom)?;
    let mut best = usize::MAX;
    for &x in a.sites() {
        for &y in b.sites() {
            best = best.min(geom.manhattan(x, y));
            if best == 0 {
                return Ok(0);
            }
        }
    }
    Ok(best)
}
