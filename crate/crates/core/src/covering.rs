//! Lattice colorings and the layered covering schemes built from them.
//!
//! The coloring puts grid lines at every multiple of `2kR` in each
//! direction. A site's level is how many of its coordinates sit close to a
//! line, with the closeness threshold growing with the level; corners
//! (level `k`) get color 0, faces the middle colors and the bulk the last.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{check_schema, SCHEMA_VERSION};
use crate::lattice::{ball, ball_unchecked, LatticeGeometry, Region};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoredCell {
    pub region: Region,
    pub color: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeColoring {
    pub separation: usize,
    pub n_colors: usize,
    pub cells: Vec<ColoredCell>,
}

/// Closeness threshold for level `j`.
fn threshold(j: usize, r: usize) -> usize {
    j * (r - 1) / 2
}

/// Distance to the nearest multiple of `period`, and that multiple.
fn nearest_line(x: usize, period: usize) -> (usize, usize) {
    let below = x / period * period;
    let above = below + period;
    if x - below <= above - x {
        (x - below, below)
    } else {
        (above - x, above)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    level: usize,
    /// Per coordinate: `Ok(line)` when near a line, `Err(interval)` otherwise.
    place: Vec<std::result::Result<usize, usize>>,
}

fn cell_key(coords: &[usize], r: usize, period: usize) -> CellKey {
    let k = coords.len();
    let near: Vec<(usize, usize)> = coords.iter().map(|&x| nearest_line(x, period)).collect();
    let mut gaps: Vec<usize> = near.iter().map(|p| p.0).collect();
    gaps.sort_unstable();
    let level = (1..=k).filter(|&j| gaps[j - 1] <= threshold(j, r)).max().unwrap_or(0);
    let place = coords
        .iter()
        .zip(&near)
        .map(|(&x, &(gap, line))| {
            if level > 0 && gap <= threshold(level, r) {
                Ok(line)
            } else {
                Err(x / period)
            }
        })
        .collect();
    CellKey { level, place }
}

/// Colors the lattice so that equal-colored cells are at distance at least
/// `separation`, using at most `k + 1` colors. Empty colors are dropped.
pub fn build_lattice_coloring(geom: &LatticeGeometry, separation: usize) -> Result<LatticeColoring> {
    if separation == 0 {
        return Err(Error::InvalidConfig("coloring separation must be at least 1".into()));
    }
    let k = geom.k();
    if geom.dims().iter().all(|&n| n < separation) {
        let cell = ColoredCell { region: Region::all(geom), color: 0 };
        return Ok(LatticeColoring { separation, n_colors: 1, cells: vec![cell] });
    }
    let period = 2 * k * separation;
    let mut groups: BTreeMap<CellKey, Vec<usize>> = BTreeMap::new();
    for s in 0..geom.n_sites() {
        groups.entry(cell_key(&geom.coords(s), separation, period)).or_default().push(s);
    }
    let mut used: Vec<usize> = groups.keys().map(|key| k - key.level).collect();
    used.sort_unstable();
    used.dedup();
    let mut cells: Vec<ColoredCell> = groups
        .into_iter()
        .map(|(key, sites)| ColoredCell {
            region: Region::from_sites(sites),
            color: used.iter().position(|&c| c == k - key.level).expect("color in use"),
        })
        .collect();
    cells.sort_by(|a, b| (a.color, a.region.sites()[0]).cmp(&(b.color, b.region.sites()[0])));
    Ok(LatticeColoring { separation, n_colors: used.len(), cells })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoringReport {
    pub partition: bool,
    pub connected: bool,
    /// Smallest distance between two distinct cells of one color, if any.
    pub min_same_color_distance: Option<usize>,
    pub separated: bool,
    pub max_cell_size: usize,
    pub max_box_side: usize,
}

impl ColoringReport {
    pub fn is_valid(&self) -> bool {
        self.partition && self.connected && self.separated
    }
}

fn is_connected(geom: &LatticeGeometry, region: &Region) -> bool {
    let sites = region.sites();
    let mut seen = vec![false; sites.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for nb in geom.neighbors(sites[i]) {
            if let Some(j) = region.index_of(nb) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    seen.into_iter().all(|x| x)
}

fn box_side(geom: &LatticeGeometry, region: &Region) -> usize {
    (0..geom.k())
        .map(|axis| {
            let xs = region.sites().iter().map(|&s| geom.coords(s)[axis]);
            let (lo, hi) = xs.fold((usize::MAX, 0), |(lo, hi), x| (lo.min(x), hi.max(x)));
            hi - lo + 1
        })
        .max()
        .unwrap_or(0)
}

pub fn validate_coloring(geom: &LatticeGeometry, coloring: &LatticeColoring) -> ColoringReport {
    let n = geom.n_sites();
    let mut owner = vec![usize::MAX; n];
    let mut partition = true;
    for (i, cell) in coloring.cells.iter().enumerate() {
        for &s in cell.region.sites() {
            if s >= n || owner[s] != usize::MAX {
                partition = false;
            } else {
                owner[s] = i;
            }
        }
    }
    partition &= owner.iter().all(|&o| o != usize::MAX) && coloring.cells.iter().all(|c| !c.region.is_empty());
    let connected = coloring.cells.iter().all(|c| c.region.is_empty() || is_connected(geom, &c.region));
    // breadth-first growth from each cell up to radius R − 1 must not meet
    // another cell of the same color; the first meeting gives the distance
    let sep = coloring.separation;
    let min_same = coloring
        .cells
        .par_iter()
        .enumerate()
        .filter_map(|(i, cell)| {
            let mut best = None;
            let mut frontier = cell.region.sites().to_vec();
            let mut dist = vec![usize::MAX; n];
            frontier.iter().for_each(|&s| dist[s] = 0);
            let mut r = 0;
            while !frontier.is_empty() && r < sep.max(1) {
                r += 1;
                let mut next = Vec::new();
                for &s in &frontier {
                    for nb in geom.neighbors(s) {
                        if dist[nb] == usize::MAX {
                            dist[nb] = r;
                            next.push(nb);
                            let o = owner[nb];
                            if o != usize::MAX && o != i && coloring.cells[o].color == cell.color {
                                best = Some(best.map_or(r, |b: usize| b.min(r)));
                            }
                        }
                    }
                }
                if best.is_some() {
                    break;
                }
                frontier = next;
            }
            best
        })
        .min();
    ColoringReport {
        partition,
        connected,
        min_same_color_distance: min_same,
        separated: min_same.is_none_or(|d| d >= sep),
        max_cell_size: coloring.cells.iter().map(|c| c.region.len()).max().unwrap_or(0),
        max_box_side: coloring.cells.iter().map(|c| box_side(geom, &c.region)).max().unwrap_or(0),
    }
}

/// Layers of site subsets. Layer `i` is processed `i`-th by the
/// reconstruction process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemeRepr", into = "SchemeRepr")]
pub struct CoveringScheme {
    pub d: usize,
    pub layers: Vec<Vec<Region>>,
    /// Coloring separation the scheme was built from, when known.
    pub separation: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeRepr {
    schema: String,
    d: usize,
    layers: Vec<Vec<Region>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    separation: Option<usize>,
}

impl TryFrom<SchemeRepr> for CoveringScheme {
    type Error = Error;
    fn try_from(r: SchemeRepr) -> Result<Self> {
        check_schema(&r.schema)?;
        if r.layers.iter().flatten().any(Region::is_empty) {
            return Err(Error::InvalidScheme("empty subset".into()));
        }
        Ok(CoveringScheme { d: r.d, layers: r.layers, separation: r.separation })
    }
}

impl From<CoveringScheme> for SchemeRepr {
    fn from(s: CoveringScheme) -> Self {
        SchemeRepr { schema: SCHEMA_VERSION.into(), d: s.d, layers: s.layers, separation: s.separation }
    }
}

impl CoveringScheme {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// `(layer, index, subset)` in processing order.
    pub fn subsets(&self) -> impl Iterator<Item = (usize, usize, &Region)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.iter().enumerate().map(move |(j, s)| (i, j, s)))
    }

    /// Radius every site's ball must fit into for the scheme to cover it.
    pub fn cover_radius(&self) -> usize {
        (2 * self.n_layers()).saturating_sub(1) * self.d
    }

    pub fn check_sites(&self, geom: &LatticeGeometry) -> Result<()> {
        for (_, _, s) in self.subsets() {
            for &v in s.sites() {
                geom.check_site(v)?;
            }
        }
        Ok(())
    }
}

/// Each cell of color `i` becomes `ball(cell, (2k+1)d)` in layer `i`.
/// Subsets in a layer are ordered by their first site.
pub fn coloring_to_covering(
    geom: &LatticeGeometry,
    coloring: &LatticeColoring,
    d: usize,
) -> Result<(CoveringScheme, ValidationReport)> {
    let grow = (2 * geom.k() + 1) * d;
    let mut layers = vec![Vec::new(); coloring.n_colors];
    for cell in &coloring.cells {
        layers[cell.color].push(ball(geom, &cell.region, grow)?);
    }
    for layer in &mut layers {
        layer.sort_by_key(|s: &Region| s.sites()[0]);
    }
    let scheme = CoveringScheme { d, layers, separation: Some(coloring.separation) };
    let report = validate_covering(geom, &scheme)?;
    Ok((scheme, report))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A subset whose `d`-ball is larger than allowed.
    Oversized { layer: usize, index: usize, ball_size: usize },
    /// Two subsets of one layer whose `d`-balls share `site`.
    Overlap { layer: usize, a: usize, b: usize, site: usize },
    /// A site whose cover ball lies in no subset.
    Uncovered { site: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub passed: bool,
    pub witness: Option<Witness>,
}

impl ConditionVerdict {
    fn from_witness(witness: Option<Witness>) -> Self {
        ConditionVerdict { passed: witness.is_none(), witness }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema: String,
    pub layers: usize,
    pub d: usize,
    /// Largest `|ball(S, d)|` over subsets.
    pub realized_c: usize,
    /// `c` the validator was asked to enforce; defaults to the realized value.
    pub c_limit: usize,
    pub small_balls: ConditionVerdict,
    pub disjoint_layers: ConditionVerdict,
    pub covered: ConditionVerdict,
    /// `((8k² + 14k + 2) d)^k`.
    pub lattice_bound: f64,
    pub within_lattice_bound: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.small_balls.passed && self.disjoint_layers.passed && self.covered.passed
    }

    pub fn c_bound(k: usize, d: usize) -> f64 {
        (((8 * k * k + 14 * k + 2) * d) as f64).powi(k as i32)
    }
}

/// Checks all three covering conditions with `c` set to the realized value.
pub fn validate_covering(geom: &LatticeGeometry, scheme: &CoveringScheme) -> Result<ValidationReport> {
    validate_covering_with_c(geom, scheme, None)
}

pub fn validate_covering_with_c(
    geom: &LatticeGeometry,
    scheme: &CoveringScheme,
    c: Option<usize>,
) -> Result<ValidationReport> {
    scheme.check_sites(geom)?;
    let n = geom.n_sites();
    let d = scheme.d;
    let balls: Vec<Vec<Region>> = scheme
        .layers
        .par_iter()
        .map(|l| l.iter().map(|s| ball_unchecked(geom, s.sites(), d)).collect())
        .collect();
    let realized_c = balls.iter().flatten().map(Region::len).max().unwrap_or(0);
    let c_limit = c.unwrap_or(realized_c);

    let mut oversized = None;
    'outer: for (i, l) in balls.iter().enumerate() {
        for (j, b) in l.iter().enumerate() {
            if b.len() > c_limit {
                oversized = Some(Witness::Oversized { layer: i, index: j, ball_size: b.len() });
                break 'outer;
            }
        }
    }

    let mut overlap = None;
    'layers: for (i, l) in balls.iter().enumerate() {
        let mut owner = vec![usize::MAX; n];
        for (j, b) in l.iter().enumerate() {
            for &v in b.sites() {
                if owner[v] != usize::MAX {
                    overlap = Some(Witness::Overlap { layer: i, a: owner[v], b: j, site: v });
                    break 'layers;
                }
                owner[v] = j;
            }
        }
    }

    let mut containing: Vec<Vec<&Region>> = vec![Vec::new(); n];
    for (_, _, s) in scheme.subsets() {
        for &v in s.sites() {
            containing[v].push(s);
        }
    }
    let radius = scheme.cover_radius();
    let uncovered = (0..n).into_par_iter().find_first(|&v| {
        let cover = ball_unchecked(geom, &[v], radius);
        !containing[v].iter().any(|s| cover.is_subset(s))
    });

    let lattice_bound = ValidationReport::c_bound(geom.k(), d);
    Ok(ValidationReport {
        schema: SCHEMA_VERSION.into(),
        layers: scheme.n_layers(),
        d,
        realized_c,
        c_limit,
        small_balls: ConditionVerdict::from_witness(oversized),
        disjoint_layers: ConditionVerdict::from_witness(overlap),
        covered: ConditionVerdict::from_witness(uncovered.map(|site| Witness::Uncovered { site })),
        lattice_bound,
        within_lattice_bound: realized_c as f64 <= lattice_bound,
    })
}

/// The lattice construction in one step: coloring at separation `R`, then
/// subsets grown by `(2k+1)d`.
pub fn lattice_covering(
    geom: &LatticeGeometry,
    separation: usize,
    d: usize,
) -> Result<(CoveringScheme, ValidationReport)> {
    let coloring = build_lattice_coloring(geom, separation)?;
    coloring_to_covering(geom, &coloring, d)
}

/// `(4k+5)d`, the separation the lattice construction is proven for.
pub fn default_separation(k: usize, d: usize) -> usize {
    ((4 * k + 5) * d).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncillaReport {
    /// Junk wires of the extracted circuit.
    pub exact: usize,
    pub n_sites: usize,
    /// `n/R^k · 2k · (3kR)^{k-1} · 3kd`, when the separation is known.
    pub bound: Option<f64>,
    /// The coarser `n/R · (3k)^{k+1} d`.
    pub coarse_bound: Option<f64>,
}

impl AncillaReport {
    pub fn fraction(&self) -> f64 {
        self.exact as f64 / self.n_sites as f64
    }
}

pub fn ancilla_bounds(n: usize, k: usize, separation: usize, d: usize) -> (f64, f64) {
    let (n, kf, r, d) = (n as f64, k as f64, separation as f64, d as f64);
    let fine = n / r.powi(k as i32) * (2.0 * kf) * (3.0 * kf * r).powi(k as i32 - 1) * (3.0 * kf * d);
    let coarse = n / r * (3.0 * kf).powi(k as i32 + 1) * d;
    (fine, coarse)
}

/// Counts ancillas of the circuit extracted from a reconstruction process in
/// which every inversion is a dense brickwork of depth `d` over its ball.
pub fn ancilla_count(geom: &LatticeGeometry, scheme: &CoveringScheme) -> Result<AncillaReport> {
    let inversions = crate::reconstruction::placeholder_inversions(geom, scheme)?;
    let w = crate::reconstruction::build_reconstruction(geom, scheme, &inversions)?;
    let learned = crate::reconstruction::extract_learned_circuit(&w)?;
    let (bound, coarse_bound) = match scheme.separation {
        Some(r) => {
            let (f, c) = ancilla_bounds(geom.n_sites(), geom.k(), r, scheme.d);
            (Some(f), Some(c))
        }
        None => (None, None),
    };
    Ok(AncillaReport { exact: learned.junk_wires.len(), n_sites: geom.n_sites(), bound, coarse_bound })
}
