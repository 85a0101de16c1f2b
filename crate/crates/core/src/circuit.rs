//! Layered circuits of two-qubit unitaries and one-qubit resets, with forward
//! and backward lightcones and subcircuit extraction.
//!
//! Conventions: a `u2` gate on `wires = [a, b]` acts on the basis
//! `|q_a q_b⟩` with `a` as the high bit; matrices are stored row-major. A
//! reset ends the current segment of its wire and starts a new one in `|0⟩`.
//! Single-qubit `u1` gates only appear in depth-zero inversions.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{check_schema, SCHEMA_VERSION};
use crate::lattice::{LatticeGeometry, Region};
use crate::linalg::{self, Mat2, Mat4, C64};
use crate::rng::rng_from_seed;

const UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GateRepr", into = "GateRepr")]
pub enum Gate {
    Unitary2 { wires: [usize; 2], matrix: Mat4 },
    Unitary1 { wire: usize, matrix: Mat2 },
    Reset { wire: usize },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
enum GateRepr {
    #[serde(rename = "u2")]
    U2 { wires: [usize; 2], matrix: Vec<[f64; 2]> },
    #[serde(rename = "u1")]
    U1 { wire: usize, matrix: Vec<[f64; 2]> },
    #[serde(rename = "reset")]
    Reset { wire: usize },
}

fn parse_matrix(entries: &[[f64; 2]], dim: usize) -> std::result::Result<Vec<C64>, String> {
    if entries.len() != dim * dim {
        return Err(format!("expected {} matrix entries, got {}", dim * dim, entries.len()));
    }
    let m: Vec<C64> = entries.iter().map(|[re, im]| C64::new(*re, *im)).collect();
    let dev = linalg::unitarity_deviation(&m, dim);
    if dev > UNITARITY_TOL {
        return Err(Error::NonUnitary(dev).to_string());
    }
    Ok(m)
}

impl TryFrom<GateRepr> for Gate {
    type Error = String;
    fn try_from(r: GateRepr) -> std::result::Result<Self, String> {
        Ok(match r {
            GateRepr::U2 { wires, matrix } => {
                if wires[0] == wires[1] {
                    return Err(Error::RepeatedWire(wires[0]).to_string());
                }
                Gate::Unitary2 { wires, matrix: linalg::to_mat4(&parse_matrix(&matrix, 4)?) }
            }
            GateRepr::U1 { wire, matrix } => {
                let m = parse_matrix(&matrix, 2)?;
                Gate::Unitary1 { wire, matrix: [m[0], m[1], m[2], m[3]] }
            }
            GateRepr::Reset { wire } => Gate::Reset { wire },
        })
    }
}

impl From<Gate> for GateRepr {
    fn from(g: Gate) -> Self {
        let enc = |m: &[C64]| m.iter().map(|z| [z.re, z.im]).collect();
        match g {
            Gate::Unitary2 { wires, matrix } => GateRepr::U2 { wires, matrix: enc(&matrix) },
            Gate::Unitary1 { wire, matrix } => GateRepr::U1 { wire, matrix: enc(&matrix) },
            Gate::Reset { wire } => GateRepr::Reset { wire },
        }
    }
}

impl Gate {
    pub fn unitary2(a: usize, b: usize, matrix: Mat4) -> Result<Gate> {
        if a == b {
            return Err(Error::RepeatedWire(a));
        }
        let dev = linalg::unitarity_deviation(&matrix, 4);
        if dev > UNITARITY_TOL {
            return Err(Error::NonUnitary(dev));
        }
        Ok(Gate::Unitary2 { wires: [a, b], matrix })
    }

    pub fn unitary1(wire: usize, matrix: Mat2) -> Result<Gate> {
        let dev = linalg::unitarity_deviation(&matrix, 2);
        if dev > UNITARITY_TOL {
            return Err(Error::NonUnitary(dev));
        }
        Ok(Gate::Unitary1 { wire, matrix })
    }

    pub fn wires(&self) -> Vec<usize> {
        match self {
            Gate::Unitary2 { wires, .. } => wires.to_vec(),
            Gate::Unitary1 { wire, .. } | Gate::Reset { wire } => vec![*wire],
        }
    }

    pub fn is_reset(&self) -> bool {
        matches!(self, Gate::Reset { .. })
    }

    fn remap(&self, f: impl Fn(usize) -> usize) -> Gate {
        match self {
            Gate::Unitary2 { wires, matrix } => {
                Gate::Unitary2 { wires: [f(wires[0]), f(wires[1])], matrix: *matrix }
            }
            Gate::Unitary1 { wire, matrix } => Gate::Unitary1 { wire: f(*wire), matrix: *matrix },
            Gate::Reset { wire } => Gate::Reset { wire: f(*wire) },
        }
    }

    fn dagger(&self) -> Option<Gate> {
        match self {
            Gate::Unitary2 { wires, matrix } => Some(Gate::Unitary2 {
                wires: *wires,
                matrix: linalg::to_mat4(&linalg::dagger(matrix, 4)),
            }),
            Gate::Unitary1 { wire, matrix } => {
                let m = linalg::dagger(matrix, 2);
                Some(Gate::Unitary1 { wire: *wire, matrix: [m[0], m[1], m[2], m[3]] })
            }
            Gate::Reset { .. } => None,
        }
    }
}

/// A layered circuit. Gates within a layer act on disjoint wires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitRepr", into = "CircuitRepr")]
pub struct Circuit {
    n_wires: usize,
    layers: Vec<Vec<Gate>>,
    site_map: Option<Vec<Option<usize>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitRepr {
    schema: String,
    n_wires: usize,
    site_map: Option<Vec<Option<usize>>>,
    layers: Vec<Vec<Gate>>,
}

impl TryFrom<CircuitRepr> for Circuit {
    type Error = Error;
    fn try_from(r: CircuitRepr) -> Result<Self> {
        check_schema(&r.schema)?;
        Circuit::new(r.n_wires, r.layers, r.site_map)
    }
}

impl From<Circuit> for CircuitRepr {
    fn from(c: Circuit) -> Self {
        CircuitRepr {
            schema: SCHEMA_VERSION.into(),
            n_wires: c.n_wires,
            site_map: c.site_map,
            layers: c.layers,
        }
    }
}

fn check_layer(n_wires: usize, index: usize, layer: &[Gate]) -> Result<()> {
    let mut used = vec![false; n_wires];
    for g in layer {
        for w in g.wires() {
            if w >= n_wires {
                return Err(Error::InvalidWire { wire: w, n_wires });
            }
            if used[w] {
                return Err(Error::LayerOverlap { layer: index, wire: w });
            }
            used[w] = true;
        }
    }
    Ok(())
}

impl Circuit {
    pub fn new(
        n_wires: usize,
        layers: Vec<Vec<Gate>>,
        site_map: Option<Vec<Option<usize>>>,
    ) -> Result<Self> {
        if let Some(map) = &site_map {
            if map.len() != n_wires {
                return Err(Error::DimensionMismatch { expected: n_wires, got: map.len() });
            }
        }
        for (i, layer) in layers.iter().enumerate() {
            check_layer(n_wires, i, layer)?;
        }
        Ok(Circuit { n_wires, layers, site_map })
    }

    pub fn empty(n_wires: usize) -> Self {
        Circuit { n_wires, layers: Vec::new(), site_map: None }
    }

    /// An empty circuit whose wire `i` sits on `sites[i]`.
    pub fn on_sites(sites: &[usize]) -> Self {
        Circuit {
            n_wires: sites.len(),
            layers: Vec::new(),
            site_map: Some(sites.iter().map(|&s| Some(s)).collect()),
        }
    }

    pub fn with_site_map(mut self, site_map: Vec<Option<usize>>) -> Result<Self> {
        if site_map.len() != self.n_wires {
            return Err(Error::DimensionMismatch { expected: self.n_wires, got: site_map.len() });
        }
        self.site_map = Some(site_map);
        Ok(self)
    }

    pub fn push_layer(&mut self, layer: Vec<Gate>) -> Result<()> {
        check_layer(self.n_wires, self.layers.len(), &layer)?;
        self.layers.push(layer);
        Ok(())
    }

    pub fn n_wires(&self) -> usize {
        self.n_wires
    }

    pub fn layers(&self) -> &[Vec<Gate>] {
        &self.layers
    }

    pub fn site_map(&self) -> Option<&[Option<usize>]> {
        self.site_map.as_deref()
    }

    /// Site of `wire`; the wire index itself when no map is attached.
    pub fn site_of(&self, wire: usize) -> Option<usize> {
        match &self.site_map {
            Some(m) => m[wire],
            None => Some(wire),
        }
    }

    /// Number of layers, reset layers included.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Number of layers containing at least one two-qubit gate.
    pub fn gate_depth(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.iter().any(|g| matches!(g, Gate::Unitary2 { .. })))
            .count()
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Sites touched by any gate.
    pub fn support(&self) -> Region {
        let mut sites = Vec::new();
        for g in self.layers.iter().flatten() {
            for w in g.wires() {
                if let Some(s) = self.site_of(w) {
                    sites.push(s);
                }
            }
        }
        Region::from_sites(sites)
    }

    pub fn first_reset(&self) -> Option<(usize, usize)> {
        self.layers.iter().enumerate().find_map(|(i, l)| {
            l.iter().find_map(|g| match g {
                Gate::Reset { wire } => Some((i, *wire)),
                _ => None,
            })
        })
    }

    pub fn is_unitary(&self) -> bool {
        self.first_reset().is_none()
    }

    pub fn require_unitary(&self) -> Result<()> {
        match self.first_reset() {
            Some((layer, wire)) => Err(Error::ResetInUnitaryCircuit { layer, wire }),
            None => Ok(()),
        }
    }

    /// Reverses the layers and conjugate-transposes every gate.
    pub fn dagger(&self) -> Result<Circuit> {
        self.require_unitary()?;
        let layers = self
            .layers
            .iter()
            .rev()
            .map(|l| l.iter().map(|g| g.dagger().expect("reset-free")).collect())
            .collect();
        Ok(Circuit { n_wires: self.n_wires, layers, site_map: self.site_map.clone() })
    }

    /// `b` applied after `a`.
    pub fn compose(a: &Circuit, b: &Circuit) -> Result<Circuit> {
        if a.n_wires != b.n_wires {
            return Err(Error::DimensionMismatch { expected: a.n_wires, got: b.n_wires });
        }
        let mut layers = a.layers.clone();
        layers.extend(b.layers.iter().cloned());
        Ok(Circuit { n_wires: a.n_wires, layers, site_map: a.site_map.clone() })
    }

    /// Drops empty layers without reordering anything else.
    pub fn compact(&self) -> Circuit {
        Circuit {
            n_wires: self.n_wires,
            layers: self.layers.iter().filter(|l| !l.is_empty()).cloned().collect(),
            site_map: self.site_map.clone(),
        }
    }

    /// Re-expresses a site-mapped circuit on a circuit whose wire `s` is site
    /// `s`, for `n_wires` lattice sites.
    pub fn embed(&self, n_wires: usize) -> Result<Circuit> {
        let mut map = Vec::with_capacity(self.n_wires);
        for w in 0..self.n_wires {
            let s = self.site_of(w).ok_or(Error::InvalidWire { wire: w, n_wires: self.n_wires })?;
            if s >= n_wires {
                return Err(Error::InvalidWire { wire: s, n_wires });
            }
            map.push(s);
        }
        let layers = self
            .layers
            .iter()
            .map(|l| l.iter().map(|g| g.remap(|w| map[w])).collect())
            .collect();
        Circuit::new(n_wires, layers, None)
    }

    /// Multiplies every two-qubit gate by `exp(i δ H)` for an independent
    /// random unit-norm Hermitian `H`; resets and `u1` gates are untouched.
    pub fn perturbed(&self, delta: f64, seed: u64) -> Circuit {
        let mut rng = rng_from_seed(seed);
        let layers = self
            .layers
            .iter()
            .map(|l| {
                l.iter()
                    .map(|g| match g {
                        Gate::Unitary2 { wires, matrix } => {
                            let h = linalg::random_hermitian(4, &mut rng);
                            let kick = linalg::expi_hermitian(&h, 4, delta);
                            Gate::Unitary2 {
                                wires: *wires,
                                matrix: linalg::to_mat4(&linalg::matmul(&kick, matrix, 4)),
                            }
                        }
                        other => other.clone(),
                    })
                    .collect()
            })
            .collect();
        Circuit { n_wires: self.n_wires, layers, site_map: self.site_map.clone() }
    }

    fn wires_on_sites(&self, region: &Region) -> Vec<usize> {
        (0..self.n_wires)
            .filter(|&w| self.site_of(w).is_some_and(|s| region.contains(s)))
            .collect()
    }
}

/// Gates reached by spreading forward from a region at the circuit input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCone {
    /// `(layer, gate index)` pairs, in circuit order.
    pub gates: Vec<(usize, usize)>,
    /// Sites carrying influence at the output.
    pub output_support: Region,
}

/// Forward lightcone of `region` (lattice sites) in a reset-free circuit.
pub fn forward_lightcone(circuit: &Circuit, region: &Region) -> Result<ForwardCone> {
    circuit.require_unitary()?;
    let mut tainted = vec![false; circuit.n_wires];
    for w in circuit.wires_on_sites(region) {
        tainted[w] = true;
    }
    let mut gates = Vec::new();
    for (t, layer) in circuit.layers.iter().enumerate() {
        for (i, g) in layer.iter().enumerate() {
            let ws = g.wires();
            if ws.iter().any(|&w| tainted[w]) {
                gates.push((t, i));
                ws.iter().for_each(|&w| tainted[w] = true);
            }
        }
    }
    let support = (0..circuit.n_wires)
        .filter(|&w| tainted[w])
        .filter_map(|w| circuit.site_of(w))
        .collect();
    Ok(ForwardCone { gates, output_support: Region::from_sites(support) })
}

/// Wires influenced at the output by the outputs of the layer-`layer` gate
/// `gate`.
pub fn forward_spread_from_gate(circuit: &Circuit, layer: usize, gate: usize) -> Vec<bool> {
    let mut tainted = vec![false; circuit.n_wires];
    for w in circuit.layers[layer][gate].wires() {
        tainted[w] = true;
    }
    for l in &circuit.layers[layer + 1..] {
        for g in l {
            let ws = g.wires();
            if g.is_reset() {
                tainted[ws[0]] = false;
            } else if ws.iter().any(|&w| tainted[w]) {
                ws.iter().for_each(|&w| tainted[w] = true);
            }
        }
    }
    tainted
}

/// Where a wire of the backward lightcone starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrontierInput {
    /// Output of the reset in `layer` on `wire`.
    Reset { layer: usize, wire: usize },
    /// The circuit's own input on `wire`.
    Input { wire: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubCircuitMask {
    pub outputs: Vec<usize>,
    pub selected: BTreeSet<(usize, usize)>,
    pub frontier_inputs: BTreeSet<FrontierInput>,
    pub reaches_input: bool,
    /// Gate visits performed while spreading, for complexity checks.
    #[serde(skip)]
    pub operations: usize,
}

impl SubCircuitMask {
    pub fn input_wires(&self) -> Vec<usize> {
        self.frontier_inputs
            .iter()
            .filter_map(|f| match f {
                FrontierInput::Input { wire } => Some(*wire),
                _ => None,
            })
            .collect()
    }

    /// Union of two masks over the same circuit.
    pub fn union(&self, other: &SubCircuitMask) -> SubCircuitMask {
        let mut outputs: Vec<usize> = self.outputs.iter().chain(&other.outputs).copied().collect();
        outputs.sort_unstable();
        outputs.dedup();
        SubCircuitMask {
            outputs,
            selected: self.selected.union(&other.selected).copied().collect(),
            frontier_inputs: self.frontier_inputs.union(&other.frontier_inputs).copied().collect(),
            reaches_input: self.reaches_input || other.reaches_input,
            operations: self.operations + other.operations,
        }
    }
}

/// Spreads backward from `outputs`: a gate with a blue wire above it turns
/// green and colors its input wires blue, except where those inputs are fed
/// by a reset.
pub fn backward_lightcone(circuit: &Circuit, outputs: &[usize]) -> Result<SubCircuitMask> {
    let mut blue = vec![false; circuit.n_wires];
    for &w in outputs {
        if w >= circuit.n_wires {
            return Err(Error::InvalidWire { wire: w, n_wires: circuit.n_wires });
        }
        blue[w] = true;
    }
    let mut outs = outputs.to_vec();
    outs.sort_unstable();
    outs.dedup();
    let mut selected = BTreeSet::new();
    let mut frontier = BTreeSet::new();
    let mut operations = circuit.n_wires;
    for (t, layer) in circuit.layers.iter().enumerate().rev() {
        for (i, g) in layer.iter().enumerate() {
            operations += 1;
            match g {
                Gate::Unitary2 { wires: [a, b], .. } => {
                    if blue[*a] || blue[*b] {
                        selected.insert((t, i));
                        blue[*a] = true;
                        blue[*b] = true;
                    }
                }
                Gate::Unitary1 { wire, .. } => {
                    if blue[*wire] {
                        selected.insert((t, i));
                    }
                }
                Gate::Reset { wire } => {
                    if blue[*wire] {
                        frontier.insert(FrontierInput::Reset { layer: t, wire: *wire });
                        blue[*wire] = false;
                    }
                }
            }
        }
    }
    let mut reaches_input = false;
    for (w, &b) in blue.iter().enumerate() {
        if b {
            reaches_input = true;
            frontier.insert(FrontierInput::Input { wire: w });
        }
    }
    Ok(SubCircuitMask { outputs: outs, selected, frontier_inputs: frontier, reaches_input, operations })
}

/// The joint mask assembled from independent single-wire cones.
pub fn backward_lightcone_per_wire(circuit: &Circuit, outputs: &[usize]) -> Result<SubCircuitMask> {
    let masks = outputs
        .par_iter()
        .map(|&w| backward_lightcone(circuit, &[w]))
        .collect::<Result<Vec<_>>>()?;
    let init = backward_lightcone(circuit, &[])?;
    Ok(masks.iter().fold(init, |acc, m| acc.union(m)))
}

/// A wire segment of the source circuit: `wire`, from the reset in layer
/// `born` (or the circuit input when `None`) up to the next reset or output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub wire: usize,
    pub born: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExtractedCircuit {
    /// Unitary circuit on fresh `|0⟩` wires, one per blue segment.
    pub circuit: Circuit,
    /// New wire carrying each requested output, in the mask's output order.
    pub output_wires: Vec<usize>,
    /// New wires whose final value is discarded.
    pub junk_wires: Vec<usize>,
    /// Source segment of each new wire.
    pub segments: Vec<Segment>,
}

/// Materializes a mask as a unitary circuit on fresh wires. Selected gates
/// keep their source layer; empty layers are then dropped.
pub fn extract_subcircuit(circuit: &Circuit, mask: &SubCircuitMask) -> Result<ExtractedCircuit> {
    if mask.reaches_input {
        return Err(Error::ReachesInput(mask.input_wires()));
    }
    let n = circuit.n_wires;
    let mut resets: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, layer) in circuit.layers.iter().enumerate() {
        for g in layer {
            if let Gate::Reset { wire } = g {
                resets[*wire].push(t);
            }
        }
    }
    let segment_at = |wire: usize, layer: usize| -> Segment {
        let born = resets[wire].iter().rev().find(|&&r| r < layer).copied();
        Segment { wire, born }
    };
    let output_segment = |wire: usize| Segment { wire, born: resets[wire].last().copied() };

    let mut segments: Vec<Segment> = mask.outputs.iter().map(|&w| output_segment(w)).collect();
    let mut junk = BTreeSet::new();
    for &(t, i) in &mask.selected {
        for w in circuit.layers[t][i].wires() {
            let seg = segment_at(w, t);
            if !segments.contains(&seg) {
                junk.insert((seg.born, seg.wire));
            }
        }
    }
    let n_out = segments.len();
    segments.extend(junk.iter().map(|&(born, wire)| Segment { wire, born }));
    let index_of = |seg: Segment| segments.iter().position(|&s| s == seg).expect("segment");

    let mut layers = vec![Vec::new(); circuit.depth()];
    for &(t, i) in &mask.selected {
        let g = &circuit.layers[t][i];
        layers[t].push(g.remap(|w| index_of(segment_at(w, t))));
    }
    let site_map = segments.iter().map(|s| circuit.site_of(s.wire)).collect();
    let out = Circuit::new(segments.len(), layers, Some(site_map))?.compact();
    Ok(ExtractedCircuit {
        circuit: out,
        output_wires: (0..n_out).collect(),
        junk_wires: (n_out..segments.len()).collect(),
        segments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateSource {
    Haar,
    Clifford,
}

/// `depth` layers, each a random maximal matching of lattice edges carrying
/// independent Haar or uniformly random Clifford gates.
pub fn random_shallow_circuit(
    geom: &LatticeGeometry,
    depth: usize,
    source: GateSource,
    seed: u64,
) -> Circuit {
    let mut rng = rng_from_seed(seed);
    let n = geom.n_sites();
    let edges = geom.edges();
    let mut circuit = Circuit::empty(n);
    for _ in 0..depth {
        let mut order = edges.clone();
        order.shuffle(&mut rng);
        let mut used = vec![false; n];
        let mut chosen = Vec::new();
        for (a, b) in order {
            if !used[a] && !used[b] {
                used[a] = true;
                used[b] = true;
                chosen.push((a, b));
            }
        }
        chosen.sort_unstable();
        let layer = chosen
            .into_iter()
            .map(|(a, b)| {
                let matrix = match source {
                    GateSource::Haar => linalg::to_mat4(&linalg::haar_unitary(4, &mut rng)),
                    GateSource::Clifford => crate::clifford::random_clifford(&mut rng),
                };
                Gate::Unitary2 { wires: [a, b], matrix }
            })
            .collect();
        circuit.push_layer(layer).expect("matching is disjoint");
    }
    circuit
}
