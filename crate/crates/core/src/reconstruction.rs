//! Replacement processes, the layered reconstruction process `W`, and the
//! unitary circuit read off its backward lightcone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::{backward_lightcone, extract_subcircuit, Circuit, Gate};
use crate::covering::CoveringScheme;
use crate::error::{Error, Result};
use crate::json::{check_schema, digest, SCHEMA_VERSION};
use crate::lattice::{ball, LatticeGeometry, Region};
use crate::linalg;
use crate::rng::derived_rng;
use crate::simulator::{run_channel, trace_distance, DensityMatrix, SimLimits, StateVector};

/// Inversions keyed by `(layer, index)` of their subset.
pub type InversionMap = BTreeMap<(usize, usize), Circuit>;

/// `V`, resets on `A`, then `V†`, as one channel on the wires of
/// `ball(A, d)`.
#[derive(Debug, Clone)]
pub struct ReplacementProcess {
    pub region: Region,
    pub ball: Region,
    /// `V` on ball-local wires.
    pub inversion: Circuit,
    pub as_channel: Circuit,
}

/// Re-expresses a site-mapped inversion on the wires of `ball`, checking it
/// stays inside.
fn localize(v: &Circuit, ball: &Region) -> Result<Circuit> {
    v.require_unitary()?;
    let mut layers = Vec::with_capacity(v.depth());
    let wire_of = |w: usize| -> Result<usize> {
        let site = v.site_of(w).ok_or(Error::SupportViolation(w))?;
        ball.index_of(site).ok_or(Error::SupportViolation(site))
    };
    for layer in v.layers() {
        let mut out = Vec::with_capacity(layer.len());
        for g in layer {
            out.push(match g {
                Gate::Unitary2 { wires: [a, b], matrix } => {
                    Gate::Unitary2 { wires: [wire_of(*a)?, wire_of(*b)?], matrix: *matrix }
                }
                Gate::Unitary1 { wire, matrix } => Gate::Unitary1 { wire: wire_of(*wire)?, matrix: *matrix },
                Gate::Reset { .. } => unreachable!("checked unitary"),
            });
        }
        layers.push(out);
    }
    Circuit::new(ball.len(), layers, Some(ball.sites().iter().map(|&s| Some(s)).collect()))
}

fn check_depth(v: &Circuit, d: usize) -> Result<()> {
    if v.gate_depth() > d || v.depth() > d.max(1) {
        return Err(Error::InvalidConfig(format!(
            "inversion has depth {} ({} with two-qubit gates), budget is {d}",
            v.depth(),
            v.gate_depth()
        )));
    }
    Ok(())
}

pub fn build_replacement(
    geom: &LatticeGeometry,
    region: &Region,
    inversion: &Circuit,
    d: usize,
) -> Result<ReplacementProcess> {
    let b = ball(geom, region, d)?;
    let v = localize(inversion, &b)?;
    check_depth(&v, d)?;
    let mut channel = v.clone();
    let resets = region.sites().iter().map(|&s| Gate::Reset { wire: b.index_of(s).expect("A ⊆ ball") }).collect();
    channel.push_layer(resets)?;
    for layer in v.dagger()?.layers() {
        channel.push_layer(layer.clone())?;
    }
    Ok(ReplacementProcess { region: region.clone(), ball: b, inversion: v, as_channel: channel })
}

#[derive(Debug, Clone)]
pub struct ReconstructionProcess {
    pub scheme: CoveringScheme,
    pub processes: Vec<Vec<ReplacementProcess>>,
    /// `W` on the `n` lattice wires.
    pub full_circuit: Circuit,
}

impl ReconstructionProcess {
    /// Number of replacement processes.
    pub fn process_count(&self) -> usize {
        self.processes.iter().map(Vec::len).sum()
    }
}

/// Stacks the scheme's layers. Within a layer every `V` is right-aligned to
/// end just before the shared reset layer and every `V†` starts right after
/// it.
pub fn build_reconstruction(
    geom: &LatticeGeometry,
    scheme: &CoveringScheme,
    inversions: &InversionMap,
) -> Result<ReconstructionProcess> {
    scheme.check_sites(geom)?;
    let missing: Vec<(usize, usize)> =
        scheme.subsets().map(|(i, j, _)| (i, j)).filter(|key| !inversions.contains_key(key)).collect();
    if !missing.is_empty() {
        return Err(Error::MissingInversion(missing));
    }
    let n = geom.n_sites();
    let mut full = Circuit::empty(n);
    let mut processes = Vec::with_capacity(scheme.n_layers());
    for (i, layer) in scheme.layers.iter().enumerate() {
        let procs = layer
            .iter()
            .enumerate()
            .map(|(j, s)| build_replacement(geom, s, &inversions[&(i, j)], scheme.d))
            .collect::<Result<Vec<_>>>()?;
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for (j, p) in procs.iter().enumerate() {
            let touched = p.region.union(&p.inversion.support());
            for &site in touched.sites() {
                if let Some(o) = owner[site] {
                    return Err(Error::OverlappingSupports { a: (i, o), b: (i, j) });
                }
                owner[site] = Some(j);
            }
        }
        let slot = procs.iter().map(|p| p.inversion.depth()).max().unwrap_or(0).max(scheme.d);
        let global: Vec<Circuit> = procs.iter().map(|p| p.inversion.embed(n)).collect::<Result<_>>()?;
        let mut forward = vec![Vec::new(); slot];
        let mut backward = vec![Vec::new(); slot];
        for v in &global {
            let pad = slot - v.depth();
            for (t, l) in v.layers().iter().enumerate() {
                forward[pad + t].extend(l.iter().cloned());
            }
            for (t, l) in v.dagger()?.layers().iter().enumerate() {
                backward[t].extend(l.iter().cloned());
            }
        }
        for l in forward {
            full.push_layer(l)?;
        }
        full.push_layer(layer.iter().flat_map(|s| s.sites().iter().map(|&w| Gate::Reset { wire: w })).collect())?;
        for l in backward {
            full.push_layer(l)?;
        }
        processes.push(procs);
    }
    Ok(ReconstructionProcess { scheme: scheme.clone(), processes, full_circuit: full })
}

/// The learned circuit: run on all-`|0⟩` wires, its `system_wires` carry
/// the state and its `junk_wires` are discarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LearnedRepr", into = "LearnedRepr")]
pub struct LearnedCircuit {
    pub circuit: Circuit,
    /// Wire carrying lattice site `i`, for each site in order.
    pub system_wires: Vec<usize>,
    pub junk_wires: Vec<usize>,
    pub depth_gates: usize,
    pub scheme_digest: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnedRepr {
    schema: String,
    circuit: Circuit,
    system_wires: Vec<usize>,
    junk_wires: Vec<usize>,
    depth_gates: usize,
    ancilla_count: usize,
    scheme_digest: String,
}

impl TryFrom<LearnedRepr> for LearnedCircuit {
    type Error = Error;
    fn try_from(r: LearnedRepr) -> Result<Self> {
        check_schema(&r.schema)?;
        if r.ancilla_count != r.junk_wires.len() {
            return Err(Error::Schema {
                pointer: "/ancilla_count".into(),
                message: "does not match the number of junk wires".into(),
            });
        }
        Ok(LearnedCircuit {
            circuit: r.circuit,
            system_wires: r.system_wires,
            junk_wires: r.junk_wires,
            depth_gates: r.depth_gates,
            scheme_digest: r.scheme_digest,
        })
    }
}

impl From<LearnedCircuit> for LearnedRepr {
    fn from(c: LearnedCircuit) -> Self {
        LearnedRepr {
            schema: SCHEMA_VERSION.into(),
            ancilla_count: c.junk_wires.len(),
            circuit: c.circuit,
            system_wires: c.system_wires,
            junk_wires: c.junk_wires,
            depth_gates: c.depth_gates,
            scheme_digest: c.scheme_digest,
        }
    }
}

impl LearnedCircuit {
    pub fn ancilla_count(&self) -> usize {
        self.junk_wires.len()
    }

    /// Prepares the full output and returns its marginal on the system
    /// wires, or the bare state when there are no ancillas.
    pub fn system_state(&self, limits: &SimLimits) -> Result<SystemState> {
        let out = crate::simulator::prepare(&self.circuit, limits)?;
        if self.junk_wires.is_empty() && self.system_wires.iter().enumerate().all(|(i, &w)| i == w) {
            return Ok(SystemState::Pure(out));
        }
        let mut keep = self.system_wires.clone();
        keep.sort_unstable();
        if keep != self.system_wires {
            return Err(Error::InvalidConfig("system wires must be ascending".into()));
        }
        Ok(SystemState::Mixed(out.partial_trace(&keep)?))
    }

    /// `⟨ψ| Tr_junk(C|0⟩⟨0|C†) |ψ⟩`, computed without forming the system
    /// density matrix: the overlap of `|ψ⟩` with each junk branch.
    pub fn fidelity_with(&self, psi: &StateVector, limits: &SimLimits) -> Result<f64> {
        let out = crate::simulator::prepare(&self.circuit, limits)?;
        let n_sys = self.system_wires.len();
        if psi.n_wires() != n_sys {
            return Err(Error::DimensionMismatch { expected: n_sys, got: psi.n_wires() });
        }
        let total = self.circuit.n_wires();
        let bit = |x: usize, w: usize| (x >> (total - 1 - w)) & 1;
        let n_junk = self.junk_wires.len();
        let mut branch = vec![linalg::ZERO; 1 << n_junk];
        for (x, a) in out.amplitudes().iter().enumerate() {
            let s = self.system_wires.iter().fold(0, |acc, &w| (acc << 1) | bit(x, w));
            let j = self.junk_wires.iter().fold(0, |acc, &w| (acc << 1) | bit(x, w));
            branch[j] += psi.amplitudes()[s].conj() * a;
        }
        Ok(branch.iter().map(|z| z.norm_sqr()).sum())
    }
}

#[derive(Debug, Clone)]
pub enum SystemState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

/// Reads `C` off the backward lightcone of all outputs of `W`.
pub fn extract_learned_circuit(process: &ReconstructionProcess) -> Result<LearnedCircuit> {
    let w = &process.full_circuit;
    let outputs: Vec<usize> = (0..w.n_wires()).collect();
    let mask = backward_lightcone(w, &outputs)?;
    if mask.reaches_input {
        return Err(Error::ShieldingFailed(mask.input_wires()));
    }
    let ex = extract_subcircuit(w, &mask)?;
    Ok(LearnedCircuit {
        depth_gates: ex.circuit.gate_depth(),
        circuit: ex.circuit,
        system_wires: ex.output_wires,
        junk_wires: ex.junk_wires,
        scheme_digest: digest(&process.scheme)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantChannelReport {
    pub trials: usize,
    pub max_pairwise_distance: f64,
}

/// Runs `W` on random pure inputs and compares the outputs pairwise.
pub fn constant_channel_check(
    process: &ReconstructionProcess,
    trials: usize,
    seed: u64,
    limits: &SimLimits,
) -> Result<ConstantChannelReport> {
    let n = process.full_circuit.n_wires();
    let outs = (0..trials)
        .map(|t| {
            let mut rng = derived_rng(seed, t as u64);
            let psi = StateVector::random(n, &mut rng);
            run_channel(&process.full_circuit, &psi.to_density(), limits)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..outs.len() {
        for j in i + 1..outs.len() {
            worst = worst.max(trace_distance(&outs[i], &outs[j])?);
        }
    }
    Ok(ConstantChannelReport { trials, max_pairwise_distance: worst })
}

/// Depth-`d` brickwork over `ball`, cycling through the `2k` matchings
/// "axis `a`, lower endpoint parity `p`". The gates are identities; only
/// their placement matters.
pub fn brickwork(geom: &LatticeGeometry, ball: &Region, d: usize) -> Circuit {
    brickwork_from(geom, ball, d, 0)
}

/// `brickwork` with the matching cycle started `offset` steps in.
pub fn brickwork_from(geom: &LatticeGeometry, ball: &Region, d: usize, offset: usize) -> Circuit {
    let k = geom.k();
    let mut c = Circuit::on_sites(ball.sites());
    let edges = geom.edges_within(ball);
    for t in offset..offset + d {
        let axis = (t / 2) % k;
        let parity = t % 2;
        let layer = edges
            .iter()
            .filter(|&&(a, b)| {
                let (ca, cb) = (geom.coords(a), geom.coords(b));
                ca[axis] != cb[axis] && ca[axis].min(cb[axis]) % 2 == parity
            })
            .map(|&(a, b)| Gate::Unitary2 {
                wires: [ball.index_of(a).unwrap(), ball.index_of(b).unwrap()],
                matrix: linalg::identity4(),
            })
            .collect();
        c.push_layer(layer).expect("a parity class is a matching");
    }
    c
}

/// A brickwork inversion for every subset of the scheme.
pub fn placeholder_inversions(geom: &LatticeGeometry, scheme: &CoveringScheme) -> Result<InversionMap> {
    scheme
        .subsets()
        .map(|(i, j, s)| Ok(((i, j), brickwork(geom, &ball(geom, s, scheme.d)?, scheme.d))))
        .collect()
}

/// Random depth-`d` inversions on the prescribed balls: random matchings
/// with Haar gates, seeded per subset.
pub fn random_inversions(geom: &LatticeGeometry, scheme: &CoveringScheme, seed: u64) -> Result<InversionMap> {
    use rand::seq::SliceRandom;
    let mut out = InversionMap::new();
    for (idx, (i, j, s)) in scheme.subsets().enumerate() {
        let mut rng = derived_rng(seed, idx as u64);
        let b = ball(geom, s, scheme.d)?;
        let edges = geom.edges_within(&b);
        let mut c = Circuit::on_sites(b.sites());
        for _ in 0..scheme.d {
            let mut order = edges.clone();
            order.shuffle(&mut rng);
            let mut used = vec![false; b.len()];
            let mut layer = Vec::new();
            for (x, y) in order {
                let (wx, wy) = (b.index_of(x).unwrap(), b.index_of(y).unwrap());
                if !used[wx] && !used[wy] && rand::Rng::gen_bool(&mut rng, 0.8) {
                    used[wx] = true;
                    used[wy] = true;
                    layer.push(Gate::Unitary2 {
                        wires: [wx, wy],
                        matrix: linalg::to_mat4(&linalg::haar_unitary(4, &mut rng)),
                    });
                }
            }
            c.push_layer(layer)?;
        }
        out.insert((i, j), c);
    }
    Ok(out)
}
