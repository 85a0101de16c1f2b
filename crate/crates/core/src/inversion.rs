//! Local inversions: circuits on `ball(A, d)` that rotate the region `A`
//! to `|0…0⟩`, found from the reduced density matrix on the ball alone.
//!
//! Everything below works on a purification of that matrix: the ball's
//! wires come first (ball-local order), environment wires after them.
//!
//! `clifford_enum` at depth one never enumerates gates directly. A gate `g`
//! on an edge enters the fidelity only through `g† P g`, with `P = |00⟩⟨00|`
//! when both ends lie in `A` and `P = |0⟩⟨0| ⊗ I` when one does. Those are
//! 60 and 30 distinct projectors over the Clifford group, they commute, and
//! partial products upper-bound the final fidelity, so a depth-first search
//! over sites of `A` can prune any branch that falls below the threshold.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{forward_lightcone, Circuit, Gate};
use crate::clifford::{self, ProjectorClass};
use crate::error::{Error, Result};
use crate::lattice::{ball, LatticeGeometry, Region};
use crate::linalg::{self, Mat4, C64, ZERO};
use crate::rng::derived_rng;
use crate::simulator::{apply_1q, apply_2q, purify, DensityMatrix};

/// Largest ball `enumerate_architectures` accepts.
pub const ARCHITECTURE_CAP: usize = 12;
/// Continuous mode stops listing maximal matchings past this many.
const MAX_CONTINUOUS_ARCHITECTURES: usize = 256;
const PURIFY_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct InversionProblem {
    pub region: Region,
    pub ball: Region,
    pub d: usize,
    /// State on the ball's sites in ascending order.
    pub rdm: DensityMatrix,
    pub threshold: f64,
}

impl InversionProblem {
    pub fn new(geom: &LatticeGeometry, region: Region, d: usize, rdm: DensityMatrix, threshold: f64) -> Result<Self> {
        let b = ball(geom, &region, d)?;
        if rdm.n_wires() != b.len() {
            return Err(Error::DimensionMismatch { expected: b.len(), got: rdm.n_wires() });
        }
        Ok(InversionProblem { region, ball: b, d, rdm, threshold })
    }

    fn a_wires(&self) -> Vec<usize> {
        self.region.sites().iter().map(|&s| self.ball.index_of(s).expect("A ⊆ ball")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    CliffordEnum,
    ContinuousOpt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub strategy: Strategy,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    /// Projector evaluations allowed in `clifford_enum` before giving up.
    #[serde(default = "default_node_budget")]
    pub node_budget: u64,
    /// Record wall-clock times in the search stats.
    #[serde(default)]
    pub record_timings: bool,
}

fn default_restarts() -> usize {
    20
}
fn default_max_iters() -> usize {
    200
}
fn default_threshold() -> f64 {
    1.0 - 1e-6
}
fn default_node_budget() -> u64 {
    20_000_000
}

impl SearchConfig {
    pub fn new(strategy: Strategy) -> Self {
        SearchConfig {
            strategy,
            restarts: default_restarts(),
            max_iters: default_max_iters(),
            threshold: default_threshold(),
            seed: 0,
            node_budget: default_node_budget(),
            record_timings: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub restarts: usize,
    pub iterations: usize,
    pub nodes: u64,
    pub architectures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

/// Site pairs acted on in each layer.
pub type Architecture = Vec<Vec<(usize, usize)>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionRecord {
    pub region: Region,
    /// `V`, with wires mapped onto the ball's sites.
    pub circuit: Circuit,
    pub achieved_fidelity: f64,
    pub strategy: Strategy,
    pub architecture: Architecture,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchFailure {
    pub region: Region,
    pub best_fidelity: f64,
    pub best: Option<InversionRecord>,
    /// Every circuit of the searched class was ruled out.
    pub exhaustive: bool,
    pub budget_exhausted: bool,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SearchOutcome {
    Success(InversionRecord),
    Failure(SearchFailure),
}

impl SearchOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, SearchOutcome::Success(_))
    }

    pub fn best_fidelity(&self) -> f64 {
        match self {
            SearchOutcome::Success(r) => r.achieved_fidelity,
            SearchOutcome::Failure(f) => f.best_fidelity,
        }
    }
}

/// Purified working state: `n` wires, the first `ball` of which are the
/// ball's sites.
#[derive(Clone)]
struct Work {
    n: usize,
    amps: Vec<C64>,
}

impl Work {
    fn from_rdm(rho: &DensityMatrix) -> Work {
        let p = purify(rho, PURIFY_TOL);
        Work { n: p.n_wires(), amps: p.amplitudes().to_vec() }
    }

    fn pos(&self, w: usize) -> usize {
        self.n - 1 - w
    }

    fn apply2(&mut self, a: usize, b: usize, m: &Mat4) {
        let (pa, pb) = (self.pos(a), self.pos(b));
        apply_2q(&mut self.amps, pa, pb, m);
    }

    fn apply_gate(&mut self, g: &Gate) {
        match g {
            Gate::Unitary2 { wires: [a, b], matrix } => self.apply2(*a, *b, matrix),
            Gate::Unitary1 { wire, matrix } => {
                let p = self.pos(*wire);
                apply_1q(&mut self.amps, p, matrix)
            }
            Gate::Reset { .. } => unreachable!("inversions are unitary"),
        }
    }

    fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Zeroes every amplitude with a `1` on one of `wires`.
    fn project_zero(&mut self, wires: &[usize]) {
        let mask = wires.iter().fold(0usize, |m, &w| m | 1 << self.pos(w));
        for (x, a) in self.amps.iter_mut().enumerate() {
            if x & mask != 0 {
                *a = ZERO;
            }
        }
    }

    fn prob_zero(&self, wires: &[usize]) -> f64 {
        let mask = wires.iter().fold(0usize, |m, &w| m | 1 << self.pos(w));
        self.amps.iter().enumerate().filter(|(x, _)| x & mask == 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// Unnormalized marginal on `(a, b)`, `a` as the high bit.
    fn marginal2(&self, a: usize, b: usize) -> Mat4 {
        let (ma, mb) = (1usize << self.pos(a), 1usize << self.pos(b));
        let mut s = [ZERO; 16];
        for base in (0..self.amps.len()).filter(|x| x & (ma | mb) == 0) {
            let idx = [base, base | mb, base | ma, base | ma | mb];
            let v = idx.map(|i| self.amps[i]);
            for i in 0..4 {
                if v[i] == ZERO {
                    continue;
                }
                for j in 0..4 {
                    s[i * 4 + j] += v[i] * v[j].conj();
                }
            }
        }
        s
    }

    /// `Σ_rest before[j, rest] · conj(after[i, rest])` at `E[j][i]`, so
    /// that `⟨after|U|before⟩ = Tr(U E)`.
    fn environment(before: &Work, after: &Work, a: usize, b: usize) -> Mat4 {
        let (ma, mb) = (1usize << before.pos(a), 1usize << before.pos(b));
        let mut e = [ZERO; 16];
        for base in (0..before.amps.len()).filter(|x| x & (ma | mb) == 0) {
            let idx = [base, base | mb, base | ma, base | ma | mb];
            for j in 0..4 {
                let bj = before.amps[idx[j]];
                if bj == ZERO {
                    continue;
                }
                for i in 0..4 {
                    e[j * 4 + i] += bj * after.amps[idx[i]].conj();
                }
            }
        }
        e
    }
}

fn trace_product(q: &Mat4, s: &Mat4) -> f64 {
    let mut t = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            t += (q[i * 4 + j] * s[j * 4 + i]).re;
        }
    }
    t
}

/// Re-expresses `v` on ball-local wires.
fn localize(v: &Circuit, ball: &Region) -> Result<Vec<Gate>> {
    v.require_unitary()?;
    let wire = |w: usize| -> Result<usize> {
        let s = v.site_of(w).ok_or(Error::SupportViolation(w))?;
        ball.index_of(s).ok_or(Error::SupportViolation(s))
    };
    let mut out = Vec::new();
    for g in v.layers().iter().flatten() {
        out.push(match g {
            Gate::Unitary2 { wires: [a, b], matrix } => Gate::Unitary2 { wires: [wire(*a)?, wire(*b)?], matrix: *matrix },
            Gate::Unitary1 { wire: w, matrix } => Gate::Unitary1 { wire: wire(*w)?, matrix: *matrix },
            Gate::Reset { .. } => unreachable!(),
        });
    }
    Ok(out)
}

/// `⟨0…0|_A Tr_B(V ρ_AB V†) |0…0⟩_A`.
pub fn inversion_fidelity(v: &Circuit, problem: &InversionProblem) -> Result<f64> {
    let gates = localize(v, &problem.ball)?;
    let mut w = Work::from_rdm(&problem.rdm);
    for g in &gates {
        w.apply_gate(g);
    }
    Ok(w.prob_zero(&problem.a_wires()).clamp(0.0, 1.0))
}

/// Every matching of the ball's lattice edges, smallest first, then in
/// lexicographic order of sorted edge lists.
fn matchings(edges: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    fn rec(edges: &[(usize, usize)], i: usize, used: &mut Vec<usize>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if i == edges.len() {
            out.push(cur.clone());
            return;
        }
        rec(edges, i + 1, used, cur, out);
        let (a, b) = edges[i];
        if !used.contains(&a) && !used.contains(&b) {
            used.extend([a, b]);
            cur.push((a, b));
            rec(edges, i + 1, used, cur, out);
            cur.pop();
            used.truncate(used.len() - 2);
        }
    }
    let mut out = Vec::new();
    rec(edges, 0, &mut Vec::new(), &mut Vec::new(), &mut out);
    out.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    out
}

/// All `d`-tuples of matchings of the lattice edges inside `ball`.
pub fn enumerate_architectures(geom: &LatticeGeometry, ball: &Region, d: usize) -> Result<Vec<Architecture>> {
    if ball.len() > ARCHITECTURE_CAP {
        return Err(Error::ArchitectureCapExceeded { got: ball.len(), cap: ARCHITECTURE_CAP });
    }
    let single = matchings(&geom.edges_within(ball));
    let mut out: Vec<Architecture> = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                single.iter().map(move |m| {
                    let mut a = prefix.clone();
                    a.push(m.clone());
                    a
                })
            })
            .collect();
    }
    Ok(out)
}

/// Maximal matchings of `edges` (local wire pairs), up to `cap` of them,
/// built vertex by vertex in ascending order.
fn maximal_matchings(n: usize, edges: &[(usize, usize)], cap: usize) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj.iter_mut().for_each(|l| l.sort_unstable());
    fn rec(
        v: usize,
        adj: &[Vec<usize>],
        used: &mut Vec<bool>,
        skipped: &mut Vec<usize>,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
        cap: usize,
    ) {
        if out.len() >= cap {
            return;
        }
        if v == adj.len() {
            // maximal: every skipped vertex has all neighbours matched
            if skipped.iter().all(|&s| adj[s].iter().all(|&u| used[u])) {
                let mut m = cur.clone();
                m.sort_unstable();
                out.push(m);
            }
            return;
        }
        if used[v] || adj[v].is_empty() {
            return rec(v + 1, adj, used, skipped, cur, out, cap);
        }
        for &u in &adj[v] {
            if !used[u] && u > v {
                used[v] = true;
                used[u] = true;
                cur.push((v.min(u), v.max(u)));
                rec(v + 1, adj, used, skipped, cur, out, cap);
                cur.pop();
                used[v] = false;
                used[u] = false;
            }
        }
        skipped.push(v);
        rec(v + 1, adj, used, skipped, cur, out, cap);
        skipped.pop();
    }
    let mut out = Vec::new();
    rec(0, &adj, &mut vec![false; n], &mut Vec::new(), &mut Vec::new(), &mut out, cap);
    out
}

fn site_pairs(ball: &Region, local: &[Vec<(usize, usize)>]) -> Architecture {
    local
        .iter()
        .map(|l| l.iter().map(|&(a, b)| (ball.sites()[a], ball.sites()[b])).collect())
        .collect()
}

fn local_edges(geom: &LatticeGeometry, ball: &Region) -> Vec<(usize, usize)> {
    geom.edges_within(ball).iter().map(|&(a, b)| (ball.index_of(a).unwrap(), ball.index_of(b).unwrap())).collect()
}

fn circuit_from_layers(ball: &Region, layers: Vec<Vec<Gate>>) -> Circuit {
    let mut c = Circuit::on_sites(ball.sites());
    for l in layers {
        c.push_layer(l).expect("layers are matchings");
    }
    c
}

/// Searches for a local inversion under `config`.
pub fn find_local_inversion(geom: &LatticeGeometry, problem: &InversionProblem, config: &SearchConfig) -> Result<SearchOutcome> {
    let start = Instant::now();
    let mut outcome = if problem.d == 0 {
        single_site_inversion(problem)?
    } else {
        match config.strategy {
            Strategy::CliffordEnum => clifford_search(geom, problem, config)?,
            Strategy::ContinuousOpt => continuous_search(geom, problem, config)?,
        }
    };
    if config.record_timings {
        let t = Some(start.elapsed().as_secs_f64());
        match &mut outcome {
            SearchOutcome::Success(r) => r.stats.wall_time_s = t,
            SearchOutcome::Failure(f) => f.stats.wall_time_s = t,
        }
    }
    Ok(outcome)
}

/// Depth zero: rotate each site's principal eigenvector to `|0⟩`.
fn single_site_inversion(problem: &InversionProblem) -> Result<SearchOutcome> {
    let a = problem.a_wires();
    let mut gates = Vec::new();
    for &w in &a {
        let m = problem.rdm.partial_trace(&[w])?;
        let (vals, vecs) = linalg::eigh(m.matrix(), 2);
        let k = if vals[0] >= vals[1] { 0 } else { 1 };
        let v = [vecs[k], vecs[2 + k]];
        let u = [v[0].conj(), v[1].conj(), -v[1], v[0]];
        gates.push(Gate::Unitary1 { wire: w, matrix: u });
    }
    let circuit = circuit_from_layers(&problem.ball, vec![gates]);
    let f = inversion_fidelity(&circuit, problem)?;
    let record = InversionRecord {
        region: problem.region.clone(),
        circuit,
        achieved_fidelity: f,
        strategy: Strategy::CliffordEnum,
        architecture: vec![Vec::new()],
        stats: SearchStats { architectures: 1, ..Default::default() },
    };
    Ok(if f >= problem.threshold {
        SearchOutcome::Success(record)
    } else {
        SearchOutcome::Failure(SearchFailure {
            region: problem.region.clone(),
            best_fidelity: f,
            best: Some(record),
            exhaustive: false,
            budget_exhausted: false,
            stats: SearchStats { architectures: 1, ..Default::default() },
        })
    })
}

#[derive(Debug, Clone, Copy)]
enum Choice {
    Idle(usize),
    /// `first` is in `A`; `inner` when `second` is too.
    Gate { first: usize, second: usize, class: usize, inner: bool },
}

enum Dfs {
    Found(Vec<Choice>),
    Exhausted,
    OutOfBudget,
}

struct LastLayer<'a> {
    a: Vec<usize>,
    in_a: Vec<bool>,
    nbrs: Vec<Vec<usize>>,
    threshold: f64,
    budget: u64,
    nodes: u64,
    both: &'a [ProjectorClass],
    first: &'a [ProjectorClass],
}

impl<'a> LastLayer<'a> {
    fn new(n_ball: usize, a: Vec<usize>, edges: &[(usize, usize)], threshold: f64, budget: u64) -> Self {
        let mut in_a = vec![false; n_ball];
        a.iter().for_each(|&w| in_a[w] = true);
        let mut nbrs = vec![Vec::new(); n_ball];
        for &(x, y) in edges {
            nbrs[x].push(y);
            nbrs[y].push(x);
        }
        nbrs.iter_mut().for_each(|l| l.sort_unstable());
        let t = clifford::tables();
        LastLayer { a, in_a, nbrs, threshold, budget, nodes: 0, both: &t.both_zero, first: &t.first_zero }
    }

    fn classes(&self, inner: bool) -> &'a [ProjectorClass] {
        if inner {
            self.both
        } else {
            self.first
        }
    }

    /// Options at A-site `w`, each with the projected state, in search order.
    fn options(&mut self, w: usize, used: &[bool], state: &Work) -> Vec<(Choice, f64)> {
        let mut out = Vec::new();
        let mut idle = state.clone();
        idle.project_zero(&[w]);
        self.nodes += 1;
        out.push((Choice::Idle(w), idle.norm_sqr()));
        for &p in &self.nbrs[w] {
            if used[p] {
                continue;
            }
            let inner = self.in_a[p];
            let sigma = state.marginal2(w, p);
            let classes = self.classes(inner);
            self.nodes += classes.len() as u64;
            for (c, cls) in classes.iter().enumerate() {
                out.push((Choice::Gate { first: w, second: p, class: c, inner }, trace_product(&cls.projector, &sigma)));
            }
        }
        out
    }

    fn apply(&self, choice: Choice, state: &mut Work) {
        match choice {
            Choice::Idle(w) => state.project_zero(&[w]),
            Choice::Gate { first, second, class, inner } => {
                state.apply2(first, second, &self.classes(inner)[class].projector)
            }
        }
    }

    fn mark(choice: Choice, used: &mut [bool], on: bool) {
        match choice {
            Choice::Idle(w) => used[w] = on,
            Choice::Gate { first, second, .. } => {
                used[first] = on;
                used[second] = on;
            }
        }
    }

    fn dfs(&mut self, pos: usize, used: &mut Vec<bool>, state: &Work, chosen: &mut Vec<Choice>) -> Dfs {
        let mut pos = pos;
        while pos < self.a.len() && used[self.a[pos]] {
            pos += 1;
        }
        if pos == self.a.len() {
            return Dfs::Found(chosen.clone());
        }
        if self.nodes > self.budget {
            return Dfs::OutOfBudget;
        }
        let w = self.a[pos];
        let mut out_of_budget = false;
        for (choice, f) in self.options(w, used, state) {
            if f < self.threshold {
                continue;
            }
            let mut next = state.clone();
            self.apply(choice, &mut next);
            Self::mark(choice, used, true);
            chosen.push(choice);
            let r = self.dfs(pos + 1, used, &next, chosen);
            chosen.pop();
            Self::mark(choice, used, false);
            match r {
                Dfs::Found(c) => return Dfs::Found(c),
                Dfs::OutOfBudget => {
                    out_of_budget = true;
                    break;
                }
                Dfs::Exhausted => {}
            }
        }
        if out_of_budget {
            Dfs::OutOfBudget
        } else {
            Dfs::Exhausted
        }
    }

    /// Picks the best option at every site in turn.
    fn greedy(&mut self, state: &Work) -> (Vec<Choice>, f64) {
        let mut used = vec![false; self.in_a.len()];
        let mut state = state.clone();
        let mut chosen = Vec::new();
        for pos in 0..self.a.len() {
            let w = self.a[pos];
            if used[w] {
                continue;
            }
            let opts = self.options(w, &used, &state);
            let (choice, _) = opts
                .into_iter()
                .fold(None, |best: Option<(Choice, f64)>, o| match best {
                    Some(b) if b.1 >= o.1 => Some(b),
                    _ => Some(o),
                })
                .expect("idle is always an option");
            self.apply(choice, &mut state);
            Self::mark(choice, &mut used, true);
            chosen.push(choice);
        }
        let f = state.norm_sqr();
        (chosen, f)
    }

    fn gates(&self, choices: &[Choice]) -> Vec<Gate> {
        choices
            .iter()
            .filter_map(|c| match *c {
                Choice::Gate { first, second, class, inner } => Some(Gate::Unitary2 {
                    wires: [first, second],
                    matrix: self.classes(inner)[class].representative,
                }),
                Choice::Idle(_) => None,
            })
            .collect()
    }
}

/// Clifford inversions. Depth one is the projector-class search; deeper
/// budgets enumerate Clifford prefixes on ball matchings and finish each
/// with the depth-one search.
fn clifford_search(geom: &LatticeGeometry, problem: &InversionProblem, config: &SearchConfig) -> Result<SearchOutcome> {
    let ball = &problem.ball;
    let edges = local_edges(geom, ball);
    let a = problem.a_wires();
    let base = Work::from_rdm(&problem.rdm);
    let threshold = problem.threshold;
    let d = problem.d;

    let prefixes: Vec<Vec<Vec<(usize, usize)>>> = if d == 1 {
        vec![Vec::new()]
    } else {
        let arch = enumerate_architectures(geom, ball, d - 1)?;
        arch.into_iter()
            .map(|layers| {
                layers.iter().map(|l| l.iter().map(|&(x, y)| (ball.index_of(x).unwrap(), ball.index_of(y).unwrap())).collect()).collect()
            })
            .collect()
    };
    let elements = &clifford::tables().elements;
    let mut nodes = 0u64;
    let mut best: Option<(f64, Vec<Vec<Gate>>)> = None;
    let mut budget_hit = false;
    let mut n_prefix_arch = 0;

    'arch: for prefix in &prefixes {
        n_prefix_arch += 1;
        let slots: Vec<(usize, usize)> = prefix.iter().flatten().copied().collect();
        let layer_of: Vec<usize> = prefix.iter().enumerate().flat_map(|(i, l)| std::iter::repeat_n(i, l.len())).collect();
        let mut odometer = vec![0usize; slots.len()];
        loop {
            let mut state = base.clone();
            let mut prefix_layers = vec![Vec::new(); d - 1];
            for (s, (&(x, y), &e)) in slots.iter().zip(&odometer).enumerate() {
                state.apply2(x, y, &elements[e]);
                prefix_layers[layer_of[s]].push(Gate::Unitary2 { wires: [x, y], matrix: elements[e] });
            }
            let remaining = config.node_budget.saturating_sub(nodes);
            let mut last = LastLayer::new(ball.len(), a.clone(), &edges, threshold, remaining);
            let r = last.dfs(0, &mut vec![false; ball.len()], &state, &mut Vec::new());
            nodes += last.nodes;
            match r {
                Dfs::Found(choices) => {
                    let mut layers = prefix_layers;
                    layers.push(last.gates(&choices));
                    let circuit = compact_front(ball, layers);
                    let f = inversion_fidelity(&circuit, problem)?;
                    let architecture = architecture_of(ball, &circuit);
                    return Ok(SearchOutcome::Success(InversionRecord {
                        region: problem.region.clone(),
                        circuit,
                        achieved_fidelity: f,
                        strategy: Strategy::CliffordEnum,
                        architecture,
                        stats: SearchStats { restarts: 0, iterations: 0, nodes, architectures: n_prefix_arch, wall_time_s: None },
                    }));
                }
                Dfs::OutOfBudget => {
                    budget_hit = true;
                }
                Dfs::Exhausted => {}
            }
            // best-effort candidate for the failure report
            if best.is_none() || budget_hit {
                let mut g = LastLayer::new(ball.len(), a.clone(), &edges, threshold, u64::MAX);
                let (choices, f) = g.greedy(&state);
                nodes += g.nodes;
                if best.as_ref().is_none_or(|b| f > b.0) {
                    let mut layers = prefix_layers.clone();
                    layers.push(g.gates(&choices));
                    best = Some((f, layers));
                }
            }
            if budget_hit || nodes > config.node_budget {
                budget_hit = true;
                break 'arch;
            }
            // advance the odometer over Clifford assignments
            let mut i = 0;
            loop {
                if i == odometer.len() {
                    continue 'arch;
                }
                odometer[i] += 1;
                if odometer[i] < elements.len() {
                    break;
                }
                odometer[i] = 0;
                i += 1;
            }
        }
    }
    let (_, layers) = best.expect("at least one prefix is tried");
    let circuit = compact_front(ball, layers);
    let f = inversion_fidelity(&circuit, problem)?;
    let stats = SearchStats { restarts: 0, iterations: 0, nodes, architectures: n_prefix_arch, wall_time_s: None };
    let architecture = architecture_of(ball, &circuit);
    Ok(SearchOutcome::Failure(SearchFailure {
        region: problem.region.clone(),
        best_fidelity: f,
        best: Some(InversionRecord {
            region: problem.region.clone(),
            circuit,
            achieved_fidelity: f,
            strategy: Strategy::CliffordEnum,
            architecture,
            stats: stats.clone(),
        }),
        exhaustive: !budget_hit,
        budget_exhausted: budget_hit,
        stats,
    }))
}

fn compact_front(ball: &Region, layers: Vec<Vec<Gate>>) -> Circuit {
    circuit_from_layers(ball, layers.into_iter().filter(|l| !l.is_empty()).collect())
}

fn architecture_of(ball: &Region, c: &Circuit) -> Architecture {
    c.layers()
        .iter()
        .map(|l| {
            l.iter()
                .filter_map(|g| match g {
                    Gate::Unitary2 { wires: [a, b], .. } => {
                        let (x, y) = (ball.sites()[*a], ball.sites()[*b]);
                        Some((x.min(y), x.max(y)))
                    }
                    _ => None,
                })
                .collect()
        })
        .collect()
}

/// Architectures searched by `continuous_opt`.
fn continuous_architectures(geom: &LatticeGeometry, problem: &InversionProblem) -> Vec<Vec<Vec<(usize, usize)>>> {
    let ball = &problem.ball;
    let edges = local_edges(geom, ball);
    if problem.d == 1 {
        let a = problem.a_wires();
        let touching: Vec<(usize, usize)> =
            edges.iter().copied().filter(|(x, y)| a.contains(x) || a.contains(y)).collect();
        maximal_matchings(ball.len(), &touching, MAX_CONTINUOUS_ARCHITECTURES).into_iter().map(|m| vec![m]).collect()
    } else {
        // brickworks over the ball, one per starting matching class
        let k = geom.k();
        (0..2 * k)
            .map(|offset| {
                let c = crate::reconstruction::brickwork_from(geom, ball, problem.d, offset);
                c.layers()
                    .iter()
                    .map(|l| l.iter().map(|g| { let w = g.wires(); (w[0], w[1]) }).collect())
                    .collect()
            })
            .collect()
    }
}

/// Alternating refit: with target `|0_A⟩|φ⟩`, `φ` the normalized
/// projection of the current output, each gate becomes the unitary that
/// maximizes its linear overlap with the target given all other gates.
fn refit(base: &Work, a: &[usize], seq: &[(usize, usize)], gates: &mut [Mat4], max_iters: usize, threshold: f64) -> (f64, usize) {
    let run = |gates: &[Mat4]| {
        let mut s = base.clone();
        for (&(x, y), g) in seq.iter().zip(gates) {
            s.apply2(x, y, g);
        }
        s
    };
    let mut out = run(gates);
    let mut f = out.prob_zero(a);
    let mut iters = 0;
    while iters < max_iters && f < threshold && !seq.is_empty() {
        iters += 1;
        let mut target = out.clone();
        target.project_zero(a);
        let norm = target.norm_sqr().sqrt();
        if norm < 1e-300 {
            break;
        }
        target.amps.iter_mut().for_each(|z| *z /= norm);
        for k in 0..seq.len() {
            let mut before = base.clone();
            for j in 0..k {
                before.apply2(seq[j].0, seq[j].1, &gates[j]);
            }
            let mut after = target.clone();
            for j in (k + 1..seq.len()).rev() {
                after.apply2(seq[j].0, seq[j].1, &linalg::to_mat4(&linalg::dagger(&gates[j], 4)));
            }
            let env = Work::environment(&before, &after, seq[k].0, seq[k].1);
            gates[k] = linalg::to_mat4(&linalg::maximizing_unitary(&env, 4));
        }
        out = run(gates);
        let next = out.prob_zero(a);
        let gain = next - f;
        f = next;
        if gain < 1e-13 {
            break;
        }
    }
    (f, iters)
}

fn continuous_search(geom: &LatticeGeometry, problem: &InversionProblem, config: &SearchConfig) -> Result<SearchOutcome> {
    let ball = &problem.ball;
    let archs = continuous_architectures(geom, problem);
    let a = problem.a_wires();
    let base = Work::from_rdm(&problem.rdm);
    let threshold = problem.threshold;
    let mut best: Option<(f64, usize, Vec<Mat4>)> = None;
    let mut iterations = 0;
    let mut restarts_done = 0;
    for restart in 0..config.restarts.max(1) {
        restarts_done += 1;
        let results: Vec<(f64, usize, Vec<Mat4>)> = archs
            .par_iter()
            .enumerate()
            .map(|(ai, arch)| {
                let seq: Vec<(usize, usize)> = arch.iter().flatten().copied().collect();
                let mut rng = derived_rng(config.seed, (restart * archs.len() + ai) as u64);
                let mut gates: Vec<Mat4> = seq
                    .iter()
                    .map(|_| if restart == 0 { linalg::identity4() } else { linalg::to_mat4(&linalg::haar_unitary(4, &mut rng)) })
                    .collect();
                let (f, it) = refit(&base, &a, &seq, &mut gates, config.max_iters, threshold);
                (f, it, gates)
            })
            .collect();
        for (ai, (f, it, gates)) in results.into_iter().enumerate() {
            iterations += it;
            if best.as_ref().is_none_or(|b| f > b.0) {
                best = Some((f, ai, gates));
            }
        }
        if best.as_ref().is_some_and(|b| b.0 >= threshold) {
            break;
        }
    }
    let (_, ai, gates) = best.expect("at least one restart");
    let mut gi = gates.into_iter();
    let layers: Vec<Vec<Gate>> = archs[ai]
        .iter()
        .map(|l| l.iter().map(|&(x, y)| Gate::Unitary2 { wires: [x, y], matrix: gi.next().unwrap() }).collect())
        .collect();
    let circuit = circuit_from_layers(ball, layers);
    let f = inversion_fidelity(&circuit, problem)?;
    let stats = SearchStats { restarts: restarts_done, iterations, nodes: 0, architectures: archs.len(), wall_time_s: None };
    let record = InversionRecord {
        region: problem.region.clone(),
        architecture: site_pairs(ball, &archs[ai]),
        circuit,
        achieved_fidelity: f,
        strategy: Strategy::ContinuousOpt,
        stats: stats.clone(),
    };
    Ok(if f >= threshold {
        SearchOutcome::Success(record)
    } else {
        SearchOutcome::Failure(SearchFailure {
            region: problem.region.clone(),
            best_fidelity: f,
            best: Some(record),
            exhaustive: false,
            budget_exhausted: true,
            stats,
        })
    })
}

/// The lightcone inversion of `region` for `u|0⟩`: the gates of `u`'s
/// forward lightcone from `region`, daggered, on `ball(region, depth(u))`.
pub fn lightcone_inversion(geom: &LatticeGeometry, u: &Circuit, region: &Region) -> Result<Circuit> {
    let cone = forward_lightcone(u, region)?;
    let b = ball(geom, region, u.depth())?;
    let mut layers = vec![Vec::new(); u.depth()];
    for &(t, i) in &cone.gates {
        let g = &u.layers()[t][i];
        let w = |x: usize| -> Result<usize> {
            let s = u.site_of(x).ok_or(Error::SupportViolation(x))?;
            b.index_of(s).ok_or(Error::SupportViolation(s))
        };
        layers[t].push(match g {
            Gate::Unitary2 { wires: [x, y], matrix } => Gate::Unitary2 { wires: [w(*x)?, w(*y)?], matrix: *matrix },
            Gate::Unitary1 { wire, matrix } => Gate::Unitary1 { wire: w(*wire)?, matrix: *matrix },
            Gate::Reset { .. } => unreachable!("forward cones need unitary circuits"),
        });
    }
    let forward = Circuit::new(b.len(), layers, Some(b.sites().iter().map(|&s| Some(s)).collect()))?;
    forward.dagger()
}
