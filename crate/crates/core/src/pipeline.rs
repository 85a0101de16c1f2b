//! End-to-end learning and the low/high complexity tester.
//!
//! `learn` builds a lattice covering scheme, collects the state on the
//! `d`-ball of every subset, searches for local inversions, stacks them into
//! the reconstruction process and reads the learned circuit off its
//! backward lightcone.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{backward_lightcone, Circuit, Gate};
use crate::covering::{default_separation, lattice_covering, CoveringScheme, ValidationReport};
use crate::error::{Error, Result};
use crate::inversion::{find_local_inversion, InversionProblem, SearchConfig, SearchOutcome};
use crate::json::{check_schema, SCHEMA_VERSION};
use crate::lattice::{ball, LatticeGeometry, Region};
use crate::linalg::C64;
use crate::reconstruction::{build_reconstruction, extract_learned_circuit, InversionMap, LearnedCircuit};
use crate::shadows::{estimate_rdm, sample_shadows, ShadowDataset};
use crate::simulator::{prepare, DensityMatrix, SimLimits, StateVector};

/// `ε² / (48 n²)`: the per-subset inversion error that keeps the learned
/// state within trace distance `ε`.
pub fn error_budget(epsilon: f64, n: usize) -> f64 {
    epsilon * epsilon / (48.0 * (n as f64) * (n as f64))
}

/// Access to the unknown state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSource {
    /// A simulated device running a circuit the learner does not see.
    HiddenCircuit { circuit: Circuit },
    ExplicitState {
        n: usize,
        #[serde(with = "amplitudes")]
        amplitudes: Vec<C64>,
    },
}

mod amplitudes {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(a: &[C64], s: S) -> Result<S::Ok, S::Error> {
        a.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let v: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

impl StateSource {
    pub fn explicit(psi: &StateVector) -> Self {
        StateSource::ExplicitState { n: psi.n_wires(), amplitudes: psi.amplitudes().to_vec() }
    }

    pub fn n_wires(&self) -> usize {
        match self {
            StateSource::HiddenCircuit { circuit } => circuit.n_wires(),
            StateSource::ExplicitState { n, .. } => *n,
        }
    }

    /// The full state. Exponential in the number of sites.
    pub fn state(&self, limits: &SimLimits) -> Result<StateVector> {
        match self {
            StateSource::HiddenCircuit { circuit } => prepare(circuit, limits),
            StateSource::ExplicitState { n, amplitudes } => StateVector::from_amplitudes(*n, amplitudes.clone()),
        }
    }

    /// Exact marginal on `sites` (ascending). A hidden circuit is simulated
    /// only on the backward lightcone of `sites`.
    pub fn exact_rdm(&self, sites: &[usize], limits: &SimLimits) -> Result<DensityMatrix> {
        match self {
            StateSource::ExplicitState { .. } => self.state(limits)?.partial_trace(sites),
            StateSource::HiddenCircuit { circuit } => {
                circuit.require_unitary()?;
                let mask = backward_lightcone(circuit, sites)?;
                let mut wires: Vec<usize> = sites.to_vec();
                for &(t, i) in &mask.selected {
                    wires.extend(circuit.layers()[t][i].wires());
                }
                wires.sort_unstable();
                wires.dedup();
                let local = |w: usize| wires.binary_search(&w).expect("collected above");
                let mut layers = vec![Vec::new(); circuit.depth()];
                for &(t, i) in &mask.selected {
                    layers[t].push(match &circuit.layers()[t][i] {
                        Gate::Unitary2 { wires: [a, b], matrix } => Gate::Unitary2 { wires: [local(*a), local(*b)], matrix: *matrix },
                        Gate::Unitary1 { wire, matrix } => Gate::Unitary1 { wire: local(*wire), matrix: *matrix },
                        Gate::Reset { .. } => unreachable!(),
                    });
                }
                let cone = Circuit::new(wires.len(), layers, None)?;
                let psi = prepare(&cone, limits)?;
                let keep: Vec<usize> = sites.iter().map(|&s| local(s)).collect();
                psi.partial_trace(&keep)
            }
        }
    }
}

/// Public half of an instance: what the learner may read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemRepr", into = "ProblemRepr")]
pub struct Problem {
    pub dims: Vec<usize>,
    pub d: usize,
    pub device: StateSource,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemRepr {
    schema: String,
    dims: Vec<usize>,
    d: usize,
    device: StateSource,
}

impl TryFrom<ProblemRepr> for Problem {
    type Error = Error;
    fn try_from(r: ProblemRepr) -> Result<Self> {
        check_schema(&r.schema)?;
        Ok(Problem { dims: r.dims, d: r.d, device: r.device })
    }
}

impl From<Problem> for ProblemRepr {
    fn from(p: Problem) -> Self {
        ProblemRepr { schema: SCHEMA_VERSION.into(), dims: p.dims, d: p.d, device: p.device }
    }
}

impl Problem {
    pub fn geometry(&self) -> Result<LatticeGeometry> {
        let g = LatticeGeometry::new(self.dims.clone())?;
        if g.n_sites() != self.device.n_wires() {
            return Err(Error::DimensionMismatch { expected: g.n_sites(), got: self.device.n_wires() });
        }
        Ok(g)
    }
}

/// Grading half of an instance: the true state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SecretRepr", into = "SecretRepr")]
pub struct Secret {
    pub dims: Vec<usize>,
    pub truth: StateSource,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecretRepr {
    schema: String,
    dims: Vec<usize>,
    truth: StateSource,
}

impl TryFrom<SecretRepr> for Secret {
    type Error = Error;
    fn try_from(r: SecretRepr) -> Result<Self> {
        check_schema(&r.schema)?;
        Ok(Secret { dims: r.dims, truth: r.truth })
    }
}

impl From<Secret> for SecretRepr {
    fn from(s: Secret) -> Self {
        SecretRepr { schema: SCHEMA_VERSION.into(), dims: s.dims, truth: s.truth }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RdmMode {
    Exact,
    /// Classical shadows with `m` snapshots.
    Shadows { m: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    #[serde(default = "schema_v1")]
    pub schema: String,
    pub d: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_rdm_mode")]
    pub rdm_mode: RdmMode,
    pub search: SearchConfig,
    /// Coloring separation; overrides `l_factor`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<usize>,
    /// Separation `ceil(L · (3k)^{k+1} · d)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_factor: Option<f64>,
    /// Search threshold; defaults to the search config's in exact mode and
    /// to `1 − 3ε₁` with shadows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon1: Option<f64>,
    /// Seeds shadow sampling.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub record_timings: bool,
    /// Keep searching after a subset fails (learn only).
    #[serde(default = "yes")]
    pub continue_on_failure: bool,
    #[serde(default)]
    pub limits: LimitsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    #[serde(default = "default_pure")]
    pub max_pure_wires: usize,
    #[serde(default = "default_dense")]
    pub max_dense_wires: usize,
    #[serde(default = "default_rdm")]
    pub max_rdm_wires: usize,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        let l = SimLimits::default();
        LimitsConfig { max_pure_wires: l.max_pure_wires, max_dense_wires: l.max_dense_wires, max_rdm_wires: l.max_rdm_wires }
    }
}

impl From<LimitsConfig> for SimLimits {
    fn from(l: LimitsConfig) -> Self {
        SimLimits { max_pure_wires: l.max_pure_wires, max_dense_wires: l.max_dense_wires, max_rdm_wires: l.max_rdm_wires }
    }
}

fn default_pure() -> usize {
    SimLimits::default().max_pure_wires
}
fn default_dense() -> usize {
    SimLimits::default().max_dense_wires
}
fn default_rdm() -> usize {
    SimLimits::default().max_rdm_wires
}
fn schema_v1() -> String {
    SCHEMA_VERSION.into()
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_delta() -> f64 {
    0.05
}
fn default_rdm_mode() -> RdmMode {
    RdmMode::Exact
}
fn yes() -> bool {
    true
}

impl LearnConfig {
    pub fn new(d: usize, search: SearchConfig) -> Self {
        LearnConfig {
            schema: schema_v1(),
            d,
            epsilon: default_epsilon(),
            delta: default_delta(),
            rdm_mode: RdmMode::Exact,
            search,
            separation: None,
            l_factor: None,
            threshold: None,
            epsilon1: None,
            seed: 0,
            record_timings: false,
            continue_on_failure: true,
            limits: LimitsConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(&self.schema)?;
        if !(self.epsilon > 0.0 && self.epsilon <= 2.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 2], got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidConfig(format!("threshold must lie in [0, 1], got {t}")));
            }
        }
        if let Some(l) = self.l_factor {
            if !(l > 0.0) {
                return Err(Error::InvalidConfig(format!("l_factor must be positive, got {l}")));
            }
        }
        if self.separation == Some(0) {
            return Err(Error::InvalidConfig("separation must be positive".into()));
        }
        if let RdmMode::Shadows { m: 0 } = self.rdm_mode {
            return Err(Error::InvalidConfig("shadow mode needs at least one snapshot".into()));
        }
        Ok(())
    }

    /// The coloring separation used for a `k`-dimensional lattice.
    pub fn separation_for(&self, k: usize) -> usize {
        if let Some(r) = self.separation {
            return r;
        }
        match self.l_factor {
            Some(l) => ((l * ((3 * k) as f64).powi(k as i32 + 1) * self.d as f64).ceil() as usize).max(1),
            None => default_separation(k, self.d),
        }
    }

    pub fn epsilon1(&self, n: usize) -> f64 {
        self.epsilon1.unwrap_or_else(|| error_budget(self.epsilon, n))
    }

    pub fn search_threshold(&self, n: usize) -> f64 {
        self.threshold.unwrap_or(match self.rdm_mode {
            RdmMode::Exact => self.search.threshold,
            RdmMode::Shadows { .. } => 1.0 - 3.0 * self.epsilon1(n),
        })
    }
}

/// One subset's search, in scheme order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub layer: usize,
    pub index: usize,
    pub region: Region,
    pub ball: Region,
    pub outcome: SearchOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub rdm_and_search_s: f64,
    pub reconstruction_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LearnReportRepr", into = "LearnReportRepr")]
pub struct LearnReport {
    pub learned: LearnedCircuit,
    pub scheme: CoveringScheme,
    pub validation: ValidationReport,
    pub per_subset: Vec<SubsetReport>,
    pub epsilon1: f64,
    pub threshold: f64,
    /// Replacement processes in the reconstruction.
    pub processes: usize,
    /// `4T√(1 − threshold)`; equals `4T√(3ε₁)` at the default shadow
    /// threshold.
    pub predicted_error_bound: f64,
    /// `4T√ε` with `ε` the worst achieved infidelity.
    pub achieved_error_bound: f64,
    pub measured_fidelity: Option<f64>,
    pub timings: Option<Timings>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnReportRepr {
    schema: String,
    learned: LearnedCircuit,
    scheme: CoveringScheme,
    validation: ValidationReport,
    per_subset: Vec<SubsetReport>,
    epsilon1: f64,
    threshold: f64,
    processes: usize,
    predicted_error_bound: f64,
    achieved_error_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    measured_fidelity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timings: Option<Timings>,
}

impl TryFrom<LearnReportRepr> for LearnReport {
    type Error = Error;
    fn try_from(r: LearnReportRepr) -> Result<Self> {
        check_schema(&r.schema)?;
        Ok(LearnReport {
            learned: r.learned,
            scheme: r.scheme,
            validation: r.validation,
            per_subset: r.per_subset,
            epsilon1: r.epsilon1,
            threshold: r.threshold,
            processes: r.processes,
            predicted_error_bound: r.predicted_error_bound,
            achieved_error_bound: r.achieved_error_bound,
            measured_fidelity: r.measured_fidelity,
            timings: r.timings,
        })
    }
}

impl From<LearnReport> for LearnReportRepr {
    fn from(r: LearnReport) -> Self {
        LearnReportRepr {
            schema: SCHEMA_VERSION.into(),
            learned: r.learned,
            scheme: r.scheme,
            validation: r.validation,
            per_subset: r.per_subset,
            epsilon1: r.epsilon1,
            threshold: r.threshold,
            processes: r.processes,
            predicted_error_bound: r.predicted_error_bound,
            achieved_error_bound: r.achieved_error_bound,
            measured_fidelity: r.measured_fidelity,
            timings: r.timings,
        }
    }
}

/// Builds and validates the scheme `config` asks for.
pub fn build_scheme(geom: &LatticeGeometry, config: &LearnConfig) -> Result<(CoveringScheme, ValidationReport)> {
    let r = config.separation_for(geom.k());
    let (scheme, report) = lattice_covering(geom, r, config.d)?;
    if !report.is_valid() {
        return Err(Error::InvalidScheme(format!(
            "separation {r} at d = {} gives small_balls={}, disjoint_layers={}, covered={}",
            config.d, report.small_balls.passed, report.disjoint_layers.passed, report.covered.passed
        )));
    }
    Ok((scheme, report))
}

enum Rdms {
    Exact,
    Shadows(ShadowDataset),
}

struct SearchPhase {
    scheme: CoveringScheme,
    validation: ValidationReport,
    reports: Vec<SubsetReport>,
    skipped: Vec<(usize, usize)>,
    epsilon1: f64,
    threshold: f64,
}

fn search_all(source: &StateSource, geom: &LatticeGeometry, config: &LearnConfig, abort_on_failure: bool) -> Result<SearchPhase> {
    config.validate()?;
    let n = geom.n_sites();
    if source.n_wires() != n {
        return Err(Error::DimensionMismatch { expected: n, got: source.n_wires() });
    }
    let limits: SimLimits = config.limits.into();
    let (scheme, validation) = build_scheme(geom, config)?;
    let epsilon1 = config.epsilon1(n);
    let threshold = config.search_threshold(n);
    let rdms = match config.rdm_mode {
        RdmMode::Exact => Rdms::Exact,
        RdmMode::Shadows { m } => Rdms::Shadows(sample_shadows(&source.state(&limits)?, m, config.seed)?),
    };
    let subsets: Vec<(usize, usize, Region)> = scheme.subsets().map(|(i, j, s)| (i, j, s.clone())).collect();
    let first_failure = AtomicUsize::new(usize::MAX);
    let results: Vec<Option<Result<SubsetReport>>> = subsets
        .par_iter()
        .enumerate()
        .map(|(idx, (i, j, s))| {
            if abort_on_failure && idx > first_failure.load(Ordering::Relaxed) {
                return None;
            }
            let run = || -> Result<SubsetReport> {
                let b = ball(geom, s, config.d)?;
                let rdm = match &rdms {
                    Rdms::Exact => source.exact_rdm(b.sites(), &limits)?,
                    Rdms::Shadows(data) => estimate_rdm(data, b.sites(), &limits)?,
                };
                let problem = InversionProblem::new(geom, s.clone(), config.d, rdm, threshold)?;
                let outcome = find_local_inversion(geom, &problem, &config.search)?;
                Ok(SubsetReport { layer: *i, index: *j, region: s.clone(), ball: b, outcome })
            };
            let r = run();
            if !matches!(&r, Ok(rep) if rep.outcome.is_success()) {
                first_failure.fetch_min(idx, Ordering::Relaxed);
            }
            Some(r)
        })
        .collect();
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    let mut failed = false;
    for ((i, j, _), r) in subsets.iter().zip(results) {
        if abort_on_failure && failed {
            skipped.push((*i, *j));
            continue;
        }
        let rep = r.expect("subsets before the first failure always run")?;
        failed |= !rep.outcome.is_success();
        reports.push(rep);
    }
    Ok(SearchPhase { scheme, validation, reports, skipped, epsilon1, threshold })
}

fn assemble(geom: &LatticeGeometry, phase: &SearchPhase) -> Result<(LearnedCircuit, usize, f64)> {
    let mut map = InversionMap::new();
    let mut worst: f64 = 0.0;
    for rep in &phase.reports {
        if let SearchOutcome::Success(r) = &rep.outcome {
            map.insert((rep.layer, rep.index), r.circuit.clone());
            worst = worst.max(1.0 - r.achieved_fidelity);
        }
    }
    let w = build_reconstruction(geom, &phase.scheme, &map)?;
    let learned = extract_learned_circuit(&w)?;
    Ok((learned, w.process_count(), worst.max(0.0)))
}

/// Runs the whole learning procedure. Fails with `InversionFailed` naming
/// every subset without an inversion at the threshold.
pub fn learn(source: &StateSource, geom: &LatticeGeometry, config: &LearnConfig) -> Result<LearnReport> {
    let start = Instant::now();
    let phase = search_all(source, geom, config, !config.continue_on_failure)?;
    let searched = start.elapsed().as_secs_f64();
    let failures: Vec<&SubsetReport> = phase.reports.iter().filter(|r| !r.outcome.is_success()).collect();
    if !failures.is_empty() {
        return Err(Error::InversionFailed {
            subsets: failures.iter().map(|r| (r.layer, r.index)).collect(),
            best_fidelity: failures.iter().map(|r| r.outcome.best_fidelity()).fold(f64::INFINITY, f64::min),
        });
    }
    let (learned, t, worst) = assemble(geom, &phase)?;
    let total = start.elapsed().as_secs_f64();
    let tf = t as f64;
    Ok(LearnReport {
        learned,
        scheme: phase.scheme,
        validation: phase.validation,
        per_subset: phase.reports,
        epsilon1: phase.epsilon1,
        threshold: phase.threshold,
        processes: t,
        predicted_error_bound: 4.0 * tf * (1.0 - phase.threshold).max(0.0).sqrt(),
        achieved_error_bound: 4.0 * tf * worst.sqrt(),
        measured_fidelity: None,
        timings: config.record_timings.then(|| Timings {
            rdm_and_search_s: searched,
            reconstruction_s: total - searched,
            total_s: total,
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub schema: String,
    /// `⟨ψ|ρ|ψ⟩` for the learned system marginal `ρ`.
    pub fidelity: f64,
    /// `2(1 − F) ≤ ‖ρ − ψ‖₁`.
    pub trace_distance_lower: f64,
    /// `‖ρ − ψ‖₁ ≤ 2√(1 − F)`.
    pub trace_distance_upper: f64,
    pub predicted_error_bound: f64,
    /// The lower bound does not exceed the prediction.
    pub consistent: bool,
}

/// Scores a report against the true state.
pub fn score(report: &LearnReport, truth: &StateVector, limits: &SimLimits) -> Result<Score> {
    let f = report.learned.fidelity_with(truth, limits)?.clamp(0.0, 1.0);
    let lower = 2.0 * (1.0 - f);
    Ok(Score {
        schema: SCHEMA_VERSION.into(),
        fidelity: f,
        trace_distance_lower: lower,
        trace_distance_upper: 2.0 * (1.0 - f).sqrt(),
        predicted_error_bound: report.predicted_error_bound,
        consistent: lower <= report.predicted_error_bound + 1e-12,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    LowComplexity,
    HighComplexity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub schema: String,
    pub verdict: Verdict,
    pub threshold: f64,
    /// Searches up to and including the first failure.
    pub evidence: Vec<SubsetReport>,
    /// Subsets not searched once the verdict was fixed.
    pub skipped: Vec<(usize, usize)>,
    /// The circuit certifying a low verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learned: Option<LearnedCircuit>,
}

/// Low complexity iff every subset has an inversion at the threshold.
pub fn test_complexity(source: &StateSource, geom: &LatticeGeometry, config: &LearnConfig) -> Result<TestReport> {
    let phase = search_all(source, geom, config, true)?;
    let low = phase.skipped.is_empty() && phase.reports.iter().all(|r| r.outcome.is_success());
    let learned = if low { Some(assemble(geom, &phase)?.0) } else { None };
    Ok(TestReport {
        schema: SCHEMA_VERSION.into(),
        verdict: if low { Verdict::LowComplexity } else { Verdict::HighComplexity },
        threshold: phase.threshold,
        evidence: phase.reports,
        skipped: phase.skipped,
        learned,
    })
}
