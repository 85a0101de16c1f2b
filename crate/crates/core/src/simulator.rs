//! Exact dense simulation: pure states under unitary circuits, density
//! matrices under circuits with resets, partial traces and distances.
//!
//! Wire 0 is the most significant bit of a basis index.

use rayon::prelude::*;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Mat4, C64, ONE, ZERO};

const NORM_TOL: f64 = 1e-9;
/// Below this many amplitudes a gate is applied on one thread.
const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimLimits {
    pub max_pure_wires: usize,
    pub max_dense_wires: usize,
    /// Largest region `estimate_rdm` accepts.
    pub max_rdm_wires: usize,
}

impl Default for SimLimits {
    fn default() -> Self {
        SimLimits { max_pure_wires: 24, max_dense_wires: 12, max_rdm_wires: 12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_wires: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zero(n_wires: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_wires];
        amps[0] = ONE;
        StateVector { n_wires, amps }
    }

    pub fn from_amplitudes(n_wires: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1 << n_wires {
            return Err(Error::DimensionMismatch { expected: 1 << n_wires, got: amps.len() });
        }
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(StateVector { n_wires, amps })
    }

    /// `(|0…0⟩ + |1…1⟩)/√2`.
    pub fn ghz(n_wires: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_wires];
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[0] = h;
        amps[(1 << n_wires) - 1] = h;
        StateVector { n_wires, amps }
    }

    pub fn random<R: rand::Rng + ?Sized>(n_wires: usize, rng: &mut R) -> Self {
        use rand_distr::StandardNormal;
        let mut amps: Vec<C64> = (0..1usize << n_wires)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|z| *z /= norm);
        StateVector { n_wires, amps }
    }

    pub fn n_wires(&self) -> usize {
        self.n_wires
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.n_wires != other.n_wires {
            return Err(Error::DimensionMismatch { expected: self.n_wires, got: other.n_wires });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// `self ⊗ other`, with `self` on the leading wires.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector { n_wires: self.n_wires + other.n_wires, amps }
    }

    pub fn to_density(&self) -> DensityMatrix {
        let dim = self.amps.len();
        let mut m = vec![ZERO; dim * dim];
        m.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
            let ai = self.amps[i];
            for (j, x) in row.iter_mut().enumerate() {
                *x = ai * self.amps[j].conj();
            }
        });
        DensityMatrix { n_wires: self.n_wires, matrix: m }
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        let n = self.n_wires;
        match gate {
            Gate::Unitary2 { wires: [a, b], matrix } => {
                check_wire(*a, n)?;
                check_wire(*b, n)?;
                apply_2q(&mut self.amps, n - 1 - a, n - 1 - b, matrix);
            }
            Gate::Unitary1 { wire, matrix } => {
                check_wire(*wire, n)?;
                apply_1q(&mut self.amps, n - 1 - wire, matrix);
            }
            Gate::Reset { wire } => {
                return Err(Error::ResetInUnitaryCircuit { layer: 0, wire: *wire });
            }
        }
        Ok(())
    }
}

fn check_wire(w: usize, n: usize) -> Result<()> {
    if w >= n {
        Err(Error::InvalidWire { wire: w, n_wires: n })
    } else {
        Ok(())
    }
}

/// Applies a 4×4 gate to the bits at positions `pa` (high) and `pb` (low)
/// of every index.
pub(crate) fn apply_2q(amps: &mut [C64], pa: usize, pb: usize, m: &Mat4) {
    let (ma, mb) = (1usize << pa, 1usize << pb);
    let block = 1usize << (pa.max(pb) + 1);
    let kernel = |chunk: &mut [C64]| {
        for base in 0..chunk.len() {
            if base & (ma | mb) != 0 {
                continue;
            }
            let idx = [base, base | mb, base | ma, base | ma | mb];
            let v = [chunk[idx[0]], chunk[idx[1]], chunk[idx[2]], chunk[idx[3]]];
            for (r, &i) in idx.iter().enumerate() {
                chunk[i] = m[r * 4] * v[0] + m[r * 4 + 1] * v[1] + m[r * 4 + 2] * v[2] + m[r * 4 + 3] * v[3];
            }
        }
    };
    if amps.len() >= PAR_THRESHOLD && block < amps.len() {
        amps.par_chunks_mut(block).for_each(kernel);
    } else {
        amps.chunks_mut(block).for_each(kernel);
    }
}

pub(crate) fn apply_1q(amps: &mut [C64], p: usize, m: &Mat2) {
    let mask = 1usize << p;
    let block = mask << 1;
    let kernel = |chunk: &mut [C64]| {
        for base in 0..chunk.len() {
            if base & mask != 0 {
                continue;
            }
            let (x, y) = (chunk[base], chunk[base | mask]);
            chunk[base] = m[0] * x + m[1] * y;
            chunk[base | mask] = m[2] * x + m[3] * y;
        }
    };
    if amps.len() >= PAR_THRESHOLD && block < amps.len() {
        amps.par_chunks_mut(block).for_each(kernel);
    } else {
        amps.chunks_mut(block).for_each(kernel);
    }
}

fn conj4(m: &Mat4) -> Mat4 {
    let mut c = *m;
    c.iter_mut().for_each(|z| *z = z.conj());
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_wires: usize,
    /// Row-major `2^n × 2^n`.
    matrix: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_matrix(n_wires: usize, matrix: Vec<C64>) -> Result<Self> {
        let dim = 1usize << n_wires;
        if matrix.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: matrix.len() });
        }
        let tr: f64 = (0..dim).map(|i| matrix[i * dim + i].re).sum();
        if (tr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(tr));
        }
        Ok(DensityMatrix { n_wires, matrix })
    }

    pub fn maximally_mixed(n_wires: usize) -> Self {
        let dim = 1usize << n_wires;
        let mut m = linalg::identity(dim);
        m.iter_mut().for_each(|z| *z /= dim as f64);
        DensityMatrix { n_wires, matrix: m }
    }

    pub fn n_wires(&self) -> usize {
        self.n_wires
    }

    pub fn dim(&self) -> usize {
        1 << self.n_wires
    }

    pub fn matrix(&self) -> &[C64] {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        let dim = self.dim();
        (0..dim).map(|i| self.matrix[i * dim + i].re).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = linalg::eigh(&self.matrix, self.dim());
        vals.into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let (da, db) = (self.dim(), other.dim());
        let d = da * db;
        let mut m = vec![ZERO; d * d];
        for i in 0..da {
            for j in 0..da {
                let a = self.matrix[i * da + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..db {
                    for l in 0..db {
                        m[(i * db + k) * d + j * db + l] = a * other.matrix[k * db + l];
                    }
                }
            }
        }
        DensityMatrix { n_wires: self.n_wires + other.n_wires, matrix: m }
    }

    /// The trace-one state with the same eigenvectors whose spectrum is the
    /// Euclidean projection of this matrix's spectrum onto the simplex.
    pub fn project_physical(&self) -> DensityMatrix {
        let dim = self.dim();
        let (vals, vecs) = linalg::eigh(&self.matrix, dim);
        let p = linalg::project_to_simplex(&vals);
        let mut m = vec![ZERO; dim * dim];
        for (k, &w) in p.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for i in 0..dim {
                let vik = vecs[i * dim + k] * w;
                for j in 0..dim {
                    m[i * dim + j] += vik * vecs[j * dim + k].conj();
                }
            }
        }
        DensityMatrix { n_wires: self.n_wires, matrix: m }
    }

    /// `ρ → U ρ U†`, treating `ρ` as a vector on `2n` wires: row bits are
    /// acted on by `U`, column bits by `Ū`.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        let n = self.n_wires;
        match gate {
            Gate::Unitary2 { wires: [a, b], matrix } => {
                check_wire(*a, n)?;
                check_wire(*b, n)?;
                let (ra, rb) = (2 * n - 1 - a, 2 * n - 1 - b);
                apply_2q(&mut self.matrix, ra, rb, matrix);
                apply_2q(&mut self.matrix, ra - n, rb - n, &conj4(matrix));
            }
            Gate::Unitary1 { wire, matrix } => {
                check_wire(*wire, n)?;
                let r = 2 * n - 1 - wire;
                apply_1q(&mut self.matrix, r, matrix);
                let c = [matrix[0].conj(), matrix[1].conj(), matrix[2].conj(), matrix[3].conj()];
                apply_1q(&mut self.matrix, r - n, &c);
            }
            Gate::Reset { wire } => {
                check_wire(*wire, n)?;
                self.reset(*wire);
            }
        }
        Ok(())
    }

    /// Traces out `wire` and replaces it with `|0⟩⟨0|`.
    fn reset(&mut self, wire: usize) {
        let dim = self.dim();
        let bit = 1usize << (self.n_wires - 1 - wire);
        let src = &self.matrix;
        let mut out = vec![ZERO; dim * dim];
        out.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
            if i & bit != 0 {
                return;
            }
            for j in (0..dim).filter(|j| j & bit == 0) {
                row[j] = src[i * dim + j] + src[(i | bit) * dim + (j | bit)];
            }
        });
        self.matrix = out;
    }
}

/// Runs a reset-free circuit on a pure state.
pub fn run_statevector(circuit: &Circuit, input: &StateVector, limits: &SimLimits) -> Result<StateVector> {
    circuit.require_unitary()?;
    if circuit.n_wires() > limits.max_pure_wires {
        return Err(Error::WireCapExceeded { what: "statevector", got: circuit.n_wires(), cap: limits.max_pure_wires });
    }
    if input.n_wires != circuit.n_wires() {
        return Err(Error::DimensionMismatch { expected: circuit.n_wires(), got: input.n_wires });
    }
    let mut s = input.clone();
    for g in circuit.layers().iter().flatten() {
        s.apply_gate(g)?;
    }
    Ok(s)
}

/// `circuit |0…0⟩`.
pub fn prepare(circuit: &Circuit, limits: &SimLimits) -> Result<StateVector> {
    run_statevector(circuit, &StateVector::zero(circuit.n_wires()), limits)
}

/// Runs a circuit, resets included, on a density matrix.
pub fn run_channel(circuit: &Circuit, input: &DensityMatrix, limits: &SimLimits) -> Result<DensityMatrix> {
    if circuit.n_wires() > limits.max_dense_wires {
        return Err(Error::WireCapExceeded { what: "density matrix", got: circuit.n_wires(), cap: limits.max_dense_wires });
    }
    if input.n_wires != circuit.n_wires() {
        return Err(Error::DimensionMismatch { expected: circuit.n_wires(), got: input.n_wires });
    }
    let mut rho = input.clone();
    for g in circuit.layers().iter().flatten() {
        rho.apply_gate(g)?;
    }
    Ok(rho)
}

fn check_keep(keep: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut k = keep.to_vec();
    k.sort_unstable();
    k.dedup();
    if k.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if let Some(&w) = k.iter().find(|&&w| w >= n) {
        return Err(Error::InvalidWire { wire: w, n_wires: n });
    }
    Ok(k)
}

/// Splits each basis index into (kept index, environment index), kept
/// wires in ascending order as the high bits.
fn split_tables(n: usize, keep: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let env: Vec<usize> = (0..n).filter(|w| !keep.contains(w)).collect();
    let bit_of = |w: usize| n - 1 - w;
    let dim = 1usize << n;
    let mut ki = vec![0usize; dim];
    let mut ei = vec![0usize; dim];
    for x in 0..dim {
        let mut k = 0;
        for &w in keep {
            k = (k << 1) | (x >> bit_of(w) & 1);
        }
        let mut e = 0;
        for &w in &env {
            e = (e << 1) | (x >> bit_of(w) & 1);
        }
        ki[x] = k;
        ei[x] = e;
    }
    (ki, ei)
}

impl StateVector {
    /// Reduced density matrix on `keep`, ordered by ascending wire.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let keep = check_keep(keep, self.n_wires)?;
        let nk = keep.len();
        let (dk, de) = (1usize << nk, 1usize << (self.n_wires - nk));
        let (ki, ei) = split_tables(self.n_wires, &keep);
        // Ψ[k][e]
        let mut psi = vec![ZERO; dk * de];
        for (x, a) in self.amps.iter().enumerate() {
            psi[ki[x] * de + ei[x]] = *a;
        }
        let mut m = vec![ZERO; dk * dk];
        m.par_chunks_mut(dk).enumerate().for_each(|(i, row)| {
            let ri = &psi[i * de..(i + 1) * de];
            for (j, out) in row.iter_mut().enumerate() {
                let rj = &psi[j * de..(j + 1) * de];
                *out = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
            }
        });
        Ok(DensityMatrix { n_wires: nk, matrix: m })
    }
}

impl DensityMatrix {
    /// Reduced density matrix on `keep`, ordered by ascending wire.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let keep = check_keep(keep, self.n_wires)?;
        let nk = keep.len();
        let dk = 1usize << nk;
        let dim = self.dim();
        let (ki, ei) = split_tables(self.n_wires, &keep);
        let mut m = vec![ZERO; dk * dk];
        for x in 0..dim {
            for y in 0..dim {
                if ei[x] == ei[y] {
                    m[ki[x] * dk + ki[y]] += self.matrix[x * dim + y];
                }
            }
        }
        Ok(DensityMatrix { n_wires: nk, matrix: m })
    }
}

/// `‖ρ − σ‖₁`, the sum of absolute eigenvalues of the difference.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.n_wires != sigma.n_wires {
        return Err(Error::DimensionMismatch { expected: rho.n_wires, got: sigma.n_wires });
    }
    let diff: Vec<C64> = rho.matrix.iter().zip(&sigma.matrix).map(|(a, b)| a - b).collect();
    Ok(linalg::hermitian_trace_norm(&diff, rho.dim()))
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    if rho.n_wires != psi.n_wires {
        return Err(Error::DimensionMismatch { expected: rho.n_wires, got: psi.n_wires });
    }
    let dim = rho.dim();
    let v: C64 = (0..dim)
        .into_par_iter()
        .map(|i| {
            let row = &rho.matrix[i * dim..(i + 1) * dim];
            let s: C64 = row.iter().zip(&psi.amps).map(|(r, a)| r * a).sum();
            psi.amps[i].conj() * s
        })
        .sum();
    Ok(v.re)
}

/// A pure state on `n + m` wires whose marginal on the first `n` wires is
/// `rho`. The `m` environment wires are the low bits.
pub fn purify(rho: &DensityMatrix, tol: f64) -> StateVector {
    let dim = rho.dim();
    let (l, rank) = linalg::pivoted_cholesky(&rho.matrix, dim, tol);
    let rank = rank.max(1);
    let m = rank.next_power_of_two().trailing_zeros() as usize;
    let de = 1usize << m;
    let mut amps = vec![ZERO; dim * de];
    let stride = l.len() / dim;
    for i in 0..dim {
        for k in 0..stride {
            amps[i * de + k] = l[i * stride + k];
        }
    }
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        amps.iter_mut().for_each(|z| *z /= norm);
    } else {
        amps[0] = ONE;
    }
    StateVector { n_wires: rho.n_wires + m, amps }
}
