//! Randomized single-qubit Pauli measurements and the local inverse-channel
//! estimator of reduced density matrices.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{check_schema, SCHEMA_VERSION};
use crate::linalg::{C64, ONE, ZERO};
use crate::rng::derived_rng;
use crate::simulator::{DensityMatrix, SimLimits, StateVector};

const MAGIC: &[u8; 4] = b"SHDW";
const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Pauli {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Pauli {
    fn from_code(c: u8) -> Result<Pauli> {
        match c {
            0 => Ok(Pauli::X),
            1 => Ok(Pauli::Y),
            2 => Ok(Pauli::Z),
            _ => Err(Error::BadShadowData(format!("basis code {c}"))),
        }
    }

    fn letter(self) -> char {
        ['X', 'Y', 'Z'][self as usize]
    }

    /// Rotation taking the basis eigenstates to `|0⟩`, `|1⟩`.
    fn to_computational(self) -> [C64; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            // H
            Pauli::X => [C64::new(h, 0.0), C64::new(h, 0.0), C64::new(h, 0.0), C64::new(-h, 0.0)],
            // H S†
            Pauli::Y => [C64::new(h, 0.0), C64::new(0.0, -h), C64::new(h, 0.0), C64::new(0.0, h)],
            Pauli::Z => [ONE, ZERO, ZERO, ONE],
        }
    }

    /// `3|s⟩⟨s| − I` for outcome `s` (false = +1 eigenvalue).
    fn inverse_snapshot(self, minus: bool) -> [C64; 4] {
        let s = if minus { -1.5 } else { 1.5 };
        match self {
            Pauli::X => [C64::new(0.5, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(0.5, 0.0)],
            Pauli::Y => [C64::new(0.5, 0.0), C64::new(0.0, -s), C64::new(0.0, s), C64::new(0.5, 0.0)],
            Pauli::Z => [C64::new(0.5 + s, 0.0), ZERO, ZERO, C64::new(0.5 - s, 0.0)],
        }
    }
}

/// `m` snapshots on `n` wires. Snapshot `i` occupies `bases[i*n..(i+1)*n]`
/// and the matching outcome slice; an outcome of `true` means eigenvalue −1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShadowDataset {
    n: usize,
    seed: u64,
    bases: Vec<Pauli>,
    outcomes: Vec<bool>,
}

impl ShadowDataset {
    pub fn n_wires(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.bases.len() / self.n.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn snapshot(&self, i: usize) -> (&[Pauli], &[bool]) {
        let r = i * self.n..(i + 1) * self.n;
        (&self.bases[r.clone()], &self.outcomes[r])
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[FORMAT_VERSION])?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        let (bb, ob) = row_bytes(self.n);
        for i in 0..self.len() {
            let (bases, outs) = self.snapshot(i);
            let mut row = vec![0u8; bb + ob];
            for (j, b) in bases.iter().enumerate() {
                row[j / 4] |= (*b as u8) << (2 * (j % 4));
            }
            for (j, &o) in outs.iter().enumerate() {
                if o {
                    row[bb + j / 8] |= 1 << (j % 8);
                }
            }
            w.write_all(&row)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 25];
        r.read_exact(&mut head).map_err(|_| Error::BadShadowData("truncated header".into()))?;
        if &head[..4] != MAGIC {
            return Err(Error::BadShadowData("bad magic".into()));
        }
        if head[4] != FORMAT_VERSION {
            return Err(Error::BadShadowData(format!("unsupported version {}", head[4])));
        }
        let n = u32::from_le_bytes(head[5..9].try_into().unwrap()) as usize;
        let m = u64::from_le_bytes(head[9..17].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(head[17..25].try_into().unwrap());
        let (bb, ob) = row_bytes(n);
        let mut bases = Vec::with_capacity(n * m);
        let mut outcomes = Vec::with_capacity(n * m);
        let mut row = vec![0u8; bb + ob];
        for _ in 0..m {
            r.read_exact(&mut row).map_err(|_| Error::BadShadowData("truncated rows".into()))?;
            for j in 0..n {
                bases.push(Pauli::from_code(row[j / 4] >> (2 * (j % 4)) & 3)?);
                outcomes.push(row[bb + j / 8] >> (j % 8) & 1 == 1);
            }
        }
        Ok(ShadowDataset { n, seed, bases, outcomes })
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(f)
    }

    pub fn load_binary(path: &Path) -> Result<Self> {
        Self::read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn row_bytes(n: usize) -> (usize, usize) {
    ((2 * n).div_ceil(8), n.div_ceil(8))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShadowJson {
    schema: String,
    n: usize,
    m: usize,
    seed: u64,
    /// One string of `X`/`Y`/`Z` per snapshot.
    bases: Vec<String>,
    /// One string of `+`/`-` per snapshot.
    outcomes: Vec<String>,
}

impl Serialize for ShadowDataset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = 0..self.len();
        ShadowJson {
            schema: SCHEMA_VERSION.into(),
            n: self.n,
            m: self.len(),
            seed: self.seed,
            bases: rows.clone().map(|i| self.snapshot(i).0.iter().map(|b| b.letter()).collect()).collect(),
            outcomes: rows
                .map(|i| self.snapshot(i).1.iter().map(|&o| if o { '-' } else { '+' }).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ShadowDataset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = ShadowJson::deserialize(d)?;
        check_schema(&j.schema).map_err(D::Error::custom)?;
        if j.bases.len() != j.m || j.outcomes.len() != j.m {
            return Err(D::Error::custom("snapshot count does not match m"));
        }
        let mut bases = Vec::with_capacity(j.n * j.m);
        let mut outcomes = Vec::with_capacity(j.n * j.m);
        for (b, o) in j.bases.iter().zip(&j.outcomes) {
            if b.chars().count() != j.n || o.chars().count() != j.n {
                return Err(D::Error::custom("snapshot width does not match n"));
            }
            for c in b.chars() {
                bases.push(match c {
                    'X' => Pauli::X,
                    'Y' => Pauli::Y,
                    'Z' => Pauli::Z,
                    _ => return Err(D::Error::custom(format!("bad basis letter {c:?}"))),
                });
            }
            for c in o.chars() {
                outcomes.push(match c {
                    '+' => false,
                    '-' => true,
                    _ => return Err(D::Error::custom(format!("bad outcome {c:?}"))),
                });
            }
        }
        Ok(ShadowDataset { n: j.n, seed: j.seed, bases, outcomes })
    }
}

fn draw_bases(n: usize, rng: &mut impl Rng) -> Vec<Pauli> {
    (0..n).map(|_| [Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..3)]).collect()
}

/// Samples `m` snapshots of `psi` by exact Born-rule simulation.
///
/// Snapshot `i` draws its bases and then its outcome from the stream
/// `(seed, i)`. Snapshots sharing a basis string share one rotated state, so
/// the cost is one statevector pass per distinct string.
pub fn sample_shadows(psi: &StateVector, m: usize, seed: u64) -> Result<ShadowDataset> {
    if m == 0 {
        return Err(Error::InvalidConfig("shadow sample count must be at least 1".into()));
    }
    let n = psi.n_wires();
    let mut groups: BTreeMap<Vec<Pauli>, Vec<usize>> = BTreeMap::new();
    for i in 0..m {
        let mut rng = derived_rng(seed, i as u64);
        groups.entry(draw_bases(n, &mut rng)).or_default().push(i);
    }
    let sampled: Vec<(Vec<Pauli>, Vec<(usize, usize)>)> = groups
        .into_par_iter()
        .map(|(bases, idx)| {
            let mut rotated = psi.clone();
            for (w, b) in bases.iter().enumerate() {
                if *b != Pauli::Z {
                    let g = crate::circuit::Gate::Unitary1 { wire: w, matrix: b.to_computational() };
                    rotated.apply_gate(&g).expect("wire in range");
                }
            }
            let mut cdf = Vec::with_capacity(rotated.amplitudes().len());
            let mut acc = 0.0;
            for a in rotated.amplitudes() {
                acc += a.norm_sqr();
                cdf.push(acc);
            }
            let outs = idx
                .iter()
                .map(|&i| {
                    let mut rng = derived_rng(seed, i as u64);
                    draw_bases(n, &mut rng);
                    let u: f64 = rng.gen::<f64>() * acc;
                    let x = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                    (i, x)
                })
                .collect();
            (bases, outs)
        })
        .collect();
    let mut bases = vec![Pauli::Z; n * m];
    let mut outcomes = vec![false; n * m];
    for (b, outs) in sampled {
        for (i, x) in outs {
            bases[i * n..(i + 1) * n].copy_from_slice(&b);
            for w in 0..n {
                outcomes[i * n + w] = x >> (n - 1 - w) & 1 == 1;
            }
        }
    }
    Ok(ShadowDataset { n, seed, bases, outcomes })
}

/// Mean of `⊗_w (3|s_w⟩⟨s_w| − I)` over snapshots restricted to `wires`,
/// projected onto the nearest density matrix.
pub fn estimate_rdm(data: &ShadowDataset, wires: &[usize], limits: &SimLimits) -> Result<DensityMatrix> {
    let mut keep = wires.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if keep.len() > limits.max_rdm_wires {
        return Err(Error::RegionTooLarge { got: keep.len(), cap: limits.max_rdm_wires });
    }
    if let Some(&w) = keep.iter().find(|&&w| w >= data.n) {
        return Err(Error::InvalidWire { wire: w, n_wires: data.n });
    }
    if data.is_empty() {
        return Err(Error::BadShadowData("no snapshots".into()));
    }
    // Local outcome codes 0..6 per wire: basis * 2 + outcome.
    let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
    for i in 0..data.len() {
        let (b, o) = data.snapshot(i);
        let key: Vec<u8> = keep.iter().map(|&w| b[w] as u8 * 2 + o[w] as u8).collect();
        *counts.entry(key).or_default() += 1;
    }
    let mut keys: Vec<_> = counts.into_iter().collect();
    keys.sort_unstable();
    let k = keep.len();
    let dim = 1usize << k;
    let total = data.len() as f64;
    let mut acc = vec![ZERO; dim * dim];
    for (key, count) in keys {
        let mut term = vec![ONE];
        let mut d = 1;
        for code in key {
            let p = Pauli::from_code(code / 2)?.inverse_snapshot(code % 2 == 1);
            let mut next = vec![ZERO; 4 * d * d];
            for i in 0..d {
                for j in 0..d {
                    let t = term[i * d + j];
                    for a in 0..2 {
                        for b in 0..2 {
                            next[(2 * i + a) * 2 * d + 2 * j + b] = t * p[a * 2 + b];
                        }
                    }
                }
            }
            term = next;
            d *= 2;
        }
        let w = count as f64 / total;
        for (x, t) in acc.iter_mut().zip(&term) {
            *x += t * w;
        }
    }
    let raw = DensityMatrix::from_matrix(k, acc)?;
    Ok(raw.project_physical())
}
