//! The two-qubit Clifford group modulo global phase (11,520 elements),
//! generated by breadth-first closure of `{H⊗I, I⊗H, S⊗I, I⊗S, CNOT}`.
//!
//! Local-inversion search only ever sees a gate `g` through the projector
//! `g† P g`, where `P` is `|00⟩⟨00|` (both wires must be zeroed) or
//! `|0⟩⟨0| ⊗ I` (only the first wire must be zeroed). The classes below group
//! the group elements by that projector: 60 two-qubit stabilizer states and
//! 30 signed Paulis respectively.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::OnceLock;

use rand::Rng;

use crate::linalg::{dagger, identity4, matmul, to_mat4, Mat2, Mat4, C64, ONE, ZERO};

pub const CLIFFORD2_ORDER: usize = 11_520;

/// A projector class together with the first group element realizing it.
#[derive(Debug, Clone)]
pub struct ProjectorClass {
    pub representative: Mat4,
    pub projector: Mat4,
}

pub struct CliffordTables {
    pub elements: Vec<Mat4>,
    /// Classes of `g†|00⟩⟨00|g`.
    pub both_zero: Vec<ProjectorClass>,
    /// Classes of `g†(|0⟩⟨0| ⊗ I)g`.
    pub first_zero: Vec<ProjectorClass>,
}

fn kron2(a: &[C64; 4], b: &[C64; 4]) -> Mat4 {
    let mut m = [ZERO; 16];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m[(2 * i + k) * 4 + 2 * j + l] = a[i * 2 + j] * b[k * 2 + l];
                }
            }
        }
    }
    m
}

fn generators() -> Vec<Mat4> {
    let h = [
        C64::new(FRAC_1_SQRT_2, 0.0),
        C64::new(FRAC_1_SQRT_2, 0.0),
        C64::new(FRAC_1_SQRT_2, 0.0),
        C64::new(-FRAC_1_SQRT_2, 0.0),
    ];
    let s = [ONE, ZERO, ZERO, C64::new(0.0, 1.0)];
    let id = [ONE, ZERO, ZERO, ONE];
    let mut cnot = [ZERO; 16];
    for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cnot[r * 4 + c] = ONE;
    }
    vec![kron2(&h, &id), kron2(&id, &h), kron2(&s, &id), kron2(&id, &s), cnot]
}

/// Rotates the global phase so the first non-negligible entry is real
/// positive.
fn normalize_phase(m: &mut [C64]) {
    if let Some(z) = m.iter().copied().find(|z| z.norm() > 1e-9) {
        let ph = z.conj() / z.norm();
        m.iter_mut().for_each(|x| *x *= ph);
    }
}

fn key(m: &[C64]) -> Vec<i64> {
    m.iter()
        .flat_map(|z| [(z.re * 1e6).round() as i64, (z.im * 1e6).round() as i64])
        .collect()
}

fn build() -> CliffordTables {
    let gens = generators();
    let mut seen = HashMap::new();
    let mut elements = Vec::with_capacity(CLIFFORD2_ORDER);
    let mut queue = VecDeque::new();
    let id = identity4();
    seen.insert(key(&id), 0usize);
    elements.push(id);
    queue.push_back(0usize);
    while let Some(i) = queue.pop_front() {
        for g in &gens {
            let mut next = to_mat4(&matmul(g, &elements[i], 4));
            normalize_phase(&mut next);
            let k = key(&next);
            if !seen.contains_key(&k) {
                seen.insert(k, elements.len());
                queue.push_back(elements.len());
                elements.push(next);
            }
        }
    }

    let mut p_both = [ZERO; 16];
    p_both[0] = ONE;
    let mut p_first = [ZERO; 16];
    p_first[0] = ONE;
    p_first[5] = ONE;

    let classes = |p: &Mat4| {
        let mut index = HashMap::new();
        let mut out = Vec::new();
        for g in &elements {
            let q = to_mat4(&matmul(&dagger(g, 4), &matmul(p, g, 4), 4));
            let k = key(&q);
            if !index.contains_key(&k) {
                index.insert(k, out.len());
                out.push(ProjectorClass { representative: *g, projector: q });
            }
        }
        out
    };
    let both_zero = classes(&p_both);
    let first_zero = classes(&p_first);
    CliffordTables { elements, both_zero, first_zero }
}

pub fn tables() -> &'static CliffordTables {
    static TABLES: OnceLock<CliffordTables> = OnceLock::new();
    TABLES.get_or_init(build)
}

/// A uniformly random two-qubit Clifford.
pub fn random_clifford<R: Rng + ?Sized>(rng: &mut R) -> Mat4 {
    let t = tables();
    t.elements[rng.gen_range(0..t.elements.len())]
}

/// The `index`-th of the 24 single-qubit Cliffords up to phase, in
/// breadth-first order over words in `H` and `S`.
pub fn single_qubit(index: usize) -> Mat2 {
    assert!(index < 24, "there are 24 single-qubit Cliffords");
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let h: [C64; 4] = [C64::new(r, 0.0), C64::new(r, 0.0), C64::new(r, 0.0), C64::new(-r, 0.0)];
    let s: [C64; 4] = [ONE, ZERO, ZERO, C64::new(0.0, 1.0)];
    let mul = |a: &[C64; 4], b: &[C64; 4]| -> [C64; 4] {
        [a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]]
    };
    let same_up_to_phase = |a: &[C64; 4], b: &[C64; 4]| {
        let t: C64 = (0..4).map(|i| a[i].conj() * b[i]).sum();
        (t.norm() - 2.0).abs() < 1e-9
    };
    // breadth-first closure of {H, S}
    let mut group = vec![[ONE, ZERO, ZERO, ONE]];
    let mut i = 0;
    while i < group.len() {
        for g in [&h, &s] {
            let m = mul(&group[i], g);
            if !group.iter().any(|x| same_up_to_phase(x, &m)) {
                group.push(m);
            }
        }
        i += 1;
    }
    debug_assert_eq!(group.len(), 24);
    group[index]
}
