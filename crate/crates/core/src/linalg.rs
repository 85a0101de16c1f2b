//! Small dense complex linear algebra used across the crate. Large
//! decompositions go through `nalgebra`; gate-sized helpers are hand-rolled.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;

/// Row-major 4×4 matrix on `|q_a q_b⟩`, first wire as the high bit.
pub type Mat4 = [C64; 16];
/// Row-major 2×2 matrix.
pub type Mat2 = [C64; 4];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn identity(dim: usize) -> Vec<C64> {
    let mut m = vec![ZERO; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = ONE;
    }
    m
}

pub fn identity4() -> Mat4 {
    let mut m = [ZERO; 16];
    for i in 0..4 {
        m[i * 5] = ONE;
    }
    m
}

pub fn matmul(a: &[C64], b: &[C64], dim: usize) -> Vec<C64> {
    let mut out = vec![ZERO; dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik == ZERO {
                continue;
            }
            for j in 0..dim {
                out[i * dim + j] += aik * b[k * dim + j];
            }
        }
    }
    out
}

pub fn dagger(a: &[C64], dim: usize) -> Vec<C64> {
    let mut out = vec![ZERO; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            out[j * dim + i] = a[i * dim + j].conj();
        }
    }
    out
}

pub fn to_mat4(v: &[C64]) -> Mat4 {
    let mut m = [ZERO; 16];
    m.copy_from_slice(&v[..16]);
    m
}

/// Frobenius norm of `U†U − I`.
pub fn unitarity_deviation(u: &[C64], dim: usize) -> f64 {
    let p = matmul(&dagger(u, dim), u, dim);
    let mut acc = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { ONE } else { ZERO };
            acc += (p[i * dim + j] - target).norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn frobenius_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_dmatrix(a: &[C64], dim: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(dim, dim, a)
}

pub fn from_dmatrix(m: &DMatrix<C64>) -> Vec<C64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix. Returns eigenvalues and the
/// eigenvectors as columns of a row-major matrix.
pub fn eigh(a: &[C64], dim: usize) -> (Vec<f64>, Vec<C64>) {
    let mut m = to_dmatrix(a, dim);
    // Symmetrize to wash out rounding noise.
    let mt = m.adjoint();
    m = (m + mt) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(m);
    (eig.eigenvalues.iter().copied().collect(), from_dmatrix(&eig.eigenvectors))
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn hermitian_trace_norm(a: &[C64], dim: usize) -> f64 {
    let m = to_dmatrix(a, dim);
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    m.symmetric_eigenvalues().iter().map(|v| v.abs()).sum()
}

/// Haar-random unitary via QR of a complex Ginibre matrix with the phase fix
/// of Mezzadri.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let mut g = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            g[(i, j)] = C64::new(re, im);
        }
    }
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    from_dmatrix(&q)
}

/// Random Hermitian matrix with unit Frobenius norm.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let mut h = vec![ZERO; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let re: f64 = rng.sample(StandardNormal);
            if i == j {
                h[i * dim + i] = C64::new(re, 0.0);
            } else {
                let im: f64 = rng.sample(StandardNormal);
                h[i * dim + j] = C64::new(re, im);
                h[j * dim + i] = C64::new(re, -im);
            }
        }
    }
    let norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    h.iter_mut().for_each(|z| *z /= norm);
    h
}

/// `exp(i t H)` for Hermitian `H`.
pub fn expi_hermitian(h: &[C64], dim: usize, t: f64) -> Vec<C64> {
    let (vals, vecs) = eigh(h, dim);
    let mut out = vec![ZERO; dim * dim];
    for (k, &lam) in vals.iter().enumerate() {
        let ph = C64::from_polar(1.0, t * lam);
        for i in 0..dim {
            let vik = vecs[i * dim + k] * ph;
            for j in 0..dim {
                out[i * dim + j] += vik * vecs[j * dim + k].conj();
            }
        }
    }
    out
}

/// The unitary `U` maximizing `Re Tr(U N)`: with `N = X Σ Y†`, `U = Y X†`.
pub fn maximizing_unitary(n: &[C64], dim: usize) -> Vec<C64> {
    let svd = to_dmatrix(n, dim).svd(true, true);
    let x = svd.u.expect("svd u");
    let y = svd.v_t.expect("svd v_t").adjoint();
    from_dmatrix(&(y * x.adjoint()))
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Pivoted Cholesky factor `L` (dim × rank, row-major) with `L L† ≈ A` for a
/// positive semidefinite `A`. Columns whose pivot falls below `tol` are
/// dropped.
pub fn pivoted_cholesky(a: &[C64], dim: usize, tol: f64) -> (Vec<C64>, usize) {
    let mut diag: Vec<f64> = (0..dim).map(|i| a[i * dim + i].re).collect();
    let mut cols: Vec<Vec<C64>> = Vec::new();
    let mut used = vec![false; dim];
    loop {
        let (p, &dp) = match diag
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap_or(std::cmp::Ordering::Equal))
        {
            Some(x) => x,
            None => break,
        };
        if dp <= tol {
            break;
        }
        used[p] = true;
        let s = dp.sqrt();
        let mut col = vec![ZERO; dim];
        for i in 0..dim {
            let mut v = a[i * dim + p];
            for c in &cols {
                v -= c[i] * c[p].conj();
            }
            col[i] = v / s;
        }
        for i in 0..dim {
            diag[i] -= col[i].norm_sqr();
        }
        cols.push(col);
    }
    let rank = cols.len();
    let mut l = vec![ZERO; dim * rank];
    for (k, c) in cols.iter().enumerate() {
        for i in 0..dim {
            l[i * rank + k] = c[i];
        }
    }
    (l, rank)
}
