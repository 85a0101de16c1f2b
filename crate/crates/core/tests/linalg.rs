use rand::Rng;
use rand_distr::StandardNormal;

use shallow_learner::linalg::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn haar_is_unitary() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for dim in [2, 4, 8] {
        let u = haar_unitary(dim, &mut rng);
        assert!(unitarity_deviation(&u, dim) < 1e-12);
    }
}

#[test]
fn maximizing_unitary_attains_nuclear_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n: Vec<C64> = (0..16)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let u = maximizing_unitary(&n, 4);
    let tr: C64 = (0..4).map(|i| matmul(&u, &n, 4)[i * 5]).sum();
    let nuclear: f64 = to_dmatrix(&n, 4).singular_values().iter().sum();
    assert!((tr.re - nuclear).abs() < 1e-10 && tr.im.abs() < 1e-10);
}

#[test]
fn expi_is_unitary_and_small_for_small_t() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = random_hermitian(4, &mut rng);
    let u = expi_hermitian(&h, 4, 1e-3);
    assert!(unitarity_deviation(&u, 4) < 1e-12);
    assert!(frobenius_distance(&u, &identity(4)) < 2e-3);
}

#[test]
fn simplex_projection() {
    let p = project_to_simplex(&[0.7, 0.5, -0.1]);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(p.iter().all(|&x| x >= 0.0));
    assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] - 0.4).abs() < 1e-12);
}

#[test]
fn cholesky_reconstructs_low_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = haar_unitary(8, &mut rng);
    // rank-2 PSD matrix from two columns of a unitary
    let mut a = vec![ZERO; 64];
    for (k, w) in [(0usize, 0.75), (1, 0.25)] {
        for i in 0..8 {
            for j in 0..8 {
                a[i * 8 + j] += u[i * 8 + k] * u[j * 8 + k].conj() * w;
            }
        }
    }
    let (l, rank) = pivoted_cholesky(&a, 8, 1e-13);
    assert_eq!(rank, 2);
    let mut back = vec![ZERO; 64];
    for i in 0..8 {
        for j in 0..8 {
            for k in 0..rank {
                back[i * 8 + j] += l[i * rank + k] * l[j * rank + k].conj();
            }
        }
    }
    assert!(frobenius_distance(&a, &back) < 1e-12);
}
